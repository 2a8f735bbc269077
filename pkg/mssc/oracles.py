"""
Exact optimum oracles for small MSSC instances.

Both oracles run a memoized recursion over states (feedback node, queried boxes).
The number of states is bounded by |feedback tree|·2^n_boxes; instances above the
memo limit are refused with StateSpaceTooLarge instead of running out of memory.
"""
import logging
import os
from dataclasses import replace
from fractions import Fraction

from model.tree import KIND_SUPERMARTINGALE, InstanceTree
from mssc.instance import MsscInstance, flat_feedback, mask_members

logger = logging.getLogger(__name__)

DEFAULT_MEMO_LIMIT = 20_000_000


class StateSpaceTooLarge(RuntimeError):
    def __init__(self, bound, limit):
        super().__init__(
            f"Oracle state space of up to {bound} entries exceeds the memo limit {limit} "
            f"(raise STOPWISE_MEMO_LIMIT to allow it)")
        self.bound = bound
        self.limit = limit


def memo_limit():
    """STOPWISE_MEMO_LIMIT from the environment, default 2·10⁷."""
    return int(os.getenv("STOPWISE_MEMO_LIMIT", str(DEFAULT_MEMO_LIMIT)))


def state_space_bound(inst):
    return len(inst.feedback) * 2**inst.n_boxes


def check_state_space(inst, limit=None):
    limit = memo_limit() if limit is None else limit
    bound = state_space_bound(inst)
    if bound > limit:
        logger.warning(f"Refusing oracle: {bound} states > limit {limit}")
        raise StateSpaceTooLarge(bound, limit)
    return bound


def _useful_boxes(inst, queried, uncovered):
    """Unqueried boxes covering some uncovered scenario; others never help."""
    return [
        b for b in range(inst.n_boxes)
        if not queried >> b & 1 and inst.box_masks[b] & uncovered
    ]


def opt_time_dependent(inst, *, limit=None):
    """
    Best expected cover time over all assignments of a box to each feedback node.

    cost(v, Q) = mass(U) + min_b Σ_children cost(u, Q ∪ {b}), U the scenarios of v
    not covered by Q; a leaf is its own single child.
    """
    if not inst.feedback.has_unit_costs:
        raise ValueError("time-dependent oracle needs unit costs; use time_dependent_relaxation")
    check_state_space(inst, limit)
    tree = inst.feedback
    successors = {
        node.id: [child.id for child, _ in tree.children(node.id)] or [node.id]
        for node in tree
    }
    memo = {}

    def cost(v, queried, covered):
        uncovered = inst.node_masks[v] & ~covered
        if not uncovered:
            return Fraction(0)
        key = (v, queried)
        if key in memo:
            return memo[key]
        best = None
        for b in _useful_boxes(inst, queried, uncovered):
            now_queried = queried | 1 << b
            now_covered = covered | inst.box_masks[b]
            total = sum(
                (cost(u, now_queried, now_covered) for u in successors[v]), Fraction(0))
            if best is None or total < best:
                best = total
        memo[key] = inst.mass(uncovered) + best
        return memo[key]

    result = cost(tree.root, 0, 0)
    logger.debug(f"opt_time_dependent = {result} ({len(memo)} memo entries)")
    return result


def opt_buying(inst, *, limit=None):
    """
    Best expected cover time plus feedback spend.

    value(v, Q) = min( min_b [mass(U) + value(v, Q ∪ {b})],
                       mass(U)·c_v + Σ_children value(u, Q) ),
    the second option only when v has a signal for sale.
    """
    check_state_space(inst, limit)
    tree = inst.feedback
    memo = {}

    def value(v, queried, covered):
        uncovered = inst.node_masks[v] & ~covered
        if not uncovered:
            return Fraction(0)
        key = (v, queried)
        if key in memo:
            return memo[key]
        mass = inst.mass(uncovered)
        best = None
        for b in _useful_boxes(inst, queried, uncovered):
            option = mass + value(v, queried | 1 << b, covered | inst.box_masks[b])
            if best is None or option < best:
                best = option
        node = tree.node(v)
        if not node.is_leaf:
            option = mass * node.cost + sum(
                (value(child.id, queried, covered) for child, _ in tree.children(v)), Fraction(0))
            if option < best:
                best = option
        memo[key] = best
        return best

    result = value(tree.root, 0, 0)
    logger.debug(f"opt_buying = {result} ({len(memo)} memo entries)")
    return result


def opt_no_feedback(inst, *, limit=None):
    """Best expected cover time when no signal ever arrives."""
    flat = MsscInstance(inst.n_boxes, inst.scenarios, inst.prior, flat_feedback(inst.n_scenarios))
    return opt_time_dependent(flat, limit=limit)


def posterior_instance(inst, node_id):
    """The scenarios of a feedback node under the prior conditioned on reaching it."""
    members = mask_members(inst.node_masks[node_id])
    total = inst.mass(inst.node_masks[node_id])
    if not members or total == 0:
        raise ValueError(f"Feedback node {node_id} carries no probability mass")
    return MsscInstance(
        inst.n_boxes,
        tuple(inst.scenarios[s] for s in members),
        tuple(inst.prior[s] / total for s in members),
        flat_feedback(len(members)),
    )


def value_tree(inst, *, limit=None):
    """
    Stopping instance for buying signals and then committing to a query order.

    The tree copies the feedback tree with its signal prices; a node's value is the
    best no-feedback cover time under the posterior at that node. Stopping at a node
    after paying i for signals therefore costs i plus that value, and the optimum of
    the tree is the best cost among learners that buy before querying. It is never
    below opt_buying(inst).
    """
    values = {}
    for node in inst.feedback:
        posterior = posterior_instance(inst, node.id)
        values[node.id] = opt_no_feedback(posterior, limit=limit)
    nodes = [replace(node, value=values[node.id]) for node in inst.feedback]
    tree = InstanceTree(nodes, inst.feedback.root, KIND_SUPERMARTINGALE)
    logger.debug(f"value_tree: root value {values[tree.root]} over {len(tree)} nodes")
    return tree
