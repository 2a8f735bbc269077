import logging
import math
from dataclasses import dataclass
from fractions import Fraction

from model.tree import InstanceTree, Node

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class NormalizedTree:
    """
    Unit-cost tree produced by normalize_costs.

    source_of maps every output node to the original node whose payload it carries
    (virtual nodes map to the node they were inserted after); image_of is the
    bijection from original nodes to the non-virtual output nodes.
    """
    tree: InstanceTree
    source_of: dict
    image_of: dict

    def original(self, node_id):
        return self.source_of[node_id]

    def is_virtual(self, node_id):
        return self.tree.node(node_id).virtual


def _check_cost(node):
    cost = node.cost
    if isinstance(cost, bool) or not isinstance(cost, int) or cost < 1:
        raise ValueError(f"Node {node.id}: step cost must be a positive integer, got {cost!r}")


def normalize_costs(cf):
    """
    Replace every purchase of cost c by a chain of c unit purchases.

    The c-1 virtual nodes sit between a node and its children and repeat the node's
    payload (value and scenario set), so nothing new is learned until the full cost
    has been paid. Leaves keep no chain since nothing can be bought there.
    """
    for node in cf:
        _check_cost(node)

    nodes = []
    source_of = {}
    image_of = {}
    next_id = 0

    def new_node(original, children, virtual):
        nonlocal next_id
        node_id = next_id
        next_id += 1
        nodes.append(Node(
            id=node_id,
            value=original.value,
            children=tuple(children),
            cost=1,
            scenarios=original.scenarios,
            virtual=virtual,
        ))
        source_of[node_id] = original.id
        return node_id

    # Build bottom-up so children ids exist before their parents reference them.
    def build(original):
        child_links = [(build(child), p) for child, p in cf.children(original.id)]
        if child_links:
            for _ in range(original.cost - 1):
                virtual_id = new_node(original, child_links, virtual=True)
                child_links = [(virtual_id, Fraction(1))]
        node_id = new_node(original, child_links, virtual=False)
        image_of[original.id] = node_id
        return node_id

    root = build(cf.root_node)
    virtual_count = sum(1 for n in nodes if n.virtual)
    logger.debug(f"normalize_costs: {len(cf)} nodes -> {len(nodes)} ({virtual_count} virtual)")
    return NormalizedTree(InstanceTree(nodes, root, cf.kind), source_of, image_of)


def _as_rational(value, what):
    if isinstance(value, bool) or isinstance(value, float):
        raise ValueError(f"{what} must be an exact rational, got {value!r}")
    try:
        return Fraction(value)
    except (TypeError, ValueError) as e:
        raise ValueError(f"{what} must be an exact rational, got {value!r}") from e


@dataclass(frozen=True)
class DeterministicSignaling:
    """Expanded scenario copies under a uniform prior with a deterministic scheme."""
    copies: tuple  # copies[k] = original scenario of copy k
    signals: tuple  # signals[k] = signal emitted for copy k

    @property
    def prior(self):
        return Fraction(1, len(self.copies))

    def scheme(self, copy_index):
        return self.signals[copy_index]

    def posterior(self, signal):
        """Posterior over ORIGINAL scenarios given the signal."""
        matching = [s for s, y in zip(self.copies, self.signals) if y == signal]
        if not matching:
            return {}
        counts = {}
        for s in matching:
            counts[s] = counts.get(s, 0) + 1
        return {s: Fraction(c, len(matching)) for s, c in counts.items()}


def determinize_signaling(prior, scheme):
    """
    Turn a randomized signaling scheme into a deterministic one over scenario copies.

    Args:
        prior: {scenario: rational mass}, summing to 1.
        scheme: {scenario: {signal: rational probability}}, each row summing to 1.

    Returns:
        DeterministicSignaling with the least number of copies N such that every
        N·prior(s)·Pr(signal | s) is an integer.
    """
    prior = {s: _as_rational(m, f"prior[{s!r}]") for s, m in prior.items()}
    if sum(prior.values()) != 1 or any(m < 0 for m in prior.values()):
        raise ValueError("prior must be nonnegative and sum to 1")

    masses = []
    for s in prior:
        if s not in scheme:
            raise ValueError(f"scheme has no outcome table for scenario {s!r}")
        row = {y: _as_rational(p, f"scheme[{s!r}][{y!r}]") for y, p in scheme[s].items()}
        if sum(row.values()) != 1 or any(p < 0 for p in row.values()):
            raise ValueError(f"signal probabilities of scenario {s!r} must be nonnegative and sum to 1")
        for y, p in row.items():
            if prior[s] * p > 0:
                masses.append((s, y, prior[s] * p))

    total = math.lcm(*(m.denominator for _, _, m in masses))
    copies = []
    signals = []
    for s, y, mass in masses:
        count = mass * total
        copies.extend([s] * int(count))
        signals.extend([y] * int(count))
    logger.debug(f"determinize_signaling: {len(prior)} scenarios -> {total} copies")
    return DeterministicSignaling(tuple(copies), tuple(signals))


def bayes_posterior(prior, scheme, signal):
    """Posterior {scenario: probability} of the original randomized triple given a signal."""
    joint = {
        s: Fraction(prior[s]) * Fraction(scheme[s].get(signal, 0))
        for s in prior
    }
    evidence = sum(joint.values())
    if evidence == 0:
        return {}
    return {s: j / evidence for s, j in joint.items() if j > 0}
