import logging
from collections import deque
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Iterator, Optional

import numpy as np

logger = logging.getLogger(__name__)

KIND_SUPERMARTINGALE = "supermartingale"
KIND_FEEDBACK = "feedback"
KINDS = (KIND_SUPERMARTINGALE, KIND_FEEDBACK)

# Violation kinds
VIOLATION_MEAN = "mean_exceeds_value"
VIOLATION_PROBABILITY = "probability_sum"
VIOLATION_EDGE_PROBABILITY = "edge_probability"
VIOLATION_RAGGED = "ragged_depth"
VIOLATION_NEGATIVE = "negative_value"
VIOLATION_PARENT = "multiple_parents"
VIOLATION_UNREACHABLE = "unreachable"
VIOLATION_COST = "invalid_cost"
VIOLATION_PARTITION = "not_a_partition"

DEFAULT_FLOAT_TOLERANCE = Fraction(1, 10**9)


@dataclass(frozen=True)
class Node:
    id: int
    value: Fraction
    children: tuple = ()  # ((child_id, probability), ...)
    depth: int = 0
    cost: int = 1
    scenarios: Optional[tuple] = None
    virtual: bool = False

    @property
    def is_leaf(self):
        return not self.children


@dataclass(frozen=True)
class PathPrefix:
    values: tuple
    node_ids: tuple

    def __len__(self):
        return len(self.values)

    @classmethod
    def from_nodes(cls, nodes):
        return cls(tuple(n.value for n in nodes), tuple(n.id for n in nodes))


@dataclass(frozen=True)
class Violation:
    kind: str
    node_id: int
    detail: str


class InstanceTree:
    """
    Rooted tree of nonnegative rational values with child-transition probabilities.

    Nodes are immutable; depths are recomputed from the root on construction so a
    tree read from a hand-written file always reports consistent depths. Trees are
    not validated here: use validate_structure / validate_supermartingale.
    """

    def __init__(self, nodes, root, kind=KIND_SUPERMARTINGALE):
        if kind not in KINDS:
            raise ValueError(f"Unknown tree kind: {kind!r}")
        self.kind = kind
        self.root = root
        by_id = {n.id: n for n in nodes}
        if root not in by_id:
            raise ValueError(f"Root {root} is not a node of the tree")

        depths = {root: 0}
        queue = deque([root])
        while queue:
            nid = queue.popleft()
            for child_id, _ in by_id[nid].children:
                if child_id in by_id and child_id not in depths:
                    depths[child_id] = depths[nid] + 1
                    queue.append(child_id)
        self._nodes = {
            nid: replace(n, depth=depths.get(nid, -1)) for nid, n in sorted(by_id.items())
        }

    def __eq__(self, other):
        if not isinstance(other, InstanceTree):
            return NotImplemented
        return (self.kind, self.root, self._nodes) == (other.kind, other.root, other._nodes)

    def __len__(self):
        return len(self._nodes)

    def __iter__(self):
        return iter(self._nodes.values())

    def __repr__(self):
        return f"InstanceTree(kind={self.kind!r}, nodes={len(self)}, horizon={self.horizon})"

    def node(self, node_id):
        return self._nodes[node_id]

    def __contains__(self, node_id):
        return node_id in self._nodes

    @property
    def root_node(self):
        return self._nodes[self.root]

    def children(self, node_id):
        """List of (child Node, probability) pairs."""
        return [(self._nodes[cid], p) for cid, p in self._nodes[node_id].children]

    def leaves(self):
        return [n for n in self._nodes.values() if n.is_leaf and n.depth >= 0]

    @property
    def horizon(self):
        return max(n.depth for n in self.leaves())

    @property
    def has_unit_costs(self):
        return all(n.cost == 1 for n in self._nodes.values())

    def paths(self) -> Iterator[tuple]:
        """Yield (probability, tuple of nodes) for every root-to-leaf path."""
        stack = [(Fraction(1), (self.root_node,))]
        while stack:
            prob, path = stack.pop()
            last = path[-1]
            if last.is_leaf:
                yield prob, path
                continue
            for child, p in reversed(self.children(last.id)):
                stack.append((prob * p, path + (child,)))

    def with_values(self, values):
        """Return a copy with node values replaced from the {node_id: value} mapping."""
        nodes = [replace(n, value=Fraction(values.get(n.id, n.value))) for n in self]
        return InstanceTree(nodes, self.root, self.kind)


class TreeBuilder:
    """Incremental construction helper: the first node added is the root."""

    def __init__(self, kind=KIND_SUPERMARTINGALE):
        self.kind = kind
        self._fields = {}
        self._children = {}
        self._order = []

    def add(self, value=0, *, parent=None, prob=None, cost=1, scenarios=None, virtual=False):
        node_id = len(self._order)
        self._order.append(node_id)
        self._fields[node_id] = {
            "value": Fraction(value),
            "cost": cost,
            "scenarios": tuple(sorted(scenarios)) if scenarios is not None else None,
            "virtual": virtual,
        }
        self._children[node_id] = []
        if parent is not None:
            self._children[parent].append((node_id, Fraction(1 if prob is None else prob)))
        return node_id

    def build(self):
        if not self._order:
            raise ValueError("Cannot build an empty tree")
        nodes = [
            Node(id=nid, children=tuple(self._children[nid]), **self._fields[nid])
            for nid in self._order
        ]
        return InstanceTree(nodes, self._order[0], self.kind)


def validate_structure(tree):
    """Structural checks shared by both tree kinds. Returns a list of Violations."""
    violations = []
    parent_count = {}
    for node in tree:
        for child_id, _ in node.children:
            parent_count[child_id] = parent_count.get(child_id, 0) + 1

    for node in tree:
        if node.id != tree.root and parent_count.get(node.id, 0) > 1:
            violations.append(Violation(
                VIOLATION_PARENT, node.id, f"{parent_count[node.id]} parents"))
        if node.depth < 0:
            violations.append(Violation(VIOLATION_UNREACHABLE, node.id, "not reachable from root"))
        if node.value < 0:
            violations.append(Violation(VIOLATION_NEGATIVE, node.id, f"value {node.value} < 0"))
        if isinstance(node.cost, bool) or not isinstance(node.cost, int) or node.cost < 1:
            violations.append(Violation(
                VIOLATION_COST, node.id, f"cost {node.cost!r} is not a positive integer"))
        if node.children:
            total = sum((p for _, p in node.children), Fraction(0))
            if total != 1:
                violations.append(Violation(
                    VIOLATION_PROBABILITY, node.id, f"child probabilities sum to {total}"))
            for child_id, p in node.children:
                if not 0 < p <= 1:
                    violations.append(Violation(
                        VIOLATION_EDGE_PROBABILITY, node.id,
                        f"probability {p} to child {child_id} outside (0, 1]"))

    if tree.kind == KIND_SUPERMARTINGALE:
        depths = {leaf.depth for leaf in tree.leaves()}
        if len(depths) > 1 and tree.has_unit_costs:
            violations.append(Violation(
                VIOLATION_RAGGED, tree.root, f"leaf depths {sorted(depths)} differ"))
    else:
        for node in tree:
            if not node.children:
                continue
            parent_set = set(node.scenarios or ())
            seen = []
            for child, _ in tree.children(node.id):
                seen.extend(child.scenarios or ())
            if len(seen) != len(set(seen)) or set(seen) != parent_set:
                violations.append(Violation(
                    VIOLATION_PARTITION, node.id,
                    "children do not partition the parent's scenario set"))
    return violations


def validate_supermartingale(tree, tolerance=DEFAULT_FLOAT_TOLERANCE, *, relative=True):
    """
    Return every violation of the super-martingale instance conditions.

    Structural problems are reported with their own kinds; an internal node v whose
    children's probability-weighted mean exceeds value(v)·(1 + tolerance) is reported
    as VIOLATION_MEAN (value(v) + tolerance with relative=False). The default absorbs
    rounding in decimal-valued input. An empty list means the tree is a valid instance.
    """
    tolerance = Fraction(tolerance)
    violations = validate_structure(tree)
    for node in tree:
        if not node.children:
            continue
        mean = sum((p * child.value for child, p in tree.children(node.id)), Fraction(0))
        slack = tolerance * node.value if relative else tolerance
        if mean > node.value + slack:
            violations.append(Violation(
                VIOLATION_MEAN, node.id, f"mean {mean} > value {node.value}"))
    if violations:
        logger.debug(f"Validation found {len(violations)} violation(s) on {tree!r}")
    return violations


def sample_path(tree, seed):
    """Draw a full root-to-leaf path with probability equal to the product of edge probabilities."""
    rng = np.random.default_rng(seed)
    node = tree.root_node
    nodes = [node]
    while not node.is_leaf:
        u = rng.random()
        cumulative = 0.0
        children = tree.children(node.id)
        chosen = children[-1][0]
        for child, p in children:
            cumulative += float(p)
            if u < cumulative:
                chosen = child
                break
        node = chosen
        nodes.append(node)
    return PathPrefix.from_nodes(nodes)


def perturb_leaves(tree, alpha, rule="max", *, seed=None, scope="all"):
    """
    Replace node values v by ṽ in [v, alpha·v].

    rule "max" sets ṽ = alpha·v; rule "random" draws ṽ uniformly (on a 10⁻⁶ grid) in
    [v, alpha·v]. scope "all" perturbs every node, scope "leaves" only the leaves.
    The output is generally NOT a super-martingale.
    """
    alpha = Fraction(alpha)
    if alpha < 1:
        raise ValueError(f"alpha must be >= 1, got {alpha}")
    if rule not in ("max", "random"):
        raise ValueError(f"Unknown perturbation rule: {rule!r}")
    if scope not in ("all", "leaves"):
        raise ValueError(f"Unknown perturbation scope: {scope!r}")

    rng = np.random.default_rng(seed)
    grid = 10**6
    values = {}
    for node in tree:
        if scope == "leaves" and not node.is_leaf:
            continue
        if rule == "max":
            values[node.id] = alpha * node.value
        else:
            u = Fraction(int(rng.integers(0, grid + 1)), grid)
            values[node.id] = node.value + (alpha - 1) * node.value * u
    return tree.with_values(values)
