import os
from dataclasses import replace
from fractions import Fraction

import numpy as np

from model.tree import InstanceTree, PathPrefix, TreeBuilder

FULL_SUITE = os.getenv("STOPWISE_FULL_SUITE") == "1"


def suite_size(quick, full):
    """Instance count for the fuzzed bound suites; full scale with STOPWISE_FULL_SUITE=1."""
    return full if FULL_SUITE else quick


def chain(values):
    """Deterministic path tree with the given node values."""
    builder = TreeBuilder()
    node = builder.add(values[0])
    for v in values[1:]:
        node = builder.add(v, parent=node, prob=1)
    return builder.build()


def one_step(root, outcomes):
    """Root with leaf children {value: probability}."""
    builder = TreeBuilder()
    r = builder.add(root)
    for value, prob in outcomes:
        builder.add(value, parent=r, prob=prob)
    return builder.build()


def path(values):
    values = tuple(Fraction(v) for v in values)
    return PathPrefix(values, tuple(range(len(values))))


def with_random_costs(tree, seed, max_cost=3):
    """Copy of tree whose internal nodes charge seeded step costs in [1, max_cost]."""
    rng = np.random.default_rng(seed)
    nodes = [
        replace(n, cost=1 if n.is_leaf else int(rng.integers(1, max_cost + 1)))
        for n in tree
    ]
    return InstanceTree(nodes, tree.root, tree.kind)
