import logging
from fractions import Fraction

import numpy as np

from mssc.instance import MsscInstance, feedback_tree

logger = logging.getLogger(__name__)

MAX_SPLIT = 3
ONE_BIT_PROBABILITY = 0.4


def _random_scenarios(rng, n_boxes, n_scenarios):
    scenarios = []
    for _ in range(n_scenarios):
        bits = [int(x) for x in rng.random(n_boxes) < ONE_BIT_PROBABILITY]
        if not any(bits):
            bits[int(rng.integers(0, n_boxes))] = 1
        scenarios.append(tuple(bits))
    return tuple(scenarios)


def _random_partition(rng, members):
    k = int(rng.integers(1, min(MAX_SPLIT, len(members)) + 1))
    labels = rng.integers(0, k, size=len(members))
    groups = [[s for s, label in zip(members, labels) if label == g] for g in range(k)]
    return [g for g in groups if g]


def random_mssc_instance(n_boxes, n_scenarios, depth, seed, *, max_cost=1, buying=None, uniform=False):
    """
    Seeded fuzzer for small MSSC instances with a random feedback tree.

    Every scenario gets at least one one-bit. Each feedback node above `depth` with
    more than one scenario splits into up to three random groups (a single group
    means the signal carries no information); internal nodes draw a signal price in
    [1, max_cost]. buying defaults to max_cost > 1.
    """
    if n_boxes < 1 or n_scenarios < 1:
        raise ValueError(f"need n_boxes >= 1 and n_scenarios >= 1, got {n_boxes}, {n_scenarios}")
    if depth < 0 or max_cost < 1:
        raise ValueError(f"need depth >= 0 and max_cost >= 1, got {depth}, {max_cost}")
    buying = max_cost > 1 if buying is None else buying
    if max_cost > 1 and not buying:
        raise ValueError("signal prices above 1 need buying mode")
    rng = np.random.default_rng(seed)
    scenarios = _random_scenarios(rng, n_boxes, n_scenarios)
    if uniform:
        prior = tuple(Fraction(1, n_scenarios) for _ in range(n_scenarios))
    else:
        weights = [int(w) for w in rng.integers(1, 11, size=n_scenarios)]
        prior = tuple(Fraction(w, sum(weights)) for w in weights)

    def grow(members, level):
        spec = {"scenarios": members}
        if level < depth and len(members) > 1:
            spec["cost"] = int(rng.integers(1, max_cost + 1))
            spec["children"] = [grow(group, level + 1) for group in _random_partition(rng, members)]
        return spec

    tree = feedback_tree(prior, grow(list(range(n_scenarios)), 0))
    inst = MsscInstance(n_boxes, scenarios, prior, tree, buying)
    logger.debug(f"random_mssc_instance(seed={seed}): {n_boxes} boxes, {n_scenarios} scenarios, {len(tree)} nodes")
    return inst
