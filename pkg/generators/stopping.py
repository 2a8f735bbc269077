"""
Hard stopping instances and a seeded super-martingale fuzzer.

All generated trees are exact super-martingales with unit step costs and every
leaf at the same depth.
"""
import logging
from dataclasses import dataclass, field
from decimal import Decimal, localcontext
from fractions import Fraction

import numpy as np

from model.tree import TreeBuilder

logger = logging.getLogger(__name__)

# Significant digits of the rational stand-in for e^N.
EXP_DIGITS = 15
VALUE_GRID = 1000
WEIGHT_RANGE = 10


def rational_exp(n, digits=EXP_DIGITS):
    """Rational ê with |ê − e^n|/e^n far below 10⁻⁶."""
    with localcontext() as ctx:
        ctx.prec = digits
        return Fraction(Decimal(n).exp())


def _zero_chain(builder, parent, prob, levels):
    """Child of value 0 followed by zeros for the remaining levels."""
    node = builder.add(0, parent=parent, prob=prob)
    for _ in range(levels):
        node = builder.add(0, parent=node, prob=1)
    return node


def harmonic_instance(n):
    """
    X_0 = 1; while alive, X_i = 0 with probability 1/(i+1), else X_i = i+1.

    Binary tree of depth n; zero branches are padded with zeros to depth n.
    """
    if n < 1:
        raise ValueError(f"harmonic_instance needs n >= 1, got {n}")
    builder = TreeBuilder()
    alive = builder.add(1)
    for i in range(1, n + 1):
        _zero_chain(builder, alive, Fraction(1, i + 1), n - i)
        alive = builder.add(i + 1, parent=alive, prob=Fraction(i, i + 1))
    return builder.build()


def _geometric_trap(start, multiplier, steps, horizon):
    """
    Value multiplies by ê with probability 1/ê for `steps` steps, else drops to 0 for good.

    Returns the builder and the id of the surviving node at depth `steps`.
    """
    builder = TreeBuilder()
    alive = builder.add(start)
    value = Fraction(start)
    survive = 1 / multiplier
    for i in range(1, steps + 1):
        _zero_chain(builder, alive, 1 - survive, horizon - i)
        value *= multiplier
        alive = builder.add(value, parent=alive, prob=survive)
    return builder, alive


def exp_trap_instance(n):
    """
    X_0 = n; X_i = ê·X_{i−1} with probability 1/ê, else 0, for i ≤ n; X_{n+1} = 0.

    ê approximates e^n. Pairing the multiplier with survival probability 1/ê keeps
    every node's conditional mean equal to its value.
    """
    if n < 1:
        raise ValueError(f"exp_trap_instance needs n >= 1, got {n}")
    builder, alive = _geometric_trap(n, rational_exp(n), n, n + 1)
    builder.add(0, parent=alive, prob=1)
    return builder.build()


def benchmark_gap_instance(N, horizon):
    """
    X_0 = N; X_{i+1} = ê·X_i with probability 1/ê, else 0, up to the horizon.

    ê approximates e^N. The tree is an exact martingale, so stopping at the root is
    optimal and OPT = N, while the per-path best stop is O(1) in expectation.
    """
    if N < 1:
        raise ValueError(f"benchmark_gap_instance needs N >= 1, got {N}")
    if horizon < N:
        raise ValueError(f"benchmark_gap_instance needs horizon >= N, got horizon={horizon}, N={N}")
    builder, _ = _geometric_trap(N, rational_exp(N), horizon, horizon)
    return builder.build()


def ski_rental_instance(B, T, horizon):
    """Deterministic chain: X_i = B for i < T, X_i = 0 for T <= i <= horizon."""
    B = Fraction(B)
    if B <= 0:
        raise ValueError(f"ski_rental_instance needs B > 0, got {B}")
    if not 0 <= T <= horizon:
        raise ValueError(f"ski_rental_instance needs 0 <= T <= horizon, got T={T}, horizon={horizon}")
    builder = TreeBuilder()
    node = builder.add(B if T > 0 else 0)
    for i in range(1, horizon + 1):
        node = builder.add(B if i < T else 0, parent=node, prob=1)
    return builder.build()


def ski_rental_mixture(B, t_weights, horizon):
    """
    Ski rental with a random season end T drawn from {T: weight}, 1 <= T <= horizon.

    The value stays B while T > i and drops to 0 once the season has ended; each
    node branches on whether T arrives at the next step.
    """
    B = Fraction(B)
    if B <= 0:
        raise ValueError(f"ski_rental_mixture needs B > 0, got {B}")
    weights = {int(t): Fraction(w) for t, w in t_weights.items() if Fraction(w) > 0}
    if not weights:
        raise ValueError("ski_rental_mixture needs at least one positive weight")
    if min(weights) < 1 or max(weights) > horizon:
        raise ValueError(f"season ends must lie in [1, {horizon}], got {sorted(weights)}")
    total = sum(weights.values())

    builder = TreeBuilder()
    alive = builder.add(B)
    remaining = Fraction(1)
    for i in range(1, horizon + 1):
        ends_now = weights.get(i, Fraction(0)) / total
        if ends_now > 0:
            _zero_chain(builder, alive, ends_now / remaining, horizon - i)
        remaining -= ends_now
        if remaining == 0:
            break
        alive = builder.add(B, parent=alive, prob=1 - ends_now / (remaining + ends_now))
    return builder.build()


def random_supermartingale(depth, max_branching, value_scale, seed, *, nonincreasing=False):
    """
    Seeded fuzzer for valid super-martingale trees with all leaves at `depth`.

    Each node of value v draws 1..max_branching children with integer weights.
    Raw child values are rescaled so the weighted mean is v·u for u uniform on a
    tenths grid, then floored to a 1/1000 grid; flooring only lowers the mean, so
    the output is always exactly valid. With nonincreasing=True every child value
    is v·r for r in [0, 1], so every path is nonincreasing.
    """
    if depth < 0:
        raise ValueError(f"depth must be >= 0, got {depth}")
    if max_branching < 1:
        raise ValueError(f"max_branching must be >= 1, got {max_branching}")
    if value_scale < 1:
        raise ValueError(f"value_scale must be >= 1, got {value_scale}")

    rng = np.random.default_rng(seed)
    builder = TreeBuilder()
    root_value = Fraction(int(rng.integers(0, value_scale + 1)))
    frontier = [(builder.add(root_value), root_value)]
    for _ in range(depth):
        next_frontier = []
        for parent, value in frontier:
            k = int(rng.integers(1, max_branching + 1))
            weights = [int(w) for w in rng.integers(1, WEIGHT_RANGE + 1, size=k)]
            probs = [Fraction(w, sum(weights)) for w in weights]
            if nonincreasing:
                ratios = [Fraction(int(r), 10) for r in rng.integers(0, 11, size=k)]
                child_values = [value * r for r in ratios]
            else:
                child_values = _rescaled_values(rng, value, probs, value_scale)
            for p, child_value in zip(probs, child_values):
                next_frontier.append((builder.add(child_value, parent=parent, prob=p), child_value))
        frontier = next_frontier

    tree = builder.build()
    logger.debug(f"random_supermartingale(seed={seed}): {tree!r}")
    return tree


def _rescaled_values(rng, value, probs, value_scale):
    raw = [int(r) for r in rng.integers(0, value_scale + 1, size=len(probs))]
    target = value * Fraction(int(rng.integers(0, 11)), 10)
    raw_mean = sum((p * r for p, r in zip(probs, raw)), Fraction(0))
    if target == 0:
        return [Fraction(0)] * len(probs)
    if raw_mean == 0:
        scaled = [target] * len(probs)
    else:
        scaled = [r * target / raw_mean for r in raw]
    return [Fraction(int(v * VALUE_GRID), VALUE_GRID) for v in scaled]


GENERATORS = {
    "harmonic": harmonic_instance,
    "exp_trap": exp_trap_instance,
    "benchmark_gap": benchmark_gap_instance,
    "ski_rental": ski_rental_instance,
    "ski_rental_mixture": ski_rental_mixture,
    "random_supermartingale": random_supermartingale,
}

ALIASES = {"random": "random_supermartingale"}


def canonical_kind(kind):
    kind = kind.replace("-", "_")
    return ALIASES.get(kind, kind)


@dataclass(frozen=True)
class GeneratorSpec:
    """A generator kind plus its keyword parameters, e.g. GeneratorSpec("harmonic", {"n": 10})."""
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "kind", canonical_kind(self.kind))
        if self.kind not in GENERATORS:
            raise ValueError(f"Unknown generator kind {self.kind!r}; expected one of {sorted(GENERATORS)}")

    @property
    def instance_id(self):
        args = ",".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        return f"{self.kind}({args})"

    def build(self):
        try:
            return GENERATORS[self.kind](**self.params)
        except TypeError as e:
            raise ValueError(f"Bad parameters for {self.kind}: {e}") from e


def generate(kind, **params):
    return GeneratorSpec(kind, params).build()
