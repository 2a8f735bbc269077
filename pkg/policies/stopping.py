import logging
from dataclasses import dataclass
from decimal import Decimal, localcontext
from fractions import Fraction
from typing import Optional

import numpy as np

from policies import q_estimator

logger = logging.getLogger(__name__)

THRESHOLD_PRECISION = 40
_COIN_GRID = 2**53


@dataclass(frozen=True)
class Continue:
    def __bool__(self):
        return False


CONTINUE = Continue()


@dataclass(frozen=True)
class Stop:
    index: int
    value: Fraction

    @property
    def cost(self):
        return self.index + self.value


@dataclass(frozen=True)
class PolicyTrace:
    policy: str
    node_ids: tuple
    values: tuple
    stop: Stop
    forced: bool

    @property
    def cost(self):
        return self.stop.cost

    @property
    def stop_node(self):
        return self.node_ids[self.stop.index]


class StoppingPolicy:
    """
    Online stopping rule fed one observed value at a time.

    A policy instance is single-use: once it has stopped it refuses further
    observations. observe(..., final=True) marks the horizon, where it must stop.
    """

    name = "policy"

    def __init__(self):
        self.index = -1
        self.observed = []
        self.decision = None
        self.forced = False

    @property
    def stopped(self):
        return isinstance(self.decision, Stop)

    def observe(self, value, *, final=False):
        if self.stopped:
            raise RuntimeError(f"{self.name}: policy already stopped at index {self.decision.index}")
        value = Fraction(value)
        if value < 0:
            raise ValueError(f"Observed value must be nonnegative, got {value}")
        self.index += 1
        self.observed.append(value)
        voluntary = self._should_stop(value)
        if voluntary or final:
            self.forced = not voluntary
            self.decision = Stop(self.index, value)
            return self.decision
        self.decision = CONTINUE
        return CONTINUE

    def _should_stop(self, value):
        raise NotImplementedError


class DeterministicStopping(StoppingPolicy):
    """Stop at i when Q crosses 1 within (i, i+1]; a zero value crosses instantly."""

    name = "det"

    def __init__(self):
        super().__init__()
        self.q = q_estimator.empty()

    def _should_stop(self, value):
        self.q = q_estimator.extend(self.q, value)
        if value == 0:
            return True
        t = q_estimator.crossing_time(self.q, 1)
        return t is not None and self.index < t <= self.index + 1


@dataclass(frozen=True)
class RandomizedThreshold:
    rho: Fraction

    @classmethod
    def draw(cls, seed):
        """Inverse-CDF sample ρ = ln(1 + (e − 1)u) from a seeded uniform u."""
        rng = np.random.default_rng(seed)
        return cls.from_uniform(rng.random())

    @classmethod
    def from_uniform(cls, u):
        with localcontext() as ctx:
            ctx.prec = THRESHOLD_PRECISION
            e = Decimal(1).exp()
            rho = (1 + (e - 1) * Decimal(u)).ln()
        return cls(min(Fraction(1), max(Fraction(0), Fraction(rho))))


class RandomizedStopping(StoppingPolicy):
    """Stop at the first i whose closed segment [i, i+1] contains a crossing of ρ."""

    name = "rand"

    def __init__(self, seed=None, *, threshold: Optional[RandomizedThreshold] = None):
        super().__init__()
        self.threshold = threshold or RandomizedThreshold.draw(seed)
        self.q = q_estimator.empty()

    @property
    def rho(self):
        return self.threshold.rho

    def _should_stop(self, value):
        self.q = q_estimator.extend(self.q, value)
        t = q_estimator.crossing_time(self.q, self.rho)
        return t is not None and self.index <= t <= self.index + 1


def coin_probability(value):
    """min{1, 1/v}; a zero value stops with probability 1."""
    value = Fraction(value)
    if value <= 1:
        return Fraction(1)
    return 1 / value


class ThrowCoin(StoppingPolicy):
    name = "coin"

    def __init__(self, seed=None):
        super().__init__()
        self.rng = np.random.default_rng(seed)

    def _should_stop(self, value):
        u = Fraction(int(self.rng.integers(0, _COIN_GRID)), _COIN_GRID)
        return u < coin_probability(value)


class ClassicSkiRental(StoppingPolicy):
    name = "ski"

    def _should_stop(self, value):
        return value <= self.index


class RevisedSkiRental(StoppingPolicy):
    name = "ski-min"

    def _should_stop(self, value):
        return min(self.observed) <= self.index


POLICIES = {
    "det": DeterministicStopping,
    "rand": RandomizedStopping,
    "coin": ThrowCoin,
    "ski": ClassicSkiRental,
    "ski-min": RevisedSkiRental,
}
DETERMINISTIC_POLICIES = ("det", "ski", "ski-min")
RANDOMIZED_POLICIES = ("rand", "coin")


def deterministic_stopping():
    return DeterministicStopping()


def randomized_stopping(seed):
    return RandomizedStopping(seed)


def throw_coin(seed):
    return ThrowCoin(seed)


def classic_ski_rental():
    return ClassicSkiRental()


def revised_ski_rental():
    return RevisedSkiRental()


def make_policy(name, seed=None):
    if name not in POLICIES:
        raise ValueError(f"Unknown policy {name!r}; expected one of {sorted(POLICIES)}")
    if name in RANDOMIZED_POLICIES:
        return POLICIES[name](seed)
    return POLICIES[name]()


def run_policy(policy, path):
    """Feed a full root-to-leaf PathPrefix to a fresh policy and return its trace."""
    last = len(path) - 1
    for i, value in enumerate(path.values):
        decision = policy.observe(value, final=(i == last))
        if decision:
            return PolicyTrace(
                policy=policy.name,
                node_ids=path.node_ids[: i + 1],
                values=path.values[: i + 1],
                stop=decision,
                forced=policy.forced,
            )
    raise RuntimeError(f"{policy.name}: path ended without a stop decision")
