from fractions import Fraction

import numpy as np
import pytest

from policies.q_estimator import (
    crossing_time,
    empty,
    extend,
    from_values,
    inverse,
    inverse_value_integral,
)
from tests.helpers import suite_size


def test_q_at_zero_is_zero():
    assert empty().at(0) == 0
    assert from_values([3, 5]).at(0) == 0


def test_single_segment():
    assert from_values([2]).at(1) == Fraction(1, 2)


def test_two_segments():
    q = from_values([2, 4])
    assert q.at(2) == Fraction(3, 4)
    assert q.at(Fraction(3, 2)) == Fraction(1, 2) + Fraction(1, 8)


def test_increments_are_reciprocals():
    values = [Fraction(3), Fraction(1, 2), Fraction(7, 4)]
    q = from_values(values)
    for i, v in enumerate(values):
        assert q.at(i + 1) - q.at(i) == 1 / v


def test_extend_does_not_mutate():
    q = from_values([2])
    extended = extend(q, 4)
    assert q.covered == 1
    assert extended.covered == 2


def test_negative_value_is_rejected():
    with pytest.raises(ValueError):
        extend(empty(), -1)


class TestCrossingTime:
    def test_unit_slope(self):
        assert crossing_time(from_values([1]), 1) == 1

    def test_crossing_at_breakpoint(self):
        assert crossing_time(from_values([2, 4]), Fraction(3, 4)) == 2

    def test_crossing_inside_segment(self):
        assert crossing_time(from_values([2, 4]), Fraction(5, 8)) == Fraction(3, 2)

    def test_zero_value_crosses_every_threshold(self):
        q = from_values([2, 0])
        for rho in (Fraction(3, 4), Fraction(99, 100), Fraction(1)):
            assert crossing_time(q, rho) == 1

    def test_not_yet_crossed(self):
        assert crossing_time(from_values([4]), 1) is None

    def test_zero_threshold(self):
        assert crossing_time(from_values([5]), 0) == 0


class TestInverse:
    def test_zero(self):
        assert inverse(from_values([2, 4]), 0) == 0

    def test_breakpoint(self):
        assert inverse(from_values([2, 4]), Fraction(3, 4)) == 2

    def test_beyond_covered_range(self):
        q = from_values([2])
        assert inverse(q, 1) is None
        assert inverse(q, 1, extrapolate=True) == 2

    def test_zero_value_is_not_invertible(self):
        with pytest.raises(ValueError):
            inverse(from_values([1, 0]), Fraction(1, 2))


class TestInverseValueIntegral:
    def test_hand_computed_example(self):
        q = from_values([2, 4])
        r, s = Fraction(1, 4), Fraction(3, 4)
        assert inverse_value_integral(q, r, s) == Fraction(3, 2)
        assert inverse(q, s) - inverse(q, r) == Fraction(3, 2)

    def test_identity_on_random_paths(self):
        rng = np.random.default_rng(11)
        for _ in range(suite_size(10**4, 10**5)):
            k = int(rng.integers(1, 6))
            values = [Fraction(int(v), 4) for v in rng.integers(1, 40, size=k)]
            q = from_values(values)
            top = q.breakpoints[-1]
            a, b = sorted(Fraction(int(x), 1000) * top for x in rng.integers(0, 1001, size=2))
            assert inverse_value_integral(q, a, b) == inverse(q, b) - inverse(q, a)

    def test_identity_with_extrapolation(self):
        q = from_values([2, 4])
        r, s = Fraction(1, 2), Fraction(2)
        lhs = inverse(q, s, extrapolate=True) - inverse(q, r, extrapolate=True)
        assert inverse_value_integral(q, r, s, extrapolate=True) == lhs

    def test_bounds_must_be_ordered(self):
        with pytest.raises(ValueError):
            inverse_value_integral(from_values([1]), 1, 0)


def random_values(rng, k, zero_rate=0.1):
    return [Fraction(0) if rng.random() < zero_rate else Fraction(int(v), 4)
            for v in rng.integers(1, 40, size=k)]


def test_q_on_a_prefix_ignores_later_values():
    rng = np.random.default_rng(17)
    for _ in range(suite_size(500, 5000)):
        prefix = random_values(rng, int(rng.integers(1, 6)))
        longer = from_values(prefix + random_values(rng, int(rng.integers(1, 4))))
        short = from_values(prefix)
        for t in [Fraction(int(x), 8) for x in range(8 * len(prefix) + 1)]:
            assert longer.at(t) == short.at(t)


def test_crossing_time_is_monotone_in_threshold():
    rng = np.random.default_rng(23)
    infinity = float("inf")
    for _ in range(suite_size(500, 5000)):
        q = from_values(random_values(rng, int(rng.integers(1, 7))))
        rhos = sorted(Fraction(int(x), 100) for x in rng.integers(0, 201, size=8))
        times = [crossing_time(q, rho) for rho in rhos]
        times = [infinity if t is None else t for t in times]
        assert times == sorted(times)
