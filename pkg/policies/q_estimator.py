"""
Running estimator Q_p(t) = ∫₀ᵗ 1/v_p(τ)dτ over an observed path prefix.

v_p(t) = v_i on [i, i+1), so Q is piecewise linear with slope 1/v_i on segment i.
A zero value makes the slope infinite: Q jumps past every finite threshold at the
start of that segment.
"""
import logging
from dataclasses import dataclass
from fractions import Fraction

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class QFunction:
    """Immutable snapshot covering [0, len(values)]."""
    values: tuple = ()
    breakpoints: tuple = (Fraction(0),)  # Q(0), Q(1), ... up to the first zero segment

    @property
    def covered(self):
        return len(self.values)

    @property
    def zero_segment(self):
        """Index of the first zero-valued segment, or None."""
        for i, v in enumerate(self.values):
            if v == 0:
                return i
        return None

    def at(self, t):
        """Q(t) as a Fraction, or None when Q is already infinite at t."""
        t = Fraction(t)
        if t < 0 or t > self.covered:
            raise ValueError(f"t={t} outside covered range [0, {self.covered}]")
        i = min(int(t), self.covered - 1) if self.covered else 0
        if t == 0:
            return Fraction(0)
        if i >= len(self.breakpoints):
            return None
        if self.values[i] == 0:
            return self.breakpoints[i] if t == i else None
        return self.breakpoints[i] + (t - i) / self.values[i]


def empty():
    return QFunction()


def extend(q, v_i):
    """Cover one more unit segment with slope 1/v_i."""
    v_i = Fraction(v_i)
    if v_i < 0:
        raise ValueError(f"Observed value must be nonnegative, got {v_i}")
    values = q.values + (v_i,)
    breakpoints = q.breakpoints
    # After a zero segment Q is infinite, so no further breakpoints exist.
    if q.zero_segment is None and v_i > 0:
        breakpoints = breakpoints + (breakpoints[-1] + 1 / v_i,)
    return QFunction(values, breakpoints)


def from_values(values):
    q = empty()
    for v in values:
        q = extend(q, v)
    return q


def crossing_time(q, rho):
    """
    Smallest t with Q(t) >= rho, as an exact rational, or None if not yet crossed.

    A zero-valued segment starting at i crosses every remaining threshold at t = i.
    """
    rho = Fraction(rho)
    if rho <= 0:
        return Fraction(0)
    for i, v in enumerate(q.values):
        start = q.breakpoints[i]
        if v == 0:
            return Fraction(i)
        end = q.breakpoints[i + 1]
        if end >= rho:
            return i + (rho - start) * v
    return None


def inverse(q, s, *, extrapolate=False):
    """
    Exact t with Q(t) = s, or None when s is beyond the covered range.

    With extrapolate=True the last observed value is assumed to continue forever,
    which is how a path's estimator behaves past its leaf.
    """
    s = Fraction(s)
    if s < 0:
        raise ValueError(f"s must be nonnegative, got {s}")
    if q.zero_segment is not None:
        raise ValueError("Q is not invertible on a prefix containing a zero value")
    t = crossing_time(q, s)
    if t is not None:
        return t
    if extrapolate and q.covered:
        return q.covered + (s - q.breakpoints[-1]) * q.values[-1]
    return None


def inverse_value_integral(q, r, s, *, extrapolate=False):
    """∫_r^s v_p(Q⁻¹(w)) dw, summed exactly segment by segment."""
    r, s = Fraction(r), Fraction(s)
    if s < r:
        raise ValueError("integral bounds must satisfy r <= s")
    if q.zero_segment is not None:
        raise ValueError("Q is not invertible on a prefix containing a zero value")
    total = Fraction(0)
    for i, v in enumerate(q.values):
        lo = max(r, q.breakpoints[i])
        hi = min(s, q.breakpoints[i + 1])
        if hi > lo:
            total += v * (hi - lo)
    if extrapolate and q.covered and s > q.breakpoints[-1]:
        total += q.values[-1] * (s - max(r, q.breakpoints[-1]))
    return total
