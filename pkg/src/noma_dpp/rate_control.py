"""Per-user admission control: maximize V*U(R) - Q*R over 0 <= R <= R_max.

Utilities work in their own data unit (``unit_bits``, 1 Mbit for the log
utility); queue backlogs and rates enter and leave in bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

RATE_FLOOR = 1e-12  # utility units; keeps ln() finite for starved users


class UtilityFunction:
    """Concave, non-decreasing utility of a rate measured in ``unit_bits``."""

    unit_bits: float = 1.0

    def value(self, x: float) -> float:
        raise NotImplementedError

    def derivative(self, x: float) -> float:
        raise NotImplementedError

    def stationary_point(self, q: float, v: float):
        """Root of v*U'(x) = q, or None when there is no closed form."""
        return None


@dataclass(frozen=True)
class LogUtility(UtilityFunction):
    unit_bits: float = 1e6

    def value(self, x):
        return math.log(max(x, RATE_FLOOR))

    def derivative(self, x):
        return 1.0 / x

    def stationary_point(self, q, v):
        return v / q


@dataclass(frozen=True)
class LinearUtility(UtilityFunction):
    unit_bits: float = 1.0

    def value(self, x):
        return x

    def derivative(self, x):
        return 1.0


@dataclass(frozen=True)
class QuadraticUtility(UtilityFunction):
    """-(x - c)^2, non-decreasing on x <= c."""

    c: float
    unit_bits: float = 1.0

    def value(self, x):
        return -(x - self.c) ** 2

    def derivative(self, x):
        return 2.0 * (self.c - x)


def _clamp(x, lo, hi):
    return min(max(x, lo), hi)


def optimal_rate(q_bits: float, v: float, u: UtilityFunction, r_max: float) -> float:
    """Admitted bits for one user this slot."""
    if v <= 0.0:
        # objective is -Q*R (flat when Q = 0): admit nothing
        return 0.0
    if q_bits <= 0.0:
        return r_max
    unit = u.unit_bits
    x = u.stationary_point(q_bits / unit, v)
    if x is None:
        return optimal_rate_numeric(q_bits, v, u, r_max)
    return _clamp(x * unit, 0.0, r_max)


def optimal_rate_numeric(q_bits: float, v: float, u: UtilityFunction, r_max: float) -> float:
    """Bisection on V*U'(R) - Q; needs only the derivative of ``u``."""
    if v <= 0.0:
        return 0.0
    unit = u.unit_bits
    q = q_bits / unit
    hi = r_max / unit
    lo = 1e-9 * hi
    tol = 1e-9 * hi

    def h(x):
        return v * u.derivative(x) - q

    if h(hi) >= 0.0:
        return r_max
    if h(lo) <= 0.0:
        return 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if h(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return _clamp(0.5 * (lo + hi) * unit, 0.0, r_max)
