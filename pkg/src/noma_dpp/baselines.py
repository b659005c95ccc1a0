"""Benchmark power allocation schemes run inside the same queueing controller."""

from __future__ import annotations

import enum
import math

import numpy as np

from .dppa import EffectiveWeights
from .phy import PowerAllocation


class Policy(str, enum.Enum):
    NOMA_OPT = "noma_opt"
    OMA = "oma"
    SINGLE = "single"
    NOMA_EQ = "noma_eq"
    NOMA_PRO_Q = "noma_pro_q"

    @classmethod
    def parse(cls, name: str) -> "Policy":
        key = name.strip().lower().replace("-", "_")
        for p in cls:
            if p.value == key or p.name.lower() == key:
                return p
        raise ValueError(f"unknown policy {name!r}; choose from {[p.value for p in cls]}")

    @property
    def uses_oma_phy(self) -> bool:
        return self is Policy.OMA


def _oma_powers(w, g, eta, z, mu):
    with np.errstate(divide="ignore"):
        return np.maximum(0.0, w / (z + mu) - eta / g)


def oma_allocate(weights: EffectiveWeights, gains, eta: float, p_max: float) -> PowerAllocation:
    """Water-filling for the time-shared objective.

    ``weights`` must already carry the 1/K time share. The peak-power
    multiplier is found by bisection when the unconstrained levels overspend.
    """
    w = weights.w
    g = np.asarray(gains, dtype=float)
    z = weights.z
    if not np.any(w > 0):
        return PowerAllocation(np.zeros(len(w)), 0.0)
    if z > 0:
        p = _oma_powers(w, g, eta, z, 0.0)
        if p.sum() <= p_max:
            return PowerAllocation(p, _oma_objective(p, weights, g, eta))
    # find mu > 0 with sum p(mu) = p_max; sum p(mu) is non-increasing in mu
    lo = 0.0
    hi = max(1.0, z)
    while _oma_powers(w, g, eta, z, hi).sum() > p_max:
        hi *= 2.0
    tol = 1e-9 * p_max
    p = _oma_powers(w, g, eta, z, hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        s = _oma_powers(w, g, eta, z, mid).sum()
        if s > p_max:
            lo = mid
        else:
            hi = mid
            p = _oma_powers(w, g, eta, z, mid)
            if p_max - s <= tol:
                break
    return PowerAllocation(p, _oma_objective(p, weights, g, eta))


def _oma_objective(p, weights, g, eta):
    return float(np.sum(weights.w * np.log1p(p * g / eta)) - weights.z * np.sum(p))


def single_allocate(weights: EffectiveWeights, gains, eta: float, p_max: float) -> PowerAllocation:
    """Serve at most one user, at its own water level."""
    w = weights.w
    g = np.asarray(gains, dtype=float)
    z = weights.z
    k = len(w)
    best_val, best_i, best_p = 0.0, None, 0.0
    for i in range(k):
        if g[i] <= 0 or w[i] <= 0:
            continue
        p = p_max if z == 0 else min(max(w[i] / z - eta / g[i], 0.0), p_max)
        val = w[i] * math.log1p(p * g[i] / eta) - z * p
        if val > best_val:
            best_val, best_i, best_p = val, i, p
    powers = np.zeros(k)
    if best_i is not None:
        powers[best_i] = best_p
    return PowerAllocation(powers, best_val)


def eq_allocate(k: int, p_mean: float) -> PowerAllocation:
    return PowerAllocation(np.full(k, p_mean / k))


def proq_allocate(backlogs, p_mean: float) -> PowerAllocation:
    q = np.asarray(backlogs, dtype=float)
    total = q.sum()
    if total <= 0:
        return PowerAllocation(np.zeros(len(q)))
    return PowerAllocation(p_mean * q / total)
