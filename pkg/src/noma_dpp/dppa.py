"""Globally optimal single-slot NOMA power allocation by dynamic programming.

The problem, with users indexed in descending-gain order ``g_1 >= ... >= g_K``::

    max_p  sum_k w_k ln(1 + p_k g_k / (S_{k-1} g_k + eta)) - z * S_K
    s.t.   S_K <= p_max,  p >= 0,         S_k = p_1 + ... + p_k

is non-convex, but at any KKT point every prefix sum ``S_k`` lies in a
finite candidate set built from pairwise equal-marginal points and
single-user water levels. Restricting prefix sums to that set makes the
objective separable stage by stage, so

    H(l, 1) = f_1(0, pi_l)
    H(l, k) = max_{l' <= l} H(l', k-1) + f_k(pi_l', pi_l - pi_l')

solves it in O(K L^2) evaluations of ``f_k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .phy import PowerAllocation


@dataclass(frozen=True)
class EffectiveWeights:
    """Per-user rate weights (sorted-gain order) and the power price."""

    w: np.ndarray
    z: float

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and >= 0")
        if not (self.z >= 0 and math.isfinite(self.z)):
            raise ValueError(f"power price must be finite and >= 0, got {self.z}")
        object.__setattr__(self, "w", w)

    @classmethod
    def from_backlogs(cls, q_bits, z, symbols_per_slot, unit_bits=1.0, time_share=1):
        """Weights so that ``w_k * ln(1 + sinr)`` equals backlog times bits served.

        Backlogs and bits are both counted in ``unit_bits``; ``time_share``
        divides the weights for OMA's 1/K share of the slot.
        """
        q = np.asarray(q_bits, dtype=float) / unit_bits
        scale = symbols_per_slot / unit_bits / math.log(2.0) / time_share
        return cls(q * scale, float(z))

    def __len__(self):
        return len(self.w)


@dataclass(frozen=True)
class CandidateSet:
    pi: np.ndarray  # ascending, pi[0] == 0

    def __len__(self):
        return len(self.pi)


@dataclass
class DpTable:
    H: np.ndarray      # (L, K) best G_k with S_k = pi_l
    back: np.ndarray   # (L, K) predecessor index l' (0-based); column 0 unused
    evaluations: int   # number of f_k evaluations


def candidate_bound(k: int) -> int:
    return k * (k - 1) // 2 + k + 2


def marginal_gain_f(k, prefix, p, weights: EffectiveWeights, gains, eta):
    """Contribution of sorted user ``k`` (0-based) given the power of stronger users.

    Vectorizes over ``prefix`` and ``p``.
    """
    g = gains[k]
    return weights.w[k] * np.log1p(p * g / (prefix * g + eta)) - weights.z * p


def build_candidate_set(weights: EffectiveWeights, gains, eta: float, p_max: float) -> CandidateSet:
    w = weights.w
    g = np.asarray(gains, dtype=float)
    z = weights.z
    k = len(w)
    vals = [0.0, p_max]
    with np.errstate(divide="ignore", invalid="ignore"):
        i, j = np.triu_indices(k, 1)
        pair = eta * (g[j] * w[j] - g[i] * w[i]) / (g[i] * g[j] * (w[i] - w[j]))
        level = w / z - eta / g if z > 0 else np.full(k, np.inf)
    cand = np.concatenate((vals, pair, level))
    cand = cand[np.isfinite(cand) & (cand >= 0.0) & (cand <= p_max)]
    cand.sort()
    keep = np.concatenate(([True], np.diff(cand) > 1e-12 * p_max))
    pi = cand[keep]
    if len(pi) > candidate_bound(k):
        raise AssertionError(f"candidate set has {len(pi)} points, bound is {candidate_bound(k)}")
    return CandidateSet(pi)


def solve_with_table(weights: EffectiveWeights, gains, eta: float, p_max: float):
    """Run the recursion; returns ``(powers_sorted, objective, CandidateSet, DpTable)``."""
    g = np.asarray(gains, dtype=float)
    k_users = len(weights)
    if g.shape != (k_users,):
        raise ValueError(f"{k_users} weights but gains of shape {g.shape}")
    if k_users > 1 and np.any(np.diff(g) > 0):
        raise ValueError("gains must be sorted in non-increasing order")

    cands = build_candidate_set(weights, g, eta, p_max)
    pi = cands.pi
    L = len(pi)
    H = np.empty((L, k_users))
    back = np.zeros((L, k_users), dtype=np.intp)

    H[:, 0] = marginal_gain_f(0, 0.0, pi, weights, g, eta)
    evaluations = L

    if k_users > 1:
        # rows: predecessor prefix pi_l', columns: current prefix pi_l
        step = pi[None, :] - pi[:, None]
        invalid = np.tril(np.ones((L, L), dtype=bool), -1)
        step[invalid] = 0.0
        # the power price carries the l' <= l mask: +inf below the diagonal
        price = weights.z * step
        price[invalid] = np.inf
        buf = np.empty(L * L)
        # column blocks: block [c0, c1) only needs predecessor rows [0, c1)
        edges = np.unique(np.linspace(0, L, 9).astype(int)) if L > 64 else np.array([0, L])
        for k in range(1, k_users):
            scale = (g[k] / (pi * g[k] + eta))[:, None]
            prev = H[:, k - 1][:, None]
            for c0, c1 in zip(edges[:-1], edges[1:]):
                total = buf[: c1 * (c1 - c0)].reshape(c1, c1 - c0)
                # f_k(pi_l', pi_l - pi_l') plus H(l', k-1), in place
                np.multiply(step[:c1, c0:c1], scale[:c1], out=total)
                np.log1p(total, out=total)
                total *= weights.w[k]
                total -= price[:c1, c0:c1]
                total += prev[:c1]
                # argmax returns the first maximum, i.e. the smallest l'
                best = np.argmax(total, axis=0)
                back[c0:c1, k] = best
                H[c0:c1, k] = total[best, np.arange(c1 - c0)]
            evaluations += L * (L + 1) // 2

    l_star = int(np.argmax(H[:, -1]))
    powers = np.empty(k_users)
    l = l_star
    for k in range(k_users - 1, 0, -1):
        l0 = back[l, k]
        powers[k] = pi[l] - pi[l0]
        l = l0
    powers[0] = pi[l]
    powers = np.maximum(powers, 0.0)
    return powers, float(H[l_star, -1]), cands, DpTable(H, back, evaluations)


def dppa_solve(weights: EffectiveWeights, gains, eta: float, p_max: float, perm=None) -> PowerAllocation:
    """Optimal power allocation for sorted users.

    With ``perm`` (the descending-gain permutation of the original users)
    the powers are returned in original user order; otherwise in the
    sorted order of ``gains``.
    """
    powers, obj, _, _ = solve_with_table(weights, gains, eta, p_max)
    return PowerAllocation(unsort(powers, perm), obj)


def unsort(values_sorted, perm):
    if perm is None:
        return values_sorted
    out = np.empty_like(values_sorted)
    out[perm] = values_sorted
    return out


def objective_value(powers, weights: EffectiveWeights, gains, eta: float) -> float:
    """Objective of a sorted-order allocation, evaluated directly from the powers."""
    p = np.asarray(getattr(powers, "powers", powers), dtype=float)
    prefix = np.concatenate(([0.0], np.cumsum(p)[:-1]))
    g = np.asarray(gains, dtype=float)
    return float(np.sum(weights.w * np.log1p(p * g / (prefix * g + eta))) - weights.z * np.sum(p))
