"""Slow, independent solvers for the single-slot power allocation problem.

``kkt_enumerate_solve`` walks every active set and both closures of the
peak-power multiplier (2 * (2^K - 1) closures plus the all-zero point).
``grid_search_solve`` evaluates every point of a uniform simplex grid.
Neither touches the dynamic program.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .channel import dbm_to_watts
from .dppa import EffectiveWeights, objective_value
from .phy import PowerAllocation

MAX_KKT_USERS = 20
MAX_GRID_POINTS = 10**9


def kkt_points(weights: EffectiveWeights, gains, eta: float, p_max: float):
    """Yield ``(support, closure, powers_or_None)`` for every enumerated KKT closure.

    ``powers`` is None when the closure is infeasible or degenerate.
    """
    w = weights.w
    g = np.asarray(gains, dtype=float)
    z = weights.z
    k = len(w)
    for m in range(1, k + 1):
        for support in itertools.combinations(range(k), m):
            # equal marginals between consecutive active users fix the inner prefixes
            inner = []
            for a, b in zip(support[:-1], support[1:]):
                den = g[a] * g[b] * (w[a] - w[b])
                inner.append(eta * (g[b] * w[b] - g[a] * w[a]) / den if den != 0 else math.nan)
            last = support[-1]
            interior = w[last] / z - eta / g[last] if (z > 0 and g[last] > 0) else math.nan
            for closure, top in (("interior", interior), ("boundary", p_max)):
                yield support, closure, _assemble(support, inner + [top], k, p_max)


def _assemble(support, prefixes, k, p_max):
    s = np.asarray(prefixes, dtype=float)
    if not np.all(np.isfinite(s)):
        return None
    if s[0] < 0 or s[-1] > p_max:
        return None
    steps = np.diff(s, prepend=0.0)
    if np.any(steps < 0):
        return None
    p = np.zeros(k)
    p[list(support)] = steps
    return p


def kkt_enumerate_solve(weights: EffectiveWeights, gains, eta: float, p_max: float) -> PowerAllocation:
    k = len(weights)
    if k > MAX_KKT_USERS:
        raise ValueError(f"refusing exhaustive KKT enumeration for K={k} > {MAX_KKT_USERS}")
    best_p = np.zeros(k)
    best = objective_value(best_p, weights, gains, eta)
    for _, _, p in kkt_points(weights, gains, eta, p_max):
        if p is None:
            continue
        val = objective_value(p, weights, gains, eta)
        if val > best:
            best, best_p = val, p
    return PowerAllocation(best_p, best)


def count_kkt_closures(k: int) -> int:
    return 2 * (2**k - 1) + 1


def grid_size(k: int, p_max: float, resolution: float) -> int:
    n = int(math.floor(p_max / resolution + 1e-9))
    return math.comb(n + k, k)


def grid_search_solve(weights: EffectiveWeights, gains, eta: float, p_max: float,
                      resolution: float) -> PowerAllocation:
    k = len(weights)
    if resolution <= 0:
        raise ValueError("resolution must be > 0")
    if k > 4:
        raise ValueError("grid search supports K <= 4")
    if grid_size(k, p_max, resolution) > MAX_GRID_POINTS:
        raise ValueError(f"grid of {grid_size(k, p_max, resolution)} points exceeds {MAX_GRID_POINTS}")

    g = np.asarray(gains, dtype=float)
    w = weights.w
    z = weights.z
    n = int(math.floor(p_max / resolution + 1e-9))
    levels = np.arange(n + 1) * resolution

    def stage(idx, prefix, p):
        return w[idx] * np.log1p(p * g[idx] / (prefix * g[idx] + eta)) - z * p

    if k == 1:
        vals = stage(0, 0.0, levels)
        i = int(np.argmax(vals))
        return PowerAllocation(np.array([levels[i]]), float(vals[i]))

    # enumerate the first K-2 coordinates, vectorize the last two
    a = levels[:, None]
    b = levels[None, :]
    best = -math.inf
    best_p = np.zeros(k)
    for head in itertools.product(range(n + 1), repeat=k - 2):
        used = sum(head)
        if used > n:
            continue
        head_p = levels[list(head)]
        s = 0.0
        val_head = 0.0
        for idx, p in enumerate(head_p):
            val_head += float(stage(idx, s, p))
            s += p
        m = n - used + 1
        pa, pb = a[:m], b[:, :m]
        vals = val_head + stage(k - 2, s, pa) + stage(k - 1, s + pa, pb)
        vals = np.where(np.add.outer(np.arange(m), np.arange(m)) <= n - used, vals, -np.inf)
        i, j = np.unravel_index(int(np.argmax(vals)), vals.shape)
        if vals[i, j] > best:
            best = float(vals[i, j])
            best_p = np.concatenate((head_p, [levels[i], levels[j]]))
    return PowerAllocation(best_p, best)


def lipschitz_bound(weights: EffectiveWeights, gains, eta: float) -> float:
    """Bound on |dF/dp_k| over the feasible box, from the derivative formulas."""
    g = np.asarray(gains, dtype=float)
    return float(np.sum(weights.w * g) / eta + weights.z)


def random_instance(rng: np.random.Generator, k: int, eta: float = dbm_to_watts(-87.0), p_max: float = 2.0):
    """A random power allocation problem, returned as ``(weights, sorted_gains, eta, p_max)``.

    Gains are log-uniform over six decades around the simulator's operating
    range; weights and the power price are log-uniform too, so about a third
    of the draws have more than one active user and a few have none.
    """
    gains = np.sort(10.0 ** rng.uniform(-13.0, -7.0, size=k))[::-1].copy()
    w = 10.0 ** rng.uniform(2.0, 7.0, size=k)
    z = float(10.0 ** rng.uniform(1.0, 7.0))
    return EffectiveWeights(w, z), gains, eta, p_max
