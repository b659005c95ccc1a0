"""Per-slot channel gains: distance pathloss times unit-mean Rayleigh power fading."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def dbm_to_watts(x: float) -> float:
    return 10.0 ** ((x - 30.0) / 10.0)


def watts_to_dbm(p: float) -> float:
    return 10.0 * np.log10(p) + 30.0


@dataclass(frozen=True)
class Topology:
    """Distances (m) from the base station to each user and the pathloss exponent."""

    distances: tuple
    pathloss_exponent: float = 4.0

    def __post_init__(self):
        d = tuple(float(x) for x in self.distances)
        if len(d) < 1:
            raise ValueError("topology needs at least one user")
        if not all(np.isfinite(x) and x > 0 for x in d):
            raise ValueError(f"distances must be finite and > 0, got {d}")
        object.__setattr__(self, "distances", d)

    @property
    def num_users(self) -> int:
        return len(self.distances)

    @property
    def mean_gains(self) -> np.ndarray:
        return np.asarray(self.distances) ** (-self.pathloss_exponent)

    @classmethod
    def line(cls, k: int, near: float = 50.0, far: float = 150.0, pathloss_exponent: float = 4.0) -> "Topology":
        """``k`` users spaced evenly between ``near`` and ``far`` meters (inclusive)."""
        if k < 2:
            raise ValueError("a line topology needs k >= 2")
        return cls(tuple(np.linspace(near, far, k)), pathloss_exponent)


@dataclass(frozen=True)
class ChannelRealization:
    gains: np.ndarray      # original user order
    sort_perm: np.ndarray  # 0-based; gains[sort_perm] is non-increasing

    @property
    def num_users(self) -> int:
        return len(self.gains)

    @property
    def sorted_gains(self) -> np.ndarray:
        return self.gains[self.sort_perm]


def sort_users(gains) -> np.ndarray:
    """Descending-gain order, ties kept in ascending user index (0-based permutation)."""
    g = np.asarray(gains, dtype=float)
    # stable sort on the negated gains keeps equal entries in index order
    return np.argsort(-g, kind="stable")


def make_rng(seed) -> np.random.Generator:
    # PCG64: 128-bit state, reproducible across platforms for a given seed
    return np.random.Generator(np.random.PCG64(seed))


def gains_from_uniforms(topology: Topology, u) -> ChannelRealization:
    """Inverse-CDF exponential fading from uniforms in [0, 1)."""
    u = np.asarray(u, dtype=float)
    if u.shape != (topology.num_users,):
        raise ValueError(f"expected {topology.num_users} uniforms, got shape {u.shape}")
    g0 = -np.log1p(-u)
    gains = g0 * topology.mean_gains
    return ChannelRealization(gains, sort_users(gains))


def sample_gains(topology: Topology, rng: np.random.Generator) -> ChannelRealization:
    return gains_from_uniforms(topology, rng.random(topology.num_users))
