"""Deliverable bits per slot under superposition coding with SIC, and under time-shared OMA."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelRealization, dbm_to_watts


@dataclass(frozen=True)
class PhyConfig:
    bandwidth: float = 20e6                       # Hz
    slot: float = 0.05                            # s
    noise: float = field(default_factory=lambda: dbm_to_watts(-87.0))  # W
    p_max: float = field(default_factory=lambda: dbm_to_watts(33.0))   # W
    p_mean: float = field(default_factory=lambda: dbm_to_watts(30.0))  # W
    r_max: float = 15e6                           # bits per slot

    def __post_init__(self):
        for name in ("bandwidth", "slot", "noise", "p_max", "p_mean", "r_max"):
            val = getattr(self, name)
            if not (np.isfinite(val) and val > 0):
                raise ValueError(f"{name} must be finite and > 0, got {val}")
        if self.p_mean > self.p_max:
            raise ValueError(f"p_mean ({self.p_mean} W) exceeds p_max ({self.p_max} W)")

    @property
    def symbols_per_slot(self) -> float:
        return self.bandwidth * self.slot


@dataclass
class PowerAllocation:
    powers: np.ndarray
    objective: float = float("nan")

    @property
    def total(self) -> float:
        return float(np.sum(self.powers))


def _check(powers, chan: ChannelRealization) -> np.ndarray:
    p = np.asarray(powers, dtype=float)
    if p.shape != chan.gains.shape:
        raise ValueError(f"power vector shape {p.shape} does not match {chan.gains.shape} channel gains")
    return p


def noma_rates(alloc, chan: ChannelRealization, phy: PhyConfig) -> np.ndarray:
    """Bits per slot for each user, original user order.

    Users are decoded in descending-gain order; user ``s(i)`` sees the
    power of every stronger user ``s(1..i-1)`` as interference.
    """
    p = _check(getattr(alloc, "powers", alloc), chan)
    perm = chan.sort_perm
    ps = p[perm]
    gs = chan.gains[perm]
    interference = np.concatenate(([0.0], np.cumsum(ps)[:-1])) * gs
    bits_sorted = phy.symbols_per_slot * np.log2(1.0 + ps * gs / (interference + phy.noise))
    bits = np.empty_like(bits_sorted)
    bits[perm] = bits_sorted
    return bits


def oma_rates(alloc, chan: ChannelRealization, phy: PhyConfig) -> np.ndarray:
    p = _check(getattr(alloc, "powers", alloc), chan)
    k = len(p)
    return phy.symbols_per_slot / k * np.log2(1.0 + p * chan.gains / phy.noise)
