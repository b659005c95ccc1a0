"""Slotted closed loop: channel draw, drift-plus-penalty controller, queue updates.

Bits are integers throughout the queue bookkeeping (deliverable bits are
floored, admitted bits are floored) so that backlog conservation and the
FIFO delay ledger are exact.
"""

from __future__ import annotations

import collections
import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import baselines
from .baselines import Policy
from .channel import ChannelRealization, Topology, make_rng, sample_gains
from .dppa import EffectiveWeights, dppa_solve, unsort
from .phy import PhyConfig, PowerAllocation, noma_rates, oma_rates
from .rate_control import LogUtility, UtilityFunction, optimal_rate


@dataclass
class SimConfig:
    phy: PhyConfig = field(default_factory=PhyConfig)
    topology: Topology = field(default_factory=lambda: Topology((100.0,) * 5))
    utility: UtilityFunction = field(default_factory=LogUtility)
    v: float = 30.0
    policy: Policy = Policy.NOMA_OPT
    horizon: int = 50_000
    seed: int = 0
    keep_traces: bool = False

    def __post_init__(self):
        self.policy = Policy.parse(self.policy) if isinstance(self.policy, str) else self.policy
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        if not (self.v >= 0 and math.isfinite(self.v)):
            raise ValueError(f"V must be finite and >= 0, got {self.v}")


@dataclass
class SlotState:
    q: list            # backlog in bits, per user (python ints)
    z: float = 0.0     # power debt, watt-slots
    t: int = 0
    fifo: list = None  # per user deque of [arrival_slot, bits]

    @classmethod
    def empty(cls, k: int) -> "SlotState":
        return cls([0] * k, 0.0, 0, [collections.deque() for _ in range(k)])


def controller_step(state: SlotState, chan: ChannelRealization, cfg: SimConfig):
    """Admission rates (integer bits) and powers (original user order) for one slot."""
    phy = cfg.phy
    k = chan.num_users
    rates = [int(math.floor(optimal_rate(q, cfg.v, cfg.utility, phy.r_max))) for q in state.q]
    alloc = allocate(cfg.policy, state, chan, phy, cfg.utility.unit_bits)
    if alloc.powers.shape != (k,):
        raise RuntimeError("allocator returned a power vector of the wrong size")
    return rates, alloc


def allocate(policy: Policy, state: SlotState, chan: ChannelRealization, phy: PhyConfig,
             unit_bits: float) -> PowerAllocation:
    k = chan.num_users
    perm = chan.sort_perm
    gains = chan.gains[perm]
    q_sorted = np.asarray(state.q, dtype=float)[perm]
    if policy is Policy.NOMA_OPT:
        w = EffectiveWeights.from_backlogs(q_sorted, state.z, phy.symbols_per_slot, unit_bits)
        return dppa_solve(w, gains, phy.noise, phy.p_max, perm=perm)
    if policy is Policy.OMA:
        w = EffectiveWeights.from_backlogs(q_sorted, state.z, phy.symbols_per_slot, unit_bits, time_share=k)
        a = baselines.oma_allocate(w, gains, phy.noise, phy.p_max)
        return PowerAllocation(unsort(a.powers, perm), a.objective)
    if policy is Policy.SINGLE:
        w = EffectiveWeights.from_backlogs(q_sorted, state.z, phy.symbols_per_slot, unit_bits)
        a = baselines.single_allocate(w, gains, phy.noise, phy.p_max)
        return PowerAllocation(unsort(a.powers, perm), a.objective)
    if policy is Policy.NOMA_EQ:
        return baselines.eq_allocate(k, phy.p_mean)
    if policy is Policy.NOMA_PRO_Q:
        return baselines.proq_allocate(state.q, phy.p_mean)
    raise ValueError(f"unhandled policy {policy}")


def advance_queues(state: SlotState, admitted, capacity, total_power: float, p_mean: float) -> tuple:
    """Serve, then admit: Q <- [Q - b]^+ + R, Z <- [Z + sum p - P_mean]^+.

    ``capacity`` is the integer bits the channel could carry. Returns the
    new state and the per-user ``(served_bits, delay_bit_slots)`` lists.
    The FIFO ledgers are advanced in place and shared with the new state.
    """
    t = state.t
    new_q = []
    served = []
    delays = []
    for i, q in enumerate(state.q):
        b = capacity[i]
        fifo = state.fifo[i]
        out = min(q, b)
        left = out
        acc = 0
        while left > 0:
            batch = fifo[0]
            take = min(left, batch[1])
            acc += take * (t - batch[0])
            batch[1] -= take
            left -= take
            if batch[1] == 0:
                fifo.popleft()
        r = admitted[i]
        if r > 0:
            fifo.append([t, r])
        new_q.append(max(q - b, 0) + r)
        served.append(out)
        delays.append(acc)
    z = max(state.z + total_power - p_mean, 0.0)
    return SlotState(new_q, z, t + 1, state.fifo), served, delays


@dataclass
class SimMetrics:
    avg_rate_bits: np.ndarray       # time-average admitted bits per slot
    avg_served_bits: np.ndarray
    avg_backlog_bits: np.ndarray
    avg_delay_slots: np.ndarray     # bit-weighted over served bits
    avg_power: float                # W
    max_power: float                # largest per-slot total, W
    utility: float
    horizon: int
    slot: float
    unit_bits: float
    final_z: float
    max_z: float
    delay_bit_slots: float = 0.0    # summed over users
    served_total: float = 0.0
    traces: dict = None

    @property
    def rate_mbps(self) -> np.ndarray:
        return self.avg_rate_bits / self.slot / 1e6

    @property
    def delay_ms(self) -> np.ndarray:
        return self.avg_delay_slots * self.slot * 1e3

    @property
    def backlog_mbit(self) -> np.ndarray:
        return self.avg_backlog_bits / 1e6

    @property
    def mean_delay_slots(self) -> float:
        """Delay averaged over every served bit of every user."""
        return self.delay_bit_slots / max(self.served_total, 1.0)


def run_simulation(cfg: SimConfig) -> SimMetrics:
    topo = cfg.topology
    phy = cfg.phy
    k = topo.num_users
    rng = make_rng(cfg.seed)
    state = SlotState.empty(k)
    oma = cfg.policy.uses_oma_phy
    rate_fn = oma_rates if oma else noma_rates

    admitted_sum = np.zeros(k)
    served_sum = np.zeros(k)
    backlog_sum = np.zeros(k)
    delay_sum = np.zeros(k)
    power_sum = 0.0
    max_power = 0.0
    max_z = 0.0

    tr = None
    if cfg.keep_traces:
        T = cfg.horizon
        tr = {
            "q": np.zeros((T + 1, k), dtype=np.int64),
            "admitted": np.zeros((T, k), dtype=np.int64),
            "served": np.zeros((T, k), dtype=np.int64),
            "capacity": np.zeros((T, k), dtype=np.int64),
            "power": np.zeros((T, k)),
            "z": np.zeros(T + 1),
        }

    for t in range(cfg.horizon):
        chan = sample_gains(topo, rng)
        admitted, alloc = controller_step(state, chan, cfg)
        capacity = np.floor(rate_fn(alloc, chan, phy)).astype(np.int64).tolist()
        total_power = alloc.total

        backlog_sum += state.q
        prev_q = state.q
        state, served, delays = advance_queues(state, admitted, capacity, total_power, phy.p_mean)

        admitted_sum += admitted
        served_sum += served
        delay_sum += delays
        power_sum += total_power
        max_power = max(max_power, total_power)
        max_z = max(max_z, state.z)
        if tr is not None:
            tr["q"][t] = prev_q
            tr["admitted"][t] = admitted
            tr["served"][t] = served
            tr["capacity"][t] = capacity
            tr["power"][t] = alloc.powers
            tr["z"][t + 1] = state.z
    if tr is not None:
        tr["q"][cfg.horizon] = state.q

    T = cfg.horizon
    avg_rate = admitted_sum / T
    unit = cfg.utility.unit_bits
    metrics = SimMetrics(
        avg_rate_bits=avg_rate,
        avg_served_bits=served_sum / T,
        avg_backlog_bits=backlog_sum / T,
        avg_delay_slots=np.divide(delay_sum, served_sum, out=np.zeros(k), where=served_sum > 0),
        avg_power=power_sum / T,
        max_power=max_power,
        utility=float(sum(cfg.utility.value(r / unit) for r in avg_rate)),
        horizon=T,
        slot=phy.slot,
        unit_bits=unit,
        final_z=state.z,
        max_z=max_z,
        delay_bit_slots=float(delay_sum.sum()),
        served_total=float(served_sum.sum()),
        traces=tr,
    )
    return metrics


TRACE_COLUMNS = ("t", "user", "q_bits", "admitted_bits", "capacity_bits", "power_w", "z")


def write_trace_csv(metrics: SimMetrics, path) -> None:
    tr = metrics.traces
    if tr is None:
        raise ValueError("run was made without keep_traces")
    T, k = tr["admitted"].shape
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(TRACE_COLUMNS)
        for t in range(T):
            for i in range(k):
                out.writerow([t, i + 1, int(tr["q"][t, i]), int(tr["admitted"][t, i]),
                              int(tr["capacity"][t, i]), f"{tr['power'][t, i]:.6g}", f"{tr['z'][t]:.6g}"])
