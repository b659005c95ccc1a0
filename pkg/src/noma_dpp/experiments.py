"""Scenario presets and sweep drivers (V sweeps, scheme comparisons, user-count sweeps)."""

from __future__ import annotations

import csv
import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from .baselines import Policy
from .channel import Topology
from .phy import PhyConfig
from .sim import SimConfig, SimMetrics, run_simulation

ALL_POLICIES = tuple(Policy)
DEFAULT_V_GRID = tuple(float(v) for v in np.logspace(-1, 3, 9))


@dataclass(frozen=True)
class ScenarioPreset:
    name: str
    distances: tuple
    v: float = 30.0
    v_list: tuple = DEFAULT_V_GRID
    policies: tuple = ALL_POLICIES
    horizon: int = 50_000
    seeds: tuple = (0, 1, 2)

    def topology(self) -> Topology:
        return Topology(self.distances)


PRESETS = {
    "scenario1": ScenarioPreset("scenario1", (100.0,) * 5, v=30.0),
    "scenario2": ScenarioPreset("scenario2", (60.0, 80.0, 100.0, 120.0, 140.0), v=30.0),
    "scenario3": ScenarioPreset("scenario3", (20.0, 100.0, 200.0), v=50.0, v_list=(50.0,)),
}
USERCOUNT_K = (5, 10, 20, 40)
USERCOUNT_V = 20.0


def get_preset(name: str) -> ScenarioPreset:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def usercount_preset(k: int, v: float = USERCOUNT_V, **overrides) -> ScenarioPreset:
    topo = Topology.line(k, 50.0, 150.0)
    return replace(ScenarioPreset(f"usercount-k{k}", topo.distances, v=v, v_list=(v,)), **overrides)


@dataclass(frozen=True)
class ReportRow:
    scenario: str
    policy: str
    v: float
    num_users: int
    user: int
    distance_m: float
    rate_mbps: float
    delay_ms: float
    delay_slots: float
    backlog_mbit: float
    utility: float
    avg_power_w: float


@dataclass(frozen=True)
class RunSummary:
    scenario: str
    policy: str
    v: float
    num_users: int
    utility: float
    mean_delay_ms: float      # over all served bits of all users
    total_backlog_mbit: float
    avg_power_w: float
    max_power_w: float
    seeds: tuple


@dataclass
class ComparisonReport:
    rows: list = field(default_factory=list)
    summaries: list = field(default_factory=list)

    def summary(self, policy, v=None, scenario=None) -> RunSummary:
        policy = Policy.parse(policy).value if isinstance(policy, str) else policy.value
        hits = [s for s in self.summaries
                if s.policy == policy and (v is None or s.v == v) and (scenario is None or s.scenario == scenario)]
        if len(hits) != 1:
            raise KeyError(f"{len(hits)} summaries match policy={policy} v={v} scenario={scenario}")
        return hits[0]

    def utility(self, policy, v=None, scenario=None) -> float:
        return self.summary(policy, v, scenario).utility

    def user_rows(self, policy, v=None, scenario=None) -> list:
        s = self.summary(policy, v, scenario)
        return [r for r in self.rows if (r.scenario, r.policy, r.v) == (s.scenario, s.policy, s.v)]

    def gains(self) -> list:
        """NOMA_OPT utility gain and delay ratio against every other policy, per (scenario, V)."""
        out = []
        keys = sorted({(s.scenario, s.v, s.num_users) for s in self.summaries}, key=lambda t: (t[2], t[0], t[1]))
        for scenario, v, k in keys:
            try:
                opt = self.summary(Policy.NOMA_OPT, v, scenario)
            except KeyError:
                continue
            for s in self.summaries:
                if s.scenario != scenario or s.v != v or s.policy == Policy.NOMA_OPT.value:
                    continue
                ratio = opt.mean_delay_ms / s.mean_delay_ms if s.mean_delay_ms > 0 else float("nan")
                out.append(GainRow(scenario, v, k, s.policy, opt.utility - s.utility, ratio))
        return out

    def to_csv(self, path) -> None:
        write_rows(path, SUMMARY_COLUMNS, ([getattr(r, c) for c in SUMMARY_COLUMNS] for r in self.rows))

    def gains_to_csv(self, path) -> None:
        write_rows(path, GAIN_COLUMNS, ([getattr(r, c) for c in GAIN_COLUMNS] for r in self.gains()))


@dataclass(frozen=True)
class GainRow:
    scenario: str
    v: float
    num_users: int
    baseline: str
    utility_gain: float
    delay_ratio: float


SUMMARY_COLUMNS = ("scenario", "policy", "v", "num_users", "user", "distance_m", "rate_mbps",
                   "delay_ms", "delay_slots", "backlog_mbit", "utility", "avg_power_w")
GAIN_COLUMNS = ("scenario", "v", "num_users", "baseline", "utility_gain", "delay_ratio")


def _fmt(x):
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


def write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(header)
        for r in rows:
            out.writerow([_fmt(x) for x in r])


def _run_point(args) -> SimMetrics:
    phy, distances, policy, v, horizon, seed = args
    cfg = SimConfig(phy=phy, topology=Topology(distances), v=v, policy=policy, horizon=horizon, seed=seed)
    return run_simulation(cfg)


def _collect(preset: ScenarioPreset, v_list, policies, horizon, seeds, phy, workers) -> ComparisonReport:
    phy = phy or PhyConfig()
    policies = tuple(Policy.parse(p) if isinstance(p, str) else p for p in policies)
    jobs = [(phy, preset.distances, pol, float(v), horizon, seed)
            for pol, v, seed in itertools.product(policies, v_list, seeds)]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_point, jobs))
    else:
        results = [_run_point(j) for j in jobs]
    by_key = {}
    for job, res in zip(jobs, results):
        by_key.setdefault((job[2], job[3]), []).append(res)

    report = ComparisonReport()
    for pol, v in itertools.product(policies, v_list):
        add_runs(report, preset.name, preset.distances, pol, float(v), by_key[(pol, float(v))], phy, seeds)
    return report


def add_runs(report: ComparisonReport, scenario: str, distances, policy: Policy, v: float,
             runs, phy: PhyConfig, seeds) -> None:
    """Average seed replicas of one (policy, V) point into per-user rows and a summary."""
    k = len(distances)
    rate = np.mean([m.rate_mbps for m in runs], axis=0)
    delay_slots = np.mean([m.avg_delay_slots for m in runs], axis=0)
    backlog = np.mean([m.backlog_mbit for m in runs], axis=0)
    utility = float(np.mean([m.utility for m in runs]))
    power = float(np.mean([m.avg_power for m in runs]))
    slot_ms = phy.slot * 1e3
    for i in range(k):
        report.rows.append(ReportRow(
            scenario, policy.value, v, k, i + 1, float(distances[i]),
            float(rate[i]), float(delay_slots[i] * slot_ms), float(delay_slots[i]),
            float(backlog[i]), utility, power,
        ))
    report.summaries.append(RunSummary(
        scenario, policy.value, v, k, utility,
        float(np.mean([m.mean_delay_slots for m in runs]) * slot_ms),
        float(np.sum(backlog)), power, float(max(m.max_power for m in runs)), tuple(seeds),
    ))


def run_v_sweep(preset: ScenarioPreset, v_list=None, *, policies=None, horizon=None, seeds=None,
                phy=None, workers=1) -> ComparisonReport:
    """Every (policy, V) pair of the preset, averaged over its seeds."""
    return _collect(
        preset,
        tuple(v_list if v_list is not None else preset.v_list),
        policies if policies is not None else preset.policies,
        horizon or preset.horizon,
        tuple(seeds if seeds is not None else preset.seeds),
        phy,
        workers,
    )


def run_comparison(preset: ScenarioPreset, v=None, **kwargs) -> ComparisonReport:
    return run_v_sweep(preset, [preset.v if v is None else v], **kwargs)


def run_usercount_sweep(k_list=USERCOUNT_K, v=USERCOUNT_V, **kwargs) -> ComparisonReport:
    """Users evenly spaced over 50-150 m for each K; one merged report."""
    merged = ComparisonReport()
    for k in k_list:
        if k < 2:
            raise ValueError(f"user-count sweep needs K >= 2, got {k}")
        part = run_comparison(usercount_preset(k, v), v, **kwargs)
        merged.rows.extend(part.rows)
        merged.summaries.extend(part.summaries)
    return merged


def spearman(x, y) -> float:
    return float(stats.spearmanr(x, y).statistic)
