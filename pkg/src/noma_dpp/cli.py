"""Command-line front end: single-instance solves, oracle checks, runs and sweeps.

Config files are INI documents with the sections ``[phy]``, ``[scenario]``,
``[control]`` and ``[output]``. Every key is optional; unknown keys are
rejected. Exit codes: 0 success, 1 configuration or I/O error, 2 solver failure.
"""

from __future__ import annotations

import argparse
import configparser
import io
import json
import math
import os
import sys
from dataclasses import dataclass, fields, replace

import numpy as np

from .baselines import Policy
from .channel import Topology, dbm_to_watts, make_rng, sort_users
from .dppa import EffectiveWeights, solve_with_table, unsort
from .experiments import (DEFAULT_V_GRID, PRESETS, USERCOUNT_K, USERCOUNT_V, ComparisonReport,
                          add_runs, get_preset, run_usercount_sweep, run_v_sweep)
from .oracle import MAX_KKT_USERS, kkt_enumerate_solve, random_instance
from .phy import PhyConfig
from .sim import SimConfig, run_simulation, write_trace_csv


class ConfigError(ValueError):
    pass


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class RunConfig:
    """A run as written in the config file, in file units (MHz, ms, dBm, Mbit)."""

    bandwidth_mhz: float = 20.0
    slot_ms: float = 50.0
    noise_dbm: float = -87.0
    p_max_dbm: float = 33.0
    p_mean_dbm: float = 30.0
    r_max_mbit: float = 15.0
    scenario: str = "scenario1"
    distances_m: tuple | None = None
    v: float | None = None
    policy: str = Policy.NOMA_OPT.value
    horizon: int = 50_000
    seed: int = 0
    output_dir: str = "."
    traces: bool = False

    @property
    def phy(self) -> PhyConfig:
        return PhyConfig(
            bandwidth=self.bandwidth_mhz * 1e6,
            slot=self.slot_ms * 1e-3,
            noise=dbm_to_watts(self.noise_dbm),
            p_max=dbm_to_watts(self.p_max_dbm),
            p_mean=dbm_to_watts(self.p_mean_dbm),
            r_max=self.r_max_mbit * 1e6,
        )

    @property
    def distances(self) -> tuple:
        return self.distances_m if self.distances_m is not None else get_preset(self.scenario).distances

    @property
    def scenario_name(self) -> str:
        return "custom" if self.distances_m is not None else self.scenario

    @property
    def effective_v(self) -> float:
        if self.v is not None:
            return self.v
        return PRESETS[self.scenario].v if self.distances_m is None else 30.0

    @property
    def sim(self) -> SimConfig:
        return self.to_sim_config()

    def to_sim_config(self, policy=None, seed=None) -> SimConfig:
        return SimConfig(
            phy=self.phy,
            topology=Topology(self.distances),
            v=self.effective_v,
            policy=policy if policy is not None else self.policy,
            horizon=self.horizon,
            seed=self.seed if seed is None else seed,
            keep_traces=self.traces,
        )


# (section, key) -> RunConfig field
_KEYS = {
    ("phy", "bandwidth_mhz"): "bandwidth_mhz",
    ("phy", "slot_ms"): "slot_ms",
    ("phy", "noise_dbm"): "noise_dbm",
    ("phy", "p_max_dbm"): "p_max_dbm",
    ("phy", "p_mean_dbm"): "p_mean_dbm",
    ("phy", "r_max_mbit"): "r_max_mbit",
    ("scenario", "name"): "scenario",
    ("scenario", "distances_m"): "distances_m",
    ("control", "v"): "v",
    ("control", "policy"): "policy",
    ("control", "horizon"): "horizon",
    ("control", "seed"): "seed",
    ("output", "dir"): "output_dir",
    ("output", "traces"): "traces",
}
_BOOLS = {"true": True, "yes": True, "1": True, "on": True,
          "false": False, "no": False, "0": False, "off": False}


def _convert(field_name: str, raw: str, key: str):
    raw = raw.strip()
    try:
        if field_name == "distances_m":
            d = tuple(float(x) for x in raw.split(",") if x.strip())
            if not d or not all(math.isfinite(x) and x > 0 for x in d):
                raise ValueError("need one or more positive distances")
            return d
        if field_name in ("horizon", "seed"):
            return int(raw)
        if field_name == "traces":
            return _BOOLS[raw.lower()]
        if field_name == "policy":
            return Policy.parse(raw).value
        if field_name in ("scenario", "output_dir"):
            return raw
        x = float(raw)
        if not math.isfinite(x):
            raise ValueError("not finite")
        return x
    except (ValueError, KeyError) as e:
        raise ConfigError(f"{key}: invalid value {raw!r} ({e})") from None


def parse_config(source="") -> RunConfig:
    """Parse a config from a path or from INI text; the empty string gives the defaults.

    A ``str`` is read as a path when it names an existing file.
    """
    text = source
    if isinstance(source, os.PathLike) or (isinstance(source, str) and os.path.isfile(source)):
        try:
            with open(source) as fh:
                text = fh.read()
        except OSError as e:
            raise ConfigError(f"cannot read config {os.fspath(source)!r}: {e}") from None
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"malformed config: {e}") from None

    values = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            name = _KEYS.get((section, key))
            if name is None:
                raise ConfigError(f"unknown key [{section}] {key}")
            values[name] = _convert(name, raw, f"[{section}] {key}")
    if "scenario" in values and "distances_m" in values:
        raise ConfigError("[scenario] takes either name or distances_m, not both")
    cfg = RunConfig(**values)
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    positive = ("bandwidth_mhz", "slot_ms", "r_max_mbit", "horizon")
    for name in positive:
        if getattr(cfg, name) <= 0:
            raise ConfigError(f"{name} must be > 0, got {getattr(cfg, name)}")
    if cfg.p_mean_dbm > cfg.p_max_dbm:
        raise ConfigError(f"p_mean_dbm ({cfg.p_mean_dbm}) exceeds p_max_dbm ({cfg.p_max_dbm})")
    if cfg.v is not None and cfg.v < 0:
        raise ConfigError(f"v must be >= 0, got {cfg.v}")
    if cfg.seed < 0:
        raise ConfigError(f"seed must be >= 0, got {cfg.seed}")
    if cfg.distances_m is not None and cfg.scenario != RunConfig.scenario:
        raise ConfigError("[scenario] takes either name or distances_m, not both")
    if cfg.distances_m is None and cfg.scenario not in PRESETS:
        raise ConfigError(f"scenario name {cfg.scenario!r} is not one of {sorted(PRESETS)}")


def emit_config(cfg: RunConfig) -> str:
    """INI text that parses back to exactly ``cfg``."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    by_field = {f: k for k, f in _KEYS.items()}
    for f in fields(RunConfig):
        value = getattr(cfg, f.name)
        if value is None or (f.name == "scenario" and cfg.distances_m is not None):
            continue
        section, key = by_field[f.name]
        if not parser.has_section(section):
            parser.add_section(section)
        if f.name == "distances_m":
            text = ", ".join(repr(x) for x in value)
        elif isinstance(value, bool):
            text = "true" if value else "false"
        else:
            text = repr(value) if isinstance(value, float) else str(value)
        parser.set(section, key, text)
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def _policies(arg, default):
    if not arg:
        return default
    try:
        return tuple(Policy.parse(p) for p in arg.split(",") if p.strip())
    except ValueError as e:
        raise ConfigError(str(e)) from None


def _floats(arg, name):
    try:
        return tuple(float(x) for x in arg.split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"{name}: expected comma-separated numbers, got {arg!r}") from None


def _ints(arg, name):
    try:
        return tuple(int(x) for x in arg.split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"{name}: expected comma-separated integers, got {arg!r}") from None


def _output_dir(path: str) -> str:
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as e:
        raise ConfigError(f"cannot create output directory {path!r}: {e}") from None
    if not os.access(path, os.W_OK):
        raise ConfigError(f"output directory {path!r} is not writable")
    return path


def _write_report(report: ComparisonReport, out_dir: str, gains: bool = False) -> list:
    paths = [os.path.join(out_dir, "summary.csv")]
    report.to_csv(paths[0])
    if gains:
        paths.append(os.path.join(out_dir, "gains.csv"))
        report.gains_to_csv(paths[1])
    return paths


def load_instance(path: str) -> dict:
    """Read a single-slot instance (JSON) and build sorted weights and gains."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read instance {path!r}: {e}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"instance {path!r} is not valid JSON: {e}") from None
    try:
        gains = np.asarray(doc["gains"], dtype=float)
        z = float(doc.get("z", 0.0))
        p_max = float(doc["p_max"])
        eta = float(doc["eta"])
        if "weights" in doc:
            w = np.asarray(doc["weights"], dtype=float)
        else:
            q = np.asarray(doc["backlogs"], dtype=float)
            symbols = float(doc.get("bandwidth_hz", 20e6)) * float(doc.get("slot_s", 0.05))
            unit = float(doc.get("unit_bits", 1e6))
            w = EffectiveWeights.from_backlogs(q, z, symbols, unit).w
    except KeyError as e:
        raise ConfigError(f"instance is missing {e.args[0]!r}") from None
    except (TypeError, ValueError) as e:
        raise ConfigError(f"bad instance value: {e}") from None
    if gains.ndim != 1 or w.shape != gains.shape or len(gains) == 0:
        raise ConfigError("gains and backlogs/weights must be non-empty lists of equal length")
    if np.any(gains <= 0) or p_max <= 0 or eta <= 0:
        raise ConfigError("gains, p_max and eta must be > 0")
    perm = sort_users(gains)
    try:
        weights = EffectiveWeights(w[perm], z)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    return {"weights": weights, "gains": gains[perm], "perm": perm, "eta": eta, "p_max": p_max}


def cmd_solve(args) -> int:
    inst = load_instance(args.instance)
    w, g, eta, p_max = inst["weights"], inst["gains"], inst["eta"], inst["p_max"]
    powers, obj, cands, table = solve_with_table(w, g, eta, p_max)
    if not math.isfinite(obj):
        raise SolverError(f"non-finite objective {obj}")
    print("powers_w: " + " ".join(f"{p:.9g}" for p in unsort(powers, inst["perm"])))
    print("sorted_order: " + " ".join(str(i + 1) for i in inst["perm"]))
    print("prefix_sums_w: " + " ".join(f"{s:.9g}" for s in np.cumsum(powers)))
    print(f"objective: {obj:.12g}")
    print(f"candidates: {len(cands)}")
    print(f"evaluations: {table.evaluations}")
    if args.verify:
        if len(w) > MAX_KKT_USERS:
            raise ConfigError(f"--verify supports at most {MAX_KKT_USERS} users")
        ref = kkt_enumerate_solve(w, g, eta, p_max)
        gap = ref.objective - obj
        print(f"oracle_objective: {ref.objective:.12g}")
        print(f"gap: {gap:.3e}")
        if gap > 1e-9 * max(abs(ref.objective), 1.0):
            print("oracle found a better point", file=sys.stderr)
            return 2
    return 0


def cmd_verify(args) -> int:
    rng = make_rng(args.seed)
    ks = _ints(args.k_list, "--k-list")
    if not ks or min(ks) < 1 or max(ks) > MAX_KKT_USERS:
        raise ConfigError(f"--k-list entries must lie in [1, {MAX_KKT_USERS}]")
    worst = 0.0
    failures = 0
    for i in range(args.instances):
        k = ks[i % len(ks)]
        w, g, eta, p_max = random_instance(rng, k)
        got = solve_with_table(w, g, eta, p_max)[1]
        ref = kkt_enumerate_solve(w, g, eta, p_max).objective
        rel = abs(got - ref) / max(abs(ref), 1.0)
        worst = max(worst, rel)
        if rel > args.tol:
            failures += 1
    print(f"instances: {args.instances}")
    print(f"max_relative_gap: {worst:.3e}")
    print(f"failures: {failures}")
    return 2 if failures else 0


def _run_config(args) -> RunConfig:
    if args.config and not os.path.isfile(args.config):
        raise ConfigError(f"config file {args.config!r} not found")
    cfg = parse_config(args.config) if args.config else RunConfig()
    overrides = {}
    if args.preset:
        if args.preset not in PRESETS:
            raise ConfigError(f"unknown preset {args.preset!r}; choose from {sorted(PRESETS)}")
        overrides.update(scenario=args.preset, distances_m=None)
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.horizon is not None:
        overrides["horizon"] = args.horizon
    if args.v is not None:
        overrides["v"] = args.v
    if args.out is not None:
        overrides["output_dir"] = args.out
    if args.traces:
        overrides["traces"] = True
    cfg = replace(cfg, **overrides)
    validate(cfg)
    return cfg


def cmd_run(args) -> int:
    cfg = _run_config(args)
    policies = _policies(args.policies, (Policy.parse(cfg.policy),))
    out_dir = _output_dir(cfg.output_dir)
    report = ComparisonReport()
    for pol in policies:
        m = run_simulation(cfg.to_sim_config(policy=pol))
        if not np.all(np.isfinite(m.avg_rate_bits)):
            raise SolverError(f"{pol.value}: non-finite rates")
        add_runs(report, cfg.scenario_name, cfg.distances, pol, float(cfg.effective_v), [m], cfg.phy, (cfg.seed,))
        if cfg.traces:
            name = "trace.csv" if len(policies) == 1 else f"trace_{pol.value}.csv"
            write_trace_csv(m, os.path.join(out_dir, name))
    for p in _write_report(report, out_dir):
        print(p)
    return 0


def cmd_sweep_v(args) -> int:
    preset = get_preset(args.preset) if args.preset in PRESETS else None
    if preset is None:
        raise ConfigError(f"unknown preset {args.preset!r}; choose from {sorted(PRESETS)}")
    v_list = _floats(args.v_list, "--v-list") if args.v_list else DEFAULT_V_GRID
    out_dir = _output_dir(args.out)
    report = run_v_sweep(preset, v_list, policies=_policies(args.policies, preset.policies),
                         horizon=args.horizon, seeds=_seeds(args, preset.seeds), workers=args.workers)
    for p in _write_report(report, out_dir, gains=True):
        print(p)
    return 0


def cmd_sweep_k(args) -> int:
    ks = _ints(args.k_list, "--k-list") if args.k_list else USERCOUNT_K
    if min(ks) < 2:
        raise ConfigError("--k-list entries must be >= 2")
    out_dir = _output_dir(args.out)
    report = run_usercount_sweep(ks, args.v, policies=_policies(args.policies, tuple(Policy)),
                                 horizon=args.horizon, seeds=_seeds(args, (0, 1, 2)), workers=args.workers)
    for p in _write_report(report, out_dir, gains=True):
        print(p)
    return 0


def _seeds(args, default):
    if args.seeds:
        return _ints(args.seeds, "--seeds")
    if args.seed is not None:
        return (args.seed,)
    return default


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="noma-dpp", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve one power allocation instance (JSON)")
    s.add_argument("instance")
    s.add_argument("--verify", action="store_true", help="also run the exhaustive KKT oracle")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("verify", help="compare the solver with the KKT oracle on random instances")
    s.add_argument("--instances", type=int, default=1000)
    s.add_argument("--k-list", default="2,3,4")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--tol", type=float, default=1e-9)
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("run", help="simulate one configuration and write summary.csv")
    s.add_argument("--config", help="INI config file")
    s.add_argument("--preset", help=f"scenario preset: {', '.join(PRESETS)}")
    s.add_argument("--policies", help="comma-separated policies (default: the config's policy)")
    s.add_argument("--seed", type=int)
    s.add_argument("--horizon", type=int)
    s.add_argument("--v", type=float)
    s.add_argument("--out", help="output directory")
    s.add_argument("--traces", action="store_true", help="also write per-slot trace CSV")
    s.set_defaults(func=cmd_run)

    for name, func in (("sweep-v", cmd_sweep_v), ("sweep-k", cmd_sweep_k)):
        s = sub.add_parser(name)
        if name == "sweep-v":
            s.add_argument("preset", help=f"one of {', '.join(PRESETS)}")
            s.add_argument("--v-list", help="comma-separated V values (default: 9 log-spaced in [0.1, 1000])")
        else:
            s.add_argument("--k-list", help="comma-separated user counts (default: 5,10,20,40)")
            s.add_argument("--v", type=float, default=USERCOUNT_V)
        s.add_argument("--policies")
        s.add_argument("--horizon", type=int)
        s.add_argument("--seed", type=int, help="single seed (overrides the preset's seeds)")
        s.add_argument("--seeds", help="comma-separated seeds")
        s.add_argument("--workers", type=int, default=1)
        s.add_argument("--out", default=".")
        s.set_defaults(func=func)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (SolverError, AssertionError, ArithmeticError, RuntimeError) as e:
        print(f"solver failure: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
