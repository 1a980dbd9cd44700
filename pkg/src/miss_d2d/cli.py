"""Command-line front end: batch runs, single-run traces, solver check.

Config files are TOML (or JSON when the path ends in .json) mirroring the
ExperimentConfig field names. dBm/dB unit conversion happens here; the
library itself works in linear units only.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .harness import (
    DEFAULT_ALGORITHMS,
    ExperimentConfig,
    generate_scenario,
    instance_seed,
    run_experiment,
)
from .miss import MissConfig, run_miss
from .model import RadioParams, db_to_linear, dbm_to_watt
from .oracle import check_solver_against_grid


def _load_config_file(path: str) -> dict:
    if path.endswith(".json"):
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    try:
        import tomllib  # Python >= 3.11
    except ModuleNotFoundError:
        import tomli as tomllib
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _radio_from_dict(raw: dict) -> RadioParams:
    raw = dict(raw)
    unit = raw.pop("sinr_threshold_unit", "linear")
    if unit not in ("linear", "db"):
        raise ValueError(f"sinr_threshold_unit must be 'linear' or 'db', got {unit!r}")
    for watt_key, dbm_key in (
        ("cue_power_w", "cue_power_dbm"),
        ("due_power_min_w", "due_power_min_dbm"),
        ("due_power_max_w", "due_power_max_dbm"),
    ):
        if dbm_key in raw:
            if watt_key in raw:
                raise ValueError(f"give {watt_key} or {dbm_key}, not both")
            raw[watt_key] = dbm_to_watt(raw.pop(dbm_key))
    if unit == "db":
        for key in ("cue_sinr_threshold", "due_sinr_threshold"):
            if key in raw:
                raw[key] = db_to_linear(raw[key])
    return RadioParams(**raw)


def _miss_from_dict(raw: dict) -> MissConfig:
    return MissConfig(**raw)


def load_experiment_config(path: str | None, overrides: argparse.Namespace) -> ExperimentConfig:
    raw = _load_config_file(path) if path else {}
    radio = _radio_from_dict(raw.get("radio", {}))
    miss = _miss_from_dict(raw.get("miss", {}))
    kwargs = {
        "m_values": tuple(raw.get("m_values", (40,))),
        "due_ratio": float(raw.get("due_ratio", 4.0)),
        "instances": int(raw.get("instances", 100)),
        "rng_seed": int(raw.get("rng_seed", 1)),
        "radio": radio,
        "miss": miss,
        "algorithms": tuple(raw.get("algorithms", DEFAULT_ALGORITHMS)),
        "output_path": raw.get("output_path"),
        "min_bs_distance_m": float(raw.get("min_bs_distance_m", 1.0)),
    }
    if getattr(overrides, "m", None):
        kwargs["m_values"] = tuple(int(t) for t in overrides.m.split(","))
    if getattr(overrides, "ratio", None) is not None:
        kwargs["due_ratio"] = overrides.ratio
    if getattr(overrides, "instances", None) is not None:
        kwargs["instances"] = overrides.instances
    if getattr(overrides, "seed", None) is not None:
        kwargs["rng_seed"] = overrides.seed
    if getattr(overrides, "algo", None):
        kwargs["algorithms"] = tuple(overrides.algo.split(","))
    if getattr(overrides, "out", None):
        kwargs["output_path"] = overrides.out
    return ExperimentConfig(**kwargs)


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = load_experiment_config(args.config, args)
    reports = run_experiment(cfg)
    if cfg.output_path:
        print(f"wrote {len(reports)} per-instance rows plus aggregates to {cfg.output_path}")
    else:
        for r in reports:
            print(
                f"{r.algorithm} m={r.m} i={r.instance_index} "
                f"thru={r.system_throughput_bps:.4g} bps "
                f"power={r.due_total_power_w:.4g} W "
                f"permitted={r.permitted_due_fraction:.3f} "
                f"t={r.runtime_s:.3f} s"
            )
    return 0


def _cmd_trace(args: argparse.Namespace) -> int:
    cfg = load_experiment_config(args.config, args)
    m = cfg.m_values[0] if args.m_single is None else args.m_single
    rng = np.random.default_rng(instance_seed(cfg.rng_seed, m, args.instance))
    sc = generate_scenario(m, cfg.due_ratio, cfg.radio, rng, cfg.min_bs_distance_m)
    assignment, trace = run_miss(sc, cfg.miss)
    trace.write(args.out)
    granted = len(assignment.granted())
    print(
        f"m={m} instance={args.instance}: granted {granted}/{sc.n} DUE pairs, "
        f"{len(trace.events)} events, {trace.solver_calls} solver calls -> {args.out}"
    )
    return 0


def _cmd_oracle_check(args: argparse.Namespace) -> int:
    report = check_solver_against_grid(
        n_samples=args.samples, seed=args.seed, n_grid=args.grid, rtol=args.rtol
    )
    print(
        f"samples={report['samples']} grid={report['grid']} "
        f"worst_shortfall={report['worst_shortfall']:.3e} failures={report['failures']}"
    )
    print(f"cases={report['cases']}")
    print(f"origins={report['origins']}")
    ok = report["failures"] == 0
    print("PASS" if ok else "FAIL")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="miss-d2d",
        description="Spectrum-reuse and power-control simulator for multi-sharing D2D uplink",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a batch experiment and export metrics")
    run_p.add_argument("--config", help="TOML or JSON experiment config")
    run_p.add_argument("--m", help="comma-separated CUE counts, e.g. 40,70,110")
    run_p.add_argument("--ratio", type=float, help="DUE pairs per CUE")
    run_p.add_argument("--instances", type=int, help="Monte-Carlo repetitions")
    run_p.add_argument("--seed", type=int, help="master RNG seed")
    run_p.add_argument("--algo", help="comma-separated algorithm subset")
    run_p.add_argument("--out", help="output file (.csv or .json)")
    run_p.set_defaults(func=_cmd_run)

    trace_p = sub.add_parser("trace", help="run MISS once and dump its event trace")
    trace_p.add_argument("--config", help="TOML or JSON experiment config")
    trace_p.add_argument("--m", dest="m_single", type=int, default=None, help="CUE count")
    trace_p.add_argument("--instance", type=int, default=0, help="instance index")
    trace_p.add_argument("--out", required=True, help="trace log path")
    trace_p.set_defaults(func=_cmd_trace, m=None)

    oracle_p = sub.add_parser("oracle-check", help="closed-form solver vs grid search")
    oracle_p.add_argument("--samples", type=int, default=10_000)
    oracle_p.add_argument("--seed", type=int, default=0)
    oracle_p.add_argument("--grid", type=int, default=10_000)
    oracle_p.add_argument("--rtol", type=float, default=1e-6)
    oracle_p.set_defaults(func=_cmd_oracle_check)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
