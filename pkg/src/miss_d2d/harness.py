"""Scenario generation, metrics, and the batch experiment driver."""
from __future__ import annotations

import json
import math
import os
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import baselines
from .channel import build_gain_table, cue_sinr, due_sinr, shannon_rate
from .miss import MissConfig, run_miss
from .model import Assignment, Cue, DuePair, RadioParams, Scenario, noise_power

CSV_COLUMNS = (
    "algorithm",
    "m",
    "instance",
    "throughput_bps",
    "throughput_bps_hz_per_cue",
    "throughput_bps_hz_system",
    "due_total_power_w",
    "permitted_fraction",
    "runtime_s",
)

DEFAULT_ALGORITHMS = ("miss", "greedy-fixed", "single-share", "no-reuse")


@dataclass(frozen=True)
class MetricsReport:
    """Metrics of one (algorithm, scenario) run.

    The two normalizations answer "bit/s/Hz of what": per_cue divides the
    total by the mean per-CUE bandwidth (per-RB spectral efficiency),
    system divides by the summed bandwidth of all CUEs.
    """

    algorithm: str
    m: int
    instance_index: int
    system_throughput_bps: float
    throughput_bps_hz_per_cue: float
    throughput_bps_hz_system: float
    due_total_power_w: float
    permitted_due_fraction: float
    runtime_s: float

    def row(self) -> tuple:
        return (
            self.algorithm,
            self.m,
            self.instance_index,
            self.system_throughput_bps,
            self.throughput_bps_hz_per_cue,
            self.throughput_bps_hz_system,
            self.due_total_power_w,
            self.permitted_due_fraction,
            self.runtime_s,
        )


@dataclass(frozen=True)
class ExperimentConfig:
    m_values: tuple[int, ...] = (40,)
    due_ratio: float = 4.0
    instances: int = 100
    rng_seed: int = 1
    radio: RadioParams = field(default_factory=RadioParams)
    miss: MissConfig = field(default_factory=MissConfig)
    algorithms: tuple[str, ...] = DEFAULT_ALGORITHMS
    output_path: str | None = None
    min_bs_distance_m: float = 1.0

    def __post_init__(self) -> None:
        if not self.m_values:
            raise ValueError("m_values must be non-empty")
        if any(m < 1 for m in self.m_values):
            raise ValueError("every m must be >= 1")
        if self.instances < 1:
            raise ValueError("instances must be >= 1")
        if self.due_ratio < 0:
            raise ValueError("due_ratio must be >= 0")
        unknown = set(self.algorithms) - set(DEFAULT_ALGORITHMS)
        if unknown:
            raise ValueError(f"unknown algorithms {sorted(unknown)}")


def instance_seed(master_seed: int, m: int, instance: int) -> np.random.SeedSequence:
    """Scenario seeds are a pure function of (master, m, instance), so the
    algorithm selection never perturbs the generated scenarios."""
    return np.random.SeedSequence([master_seed, m, instance])


def _disk_points(
    rng: np.random.Generator, count: int, radius: float, min_radius: float
) -> np.ndarray:
    pts = np.empty((count, 2))
    for i in range(count):
        while True:
            r = radius * math.sqrt(rng.uniform())
            if r >= min_radius:
                break
        theta = rng.uniform(0.0, 2.0 * math.pi)
        pts[i] = (r * math.cos(theta), r * math.sin(theta))
    return pts


def generate_scenario(
    m: int,
    ratio: float,
    radio: RadioParams,
    rng: np.random.Generator,
    min_bs_distance_m: float = 1.0,
) -> Scenario:
    """Random single-cell instance, base station at the origin.

    CUEs and DUE transmitters fall uniformly over the disk (re-sampled
    inside the minimum base-station distance, which guards the path-loss
    singularity); each DUE receiver sits at the configured pair distance
    in a uniformly random direction, re-sampled if it leaves the disk or
    lands inside the guard radius. Deterministic given the rng state.
    """
    n = int(round(ratio * m))
    radius = radio.cell_radius_m
    sigma = noise_power(radio.noise_spectral_density_dbm_hz, radio.rb_bandwidth_hz)

    cue_pos = _disk_points(rng, m, radius, min_bs_distance_m)
    due_tx = _disk_points(rng, n, radius, min_bs_distance_m)
    due_rx = np.empty((n, 2))
    sep = radio.due_pair_distance_m
    for i in range(n):
        while True:
            ang = rng.uniform(0.0, 2.0 * math.pi)
            rx = (due_tx[i, 0] + sep * math.cos(ang), due_tx[i, 1] + sep * math.sin(ang))
            dist_bs = math.hypot(*rx)
            if dist_bs <= radius and dist_bs >= min_bs_distance_m:
                due_rx[i] = rx
                break

    gains = build_gain_table(cue_pos, due_tx, due_rx)
    cues = tuple(
        Cue(
            id=c,
            position=(float(cue_pos[c, 0]), float(cue_pos[c, 1])),
            bandwidth_hz=radio.rb_bandwidth_hz,
            tx_power_w=radio.cue_power_w,
            noise_power_w=sigma,
        )
        for c in range(m)
    )
    dues = tuple(
        DuePair(
            id=d,
            tx_position=(float(due_tx[d, 0]), float(due_tx[d, 1])),
            rx_position=(float(due_rx[d, 0]), float(due_rx[d, 1])),
            noise_power_w=sigma,
        )
        for d in range(n)
    )
    return Scenario(radio=radio, cues=cues, due_pairs=dues, gains=gains)


def compute_metrics(
    sc: Scenario,
    assignment: Assignment,
    runtime_s: float,
    algorithm: str = "",
    m: int | None = None,
    instance_index: int = 0,
) -> MetricsReport:
    """System throughput, total DUE power, permitted fraction.

    Throughput sums the Shannon rate of every CUE and every granted DUE
    that meets its own SINR threshold; unsatisfied users contribute zero.
    A granted DUE's rate uses its host CUE's bandwidth.
    """
    gamma_c = sc.radio.cue_sinr_threshold
    gamma_d = sc.radio.due_sinr_threshold
    throughput = 0.0
    for c in range(sc.m):
        members = [(d, assignment.due_power_w[d]) for d in sorted(assignment.reuse_sets.get(c, ()))]
        s = cue_sinr(sc, c, members)
        if s >= gamma_c:
            throughput += shannon_rate(sc.cues[c].bandwidth_hz, s)
        for d, p in members:
            others = [(d2, p2) for d2, p2 in members if d2 != d]
            sd = due_sinr(sc, d, p, c, others)
            if sd >= gamma_d:
                throughput += shannon_rate(sc.cues[c].bandwidth_hz, sd)
    granted = assignment.granted()
    total_power = math.fsum(assignment.due_power_w[d] for d in sorted(granted))
    mean_bandwidth = math.fsum(c.bandwidth_hz for c in sc.cues) / sc.m
    system_bandwidth = math.fsum(c.bandwidth_hz for c in sc.cues)
    return MetricsReport(
        algorithm=algorithm,
        m=sc.m if m is None else m,
        instance_index=instance_index,
        system_throughput_bps=throughput,
        throughput_bps_hz_per_cue=throughput / mean_bandwidth,
        throughput_bps_hz_system=throughput / system_bandwidth,
        due_total_power_w=total_power,
        permitted_due_fraction=(len(granted) / sc.n) if sc.n else 0.0,
        runtime_s=runtime_s,
    )


def _algorithm_runner(name: str, cfg: ExperimentConfig) -> Callable[[Scenario], Assignment]:
    if name == "miss":
        return lambda sc: run_miss(sc, cfg.miss)[0]
    if name == "greedy-fixed":
        return lambda sc: baselines.run_baseline_greedy_fixed(sc)
    if name == "single-share":
        return lambda sc: baselines.run_baseline_single_share(sc, beta=cfg.miss.beta)
    if name == "no-reuse":
        return baselines.run_no_reuse
    raise ValueError(f"unknown algorithm {name!r}")


def run_cell(cfg: ExperimentConfig, m: int, instance: int) -> list[MetricsReport]:
    """All configured algorithms on one generated (m, instance) scenario.

    Each algorithm call is timed with a monotonic clock, scenario
    generation excluded; one call runs at a time in this process.
    """
    rng = np.random.default_rng(instance_seed(cfg.rng_seed, m, instance))
    sc = generate_scenario(m, cfg.due_ratio, cfg.radio, rng, cfg.min_bs_distance_m)
    reports = []
    for name in cfg.algorithms:
        runner = _algorithm_runner(name, cfg)
        t0 = time.perf_counter()
        assignment = runner(sc)
        elapsed = time.perf_counter() - t0
        reports.append(
            compute_metrics(sc, assignment, elapsed, algorithm=name, m=m, instance_index=instance)
        )
    return reports


def _run_cell_star(args: tuple[ExperimentConfig, int, int]) -> list[MetricsReport]:
    return run_cell(*args)


def worker_count() -> int:
    """MISS_D2D_THREADS environment override; 0 or unset means serial."""
    raw = os.environ.get("MISS_D2D_THREADS", "0")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ValueError(f"MISS_D2D_THREADS must be an integer, got {raw!r}") from exc
    return max(n, 0)


def run_experiment(cfg: ExperimentConfig) -> list[MetricsReport]:
    """Run the full grid and return per-instance reports in deterministic
    order (m, instance, configured algorithm order).

    Writes CSV or JSON (by output extension) with aggregate mean/std rows
    appended when ``cfg.output_path`` is set. Cells may run in parallel
    (``MISS_D2D_THREADS``); each worker runs one algorithm call at a time,
    so per-call timing stays meaningful.
    """
    if cfg.output_path:
        parent = os.path.dirname(os.path.abspath(cfg.output_path))
        if not os.path.isdir(parent) or not os.access(parent, os.W_OK):
            raise OSError(f"output path {cfg.output_path!r} is not writable")
    cells = [(cfg, m, i) for m in sorted(cfg.m_values) for i in range(cfg.instances)]
    workers = worker_count()
    if workers > 1 and len(cells) > 1:
        import multiprocessing

        with multiprocessing.Pool(workers) as pool:
            per_cell = pool.map(_run_cell_star, cells)
    else:
        per_cell = [_run_cell_star(args) for args in cells]
    reports = [r for cell in per_cell for r in cell]
    if cfg.output_path:
        write_reports(cfg.output_path, reports, cfg.algorithms)
    return reports


def aggregate_rows(reports: Sequence[MetricsReport], algorithms: Sequence[str]) -> list[tuple]:
    """Mean and sample-std rows per (m, algorithm), instance column labeled.

    Sample std uses ddof=1 and reports 0.0 for a single instance.
    """
    out: list[tuple] = []
    m_values = sorted({r.m for r in reports})
    for m in m_values:
        for name in algorithms:
            rows = [r for r in reports if r.m == m and r.algorithm == name]
            if not rows:
                continue
            cols = list(zip(*[r.row()[3:] for r in rows]))
            means = [float(np.mean(col)) for col in cols]
            stds = [float(np.std(col, ddof=1)) if len(rows) > 1 else 0.0 for col in cols]
            out.append((name, m, "mean", *means))
            out.append((name, m, "std", *stds))
    return out


def _format_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_reports(
    path: str, reports: Sequence[MetricsReport], algorithms: Sequence[str] | None = None
) -> None:
    """CSV by default, JSON when the path ends in .json; column order is
    fixed and floats use shortest round-trip formatting, so identical
    reports give identical bytes."""
    if algorithms is None:
        seen: list[str] = []
        for r in reports:
            if r.algorithm not in seen:
                seen.append(r.algorithm)
        algorithms = seen
    rows = [r.row() for r in reports]
    rows += aggregate_rows(reports, algorithms)
    if path.endswith(".json"):
        payload = [dict(zip(CSV_COLUMNS, row)) for row in rows]
        with open(path, "w", encoding="ascii") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    else:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(",".join(CSV_COLUMNS) + "\n")
            for row in rows:
                fh.write(",".join(_format_cell(v) for v in row) + "\n")
