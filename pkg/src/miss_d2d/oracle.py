"""Brute-force grid oracle for the pricing game, plus instance generators.

The oracle re-derives the follower response and the leader utility from
the instance fields alone; it never calls the closed-form solver's
functions, so the two paths stay independent. Used by the verification
suite and the ``oracle-check`` CLI command.
"""
from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .stackelberg import StackelbergInstance, solve

LN2 = math.log(2.0)

# When the upper price endpoint is unavailable (degenerate instance), the
# grid falls back to this multiple of the lower endpoint.
FALLBACK_SPAN = 1e6


class GridBest(NamedTuple):
    alpha: float
    power: float
    u_c: float


def price_interval(inst: StackelbergInstance) -> tuple[float, float]:
    """Feasible price interval: endpoints drive the follower to p_max / p_min."""
    b = 1.0 / LN2
    x = (inst.g_db / inst.g_dd) * (inst.p_c * inst.g_cd + inst.phi)
    lo_den = inst.p_max * inst.g_db + x
    hi_den = inst.p_min * inst.g_db + x
    lo = b / lo_den if lo_den > 0.0 else math.nan
    hi = b / hi_den if hi_den > 0.0 else math.nan
    if not (math.isfinite(lo) and lo > 0.0):
        raise ValueError(f"degenerate price interval for {inst}")
    if not (math.isfinite(hi) and hi > lo):
        hi = lo * FALLBACK_SPAN
    return lo, hi


def grid_best_response(inst: StackelbergInstance, n_grid: int = 10_000) -> GridBest:
    """Exhaustive search over log-spaced prices with the follower response applied."""
    lo, hi = price_interval(inst)
    alphas = np.exp(np.linspace(math.log(lo), math.log(hi), n_grid))
    p_hat = 1.0 / (alphas * inst.g_db * LN2) - (inst.p_c * inst.g_cd + inst.phi) / inst.g_dd
    p = np.clip(p_hat, inst.p_min, inst.p_max)
    u_c = (
        np.log2(1.0 + inst.p_c * inst.g_cb / (p * inst.g_db + inst.omega))
        + inst.beta * alphas * p * inst.g_db
    )
    i = int(np.argmax(u_c))
    return GridBest(float(alphas[i]), float(p[i]), float(u_c[i]))


def _leader_case(inst: StackelbergInstance) -> int:
    a = inst.p_c * inst.g_cb
    x = (inst.g_db / inst.g_dd) * (inst.p_c * inst.g_cd + inst.phi)
    c = inst.omega - x
    if c == 0.0:
        return 1
    if c > 0.0:
        return 3
    if a + c == 0.0:
        return 2
    return 4 if a + c > 0.0 else 5


def random_instance(rng: np.random.Generator, case: int | None = None) -> StackelbergInstance:
    """One pricing instance with log-uniform magnitudes.

    With ``case`` in 1..5 the instance is constructed to land in that
    leader case (sign pattern of C and A+C); cases 1 and 2 hit their
    equalities exactly in floating point.
    """
    p_c = 10.0 ** rng.uniform(-2.0, 0.0)
    g_db = 10.0 ** rng.uniform(-14.0, -9.0)
    g_cd = 10.0 ** rng.uniform(-14.0, -9.0)
    g_dd = 10.0 ** rng.uniform(-9.0, -6.0)
    phi = 10.0 ** rng.uniform(-16.0, -12.0)
    beta = 10.0 ** rng.uniform(-0.5, 0.5)
    p_max = 10.0 ** rng.uniform(-3.0, 0.0)
    p_min = 0.0 if rng.uniform() < 0.5 else p_max * 10.0 ** rng.uniform(-6.0, -1.0)

    # same expression order as the solver, so the constructed sign of
    # C = omega - x survives in floating point
    x = (g_db / g_dd) * (p_c * g_cd + phi)

    if case is None:
        omega = 10.0 ** rng.uniform(-16.0, -12.0)
        g_cb = 10.0 ** rng.uniform(-14.0, -9.0)
    elif case == 1:
        omega = x
        g_cb = 10.0 ** rng.uniform(-14.0, -9.0)
    elif case == 2:
        # A in [x/2, x) makes omega = x - A exact (Sterbenz), hence C = -A exact
        a = x * rng.uniform(0.5, 0.999)
        g_cb = a / p_c
        a = p_c * g_cb
        omega = x - a
    elif case == 3:
        omega = x * 10.0 ** rng.uniform(0.2, 3.0)
        g_cb = 10.0 ** rng.uniform(-14.0, -9.0)
    elif case in (4, 5):
        omega = x / 10.0 ** rng.uniform(0.2, 3.0)
        c_val = omega - x
        k = 10.0 ** rng.uniform(0.05, 3.0) if case == 4 else 10.0 ** rng.uniform(-3.0, -0.05)
        g_cb = k * (-c_val) / p_c
    else:
        raise ValueError(f"case must be 1..5 or None, got {case}")

    return StackelbergInstance(
        p_c=p_c, g_cb=g_cb, g_db=g_db, g_cd=g_cd, g_dd=g_dd,
        phi=phi, omega=omega, beta=beta, p_min=p_min, p_max=p_max,
    )


def stratified_instances(n: int, rng: np.random.Generator) -> list[tuple[int, StackelbergInstance]]:
    """n instances cycling through the five leader cases; returns (case, instance)."""
    out = []
    for i in range(n):
        case = i % 5 + 1
        inst = random_instance(rng, case)
        assert _leader_case(inst) == case, f"generator missed case {case}"
        out.append((case, inst))
    return out


def check_solver_against_grid(
    n_samples: int = 10_000,
    seed: int = 0,
    n_grid: int = 10_000,
    rtol: float = 1e-6,
) -> dict:
    """Run the closed-form solver against the grid oracle on stratified instances.

    Returns a summary dict with the worst relative shortfall (positive when
    the grid beats the solver), the failure count, and the distribution of
    winning candidate origins.
    """
    rng = np.random.default_rng(seed)
    worst = -math.inf
    failures = 0
    origins: dict[str, int] = {}
    cases: dict[int, int] = {}
    for case, inst in stratified_instances(n_samples, rng):
        sol = solve(inst)
        ref = grid_best_response(inst, n_grid)
        shortfall = (ref.u_c - sol.u_c) / max(abs(ref.u_c), 1e-300)
        worst = max(worst, shortfall)
        if shortfall > rtol:
            failures += 1
        origins[sol.candidate_origin] = origins.get(sol.candidate_origin, 0) + 1
        cases[case] = cases.get(case, 0) + 1
    return {
        "samples": n_samples,
        "grid": n_grid,
        "rtol": rtol,
        "worst_shortfall": worst,
        "failures": failures,
        "origins": origins,
        "cases": cases,
    }
