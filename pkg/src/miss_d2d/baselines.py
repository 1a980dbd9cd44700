"""Comparison baselines.

greedy-fixed and single-share are simplified stand-ins inspired by the
published fixed-power and single-sharing schemes they are compared
against; they are labeled approximations, not reproductions. no-reuse
anchors the throughput comparison.
"""
from __future__ import annotations

import math

from .channel import cue_sinr, due_sinr
from .graph import build_conflict_graph
from .model import Assignment, Scenario, dbm_to_watt
from .stackelberg import InfeasiblePricingError, build_instance, solve

FIXED_DUE_POWER_W = dbm_to_watt(10.0)


def run_no_reuse(sc: Scenario) -> Assignment:
    """Every CUE keeps sole use of its blocks; no DUE transmits."""
    asg = Assignment.empty(sc.m)
    asg.marked = set(range(sc.m))
    return asg


def run_baseline_greedy_fixed(
    sc: Scenario,
    due_power_w: float = FIXED_DUE_POWER_W,
    conflict_threshold_m: float | None = None,
) -> Assignment:
    """Fixed-power, smallest-conflict-degree-first multi-sharing greedy.

    DUEs are visited in ascending conflict-graph degree (ties to the lower
    id) and assigned to the feasible CUE with the highest pairwise
    throughput at the fixed powers. Feasibility re-checks every SINR
    constraint the assignment would touch, so the result always passes the
    post-run audit.
    """
    threshold = (
        conflict_threshold_m
        if conflict_threshold_m is not None
        else sc.radio.conflict_distance_m
    )
    gamma_c = sc.radio.cue_sinr_threshold
    gamma_d = sc.radio.due_sinr_threshold
    asg = Assignment.empty(sc.m)
    if sc.n == 0:
        asg.marked = set(range(sc.m))
        return asg

    graph = build_conflict_graph(sc.due_pairs, threshold)
    visit = sorted(range(sc.n), key=lambda d: (graph.degree(d), d))
    for d in visit:
        best_value = 0.0
        best_cue: int | None = None
        for c in range(sc.m):
            members = [(d2, asg.due_power_w[d2]) for d2 in sorted(asg.reuse_sets[c])]
            trial = members + [(d, due_power_w)]
            sinr_c = cue_sinr(sc, c, trial)
            if sinr_c < gamma_c:
                continue
            sinr_d = due_sinr(sc, d, due_power_w, c, members)
            if sinr_d < gamma_d:
                continue
            if any(
                due_sinr(sc, d2, p2, c, [(x, p) for x, p in trial if x != d2]) < gamma_d
                for d2, p2 in members
            ):
                continue
            value = math.log2(1.0 + sinr_c) + math.log2(1.0 + sinr_d)
            if value > best_value:
                best_value = value
                best_cue = c
        if best_cue is not None:
            asg.reuse_sets[best_cue].add(d)
            asg.groups[best_cue].add(d)
            asg.due_power_w[d] = due_power_w
    asg.marked = set(range(sc.m))
    return asg


def run_baseline_single_share(sc: Scenario, beta: float | None = None) -> Assignment:
    """Single-sharing greedy matching with game-priced powers.

    Prices every (CUE, DUE) pair against an empty reuse set, then
    repeatedly grants the feasible pair with the highest pairwise
    throughput, removing both sides; each CUE therefore shares with at
    most one DUE.
    """
    gamma_c = sc.radio.cue_sinr_threshold
    gamma_d = sc.radio.due_sinr_threshold
    asg = Assignment.empty(sc.m)
    candidates: list[tuple[float, int, int, float]] = []  # (-value, c, d, power)
    for c in range(sc.m):
        for d in range(sc.n):
            inst = build_instance(sc, c, d, (), beta=beta)
            try:
                sol = solve(inst)
            except InfeasiblePricingError:
                continue
            sinr_c = cue_sinr(sc, c, [(d, sol.p_star)])
            sinr_d = due_sinr(sc, d, sol.p_star, c, ())
            if sinr_c < gamma_c or sinr_d < gamma_d:
                continue
            value = math.log2(1.0 + sinr_c) + math.log2(1.0 + sinr_d)
            candidates.append((-value, c, d, sol.p_star))
    candidates.sort()
    used_cues: set[int] = set()
    used_dues: set[int] = set()
    for neg_value, c, d, power in candidates:
        if c in used_cues or d in used_dues:
            continue
        used_cues.add(c)
        used_dues.add(d)
        asg.reuse_sets[c].add(d)
        asg.groups[c].add(d)
        asg.due_power_w[d] = power
    asg.marked = set(range(sc.m))
    return asg
