"""The MISS reuse-and-power-control algorithm.

One main-loop iteration per CUE: pick the largest unmarked group, take a
maximal independent set of its conflict subgraph as admission candidates,
run best-fit rounds (re-check members, admit the highest pairwise
throughput), then re-home leftovers to other groups. Every admission and
re-check prices the DUE with the closed-form game from
:mod:`miss_d2d.stackelberg`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Iterable, NamedTuple

import numpy as np

from .channel import cue_sinr, due_sinr, scenario_view
from .graph import build_conflict_graph, maximal_independent_set, remove_vertices
from .model import Assignment, Scenario
from .stackelberg import InfeasiblePricingError, _solve_batch, _solve_floats


@dataclass(frozen=True)
class MissConfig:
    """Knobs for one run.

    rounds_l: best-fit rounds per group. A numeric value runs exactly that
    many rounds (each admits at most one pair, so it also caps how many
    pairs one CUE accepts per pass); "auto" uses |candidates| + |members|
    at loop entry with an early stop once a round moves nothing. The
    numeric default keeps repeated member re-pricing from escalating
    everyone's power (each re-price reacts to the others' interference),
    which unbounded rounds provably do in large groups. beta /
    conflict_threshold_m default to the scenario radio values when None.
    mis_scope="group" restricts the independent set to the group's own
    members; "global" takes it over the whole remaining graph.
    """

    rounds_l: int | str = 6
    conflict_threshold_m: float | None = None
    beta: float | None = None
    tie_break: str = "lowest-id"
    mis_scope: str = "group"
    conflict_distance_mode: str = "min_endpoint"

    def __post_init__(self) -> None:
        if isinstance(self.rounds_l, str):
            if self.rounds_l != "auto":
                raise ValueError(f"rounds_l must be a positive int or 'auto', got {self.rounds_l!r}")
        elif self.rounds_l < 1:
            raise ValueError(f"rounds_l must be >= 1, got {self.rounds_l}")
        if self.tie_break != "lowest-id":
            raise ValueError(f"only 'lowest-id' tie breaking is implemented, got {self.tie_break!r}")
        if self.mis_scope not in ("group", "global"):
            raise ValueError(f"mis_scope must be 'group' or 'global', got {self.mis_scope!r}")


@dataclass(frozen=True)
class TraceEvent:
    """One structured record; fields not applying to a kind stay None."""

    kind: str
    iteration: int
    round: int | None = None
    due: int | None = None
    cue: int | None = None
    to_cue: int | None = None
    alpha: float | None = None
    power: float | None = None
    u_c: float | None = None
    u_d: float | None = None
    value: float | None = None
    members: tuple[int, ...] | None = None
    powers: tuple[float, ...] | None = None


_INT_FIELDS = {"iteration", "round", "due", "cue", "to_cue"}
_FLOAT_FIELDS = {"alpha", "power", "u_c", "u_d", "value"}


@dataclass
class MissTrace:
    """Event log of one run; replaying it reproduces the final assignment."""

    events: list[TraceEvent] = field(default_factory=list)
    solver_calls: int = 0

    def add(self, kind: str, iteration: int, **kw) -> None:
        self.events.append(TraceEvent(kind=kind, iteration=iteration, **kw))

    def of_kind(self, *kinds: str) -> list[TraceEvent]:
        return [e for e in self.events if e.kind in kinds]

    def to_log_lines(self) -> list[str]:
        lines = [f"solver_calls={self.solver_calls}"]
        for e in self.events:
            parts = [f"event={e.kind}", f"iter={e.iteration}"]
            for f in fields(e):
                if f.name in ("kind", "iteration"):
                    continue
                v = getattr(e, f.name)
                if v is None:
                    continue
                if f.name in _FLOAT_FIELDS:
                    parts.append(f"{f.name}={v!r}")
                elif f.name == "members":
                    parts.append("members=" + ",".join(str(i) for i in v))
                elif f.name == "powers":
                    parts.append("powers=" + ",".join(repr(p) for p in v))
                else:
                    parts.append(f"{f.name}={v}")
            lines.append(" ".join(parts))
        return lines

    def write(self, path: str) -> None:
        with open(path, "w", encoding="ascii") as fh:
            fh.write("\n".join(self.to_log_lines()) + "\n")

    @staticmethod
    def parse_log_lines(lines: Iterable[str]) -> "MissTrace":
        trace = MissTrace()
        for line in lines:
            line = line.strip()
            if not line:
                continue
            if line.startswith("solver_calls="):
                trace.solver_calls = int(line.split("=", 1)[1])
                continue
            kw: dict = {}
            for token in line.split(" "):
                key, raw = token.split("=", 1)
                if key == "event":
                    kw["kind"] = raw
                elif key == "iter":
                    kw["iteration"] = int(raw)
                elif key in _INT_FIELDS:
                    kw[key] = int(raw)
                elif key in _FLOAT_FIELDS:
                    kw[key] = float(raw)
                elif key == "members":
                    kw["members"] = tuple(int(t) for t in raw.split(",")) if raw else ()
                elif key == "powers":
                    kw["powers"] = tuple(float(t) for t in raw.split(",")) if raw else ()
                else:
                    raise ValueError(f"unknown trace field {key!r}")
            trace.events.append(TraceEvent(**kw))
        return trace

    @staticmethod
    def read(path: str) -> "MissTrace":
        with open(path, "r", encoding="ascii") as fh:
            return MissTrace.parse_log_lines(fh)


class PairwisePick(NamedTuple):
    due: int
    p_star: float
    value: float
    alpha: float
    u_c: float
    u_d: float


def sheer_rate(sc: Scenario, c: int, d: int, p_star: float) -> float:
    """Combined CUE+DUE throughput (bit/s) assuming d is the sole reuser."""
    v = scenario_view(sc)
    p_c = v.cue_power[c]
    cue_term = math.log2(
        1.0 + p_c * v.g_cb[c] / (v.cue_noise[c] + p_star * v.g_db[d])
    )
    due_term = math.log2(
        1.0 + p_star * v.g_dd[d][d] / (v.due_noise[d] + p_c * v.g_cd[c][d])
    )
    return v.cue_bandwidth[c] * (cue_term + due_term)


def who_gives_max_sheer_rate(
    sc: Scenario,
    d: int,
    candidate_cues: Iterable[int],
    beta: float | None = None,
    trace: MissTrace | None = None,
    cache: dict[tuple[int, int], tuple[bool, float, float]] | None = None,
) -> int | None:
    """The candidate CUE maximizing the sheer rate, or None.

    Each candidate is priced with an empty reuse set; CUEs whose own SINR
    with d at that power would drop below threshold are skipped. None is a
    valid outcome: d simply joins no group. The empty-set game depends
    only on (c, d), so ``cache`` (keyed by that pair) lets repeated calls
    such as re-homing reuse earlier pricings.
    """
    v = scenario_view(sc)
    gamma_c = sc.radio.cue_sinr_threshold
    p_min = sc.radio.due_power_min_w
    p_max = sc.radio.due_power_max_w
    eff_beta = sc.radio.beta if beta is None else beta
    g_db_d = v.g_db[d]
    noise_d = v.due_noise[d]
    best_rate = 0.0
    best_cue: int | None = None
    for c in sorted(candidate_cues):
        entry = cache.get((c, d)) if cache is not None else None
        if entry is None:
            if trace is not None:
                trace.solver_calls += 1
            try:
                _, p_star, _, _, _ = _solve_floats(
                    v.cue_power[c], v.g_cb[c], g_db_d, v.g_cd[c][d], v.g_dd[d][d],
                    noise_d, v.cue_noise[c], eff_beta, p_min, p_max,
                )
            except InfeasiblePricingError:
                entry = (False, 0.0, 0.0)
            else:
                # same arithmetic as cue_sinr(sc, c, [(d, p_star)])
                sinr_c = v.cue_power[c] * v.g_cb[c] / (p_star * g_db_d + v.cue_noise[c])
                if sinr_c >= gamma_c:
                    entry = (True, sheer_rate(sc, c, d, p_star), p_star)
                else:
                    entry = (False, 0.0, p_star)
            if cache is not None:
                cache[(c, d)] = entry
        feasible, rate, _ = entry
        if feasible and rate > best_rate:
            best_rate = rate
            best_cue = c
    return best_cue


# below this candidate count the admission scan prices candidates one by
# one; above it, a vectorized pass ranks them first
_BATCH_MIN = 12


def max_pairwise_thru(
    sc: Scenario,
    lambda_c: Iterable[int],
    c: int,
    delta_members: list[tuple[int, float]],
    beta: float | None = None,
    trace: MissTrace | None = None,
) -> PairwisePick | None:
    """Best admission candidate by pairwise throughput, or None.

    Each candidate is priced against the current members; its pairwise
    throughput is the two-log sum when both the CUE's and the candidate's
    SINR requirements hold at the priced power, else zero. A zero maximum
    means nothing is admittable this round.

    Large candidate sets are ranked with the vectorized solver first; the
    winner is then re-evaluated through the scalar path, so the returned
    power and feasibility decisions are identical to a scalar scan (the
    two paths agree to rounding error, which can only matter on exact
    utility ties).
    """
    v = scenario_view(sc)
    gamma_c = sc.radio.cue_sinr_threshold
    gamma_d = sc.radio.due_sinr_threshold
    p_min = sc.radio.due_power_min_w
    p_max = sc.radio.due_power_max_w
    eff_beta = sc.radio.beta if beta is None else beta
    g_db = v.g_db
    g_dd = v.g_dd
    g_cd_c = v.g_cd[c]
    p_c = v.cue_power[c]
    g_cb_c = v.g_cb[c]
    noise_c = v.cue_noise[c]
    members = sorted(delta_members)
    # omega accumulates exactly like build_instance's member loop
    omega = 0.0
    for d2, p2 in members:
        omega += p2 * g_db[d2]
    omega += noise_c

    def evaluate(d: int) -> PairwisePick | None:
        # phi and the DUE-side interference share the same member products;
        # both sums run in ascending member order, matching build_instance
        # and due_sinr exactly
        phi = 0.0
        interf = p_c * g_cd_c[d]
        g_dd_diag = g_dd[d][d]
        for d2, p2 in members:
            t = p2 * g_dd[d2][d]
            phi += t
            interf += t
        phi += v.due_noise[d]
        try:
            alpha, p_star, u_c, u_d, _ = _solve_floats(
                p_c, g_cb_c, g_db[d], g_cd_c[d], g_dd_diag,
                phi, omega, eff_beta, p_min, p_max,
            )
        except InfeasiblePricingError:
            return None
        sinr_d = p_star * g_dd_diag / (interf + v.due_noise[d])
        if sinr_d < gamma_d:
            return None
        # CUE-side sum mirrors cue_sinr with d inserted at its sorted slot
        acc = 0.0
        placed = False
        for d2, p2 in members:
            if not placed and d < d2:
                acc += p_star * g_db[d]
                placed = True
            acc += p2 * g_db[d2]
        if not placed:
            acc += p_star * g_db[d]
        sinr_c = p_c * g_cb_c / (acc + noise_c)
        if sinr_c < gamma_c:
            return None
        value = math.log2(1.0 + sinr_c) + math.log2(1.0 + sinr_d)
        return PairwisePick(d, p_star, value, alpha, u_c, u_d)

    lam_sorted = sorted(lambda_c)
    if trace is not None:
        trace.solver_calls += len(lam_sorted)

    if len(lam_sorted) >= _BATCH_MIN:
        g = sc.gains
        lam_idx = np.array(lam_sorted)
        g_db_v = g.due_tx_to_bs[lam_idx]
        g_dd_v = g.due_tx_to_due_rx[lam_idx, lam_idx]
        g_cd_v = g.cue_to_due_rx[c, lam_idx]
        noise_d_v = v.due_noise_np[lam_idx]
        if members:
            mem_idx = np.array([d2 for d2, _ in members])
            mem_pow = np.array([p2 for _, p2 in members])
            phi_v = mem_pow @ g.due_tx_to_due_rx[np.ix_(mem_idx, lam_idx)] + noise_d_v
        else:
            phi_v = noise_d_v
        _, p_v, _ = _solve_batch(
            p_c, g_cb_c, g_db_v, g_cd_v, g_dd_v, phi_v, omega, eff_beta, p_min, p_max
        )
        sig = p_c * g_cb_c
        sinr_c_v = sig / (p_v * g_db_v + omega)
        sinr_d_v = p_v * g_dd_v / (p_c * g_cd_v + phi_v)
        value_v = np.where(
            (sinr_c_v >= gamma_c) & (sinr_d_v >= gamma_d),
            np.log2(1.0 + sinr_c_v) + np.log2(1.0 + sinr_d_v),
            0.0,
        )
        for j in np.argsort(-value_v, kind="stable"):
            if value_v[j] <= 0.0:
                return None
            pick = evaluate(lam_sorted[int(j)])
            if pick is not None:
                if trace is not None:
                    trace.solver_calls += 1
                return pick
        return None

    best: PairwisePick | None = None
    for d in lam_sorted:
        pick = evaluate(d)
        if pick is not None and (best is None or pick.value > best.value):
            best = pick
    return best


def _empty_game_table(
    sc: Scenario, beta: float, trace: MissTrace
) -> dict[tuple[int, int], tuple[bool, float, float]]:
    """Vectorized prefill of the empty-reuse-set pricing cache.

    Entry (c, d) holds (cue-SINR feasible, sheer rate, priced power), the
    same quantities the scalar path in who_gives_max_sheer_rate computes.
    One solver evaluation per (c, d) pair.
    """
    m, n = sc.m, sc.n
    if m == 0 or n == 0:
        return {}
    v = scenario_view(sc)
    g = sc.gains
    gamma_c = sc.radio.cue_sinr_threshold
    p_cue = v.cue_power_np[:, None]
    g_cb = g.cue_to_bs[:, None]
    noise_c = v.cue_noise_np[:, None]
    noise_d = v.due_noise_np[None, :]
    g_db = g.due_tx_to_bs[None, :]
    g_dd = np.diagonal(g.due_tx_to_due_rx)[None, :]
    _, p, _ = _solve_batch(
        p_cue, g_cb, g_db, g.cue_to_due_rx, g_dd, noise_d, noise_c,
        beta, sc.radio.due_power_min_w, sc.radio.due_power_max_w,
    )
    trace.solver_calls += m * n
    sinr_c = p_cue * g_cb / (p * g_db + noise_c)
    feasible = sinr_c >= gamma_c
    bandwidth = np.array(v.cue_bandwidth)[:, None]
    due_term = np.log2(1.0 + p * g_dd / (noise_d + p_cue * g.cue_to_due_rx))
    rate = bandwidth * (np.log2(1.0 + sinr_c) + due_term)
    rate = np.where(feasible, rate, 0.0)
    return {
        (c, d): (bool(feasible[c, d]), float(rate[c, d]), float(p[c, d]))
        for c in range(m)
        for d in range(n)
    }


def _finalize_group(
    sc: Scenario,
    c: int,
    order: list[int],
    powers: dict[int, float],
    trace: MissTrace,
    iteration: int,
) -> None:
    """Evict members until the group satisfies both SINR constraints.

    The best-fit rounds re-check members only at the top of a round, so a
    final admission or re-pricing can leave a stale violation. Each pass
    evicts one member (the largest base-station interferer when the CUE
    constraint fails, else the worst-margin violator) and re-checks;
    interference only shrinks, so this terminates. Usually a no-op.
    """
    gamma_c = sc.radio.cue_sinr_threshold
    gamma_d = sc.radio.due_sinr_threshold
    g_db = sc.gains.due_tx_to_bs
    while order:
        members = [(d, powers[d]) for d in sorted(order)]
        victim: int | None = None
        if cue_sinr(sc, c, members) < gamma_c:
            victim = max(order, key=lambda d: (powers[d] * float(g_db[d]), -d))
        else:
            worst_margin = math.inf
            for d, p in members:
                others = [(d2, p2) for d2, p2 in members if d2 != d]
                margin = due_sinr(sc, d, p, c, others) / gamma_d
                if margin < 1.0 and margin < worst_margin:
                    worst_margin = margin
                    victim = d
        if victim is None:
            return
        order.remove(victim)
        trace.add("finalize_evict", iteration, due=victim, cue=c, power=powers.pop(victim))


def run_miss(sc: Scenario, config: MissConfig | None = None) -> tuple[Assignment, MissTrace]:
    """Run the full algorithm on one scenario.

    Deterministic: identical scenario and config give an identical
    assignment and trace. The scenario is never mutated.
    """
    cfg = config or MissConfig()
    beta = cfg.beta if cfg.beta is not None else sc.radio.beta
    threshold = (
        cfg.conflict_threshold_m
        if cfg.conflict_threshold_m is not None
        else sc.radio.conflict_distance_m
    )
    trace = MissTrace()
    view = scenario_view(sc)
    empty_game = _empty_game_table(sc, beta, trace)

    groups: dict[int, set[int]] = {c: set() for c in range(sc.m)}
    unmarked = set(range(sc.m))
    for d in range(sc.n):
        c_star = who_gives_max_sheer_rate(sc, d, unmarked, beta, trace, empty_game)
        if c_star is not None:
            groups[c_star].add(d)
        trace.add("join", -1, due=d, cue=c_star)

    graph = build_conflict_graph(sc.due_pairs, threshold, cfg.conflict_distance_mode)

    delta: dict[int, set[int]] = {c: set() for c in range(sc.m)}
    order: dict[int, list[int]] = {c: [] for c in range(sc.m)}  # admission order
    powers: dict[int, float] = {}

    iteration = 0
    while unmarked:
        c = max(unmarked, key=lambda x: (len(groups[x]), -x))
        if cfg.mis_scope == "group":
            lam = maximal_independent_set(graph.induced(groups[c] & graph.vertices))
        else:
            lam = maximal_independent_set(graph)
        trace.add("select", iteration, cue=c, members=tuple(sorted(lam)))

        if cfg.rounds_l == "auto":
            round_cap = max(1, len(lam) + len(delta[c]))
        else:
            round_cap = int(cfg.rounds_l)

        g_dd = view.g_dd
        g_db = view.g_db
        g_cd_c = view.g_cd[c]
        p_c = view.cue_power[c]
        g_cb_c = view.g_cb[c]
        noise_c = view.cue_noise[c]
        gamma_d = sc.radio.due_sinr_threshold
        p_lo = sc.radio.due_power_min_w
        p_hi = sc.radio.due_power_max_w

        for rnd in range(round_cap):
            moved = False  # an eviction or admission happened this round
            member_ids = sorted(delta[c])
            for d in list(order[c]):
                # phi/omega and the SINR re-check mirror build_instance and
                # due_sinr term for term (d excluded from all three sums);
                # powers are read live because earlier repricings apply
                phi = 0.0
                omega = 0.0
                interf = p_c * g_cd_c[d]
                for d2 in member_ids:
                    if d2 == d:
                        continue
                    p2 = powers[d2]
                    t = p2 * g_dd[d2][d]
                    phi += t
                    interf += t
                    omega += p2 * g_db[d2]
                phi += view.due_noise[d]
                omega += noise_c
                trace.solver_calls += 1
                alpha, p_new, _, _, _ = _solve_floats(
                    p_c, g_cb_c, g_db[d], g_cd_c[d], g_dd[d][d],
                    phi, omega, beta, p_lo, p_hi,
                )
                sinr_d = p_new * g_dd[d][d] / (interf + view.due_noise[d])
                if sinr_d < gamma_d:
                    delta[c].remove(d)
                    order[c].remove(d)
                    powers.pop(d)
                    lam.add(d)
                    moved = True
                    member_ids = sorted(delta[c])
                    trace.add("evict", iteration, round=rnd, due=d, cue=c,
                              alpha=alpha, power=p_new)
                elif p_new != powers[d]:
                    powers[d] = p_new
                    trace.add("power", iteration, round=rnd, due=d, cue=c,
                              alpha=alpha, power=p_new)

            members = [(d, powers[d]) for d in sorted(delta[c])]
            pick = max_pairwise_thru(sc, lam, c, members, beta, trace)
            if pick is not None:
                lam.remove(pick.due)
                delta[c].add(pick.due)
                order[c].append(pick.due)
                powers[pick.due] = pick.p_star
                if cfg.mis_scope == "global" and pick.due not in groups[c]:
                    for g2 in groups.values():
                        g2.discard(pick.due)
                    groups[c].add(pick.due)
                moved = True
                trace.add("admit", iteration, round=rnd, due=pick.due, cue=c,
                          alpha=pick.alpha, power=pick.p_star,
                          u_c=pick.u_c, u_d=pick.u_d, value=pick.value)
            if cfg.rounds_l == "auto" and not moved:
                break

        _finalize_group(sc, c, order[c], powers, trace, iteration)
        delta[c] = set(order[c])

        unmarked.discard(c)
        for d in sorted(groups[c] - delta[c]):
            groups[c].remove(d)
            c2 = who_gives_max_sheer_rate(sc, d, unmarked, beta, trace, empty_game)
            if c2 is not None:
                groups[c2].add(d)
            else:
                if d in graph.vertices:
                    graph = remove_vertices(graph, {d})
            trace.add("rehome", iteration, due=d, cue=c, to_cue=c2)
        graph = remove_vertices(graph, delta[c] & graph.vertices)
        trace.add("mark", iteration, cue=c,
                  members=tuple(sorted(delta[c])),
                  powers=tuple(powers[d] for d in sorted(delta[c])))
        iteration += 1

    assignment = Assignment(
        reuse_sets={c: set(delta[c]) for c in range(sc.m)},
        due_power_w=dict(powers),
        groups={c: set(groups[c]) for c in range(sc.m)},
        marked=set(range(sc.m)),
    )
    return assignment, trace


def replay_trace(m: int, trace: MissTrace) -> Assignment:
    """Rebuild the final assignment from trace events alone (no solver)."""
    groups: dict[int, set[int]] = {c: set() for c in range(m)}
    delta: dict[int, set[int]] = {c: set() for c in range(m)}
    powers: dict[int, float] = {}
    marked: set[int] = set()
    for e in trace.events:
        if e.kind == "join":
            if e.cue is not None:
                groups[e.cue].add(e.due)
        elif e.kind == "admit":
            for g2 in groups.values():
                g2.discard(e.due)
            groups[e.cue].add(e.due)
            delta[e.cue].add(e.due)
            powers[e.due] = e.power
        elif e.kind == "power":
            powers[e.due] = e.power
        elif e.kind in ("evict", "finalize_evict"):
            delta[e.cue].discard(e.due)
            powers.pop(e.due, None)
        elif e.kind == "rehome":
            groups[e.cue].discard(e.due)
            if e.to_cue is not None:
                groups[e.to_cue].add(e.due)
        elif e.kind == "mark":
            marked.add(e.cue)
    return Assignment(reuse_sets=delta, due_power_w=powers, groups=groups, marked=marked)
