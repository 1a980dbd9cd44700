"""Closed-form leader-follower pricing for one entering D2D pair.

The CUE (leader) posts an interference price, the DUE (follower) answers
with the utility-maximizing transmit power clamped to its box. The
leader's optimum price is one of at most six closed-form candidates; the
solver evaluates the applicable ones and returns the utility argmax, so a
single pricing call is O(1).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

from .channel import scenario_view
from .model import Scenario

LN2 = math.log(2.0)
INV_LN2 = 1.0 / LN2

# Relative tolerance for classifying the degenerate leader cases C ~ 0 and
# A + C ~ 0. The neighbouring cases' candidates converge continuously, so a
# borderline misclassification is bounded by the solver's oracle tolerance.
CASE_TOL = 1e-12


class InfeasiblePricingError(ValueError):
    """No valid candidate price exists for this instance."""


@dataclass(frozen=True)
class StackelbergInstance:
    """One pricing game: CUE c, entering DUE d, frozen reuse set.

    phi   aggregate interference-plus-noise at d's receiver (Watt)
    omega aggregate interference-plus-noise at the base station (Watt)
    both taken over the already-admitted reuse set, excluding d itself.
    """

    p_c: float
    g_cb: float
    g_db: float
    g_cd: float
    g_dd: float
    phi: float
    omega: float
    beta: float
    p_min: float
    p_max: float

    def __post_init__(self) -> None:
        total = (self.p_c + self.g_cb + self.g_db + self.g_cd
                 + self.g_dd + self.phi + self.omega + self.beta)
        if not (
            self.p_c > 0.0 and self.g_cb > 0.0 and self.g_db > 0.0
            and self.g_cd > 0.0 and self.g_dd > 0.0 and self.phi > 0.0
            and self.omega > 0.0 and self.beta > 0.0 and total < math.inf
        ):
            for name in ("p_c", "g_cb", "g_db", "g_cd", "g_dd", "phi", "omega", "beta"):
                v = getattr(self, name)
                if not (math.isfinite(v) and v > 0.0):
                    raise ValueError(f"{name} must be positive and finite, got {v}")
        if not 0.0 <= self.p_min < self.p_max:
            raise ValueError(f"need 0 <= p_min < p_max, got [{self.p_min}, {self.p_max}]")

    @property
    def a_const(self) -> float:
        """Received CUE signal power at the base station."""
        return self.p_c * self.g_cb

    @property
    def b_const(self) -> float:
        """1/ln 2, the nat-to-bit slope of the log utilities."""
        return INV_LN2


class CandidatePrice(NamedTuple):
    origin: str
    alpha: float


@dataclass(frozen=True)
class PriceSolution:
    alpha_star: float
    p_star: float
    u_c: float
    u_d: float
    candidate_origin: str


def due_utility(inst: StackelbergInstance, alpha: float, p_d: float) -> float:
    """Follower payoff: own throughput minus the priced interference payment."""
    rate = math.log2(1.0 + p_d * inst.g_dd / (inst.p_c * inst.g_cd + inst.phi))
    return rate - alpha * p_d * inst.g_db


def cue_utility(inst: StackelbergInstance, alpha: float, p_d: float) -> float:
    """Leader payoff: own throughput plus beta-scaled pricing revenue."""
    rate = math.log2(1.0 + inst.p_c * inst.g_cb / (p_d * inst.g_db + inst.omega))
    return rate + inst.beta * alpha * p_d * inst.g_db


def follower_best_power(inst: StackelbergInstance, alpha: float) -> float:
    """Utility-maximizing follower power at a given price, clamped to the box."""
    if alpha <= 0.0:
        raise ValueError(f"price must be positive, got {alpha}")
    p_hat = 1.0 / (alpha * inst.g_db * LN2) - (inst.p_c * inst.g_cd + inst.phi) / inst.g_dd
    if p_hat < inst.p_min:
        return inst.p_min
    if p_hat > inst.p_max:
        return inst.p_max
    return p_hat


def _candidate_list(
    p_c: float, g_cb: float, g_db: float, g_cd: float, g_dd: float,
    phi: float, omega: float, beta: float, p_min: float, p_max: float,
) -> list[tuple[str, float]]:
    """Plain-float candidate enumeration shared by the public API and the
    hot paths. See :func:`candidate_prices` for the derivation."""
    A = p_c * g_cb
    B = INV_LN2
    x = (g_db / g_dd) * (p_c * g_cd + phi)  # omega - C
    C = omega - x

    if x > 0.0:
        den_min = p_max * g_db + x
        den_max = p_min * g_db + x
        alpha_min = B / den_min if den_min > 0.0 else math.inf
        alpha_max = B / den_max if den_max > 0.0 else math.inf
    else:
        alpha_min = alpha_max = math.inf
    lo_ok = math.isfinite(alpha_min) and alpha_min > 0.0
    hi_ok = math.isfinite(alpha_max) and alpha_max > 0.0 and alpha_max >= alpha_min

    def in_interval(a: float) -> bool:
        if not (math.isfinite(a) and a > 0.0):
            return False
        if lo_ok and a < alpha_min:
            return False
        if hi_ok and a > alpha_max:
            return False
        return True

    out: list[tuple[str, float]] = []
    tol = CASE_TOL * max(A, omega)
    if abs(C) <= tol:
        a1 = B / (beta * omega) - B / A
        if in_interval(a1):
            out.append(("alpha_1", a1))
    elif C < 0.0 and abs(A + C) <= tol:
        a2 = B / A - B / ((A + omega) * beta)
        if in_interval(a2):
            out.append(("alpha_2", a2))
    elif C > 0.0 or A + C > 0.0:
        disc = A * B * B * (A + 4.0 * C * (A + C) / (x * beta))
        if disc >= 0.0:
            qa = C * (A + C)
            qb = B * (A + 2.0 * C)
            qc = B * B * (1.0 - A / (beta * x))
            sq = math.sqrt(disc)
            q = -0.5 * (qb + sq) if qb >= 0.0 else -0.5 * (qb - sq)
            roots = []
            if qa != 0.0:
                roots.append(q / qa)
            if q != 0.0:
                roots.append(qc / q)
            if roots:
                if C > 0.0:
                    a4 = max(roots)
                    if in_interval(a4):
                        out.append(("alpha_4", a4))
                else:
                    a3 = min(roots)
                    if in_interval(a3):
                        out.append(("alpha_3", a3))

    if lo_ok:
        out.append(("alpha_min", alpha_min))
    if hi_ok:
        out.append(("alpha_max", alpha_max))
    return out


def candidate_prices(inst: StackelbergInstance) -> list[CandidatePrice]:
    """Closed-form optimal-price candidates for the leader.

    Substituting the follower response into the leader utility gives
    U_c(alpha) = log2(1 + A*alpha/(C*alpha + B)) + B*beta - alpha*beta*(omega - C)
    with A = p_c*g_cb, B = 1/ln2, C = omega - (g_db/g_dd)(p_c*g_cd + phi).
    Its stationary points solve C(A+C) x^2 + B(A+2C) x + B^2(1 - A/(beta X)) = 0
    where X = omega - C. Which root can be the interior maximum depends on
    the sign pattern of C and A+C:

      C ~ 0              -> alpha_1 = B/(beta*omega) - B/A
      C < 0 and A+C ~ 0  -> alpha_2 = B/A - B/((A+omega)*beta)
      C > 0              -> alpha_4 = the larger root (the other is negative)
      C < 0 and A+C > 0  -> alpha_3 = the smaller root (where U_c' crosses
                            + to -; the larger root is a local minimum)
      C < 0 and A+C < 0  -> no interior candidate

    The interval endpoints alpha_min (follower buys p_max) and alpha_max
    (follower buys p_min) are always emitted. Candidates that are
    non-positive, non-finite, rely on a negative discriminant, or fall
    outside [alpha_min, alpha_max] are dropped. The roots use the
    cancellation-free quadratic form q = -(b + sign(b) sqrt(D))/2,
    roots = q/a and c/q.
    """
    out = [
        CandidatePrice(origin, alpha)
        for origin, alpha in _candidate_list(
            inst.p_c, inst.g_cb, inst.g_db, inst.g_cd, inst.g_dd,
            inst.phi, inst.omega, inst.beta, inst.p_min, inst.p_max,
        )
    ]
    if not out:
        raise InfeasiblePricingError(f"no valid price candidate for {inst}")
    return out


def _solve_floats(
    p_c: float, g_cb: float, g_db: float, g_cd: float, g_dd: float,
    phi: float, omega: float, beta: float, p_min: float, p_max: float,
) -> tuple[float, float, float, float, str]:
    """Scalar solver core; returns (alpha, p, u_c, u_d, origin).

    The inline arithmetic matches follower_best_power / cue_utility /
    due_utility expression for expression.
    """
    cands = _candidate_list(p_c, g_cb, g_db, g_cd, g_dd, phi, omega, beta, p_min, p_max)
    if not cands:
        raise InfeasiblePricingError(
            f"no valid price candidate for p_c={p_c} g_cb={g_cb} g_db={g_db} "
            f"g_cd={g_cd} g_dd={g_dd} phi={phi} omega={omega} beta={beta}"
        )
    a_sig = p_c * g_cb
    cross = p_c * g_cd + phi
    best_u = -math.inf
    best: tuple[float, float, float, str] | None = None
    for origin, alpha in cands:
        p = 1.0 / (alpha * g_db * LN2) - cross / g_dd
        if p < p_min:
            p = p_min
        elif p > p_max:
            p = p_max
        u_c = math.log2(1.0 + a_sig / (p * g_db + omega)) + beta * alpha * p * g_db
        if best is None or u_c > best_u or (u_c == best_u and alpha < best[0]):
            best_u = u_c
            best = (alpha, p, u_c, origin)
    alpha, p, u_c, origin = best
    u_d = math.log2(1.0 + p * g_dd / cross) - alpha * p * g_db
    return alpha, p, u_c, u_d, origin


def solve(inst: StackelbergInstance) -> PriceSolution:
    """Evaluate every surviving candidate and return the leader argmax.

    Ties on utility go to the cheaper price; exact ties on both keep the
    earlier candidate (interior candidates are listed before endpoints),
    so the result is deterministic.
    """
    alpha, p, u_c, u_d, origin = _solve_floats(
        inst.p_c, inst.g_cb, inst.g_db, inst.g_cd, inst.g_dd,
        inst.phi, inst.omega, inst.beta, inst.p_min, inst.p_max,
    )
    return PriceSolution(alpha, p, u_c, u_d, origin)


def _solve_batch(p_c, g_cb, g_db, g_cd, g_dd, phi, omega, beta, p_min, p_max):
    """Vectorized mirror of :func:`_solve_floats` (without origins).

    Inputs broadcast elementwise; returns (alpha, power, u_c) arrays. Used
    for bulk candidate *selection*; agreement with the scalar path is at
    rounding level, so callers that persist results re-verify the chosen
    element through the scalar solver.
    """
    p_c, g_cb, g_db, g_cd, g_dd, phi, omega = np.broadcast_arrays(
        *(np.asarray(a, dtype=float) for a in (p_c, g_cb, g_db, g_cd, g_dd, phi, omega))
    )
    B = INV_LN2
    A = p_c * g_cb
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        x = (g_db / g_dd) * (p_c * g_cd + phi)
        C = omega - x
        alpha_min = B / (p_max * g_db + x)
        alpha_max = B / (p_min * g_db + x)
        tol = CASE_TOL * np.maximum(A, omega)

        disc = A * B * B * (A + 4.0 * C * (A + C) / (x * beta))
        qa = C * (A + C)
        qb = B * (A + 2.0 * C)
        qc = B * B * (1.0 - A / (beta * x))
        sq = np.sqrt(np.maximum(disc, 0.0))
        q = np.where(qb >= 0.0, -0.5 * (qb + sq), -0.5 * (qb - sq))
        r1 = np.where(qa != 0.0, q / qa, np.nan)
        r2 = np.where(q != 0.0, qc / q, np.nan)
        root_hi = np.fmax(r1, r2)
        root_lo = np.fmin(r1, r2)

        case1 = np.abs(C) <= tol
        case2 = (~case1) & (C < 0.0) & (np.abs(A + C) <= tol)
        case3 = (~case1) & (~case2) & (C > 0.0)
        case4 = (~case1) & (~case2) & (C < 0.0) & (A + C > 0.0)
        interior = np.where(
            case1,
            B / (beta * omega) - B / A,
            np.where(
                case2,
                B / A - B / ((A + omega) * beta),
                np.where(case3, root_hi, np.where(case4, root_lo, np.nan)),
            ),
        )
        interior = np.where(case1 | case2 | (disc >= 0.0), interior, np.nan)
        bad = ~(
            np.isfinite(interior)
            & (interior > 0.0)
            & (interior >= alpha_min)
            & (interior <= alpha_max)
        )
        interior = np.where(bad, np.nan, interior)

        alphas = np.stack([interior, alpha_min, alpha_max], axis=-1)
        k = (p_c * g_cd + phi) / g_dd
        p = np.clip(
            1.0 / (alphas * g_db[..., None] * LN2) - k[..., None], p_min, p_max
        )
        u = np.log2(1.0 + A[..., None] / (p * g_db[..., None] + omega[..., None]))
        u = u + beta * alphas * p * g_db[..., None]
        u = np.where(np.isnan(alphas), -np.inf, u)

        best_u = u.max(axis=-1, keepdims=True)
        pick_alpha = np.where(u == best_u, alphas, np.inf)
        idx = np.argmin(pick_alpha, axis=-1)

    take = np.take_along_axis
    sel = idx[..., None]
    return (
        take(alphas, sel, axis=-1)[..., 0],
        take(p, sel, axis=-1)[..., 0],
        take(u, sel, axis=-1)[..., 0],
    )


def build_instance(
    sc: Scenario,
    c: int,
    d: int,
    members: Iterable[tuple[int, float]],
    beta: float | None = None,
) -> StackelbergInstance:
    """Assemble the pricing game for (c, d) against frozen members.

    ``members`` are the (due_id, power) pairs already reusing c's blocks; d
    must not be among them (when repricing a current member, pass the set
    with d removed so it does not pay for its own interference). Sums run
    in ascending id order to match the channel-module arithmetic.
    """
    v = scenario_view(sc)
    g_dd_col = v.g_dd
    g_db = v.g_db
    phi = 0.0
    omega = 0.0
    for d2, p2 in sorted(members):
        if d2 == d:
            raise ValueError(f"DUE {d} cannot be a member of its own pricing game")
        phi += p2 * g_dd_col[d2][d]
        omega += p2 * g_db[d2]
    phi += v.due_noise[d]
    omega += v.cue_noise[c]
    return StackelbergInstance(
        p_c=v.cue_power[c],
        g_cb=v.g_cb[c],
        g_db=g_db[d],
        g_cd=v.g_cd[c][d],
        g_dd=g_dd_col[d][d],
        phi=phi,
        omega=omega,
        beta=sc.radio.beta if beta is None else beta,
        p_min=sc.radio.due_power_min_w,
        p_max=sc.radio.due_power_max_w,
    )
