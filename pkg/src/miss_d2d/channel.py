"""Radio math: path loss, channel gains, SINR and Shannon throughput.

Interference sums always iterate members in ascending DUE id so that the
algorithms' feasibility checks and the post-run audit add the same floats
in the same order.
"""
from __future__ import annotations

import math
import weakref
from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple

import numpy as np

from .model import Assignment, GainTable, Scenario


class ScenarioView(NamedTuple):
    """Plain-float mirror of a scenario's arrays for tight loops.

    Values are bit-identical to the numpy entries; only the container
    changes, so arithmetic through the view matches arithmetic through
    the arrays exactly. The *_np fields carry the same per-device data as
    read-only numpy arrays for vectorized bulk paths.
    """

    cue_power: list[float]
    cue_noise: list[float]
    cue_bandwidth: list[float]
    due_noise: list[float]
    g_cb: list[float]
    g_db: list[float]
    g_cd: list[list[float]]   # [c][d]
    g_dd: list[list[float]]   # [tx][rx]
    cue_power_np: np.ndarray
    cue_noise_np: np.ndarray
    due_noise_np: np.ndarray


_VIEWS: "weakref.WeakKeyDictionary[Scenario, ScenarioView]" = weakref.WeakKeyDictionary()


def scenario_view(sc: Scenario) -> ScenarioView:
    view = _VIEWS.get(sc)
    if view is None:
        cue_power = [c.tx_power_w for c in sc.cues]
        cue_noise = [c.noise_power_w for c in sc.cues]
        due_noise = [d.noise_power_w for d in sc.due_pairs]
        view = ScenarioView(
            cue_power=cue_power,
            cue_noise=cue_noise,
            cue_bandwidth=[c.bandwidth_hz for c in sc.cues],
            due_noise=due_noise,
            g_cb=sc.gains.cue_to_bs.tolist(),
            g_db=sc.gains.due_tx_to_bs.tolist(),
            g_cd=sc.gains.cue_to_due_rx.tolist(),
            g_dd=sc.gains.due_tx_to_due_rx.tolist(),
            cue_power_np=np.array(cue_power),
            cue_noise_np=np.array(cue_noise),
            due_noise_np=np.array(due_noise),
        )
        _VIEWS[sc] = view
    return view


@dataclass(frozen=True)
class PathLossModel:
    """Log-distance model: loss(d) = intercept + slope * log10(d [km])."""

    kind: str
    intercept_db: float
    slope_db_per_decade: float


# Table defaults: one model for any link with a CUE or base-station
# endpoint, a steeper one for the short D2D links.
CELLULAR_LINK = PathLossModel("cellular-link", 128.1, 37.6)
D2D_LINK = PathLossModel("d2d-link", 148.0, 40.0)


def path_loss_db(model: PathLossModel, distance_m: float) -> float:
    if distance_m <= 0.0:
        raise ValueError(f"distance must be positive, got {distance_m} m")
    return model.intercept_db + model.slope_db_per_decade * math.log10(distance_m / 1000.0)


def linear_gain(model: PathLossModel, distance_m: float) -> float:
    return 10.0 ** (-path_loss_db(model, distance_m) / 10.0)


def _gain_array(model: PathLossModel, distances_m: np.ndarray) -> np.ndarray:
    if distances_m.size and not (distances_m > 0.0).all():
        raise ValueError("coincident positions: zero-length link has no path loss")
    loss = model.intercept_db + model.slope_db_per_decade * np.log10(distances_m / 1000.0)
    return 10.0 ** (-loss / 10.0)


def build_gain_table(
    cue_positions: np.ndarray,
    due_tx_positions: np.ndarray,
    due_rx_positions: np.ndarray,
    cellular_model: PathLossModel = CELLULAR_LINK,
    d2d_model: PathLossModel = D2D_LINK,
    cue_to_due_model: PathLossModel | None = None,
    fading: Mapping[str, np.ndarray] | None = None,
) -> GainTable:
    """Fill all four gain families for a base station at the origin.

    Links terminating at the base station and links from a CUE use the
    cellular model (the CUE -> DUE-rx interference link is configurable via
    ``cue_to_due_model``); DUE-tx -> DUE-rx links use the D2D model. Gains
    for the two directions of a geometric pair are computed independently,
    nothing assumes symmetry. ``fading`` optionally multiplies each family
    by a broadcastable factor (defaults to 1, i.e. deterministic path loss).
    """
    cue_pos = np.atleast_2d(np.asarray(cue_positions, dtype=float))
    tx_pos = np.atleast_2d(np.asarray(due_tx_positions, dtype=float))
    rx_pos = np.atleast_2d(np.asarray(due_rx_positions, dtype=float))
    if cue_to_due_model is None:
        cue_to_due_model = cellular_model

    d_cb = np.hypot(cue_pos[:, 0], cue_pos[:, 1])
    d_db = np.hypot(tx_pos[:, 0], tx_pos[:, 1])
    d_cd = np.hypot(
        cue_pos[:, 0][:, None] - rx_pos[:, 0][None, :],
        cue_pos[:, 1][:, None] - rx_pos[:, 1][None, :],
    )
    d_dd = np.hypot(
        tx_pos[:, 0][:, None] - rx_pos[:, 0][None, :],
        tx_pos[:, 1][:, None] - rx_pos[:, 1][None, :],
    )

    gains = {
        "cue_to_bs": _gain_array(cellular_model, d_cb),
        "due_tx_to_bs": _gain_array(cellular_model, d_db),
        "cue_to_due_rx": _gain_array(cue_to_due_model, d_cd),
        "due_tx_to_due_rx": _gain_array(d2d_model, d_dd),
    }
    if fading is not None:
        for key, factor in fading.items():
            if key not in gains:
                raise KeyError(f"unknown fading family {key!r}")
            gains[key] = gains[key] * np.asarray(factor, dtype=float)
    return GainTable(**gains)


def cue_sinr(sc: Scenario, c: int, reusing: Iterable[tuple[int, float]]) -> float:
    """Uplink SINR of CUE c at the base station given reusing (due, power) pairs."""
    v = scenario_view(sc)
    g_db = v.g_db
    interference = 0.0
    for d, p_d in sorted(reusing):
        interference += p_d * g_db[d]
    return v.cue_power[c] * v.g_cb[c] / (interference + v.cue_noise[c])


def due_sinr(
    sc: Scenario,
    d: int,
    power_w: float,
    host: int,
    cohabitants: Iterable[tuple[int, float]],
) -> float:
    """D2D SINR of pair d reusing CUE `host`'s blocks among cohabitants."""
    v = scenario_view(sc)
    interference = v.cue_power[host] * v.g_cd[host][d]
    for d2, p2 in sorted(cohabitants):
        if d2 == d:
            raise ValueError(f"DUE {d} listed among its own cohabitants")
        interference += p2 * v.g_dd[d2][d]
    return power_w * v.g_dd[d][d] / (interference + v.due_noise[d])


def shannon_rate(bandwidth_hz: float, sinr: float) -> float:
    """Shannon capacity in bit/s: bandwidth * log2(1 + sinr)."""
    if sinr < 0.0:
        raise ValueError(f"SINR must be non-negative, got {sinr}")
    return bandwidth_hz * math.log2(1.0 + sinr)


def spectral_efficiency(sinr: float) -> float:
    """Normalized Shannon rate in bit/s/Hz."""
    if sinr < 0.0:
        raise ValueError(f"SINR must be non-negative, got {sinr}")
    return math.log2(1.0 + sinr)


def audit_assignment(sc: Scenario, assignment: Assignment) -> list[str]:
    """Post-run feasibility scan against the SINR thresholds.

    Returns one message per violated constraint; an empty list means every
    CUE and every granted DUE meets its own threshold. This is evaluated
    purely from the scenario and the assignment, independent of any
    algorithm internals.
    """
    problems: list[str] = []
    gamma_c = sc.radio.cue_sinr_threshold
    gamma_d = sc.radio.due_sinr_threshold
    for c in range(sc.m):
        members = sorted(assignment.reuse_sets.get(c, ()))
        pairs = [(d, assignment.due_power_w[d]) for d in members]
        s = cue_sinr(sc, c, pairs)
        if s < gamma_c:
            problems.append(f"CUE {c}: SINR {s:.6g} < threshold {gamma_c:.6g}")
        for d, p_d in pairs:
            others = [(d2, p2) for d2, p2 in pairs if d2 != d]
            sd = due_sinr(sc, d, p_d, c, others)
            if sd < gamma_d:
                problems.append(f"DUE {d} (host {c}): SINR {sd:.6g} < threshold {gamma_d:.6g}")
    return problems
