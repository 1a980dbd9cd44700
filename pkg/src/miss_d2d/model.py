"""Domain types for the single-cell uplink reuse simulator.

All internal power and gain arithmetic is in linear units (Watt, linear
ratio). dB / dBm appear only at the configuration boundary, via the
conversion helpers below.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watt_to_dbm(watt: float) -> float:
    if watt <= 0.0:
        raise ValueError(f"cannot express non-positive power {watt} W in dBm")
    return 10.0 * math.log10(watt) + 30.0


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(ratio: float) -> float:
    if ratio <= 0.0:
        raise ValueError(f"cannot express non-positive ratio {ratio} in dB")
    return 10.0 * math.log10(ratio)


def noise_power(density_dbm_hz: float, bandwidth_hz: float) -> float:
    """Thermal noise power (Watt) from a spectral density over a bandwidth.

    noise = 10^((density_dbm_hz - 30)/10) * bandwidth_hz
    """
    if bandwidth_hz <= 0.0:
        raise ValueError(f"bandwidth must be positive, got {bandwidth_hz}")
    return dbm_to_watt(density_dbm_hz) * bandwidth_hz


# Table defaults: 23 dBm CUE power, 180 kHz per resource block, -174 dBm/Hz
# noise floor, 500 m cell, 15 m D2D pair separation.
DEFAULT_CUE_POWER_W = dbm_to_watt(23.0)
DEFAULT_RB_BANDWIDTH_HZ = 180e3
DEFAULT_NOISE_DENSITY_DBM_HZ = -174.0


@dataclass(frozen=True)
class RadioParams:
    """Cell-wide radio constants shared by every algorithm run."""

    cue_power_w: float = DEFAULT_CUE_POWER_W
    due_power_min_w: float = 0.0
    due_power_max_w: float = DEFAULT_CUE_POWER_W
    cue_sinr_threshold: float = 7.0          # linear ratio
    due_sinr_threshold: float = 3.0          # linear ratio
    noise_spectral_density_dbm_hz: float = DEFAULT_NOISE_DENSITY_DBM_HZ
    rb_bandwidth_hz: float = DEFAULT_RB_BANDWIDTH_HZ
    cell_radius_m: float = 500.0
    due_pair_distance_m: float = 15.0
    conflict_distance_m: float = 25.0
    # Revenue-to-payment ratio of the pricing game. The default is tuned so
    # the admission rate stays near the 90% mark while priced powers remain
    # orders of magnitude below fixed-power operation; see the batch
    # comparison in demos/demo_experiment.py.
    beta: float = 5.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.due_power_min_w < self.due_power_max_w:
            raise ValueError(
                f"need 0 <= due_power_min_w < due_power_max_w, got "
                f"[{self.due_power_min_w}, {self.due_power_max_w}]"
            )
        if self.cue_power_w <= 0.0:
            raise ValueError("cue_power_w must be positive")
        for name in ("cue_sinr_threshold", "due_sinr_threshold", "beta",
                     "rb_bandwidth_hz", "cell_radius_m",
                     "due_pair_distance_m", "conflict_distance_m"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")

    def noise_power_w(self) -> float:
        """Per-RB thermal noise sigma^2 = density * rb bandwidth."""
        return noise_power(self.noise_spectral_density_dbm_hz, self.rb_bandwidth_hz)


@dataclass(frozen=True)
class Cue:
    """A cellular user holding pre-allocated uplink resource blocks.

    Ids are 0-based indices into the scenario arrays.
    """

    id: int
    position: tuple[float, float]
    bandwidth_hz: float
    tx_power_w: float
    noise_power_w: float

    def __post_init__(self) -> None:
        if self.tx_power_w <= 0.0 or self.bandwidth_hz <= 0.0 or self.noise_power_w <= 0.0:
            raise ValueError(f"CUE {self.id}: power, bandwidth and noise must be positive")


@dataclass(frozen=True)
class DuePair:
    """A D2D transmitter/receiver pair that may reuse a CUE's blocks."""

    id: int
    tx_position: tuple[float, float]
    rx_position: tuple[float, float]
    noise_power_w: float

    def __post_init__(self) -> None:
        if self.noise_power_w <= 0.0:
            raise ValueError(f"DUE pair {self.id}: noise must be positive")

    def separation_m(self) -> float:
        return math.dist(self.tx_position, self.rx_position)


def _read_only(arr: np.ndarray) -> np.ndarray:
    out = np.asarray(arr, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class GainTable:
    """Linear channel gains for every link the model needs.

    cue_to_bs[c]          : CUE c -> base station
    due_tx_to_bs[d]       : DUE d transmitter -> base station
    cue_to_due_rx[c, d]   : CUE c -> DUE d receiver (interference)
    due_tx_to_due_rx[i, j]: DUE i transmitter -> DUE j receiver; the
                            diagonal is each pair's own link.
    Arrays are read-only; gains are strictly positive and finite.
    Equality is identity (compare the arrays directly if needed).
    """

    cue_to_bs: np.ndarray
    due_tx_to_bs: np.ndarray
    cue_to_due_rx: np.ndarray
    due_tx_to_due_rx: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "cue_to_bs", _read_only(self.cue_to_bs))
        object.__setattr__(self, "due_tx_to_bs", _read_only(self.due_tx_to_bs))
        object.__setattr__(self, "cue_to_due_rx", _read_only(self.cue_to_due_rx))
        object.__setattr__(self, "due_tx_to_due_rx", _read_only(self.due_tx_to_due_rx))
        m = self.cue_to_bs.shape[0]
        n = self.due_tx_to_bs.shape[0]
        if self.cue_to_due_rx.shape != (m, n):
            raise ValueError(f"cue_to_due_rx must be ({m}, {n}), got {self.cue_to_due_rx.shape}")
        if self.due_tx_to_due_rx.shape != (n, n):
            raise ValueError(f"due_tx_to_due_rx must be ({n}, {n}), got {self.due_tx_to_due_rx.shape}")
        for name in ("cue_to_bs", "due_tx_to_bs", "cue_to_due_rx", "due_tx_to_due_rx"):
            a = getattr(self, name)
            if a.size and not (np.isfinite(a).all() and (a > 0.0).all()):
                raise ValueError(f"{name} must be strictly positive and finite")


@dataclass(frozen=True, eq=False)
class Scenario:
    """Immutable description of one cell instance: devices, gains, radio.

    Equality is identity; determinism tests compare the underlying arrays.
    """

    radio: RadioParams
    cues: tuple[Cue, ...]
    due_pairs: tuple[DuePair, ...]
    gains: GainTable

    def __post_init__(self) -> None:
        if self.gains.cue_to_bs.shape[0] != len(self.cues):
            raise ValueError("gain table does not match CUE count")
        if self.gains.due_tx_to_bs.shape[0] != len(self.due_pairs):
            raise ValueError("gain table does not match DUE count")
        r = self.radio.cell_radius_m
        for c in self.cues:
            if math.hypot(*c.position) > r * (1.0 + 1e-12):
                raise ValueError(f"CUE {c.id} lies outside the cell radius")
        want = self.radio.due_pair_distance_m
        for d in self.due_pairs:
            sep = d.separation_m()
            if abs(sep - want) > 1e-9 * want:
                raise ValueError(
                    f"DUE pair {d.id} separation {sep} != {want} (rel tol 1e-9)"
                )

    @property
    def m(self) -> int:
        return len(self.cues)

    @property
    def n(self) -> int:
        return len(self.due_pairs)


@dataclass
class Assignment:
    """The reuse solution plus the algorithm-internal grouping state.

    reuse_sets[c] is the set of DUE ids granted reuse of CUE c's blocks;
    due_power_w holds powers for granted DUEs only; groups[c] is the
    working membership each algorithm maintains; marked flags processed
    CUEs. Reuse sets stay pairwise disjoint and powers stay inside the
    configured box.
    """

    reuse_sets: dict[int, set[int]] = field(default_factory=dict)
    due_power_w: dict[int, float] = field(default_factory=dict)
    groups: dict[int, set[int]] = field(default_factory=dict)
    marked: set[int] = field(default_factory=set)

    @classmethod
    def empty(cls, m: int) -> "Assignment":
        return cls(
            reuse_sets={c: set() for c in range(m)},
            due_power_w={},
            groups={c: set() for c in range(m)},
            marked=set(),
        )

    def host_of(self, d: int) -> int | None:
        for c, members in self.reuse_sets.items():
            if d in members:
                return c
        return None

    def granted(self) -> set[int]:
        out: set[int] = set()
        for members in self.reuse_sets.values():
            out |= members
        return out

    def validate(self, scenario: Scenario) -> list[str]:
        """Structural invariant scan; returns human-readable problems."""
        problems: list[str] = []
        seen: set[int] = set()
        for c, members in self.reuse_sets.items():
            dup = seen & members
            if dup:
                problems.append(f"DUEs {sorted(dup)} appear in more than one reuse set")
            seen |= members
        lo, hi = scenario.radio.due_power_min_w, scenario.radio.due_power_max_w
        for d in seen:
            if d not in self.due_power_w:
                problems.append(f"granted DUE {d} has no stored power")
            else:
                p = self.due_power_w[d]
                if not lo <= p <= hi:
                    problems.append(f"DUE {d} power {p} outside [{lo}, {hi}]")
        for d in self.due_power_w:
            if d not in seen:
                problems.append(f"power stored for ungranted DUE {d}")
        return problems
