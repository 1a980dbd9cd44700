import numpy as np
import pytest

from miss_d2d.harness import generate_scenario, instance_seed
from miss_d2d.model import Cue, DuePair, GainTable, RadioParams, Scenario, noise_power


@pytest.fixture(scope="session")
def radio() -> RadioParams:
    return RadioParams()


def make_handmade_scenario(
    g_cb, g_db, g_cd, g_dd, radio: RadioParams | None = None, bandwidths=None
) -> Scenario:
    """Scenario with prescribed gains and synthetic (valid) geometry.

    Positions satisfy the structural invariants but the gain table is the
    given one, so tests can hand-compute SINRs from round numbers.
    """
    radio = radio or RadioParams()
    g_cb = np.atleast_1d(np.asarray(g_cb, dtype=float))
    g_db = np.atleast_1d(np.asarray(g_db, dtype=float))
    g_cd = np.atleast_2d(np.asarray(g_cd, dtype=float))
    g_dd = np.atleast_2d(np.asarray(g_dd, dtype=float))
    m, n = g_cb.shape[0], g_db.shape[0]
    if bandwidths is None:
        bandwidths = [radio.rb_bandwidth_hz] * m
    sigma = noise_power(radio.noise_spectral_density_dbm_hz, radio.rb_bandwidth_hz)
    cues = tuple(
        Cue(id=c, position=(10.0 * (c + 1), 0.0), bandwidth_hz=bandwidths[c],
            tx_power_w=radio.cue_power_w, noise_power_w=sigma)
        for c in range(m)
    )
    sep = radio.due_pair_distance_m
    dues = tuple(
        DuePair(id=d, tx_position=(0.0, 20.0 * (d + 1)),
                rx_position=(sep, 20.0 * (d + 1)), noise_power_w=sigma)
        for d in range(n)
    )
    gains = GainTable(cue_to_bs=g_cb, due_tx_to_bs=g_db,
                      cue_to_due_rx=g_cd, due_tx_to_due_rx=g_dd)
    return Scenario(radio=radio, cues=cues, due_pairs=dues, gains=gains)


@pytest.fixture(scope="session")
def small_scenario(radio) -> Scenario:
    rng = np.random.default_rng(instance_seed(12345, 8, 0))
    return generate_scenario(8, 3.0, radio, rng)
