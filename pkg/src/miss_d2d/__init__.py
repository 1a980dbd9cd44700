"""miss_d2d: joint spectrum-reuse and power control for multi-sharing D2D uplink."""

from .baselines import run_baseline_greedy_fixed, run_baseline_single_share, run_no_reuse
from .channel import (
    CELLULAR_LINK,
    D2D_LINK,
    PathLossModel,
    audit_assignment,
    build_gain_table,
    cue_sinr,
    due_sinr,
    linear_gain,
    path_loss_db,
    shannon_rate,
    spectral_efficiency,
)
from .graph import (
    ConflictGraph,
    build_conflict_graph,
    maximal_independent_set,
    remove_vertices,
)
from .harness import (
    ExperimentConfig,
    MetricsReport,
    compute_metrics,
    generate_scenario,
    instance_seed,
    run_experiment,
)
from .miss import (
    MissConfig,
    MissTrace,
    max_pairwise_thru,
    replay_trace,
    run_miss,
    sheer_rate,
    who_gives_max_sheer_rate,
)
from .model import (
    Assignment,
    Cue,
    DuePair,
    GainTable,
    RadioParams,
    Scenario,
    dbm_to_watt,
    noise_power,
    watt_to_dbm,
)
from .oracle import check_solver_against_grid, grid_best_response, random_instance
from .stackelberg import (
    InfeasiblePricingError,
    PriceSolution,
    StackelbergInstance,
    build_instance,
    candidate_prices,
    cue_utility,
    due_utility,
    follower_best_power,
    solve,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
