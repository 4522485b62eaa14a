"""Pilot hopping and AR-tracking Kalman estimation against pilot contamination."""

from .channel import (
    SPEED_OF_LIGHT,
    ClarkeChannel,
    DopplerParams,
    InvalidParameterError,
    clarke_init,
    clarke_sample,
    doppler_shift,
    theoretical_autocorrelation,
)
from .estimators import (
    FilterDivergenceError,
    FilterState,
    TrackerConfig,
    grid_optimal_a,
    kalman_step,
    ls_estimate,
    mmse_estimate,
    modified_kalman_step,
    predictor_step,
    run_estimator,
)
from .harness import (
    SimConfig,
    SurfaceResult,
    SweepResult,
    SweepRow,
    compute_mse,
    mse_surface,
    run_block,
    run_realization,
    run_sweep,
)
from .pilots import (
    HopAssignment,
    PilotBook,
    collision_pmf,
    expected_collision_distance,
    hop,
    hop_schedule,
    make_pilot_book,
    schedule_collision_distances,
    simulate_collision_distances,
)
from .scenario import (
    CellTopology,
    SlotObservation,
    build_slot_observation,
    explicit_contaminators,
    idealized_contaminator,
    sigma_c_to_sir,
    sir_to_sigma_c,
    synthesize_stream,
)

__version__ = "0.1.0"
