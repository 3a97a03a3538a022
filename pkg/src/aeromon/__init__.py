"""Conformally calibrated nearest-neighbor safety monitoring for simulated
flight-test maneuvers: plant simulation, dataset collection, future-output
prediction, conformal calibration, baselines, an experiment harness, and a
live monitoring service.
"""

from .baselines import MethodSpec, build_monitor, fit_pca, ny_score
from .config import (
    ExperimentConfig,
    MonitoringConfig,
    PlantConfig,
    derive_seed,
    load_config,
    save_config,
)
from .conformal import (
    CalibratedMonitor,
    PcaMap,
    Verdict,
    load_monitor,
    loo_calibration,
    monitor_step,
    nn_score,
    p_value,
    plain_calibration,
    save_monitor,
    threshold,
    trajectory_p_values,
)
from .datasets import (
    DatasetBundle,
    Observation,
    collect_dataset,
    extract_error_observation,
    load_bundle,
    make_observation,
    save_bundle,
    subsample_safe,
)
from .harness import (
    ResultRow,
    evaluate_monitor,
    generate_test_pool,
    run_experiment,
    scenario_health,
)
from .plant import (
    AircraftParams,
    ControllerGains,
    DoubletScript,
    PilotCommand,
    Trajectory,
    doublet_command,
    failure_time,
    sample_params,
    simulate_rollout,
    step,
)
from .predictor import LinearPredictor, fit_least_squares, predict, transform_set

__version__ = "0.1.0"
