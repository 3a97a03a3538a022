"""Configuration for the plant, the monitoring pipeline, and experiments.

Everything lives in one human-readable YAML file with three optional
sections (``plant``, ``monitoring``, ``experiment``); every field has a
default, so an empty file is a valid configuration.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigurationError

DEFAULT_A = [
    [-0.25, 0.06, -0.99],
    [-16.0, -8.5, 2.2],
    [4.5, -0.35, -0.76],
]
# Control effectiveness in output units per pilot-command unit; scaled so the
# +/-1 doublet drives 10-40% of perturbed rollouts past the |Ny| limit.
DEFAULT_B = [
    [0.0005, 0.003],
    [1.35, 0.1],
    [0.015, -0.225],
]
# Yaw damper: rudder feedback on yaw rate.  Negative gain because the rudder
# column of B has negative yaw effectiveness; +0.5 would destabilize.
DEFAULT_K = [
    [0.0, 0.0, 0.0],
    [0.0, 0.0, -0.5],
]

DEFAULT_EPSILON_GRID = [0.02, 0.05, 0.1, 0.15, 0.2, 0.3, 0.4, 0.5]
DEFAULT_METHODS = ["full", "no_pred", "pca", "current_ny", "pred_ny"]


@dataclass
class PlantConfig:
    """Nominal closed-loop plant, maneuver script, and randomization."""

    A: list = field(default_factory=lambda: [row[:] for row in DEFAULT_A])
    B: list = field(default_factory=lambda: [row[:] for row in DEFAULT_B])
    V: float = 100.0
    g: float = 9.81
    K: list = field(default_factory=lambda: [row[:] for row in DEFAULT_K])
    perturbation: float = 0.3
    ny_limit: float = 0.5
    dt: float = 0.05
    horizon: float = 5.0
    doublet_start: float = 0.5
    doublet_magnitude: float = 1.0
    command_saturation: float = 1.5
    rk4_substeps: int = 5

    def validate(self) -> None:
        for name, value, shape in [
            ("A", self.A, (3, 3)),
            ("B", self.B, (3, 2)),
            ("K", self.K, (2, 3)),
        ]:
            arr = np.asarray(value, dtype=float)
            if arr.shape != shape:
                raise ConfigurationError(f"{name} must have shape {shape}, got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ConfigurationError(f"{name} contains non-finite entries")
        for name in ("V", "g", "perturbation", "ny_limit", "dt", "horizon",
                     "doublet_start", "doublet_magnitude", "command_saturation"):
            try:
                setattr(self, name, float(getattr(self, name)))
            except (TypeError, ValueError) as err:
                raise ConfigurationError(f"{name} must be a number: {err}") from err
        for name in ("V", "g", "perturbation", "dt", "horizon",
                     "doublet_start", "doublet_magnitude", "command_saturation"):
            if not np.isfinite(getattr(self, name)):
                raise ConfigurationError(f"{name} must be finite")
        if not self.ny_limit >= 0:  # +inf allowed as a degenerate tuning probe
            raise ConfigurationError("ny_limit must be non-negative")
        if not 0.0 <= self.perturbation < 1.0:
            raise ConfigurationError("perturbation must be in [0, 1)")
        if self.dt <= 0 or self.horizon <= 0:
            raise ConfigurationError("dt and horizon must be positive")
        if self.rk4_substeps < 1:
            raise ConfigurationError("rk4_substeps must be >= 1")
        # Closed loop must be stable for the nominal parameters.
        closed = np.asarray(self.A, float) - np.asarray(self.B, float) @ np.asarray(self.K, float)
        eigs = np.linalg.eigvals(closed)
        if np.max(eigs.real) >= 0.0:
            raise ConfigurationError(
                f"closed-loop matrix A - B K is not Hurwitz (eigenvalues {eigs})"
            )


@dataclass
class MonitoringConfig:
    """Observation buffering and warning lead time, in integer steps."""

    past_steps: int = 2          # observation stacks past_steps + 1 outputs
    lead_steps: int = 5          # alert must precede failure by this many steps
    safe_obs_per_traj: int = 50

    def validate(self) -> None:
        if self.past_steps < 0:
            raise ConfigurationError("past_steps must be >= 0")
        if self.lead_steps < 1:
            raise ConfigurationError("lead_steps must be >= 1")
        if self.safe_obs_per_traj < 1:
            raise ConfigurationError("safe_obs_per_traj must be >= 1")


@dataclass
class ExperimentConfig:
    """Full sweep: dataset fits, shared test pool, epsilon grid, methods."""

    plant: PlantConfig = field(default_factory=PlantConfig)
    monitoring: MonitoringConfig = field(default_factory=MonitoringConfig)
    n_unsafe: int = 50
    fits: int = 10
    test_trajectories: int = 500
    epsilon_grid: list = field(default_factory=lambda: list(DEFAULT_EPSILON_GRID))
    methods: list = field(default_factory=lambda: list(DEFAULT_METHODS))
    pca_dims: int = 6
    master_seed: int = 0
    attempt_cap_factor: int = 100

    def validate(self) -> None:
        self.plant.validate()
        self.monitoring.validate()
        if self.n_unsafe < 2:
            raise ConfigurationError("n_unsafe must be >= 2")
        if self.fits < 1:
            raise ConfigurationError("fits must be >= 1")
        if self.test_trajectories < 1:
            raise ConfigurationError("test_trajectories must be >= 1")
        grid = list(self.epsilon_grid)
        if not grid or any(not (0.0 < e < 1.0) for e in grid):
            raise ConfigurationError("epsilon_grid values must lie strictly in (0, 1)")
        if sorted(grid) != grid:
            raise ConfigurationError("epsilon_grid must be sorted ascending")
        if self.master_seed < 0:
            raise ConfigurationError("master_seed must be non-negative")


def _coerce_section(cls, data: dict):
    known = {f for f in cls.__dataclass_fields__}
    unknown = set(data) - known
    if unknown:
        raise ConfigurationError(f"unknown {cls.__name__} fields: {sorted(unknown)}")
    return cls(**data)


def load_config(path: str | Path | None = None) -> ExperimentConfig:
    """Load the experiment configuration; missing file sections use defaults."""
    raw: dict = {}
    if path is not None:
        text = Path(path).read_text()
        loaded = yaml.safe_load(text)
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigurationError(f"config root must be a mapping, got {type(loaded).__name__}")
        raw = loaded
    unknown = set(raw) - {"plant", "monitoring", "experiment"}
    if unknown:
        raise ConfigurationError(f"unknown config sections: {sorted(unknown)}")
    plant = _coerce_section(PlantConfig, raw.get("plant", {}) or {})
    monitoring = _coerce_section(MonitoringConfig, raw.get("monitoring", {}) or {})
    exp_fields = dict(raw.get("experiment", {}) or {})
    exp = _coerce_section(ExperimentConfig, exp_fields)
    exp.plant = plant
    exp.monitoring = monitoring
    exp.validate()
    return exp


def config_to_dict(config: ExperimentConfig) -> dict:
    """Plain-dict form used when embedding the config in saved files."""
    d = asdict(config)
    plant = d.pop("plant")
    monitoring = d.pop("monitoring")
    return {"plant": plant, "monitoring": monitoring, "experiment": d}


def config_from_dict(data: dict) -> ExperimentConfig:
    plant = _coerce_section(PlantConfig, data.get("plant", {}))
    monitoring = _coerce_section(MonitoringConfig, data.get("monitoring", {}))
    exp = _coerce_section(ExperimentConfig, data.get("experiment", {}))
    exp.plant = plant
    exp.monitoring = monitoring
    exp.validate()
    return exp


def save_config(config: ExperimentConfig, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(config_to_dict(config), sort_keys=False))


def derive_seed(*parts: int) -> int:
    """Deterministic child seed from a tuple of non-negative integers."""
    ss = np.random.SeedSequence(list(parts))
    return int(ss.generate_state(1, np.uint64)[0])
