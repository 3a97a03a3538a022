"""Rollout collection, observation buffering, and dataset persistence.

An observation stacks the last ``past_steps + 1`` outputs, oldest first.
Collection keeps sampling aircraft until the requested number of unsafe
trajectories is reached; each unsafe trajectory contributes the single
observation taken ``lead_steps`` before its failure, each safe trajectory a
random subsample of (observation, future-output) pairs that serve both the
regressor and the nearest-neighbor safe set.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, config_from_dict, config_to_dict, derive_seed
from .errors import (
    ArtifactError,
    InsufficientHistoryError,
    ScenarioInfeasibleError,
    TooEarlyFailureError,
)
from .plant import OUTPUT_DIM, Trajectory, plant_from_config, sample_params, simulate_rollout

BUNDLE_FORMAT_VERSION = 1

# Seed-derivation stream tags; test pools use a disjoint tag in the harness.
_PARAMS_STREAM = 0
_SUBSAMPLE_STREAM = 1


@dataclass(frozen=True)
class Observation:
    """Stacked output buffer with its provenance."""

    values: np.ndarray            # ((past_steps + 1) * 6,)
    trajectory_id: int
    step_index: int

    @property
    def current_output(self) -> np.ndarray:
        """Newest frame of the buffer (the output at step_index)."""
        return self.values[-OUTPUT_DIM:]


@dataclass
class DatasetBundle:
    """Error observations, safe observations, regression pairs, and metadata."""

    error_observations: list[Observation]
    safe_observations: list[Observation]
    regression_targets: np.ndarray        # (len(safe_observations), 6)
    metadata: dict = field(default_factory=dict)

    @property
    def regression_pairs(self) -> list[tuple[Observation, np.ndarray]]:
        return list(zip(self.safe_observations, self.regression_targets))

    def error_matrix(self) -> np.ndarray:
        return np.stack([o.values for o in self.error_observations])

    def safe_matrix(self) -> np.ndarray:
        return np.stack([o.values for o in self.safe_observations])


def make_observation(traj: Trajectory, t: int, past_steps: int,
                     trajectory_id: int = -1) -> Observation:
    """Stack outputs t - past_steps .. t, oldest first."""
    if t < past_steps:
        raise InsufficientHistoryError(
            f"step {t} has fewer than {past_steps} past outputs"
        )
    if t >= len(traj):
        raise ValueError(f"step {t} beyond trajectory end {len(traj) - 1}")
    window = traj.outputs[t - past_steps: t + 1]
    return Observation(values=window.reshape(-1).copy(),
                       trajectory_id=trajectory_id, step_index=t)


def extract_error_observation(traj: Trajectory, t_fail: int, lead_steps: int,
                              past_steps: int, trajectory_id: int = -1) -> Observation:
    """Observation taken lead_steps before the failure step."""
    t = t_fail - lead_steps
    if t < past_steps:
        raise TooEarlyFailureError(
            f"failure at step {t_fail} leaves no full buffer {lead_steps} steps earlier"
        )
    return make_observation(traj, t, past_steps, trajectory_id=trajectory_id)


def subsample_safe(traj: Trajectory, count: int, lead_steps: int, past_steps: int,
                   seed: int, trajectory_id: int = -1
                   ) -> list[tuple[Observation, np.ndarray]]:
    """Uniform sample (without replacement) of (observation, future output) pairs.

    Valid anchor steps are t in [past_steps, T - lead_steps] so every pair's
    target lands inside the trajectory.  Returns all valid steps when there
    are fewer than ``count``.
    """
    if traj.is_unsafe:
        raise ValueError("subsample_safe expects a trajectory without failure")
    if count < 1:
        raise ValueError("count must be >= 1")
    last = len(traj) - 1
    valid = np.arange(past_steps, last - lead_steps + 1)
    if valid.size == 0:
        return []
    rng = np.random.default_rng(seed)
    if valid.size > count:
        chosen = np.sort(rng.choice(valid, size=count, replace=False))
    else:
        chosen = valid
    pairs = []
    for t in chosen:
        obs = make_observation(traj, int(t), past_steps, trajectory_id=trajectory_id)
        target = traj.outputs[int(t) + lead_steps].copy()
        pairs.append((obs, target))
    return pairs


def rollout_for_index(config: ExperimentConfig, master_seed: int, index: int) -> Trajectory:
    """Re-create the collection rollout with the given index (deterministic)."""
    nominal, gains, script = plant_from_config(config.plant)
    params_seed = derive_seed(master_seed, _PARAMS_STREAM, index)
    params = sample_params(nominal, config.plant.perturbation, params_seed)
    return simulate_rollout(params, gains, script, config.plant.horizon,
                            config.plant.dt, limit=config.plant.ny_limit,
                            substeps=config.plant.rk4_substeps, seed=params_seed)


def collect_dataset(config: ExperimentConfig, n_unsafe: int,
                    master_seed: int) -> DatasetBundle:
    """Roll out randomized aircraft until n_unsafe valid unsafe trajectories.

    Unsafe trajectories failing too early for a full-buffer observation at
    the lead offset are discarded and resampled (counted in metadata).  Safe
    trajectories are subsampled as they appear.
    """
    if n_unsafe < 2:
        raise ValueError("n_unsafe must be >= 2")
    mon = config.monitoring
    attempt_cap = config.attempt_cap_factor * n_unsafe

    error_observations: list[Observation] = []
    safe_observations: list[Observation] = []
    targets: list[np.ndarray] = []
    n_safe = 0
    n_too_early = 0
    attempts = 0

    while len(error_observations) < n_unsafe:
        if attempts >= attempt_cap:
            raise ScenarioInfeasibleError(
                f"collected {len(error_observations)}/{n_unsafe} unsafe trajectories "
                f"in {attempts} rollouts; perturbation/limit tuning looks off"
            )
        index = attempts
        attempts += 1
        traj = rollout_for_index(config, master_seed, index)
        if traj.is_unsafe:
            try:
                obs = extract_error_observation(
                    traj, traj.failure_index, mon.lead_steps, mon.past_steps,
                    trajectory_id=index,
                )
            except TooEarlyFailureError:
                n_too_early += 1
                continue
            error_observations.append(obs)
        else:
            n_safe += 1
            sub_seed = derive_seed(master_seed, _SUBSAMPLE_STREAM, index)
            for obs, target in subsample_safe(
                    traj, mon.safe_obs_per_traj, mon.lead_steps, mon.past_steps,
                    sub_seed, trajectory_id=index):
                safe_observations.append(obs)
                targets.append(target)

    metadata = {
        "format_version": BUNDLE_FORMAT_VERSION,
        "dt": config.plant.dt,
        "past_steps": mon.past_steps,
        "lead_steps": mon.lead_steps,
        "safe_obs_per_traj": mon.safe_obs_per_traj,
        "n_unsafe": n_unsafe,
        "n_safe_trajectories": n_safe,
        "n_too_early": n_too_early,
        "n_rollouts": attempts,
        "master_seed": master_seed,
        "config": config_to_dict(config),
    }
    return DatasetBundle(
        error_observations=error_observations,
        safe_observations=safe_observations,
        regression_targets=np.stack(targets) if targets else np.zeros((0, OUTPUT_DIM)),
        metadata=metadata,
    )


def _observation_to_json(obs: Observation) -> dict:
    return {
        "trajectory_id": obs.trajectory_id,
        "step_index": obs.step_index,
        "values": obs.values.tolist(),
    }


def _observation_from_json(data: dict) -> Observation:
    return Observation(values=np.asarray(data["values"], dtype=float),
                       trajectory_id=int(data["trajectory_id"]),
                       step_index=int(data["step_index"]))


def save_bundle(bundle: DatasetBundle, path: str | Path) -> None:
    """Persist as versioned, human-inspectable JSON (byte-stable round trip)."""
    doc = {
        "format_version": BUNDLE_FORMAT_VERSION,
        "metadata": bundle.metadata,
        "error_observations": [_observation_to_json(o) for o in bundle.error_observations],
        "safe_observations": [_observation_to_json(o) for o in bundle.safe_observations],
        "regression_targets": bundle.regression_targets.tolist(),
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_bundle(path: str | Path) -> DatasetBundle:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as err:
        raise ArtifactError(f"bundle {path} is not valid JSON: {err}") from err
    if doc.get("format_version") != BUNDLE_FORMAT_VERSION:
        raise ArtifactError(f"unsupported bundle format {doc.get('format_version')}")
    bundle = DatasetBundle(
        error_observations=[_observation_from_json(o) for o in doc["error_observations"]],
        safe_observations=[_observation_from_json(o) for o in doc["safe_observations"]],
        regression_targets=np.asarray(doc["regression_targets"], dtype=float),
        metadata=doc["metadata"],
    )
    validate_bundle(bundle)
    return bundle


def validate_bundle(bundle: DatasetBundle) -> None:
    meta = bundle.metadata
    n_unsafe = meta.get("n_unsafe")
    if len(bundle.error_observations) != n_unsafe:
        raise ArtifactError(
            f"bundle holds {len(bundle.error_observations)} error observations, "
            f"metadata says {n_unsafe}"
        )
    dim = (meta["past_steps"] + 1) * OUTPUT_DIM
    for obs in bundle.error_observations + bundle.safe_observations:
        if obs.values.shape != (dim,):
            raise ArtifactError(f"observation dimension {obs.values.shape} != ({dim},)")
        if not np.all(np.isfinite(obs.values)):
            raise ArtifactError("non-finite observation values")
        if obs.step_index < meta["past_steps"]:
            raise ArtifactError("observation violates the buffer bound")
    if bundle.regression_targets.shape != (len(bundle.safe_observations), OUTPUT_DIM):
        raise ArtifactError("regression targets misaligned with safe observations")


def bundle_config(bundle: DatasetBundle) -> ExperimentConfig:
    """Reconstruct the collection config stored in bundle metadata."""
    return config_from_dict(bundle.metadata["config"])
