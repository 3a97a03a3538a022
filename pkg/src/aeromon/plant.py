"""Closed-loop lateral-directional plant and the rudder-doublet maneuver.

State x = (beta, p, r): sideslip [rad], roll rate [rad/s], yaw rate [rad/s].
Control u = (aileron, rudder) after feedback, u = cmd - K x.
Output y = (beta, p, r, Ny, aileron, rudder) with Ny the lateral specific
force in g units, Ny = (V/g) * (beta_dot + r).

All functions here are pure and deterministic; rollouts parallelize with
per-rollout seeds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import PlantConfig
from .errors import ConfigurationError, SimulationDivergedError

STATE_DIM = 3
CONTROL_DIM = 2
OUTPUT_DIM = 6

# Output component indices.
BETA, ROLL_RATE, YAW_RATE, NY, AILERON, RUDDER = range(OUTPUT_DIM)


@dataclass(frozen=True)
class AircraftParams:
    """Sampled system matrices plus airspeed and gravity constants."""

    A: np.ndarray  # 3x3 state dynamics, 1/s
    B: np.ndarray  # 3x2 control effectiveness
    C: np.ndarray  # 6x3 output map
    D: np.ndarray  # 6x2 feedthrough
    V: float       # airspeed, m/s
    g: float       # gravitational accel, m/s^2

    @classmethod
    def from_core(cls, A, B, V: float, g: float) -> "AircraftParams":
        """Build the full output map from the dynamics matrices.

        Rows 1-3 of C echo the state, rows 5-6 of D echo the applied
        controls, and row 4 realizes Ny = (V/g) * (beta_dot + r).
        """
        A = np.asarray(A, dtype=float)
        B = np.asarray(B, dtype=float)
        if A.shape != (STATE_DIM, STATE_DIM) or B.shape != (STATE_DIM, CONTROL_DIM):
            raise ConfigurationError(f"bad matrix shapes A{A.shape} B{B.shape}")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))
                and np.isfinite(V) and np.isfinite(g)):
            raise ConfigurationError("non-finite plant parameters")
        C = np.zeros((OUTPUT_DIM, STATE_DIM))
        D = np.zeros((OUTPUT_DIM, CONTROL_DIM))
        C[:STATE_DIM, :] = np.eye(STATE_DIM)
        yaw_unit = np.array([0.0, 0.0, 1.0])
        C[NY, :] = (V / g) * (A[0, :] + yaw_unit)
        D[NY, :] = (V / g) * B[0, :]
        C[AILERON:, :] = 0.0
        D[AILERON:, :] = np.eye(CONTROL_DIM)
        return cls(A=A, B=B, C=C, D=D, V=float(V), g=float(g))


@dataclass(frozen=True)
class ControllerGains:
    """Static state feedback; closed loop is u = cmd - K x."""

    K: np.ndarray  # 2x3

    def __post_init__(self):
        K = np.asarray(self.K, dtype=float)
        if K.shape != (CONTROL_DIM, STATE_DIM):
            raise ConfigurationError(f"K must be 2x3, got {K.shape}")
        object.__setattr__(self, "K", K)


@dataclass(frozen=True)
class PilotCommand:
    """Commanded aileron and rudder, before feedback."""

    aileron: float
    rudder: float

    def as_array(self) -> np.ndarray:
        return np.array([self.aileron, self.rudder], dtype=float)

    def validate(self, saturation: float = 1.5) -> None:
        arr = self.as_array()
        if not np.all(np.isfinite(arr)):
            raise ValueError("pilot command must be finite")
        if np.max(np.abs(arr)) > saturation:
            raise ValueError(
                f"pilot command magnitude {np.max(np.abs(arr)):.3f} exceeds saturation {saturation}"
            )


@dataclass(frozen=True)
class DoubletScript:
    """Rudder doublet: +magnitude then -magnitude, one second each."""

    start: float = 0.5
    magnitude: float = 1.0

    def command(self, t: float) -> PilotCommand:
        return doublet_command(t, self)

    @property
    def duration(self) -> float:
        return self.start + 2.0


@dataclass
class Trajectory:
    """Outputs sampled every dt; failure_index marks the first |Ny| >= limit."""

    dt: float
    outputs: np.ndarray                  # (T+1, 6)
    failure_index: int | None = None
    seed: int | None = None

    def __len__(self) -> int:
        return self.outputs.shape[0]

    @property
    def is_unsafe(self) -> bool:
        return self.failure_index is not None

    def times(self) -> np.ndarray:
        return np.arange(len(self)) * self.dt


def sample_params(nominal: AircraftParams, perturbation_fraction: float,
                  seed: int) -> AircraftParams:
    """Randomize A and B entrywise by independent uniform factors in [1-d, 1+d].

    The Ny output row is recomputed from the perturbed matrices.  Zero
    entries stay zero.  Deterministic given the seed.
    """
    if not 0.0 <= perturbation_fraction < 1.0:
        raise ValueError("perturbation_fraction must be in [0, 1)")
    if not (np.all(np.isfinite(nominal.A)) and np.all(np.isfinite(nominal.B))):
        raise ConfigurationError("non-finite nominal entries")
    rng = np.random.default_rng(seed)
    lo, hi = 1.0 - perturbation_fraction, 1.0 + perturbation_fraction
    factors_a = rng.uniform(lo, hi, size=nominal.A.shape)
    factors_b = rng.uniform(lo, hi, size=nominal.B.shape)
    return AircraftParams.from_core(nominal.A * factors_a, nominal.B * factors_b,
                                    nominal.V, nominal.g)


def doublet_command(t: float, script: DoubletScript) -> PilotCommand:
    """Scripted rudder doublet; aileron stays centered."""
    if t < 0:
        raise ValueError("t must be >= 0")
    if script.start <= t < script.start + 1.0:
        return PilotCommand(0.0, script.magnitude)
    if script.start + 1.0 <= t < script.start + 2.0:
        return PilotCommand(0.0, -script.magnitude)
    return PilotCommand(0.0, 0.0)


def _output(params: AircraftParams, x: np.ndarray, applied: np.ndarray) -> np.ndarray:
    return params.C @ x + params.D @ applied


def step(params: AircraftParams, gains: ControllerGains, x: np.ndarray,
         cmd: PilotCommand, dt: float, substeps: int = 5) -> tuple[np.ndarray, np.ndarray]:
    """Advance one sample period with the command held constant.

    Integrates x_dot = (A - B K) x + B cmd with classical RK4 over
    ``substeps`` equal sub-intervals, then reports the output from the end
    state and the post-feedback control u = cmd - K x'.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    x = np.asarray(x, dtype=float)
    u_cmd = cmd.as_array()
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(u_cmd))):
        raise ValueError("step inputs must be finite")
    closed = params.A - params.B @ gains.K
    forcing = params.B @ u_cmd
    h = dt / substeps
    for _ in range(substeps):
        k1 = closed @ x + forcing
        k2 = closed @ (x + 0.5 * h * k1) + forcing
        k3 = closed @ (x + 0.5 * h * k2) + forcing
        k4 = closed @ (x + h * k3) + forcing
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(x)):
        raise SimulationDivergedError("state became non-finite during step")
    applied = u_cmd - gains.K @ x
    return x, _output(params, x, applied)


def simulate_rollout(params: AircraftParams, gains: ControllerGains,
                     script: DoubletScript, horizon: float, dt: float,
                     limit: float = 0.5, substeps: int = 5,
                     seed: int | None = None) -> Trajectory:
    """Run the scripted maneuver from rest for the full horizon.

    The trajectory always covers the whole horizon; failure only sets
    failure_index (truncation is a consumer decision).
    """
    if horizon < script.duration:
        raise ValueError("horizon must cover the maneuver script")
    n_steps = int(round(horizon / dt))
    outputs = np.empty((n_steps + 1, OUTPUT_DIM))
    x = np.zeros(STATE_DIM)
    cmd0 = script.command(0.0)
    outputs[0] = _output(params, x, cmd0.as_array() - gains.K @ x)
    for i in range(n_steps):
        cmd = script.command(i * dt)
        try:
            x, outputs[i + 1] = step(params, gains, x, cmd, dt, substeps=substeps)
        except SimulationDivergedError as err:
            raise SimulationDivergedError(
                f"simulation diverged at step {i + 1}", step_index=i + 1
            ) from err
    traj = Trajectory(dt=dt, outputs=outputs, seed=seed)
    traj.failure_index = failure_time(traj, limit)
    return traj


def failure_time(traj: Trajectory, limit: float) -> int | None:
    """First step index with |Ny| >= limit (inclusive bound), or None.

    Degenerate limits pass through so tuning probes compose: 0 marks every
    step, +inf marks none.
    """
    if not limit >= 0:
        raise ValueError("limit must be non-negative")
    hits = np.flatnonzero(np.abs(traj.outputs[:, NY]) >= limit)
    return int(hits[0]) if hits.size else None


def plant_from_config(config: PlantConfig) -> tuple[AircraftParams, ControllerGains, DoubletScript]:
    """Materialize the nominal plant, controller, and maneuver from config."""
    config.validate()
    nominal = AircraftParams.from_core(config.A, config.B, config.V, config.g)
    gains = ControllerGains(K=np.asarray(config.K, dtype=float))
    script = DoubletScript(start=config.doublet_start, magnitude=config.doublet_magnitude)
    return nominal, gains, script
