"""Exception hierarchy shared across the toolkit.

Plain misuse of an API (bad dimensions, epsilon outside (0,1), empty point
sets) raises ValueError; the classes below mark conditions a caller may want
to handle distinctly, and the CLI maps them onto exit codes.
"""


class AeromonError(Exception):
    """Base class for toolkit-specific errors."""


class ConfigurationError(AeromonError):
    """Invalid configuration: non-finite entries, unstable closed loop, bad fields."""


class DataError(AeromonError):
    """Invalid data: non-finite scores, malformed bundles or artifacts."""


class ArtifactError(DataError):
    """A persisted bundle or monitor artifact failed validation on load."""


class IncompatibleArtifactError(ConfigurationError):
    """Monitor artifact and plant configuration disagree on dt / buffer / lead time."""


class SimulationDivergedError(AeromonError):
    """State became non-finite during integration."""

    def __init__(self, message: str, step_index: int | None = None):
        super().__init__(message)
        self.step_index = step_index


class InsufficientHistoryError(AeromonError):
    """Not enough past outputs to form an observation (buffer still filling)."""


class TooEarlyFailureError(AeromonError):
    """Trajectory failed before a full-buffer observation exists at the lead offset."""


class ScenarioInfeasibleError(AeromonError):
    """Rollout attempt cap exceeded while collecting unsafe trajectories."""


class DegenerateCalibrationError(DataError):
    """Leave-one-out calibration needs at least two unsafe points."""


class UnderdeterminedError(DataError):
    """Fewer regression pairs than features + 1."""


class RankDeficiencyError(DataError):
    """Data rank too low for the requested number of principal components."""

    def __init__(self, message: str, achieved_rank: int):
        super().__init__(message)
        self.achieved_rank = achieved_rank


class SessionStateError(AeromonError):
    """Operation not valid for the session's current status."""
