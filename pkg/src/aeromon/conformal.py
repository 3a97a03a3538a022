"""Nearest-neighbor conformal scoring, calibration, p-values, and monitoring.

The monitor scores a transformed observation by its squared distance to the
nearest unsafe point minus the nearest safe point (low = dangerous), turns
the score into a conformal p-value against leave-one-out calibration scores
from the unsafe set, and alerts when the p-value reaches the session's
target miss rate epsilon.

Tie convention: calibration scores equal to the test score count toward
alerting, and alert fires at p == epsilon exactly (both choices push toward
more alerts, never fewer).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from .errors import (
    ArtifactError,
    DataError,
    DegenerateCalibrationError,
    InsufficientHistoryError,
)
from .plant import NY, OUTPUT_DIM
from .predictor import LinearPredictor, transform_set

ARTIFACT_FORMAT_VERSION = 1

TRANSFORM_PREDICTOR = "linear_predictor"
TRANSFORM_IDENTITY = "identity"
TRANSFORM_PCA = "pca_map"

SCORE_NEAREST_NEIGHBOR = "nearest_neighbor"
SCORE_NEG_ABS_NY = "neg_abs_ny"


@dataclass(frozen=True)
class PcaMap:
    """Orthonormal projection onto the top principal directions."""

    mean: np.ndarray    # (feature_dim,)
    basis: np.ndarray   # (dims, feature_dim), rows orthonormal

    @property
    def dims(self) -> int:
        return self.basis.shape[0]

    def project(self, values: np.ndarray) -> np.ndarray:
        return self.basis @ (np.asarray(values, float) - self.mean)

    def project_batch(self, values: np.ndarray) -> np.ndarray:
        arr = np.asarray(values, float)
        if arr.size == 0:
            return np.zeros((0, self.dims))
        return (arr - self.mean) @ self.basis.T


def nn_score(y: np.ndarray, unsafe_points: np.ndarray, safe_points: np.ndarray) -> float:
    """Squared distance to the nearest unsafe point minus nearest safe point."""
    return float(nn_score_batch(np.asarray(y, float)[None, :], unsafe_points, safe_points)[0])


def nn_score_batch(points: np.ndarray, unsafe_points: np.ndarray,
                   safe_points: np.ndarray) -> np.ndarray:
    """Vectorized nearest-neighbor score; exhaustive scan over both sets."""
    unsafe = np.asarray(unsafe_points, float)
    safe = np.asarray(safe_points, float)
    if unsafe.size == 0 or safe.size == 0:
        raise ValueError("nearest-neighbor score needs nonempty unsafe and safe sets")
    pts = np.atleast_2d(np.asarray(points, float))
    d_unsafe = cdist(pts, unsafe, "sqeuclidean").min(axis=1)
    d_safe = cdist(pts, safe, "sqeuclidean").min(axis=1)
    return d_unsafe - d_safe


def loo_calibration(unsafe_points: np.ndarray, safe_points: np.ndarray) -> np.ndarray:
    """Leave-one-out calibration scores of the unsafe set, sorted ascending.

    Each unsafe point is scored against the remaining unsafe points versus
    the full safe set, so no held-out calibration split is needed.
    """
    unsafe = np.atleast_2d(np.asarray(unsafe_points, float))
    safe = np.atleast_2d(np.asarray(safe_points, float))
    if unsafe.shape[0] < 2:
        raise DegenerateCalibrationError("leave-one-out needs at least two unsafe points")
    if safe.size == 0:
        raise ValueError("safe set must be nonempty")
    d_uu = cdist(unsafe, unsafe, "sqeuclidean")
    np.fill_diagonal(d_uu, np.inf)
    d_unsafe = d_uu.min(axis=1)
    d_safe = cdist(unsafe, safe, "sqeuclidean").min(axis=1)
    return np.sort(d_unsafe - d_safe)


def plain_calibration(scores: np.ndarray) -> np.ndarray:
    """Sorted calibration scores for monitors whose score needs no point sets."""
    arr = np.asarray(scores, dtype=float).reshape(-1)
    if arr.size < 1:
        raise ValueError("need at least one calibration score")
    if not np.all(np.isfinite(arr)):
        raise DataError("calibration scores must be finite")
    return np.sort(arr)


def threshold(alphas_sorted: np.ndarray, epsilon: float) -> float:
    """Alert cutoff: the k-th smallest calibration score, k = ceil((N+1)(1-eps)).

    When k exceeds N the cutoff is +inf: every score alerts, which keeps the
    miss-rate guarantee vacuously for epsilon below 1/(N+1).
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie strictly in (0, 1)")
    alphas = np.asarray(alphas_sorted, dtype=float)
    n = alphas.size
    k = math.ceil((n + 1) * (1.0 - epsilon))
    if k > n:
        return math.inf
    return float(alphas[k - 1])


def p_value(score: float, alphas_sorted: np.ndarray) -> float:
    """Smallest target miss rate at which this score would not alert.

    Equals (1 + #{alpha_i >= s}) / (N + 1); ties count toward alerting.
    """
    if not np.isfinite(score):
        raise ValueError("score must be finite")
    return float(p_value_batch(np.asarray([score]), alphas_sorted)[0])


def p_value_batch(scores: np.ndarray, alphas_sorted: np.ndarray) -> np.ndarray:
    alphas = np.asarray(alphas_sorted, dtype=float)
    n = alphas.size
    below = np.searchsorted(alphas, np.asarray(scores, float), side="left")
    return (n + 1 - below) / (n + 1)


@dataclass(frozen=True)
class Verdict:
    """One monitoring decision: score, calibrated p-value, and the alert flag."""

    score: float
    p_value: float
    alert: bool
    predicted_future_output: np.ndarray | None = None


@dataclass(frozen=True)
class CalibratedMonitor:
    """Immutable trained monitor: transform, score rule, point sets, calibration."""

    method: str
    transform_kind: str                      # linear_predictor | identity | pca_map
    transform: LinearPredictor | PcaMap | None
    score_kind: str                          # nearest_neighbor | neg_abs_ny
    unsafe_points: np.ndarray | None         # present only for the NN score
    safe_points: np.ndarray | None
    alphas_sorted: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def n_calibration(self) -> int:
        return self.alphas_sorted.size

    @property
    def past_steps(self) -> int:
        return int(self.metadata["past_steps"])

    def observation_dim(self) -> int:
        return (self.past_steps + 1) * OUTPUT_DIM


def apply_transform(monitor: CalibratedMonitor, observations: np.ndarray) -> np.ndarray:
    """Map raw observation rows into the monitor's scoring space."""
    obs = np.atleast_2d(np.asarray(observations, float))
    if monitor.transform_kind == TRANSFORM_IDENTITY:
        return obs
    if monitor.transform_kind == TRANSFORM_PREDICTOR:
        return transform_set(monitor.transform, obs)
    if monitor.transform_kind == TRANSFORM_PCA:
        return monitor.transform.project_batch(obs)
    raise ValueError(f"unknown transform kind {monitor.transform_kind!r}")


def score_batch(monitor: CalibratedMonitor, transformed: np.ndarray) -> np.ndarray:
    """Score transformed rows; lower means closer to the unsafe set."""
    z = np.atleast_2d(np.asarray(transformed, float))
    if monitor.score_kind == SCORE_NEAREST_NEIGHBOR:
        return nn_score_batch(z, monitor.unsafe_points, monitor.safe_points)
    if monitor.score_kind == SCORE_NEG_ABS_NY:
        # The Ny component of the current or predicted output.  Identity
        # transforms keep the whole buffer, so read the newest frame.
        if z.shape[1] == OUTPUT_DIM:
            ny = z[:, NY]
        else:
            ny = z[:, z.shape[1] - OUTPUT_DIM + NY]
        return -np.abs(ny)
    raise ValueError(f"unknown score kind {monitor.score_kind!r}")


def monitor_step(monitor: CalibratedMonitor, recent_outputs: np.ndarray,
                 epsilon: float) -> Verdict:
    """One pass of the runtime loop on the newest buffered outputs.

    Builds the observation (oldest first), transforms, scores, converts to a
    p-value, and alerts when p >= epsilon.  Raises InsufficientHistoryError
    while the buffer is still filling; callers must not alert on that.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie strictly in (0, 1)")
    window = np.atleast_2d(np.asarray(recent_outputs, float))
    needed = monitor.past_steps + 1
    if window.shape[0] < needed:
        raise InsufficientHistoryError(
            f"monitor needs {needed} buffered outputs, got {window.shape[0]}"
        )
    if window.shape[1] != OUTPUT_DIM:
        raise ValueError(f"outputs must be {OUTPUT_DIM}-dim, got {window.shape[1]}")
    observation = window[-needed:].reshape(-1)
    z = apply_transform(monitor, observation[None, :])
    score = float(score_batch(monitor, z)[0])
    p = p_value(score, monitor.alphas_sorted)
    predicted = z[0] if monitor.transform_kind == TRANSFORM_PREDICTOR else None
    return Verdict(score=score, p_value=p, alert=bool(p >= epsilon),
                   predicted_future_output=predicted)


def trajectory_p_values(monitor: CalibratedMonitor, outputs: np.ndarray) -> np.ndarray:
    """p-value at every full-buffer step of an output sequence (vectorized).

    Entry i corresponds to step index past_steps + i.
    """
    outs = np.asarray(outputs, float)
    needed = monitor.past_steps + 1
    n = outs.shape[0]
    if n < needed:
        return np.zeros(0)
    windows = np.stack([outs[i: i + needed].reshape(-1) for i in range(n - needed + 1)])
    z = apply_transform(monitor, windows)
    scores = score_batch(monitor, z)
    return p_value_batch(scores, monitor.alphas_sorted)


def validate_monitor(monitor: CalibratedMonitor) -> None:
    """Check every artifact invariant; raises ArtifactError on violation."""
    alphas = monitor.alphas_sorted
    if alphas.ndim != 1 or alphas.size < 1:
        raise ArtifactError("alphas_sorted must be a nonempty vector")
    if not np.all(np.isfinite(alphas)):
        raise ArtifactError("alphas_sorted contains non-finite values")
    if np.any(np.diff(alphas) < 0):
        raise ArtifactError("alphas_sorted is not sorted ascending")
    if monitor.score_kind == SCORE_NEAREST_NEIGHBOR:
        if monitor.unsafe_points is None or monitor.safe_points is None:
            raise ArtifactError("nearest-neighbor monitor needs both point sets")
        if monitor.unsafe_points.shape[0] != alphas.size:
            raise ArtifactError("|alphas| must equal |unsafe_points| for the NN score")
        if alphas.size < 2:
            raise ArtifactError("nearest-neighbor calibration needs N >= 2")
        if monitor.unsafe_points.shape[1] != monitor.safe_points.shape[1]:
            raise ArtifactError("unsafe and safe point dimensions differ")
        if not (np.all(np.isfinite(monitor.unsafe_points))
                and np.all(np.isfinite(monitor.safe_points))):
            raise ArtifactError("point sets contain non-finite values")
    elif monitor.score_kind != SCORE_NEG_ABS_NY:
        raise ArtifactError(f"unknown score kind {monitor.score_kind!r}")
    if monitor.transform_kind not in (TRANSFORM_PREDICTOR, TRANSFORM_IDENTITY, TRANSFORM_PCA):
        raise ArtifactError(f"unknown transform kind {monitor.transform_kind!r}")
    for key in ("dt", "past_steps", "lead_steps"):
        if key not in monitor.metadata:
            raise ArtifactError(f"metadata missing {key!r}")


def _transform_to_json(monitor: CalibratedMonitor) -> dict:
    if monitor.transform_kind == TRANSFORM_IDENTITY:
        return {"kind": TRANSFORM_IDENTITY}
    if monitor.transform_kind == TRANSFORM_PREDICTOR:
        t: LinearPredictor = monitor.transform
        return {
            "kind": TRANSFORM_PREDICTOR,
            "M": t.M.tolist(),
            "mu": t.mu.tolist(),
            "n_pairs": t.n_pairs,
            "rms_residual": t.rms_residual.tolist(),
            "ridge_applied": t.ridge_applied,
        }
    if monitor.transform_kind == TRANSFORM_PCA:
        return {
            "kind": TRANSFORM_PCA,
            "mean": monitor.transform.mean.tolist(),
            "basis": monitor.transform.basis.tolist(),
        }
    raise ValueError(f"unknown transform kind {monitor.transform_kind!r}")


def _transform_from_json(data: dict):
    kind = data.get("kind")
    if kind == TRANSFORM_IDENTITY:
        return kind, None
    if kind == TRANSFORM_PREDICTOR:
        return kind, LinearPredictor(
            M=np.asarray(data["M"], float),
            mu=np.asarray(data["mu"], float),
            n_pairs=int(data["n_pairs"]),
            rms_residual=np.asarray(data["rms_residual"], float),
            ridge_applied=bool(data["ridge_applied"]),
        )
    if kind == TRANSFORM_PCA:
        return kind, PcaMap(mean=np.asarray(data["mean"], float),
                            basis=np.asarray(data["basis"], float))
    raise ArtifactError(f"unknown transform kind {kind!r}")


def save_monitor(monitor: CalibratedMonitor, path: str | Path) -> None:
    """Persist the monitor as versioned JSON (exact float round trip)."""
    validate_monitor(monitor)
    doc = {
        "format_version": ARTIFACT_FORMAT_VERSION,
        "method": monitor.method,
        "transform": _transform_to_json(monitor),
        "score_kind": monitor.score_kind,
        "unsafe_points": None if monitor.unsafe_points is None else monitor.unsafe_points.tolist(),
        "safe_points": None if monitor.safe_points is None else monitor.safe_points.tolist(),
        "alphas_sorted": monitor.alphas_sorted.tolist(),
        "metadata": monitor.metadata,
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_monitor(path: str | Path) -> CalibratedMonitor:
    """Load and validate a monitor artifact; fails loudly on any violation."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as err:
        raise ArtifactError(f"artifact {path} is not valid JSON: {err}") from err
    if doc.get("format_version") != ARTIFACT_FORMAT_VERSION:
        raise ArtifactError(f"unsupported artifact format {doc.get('format_version')}")
    transform_kind, transform = _transform_from_json(doc["transform"])
    monitor = CalibratedMonitor(
        method=doc["method"],
        transform_kind=transform_kind,
        transform=transform,
        score_kind=doc["score_kind"],
        unsafe_points=None if doc["unsafe_points"] is None else np.asarray(doc["unsafe_points"], float),
        safe_points=None if doc["safe_points"] is None else np.asarray(doc["safe_points"], float),
        alphas_sorted=np.asarray(doc["alphas_sorted"], float),
        metadata=doc["metadata"],
    )
    validate_monitor(monitor)
    return monitor
