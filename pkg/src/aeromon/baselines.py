"""The five monitor constructions behind one interface.

full        predictor transform, NN score in predicted-output space
no_pred     identity transform, NN score on raw 18-dim observations
pca         PCA projection (fit on safe observations), NN score
current_ny  -|Ny| of the newest buffered output, plain calibration
pred_ny     -|Ny| of the predicted future output, plain calibration
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .conformal import (
    SCORE_NEAREST_NEIGHBOR,
    SCORE_NEG_ABS_NY,
    TRANSFORM_IDENTITY,
    TRANSFORM_PCA,
    TRANSFORM_PREDICTOR,
    CalibratedMonitor,
    PcaMap,
    loo_calibration,
    plain_calibration,
    validate_monitor,
)
from .datasets import DatasetBundle
from .errors import RankDeficiencyError
from .plant import NY, OUTPUT_DIM
from .predictor import LinearPredictor, transform_set

METHOD_NAMES = ("full", "no_pred", "pca", "current_ny", "pred_ny")


@dataclass(frozen=True)
class MethodSpec:
    """Which monitor to build; pca_dims only matters for the pca method."""

    name: str
    pca_dims: int = 6

    def __post_init__(self):
        if self.name not in METHOD_NAMES:
            raise ValueError(f"unknown method {self.name!r}; expected one of {METHOD_NAMES}")
        if not 1 <= self.pca_dims <= 3 * OUTPUT_DIM:
            raise ValueError("pca_dims must be in [1, 18]")


def fit_pca(observations: np.ndarray, dims: int) -> PcaMap:
    """Top principal directions of the centered data, rows orthonormal."""
    data = np.asarray(observations, float)
    if data.ndim != 2:
        raise ValueError("observations must be a 2-d array")
    n, d = data.shape
    if not 1 <= dims <= d:
        raise ValueError(f"dims must be in [1, {d}]")
    if n < dims + 1:
        raise ValueError(f"need at least dims + 1 = {dims + 1} observations, got {n}")
    mean = data.mean(axis=0)
    centered = data - mean
    # Rows of vt are principal directions ordered by singular value.
    _, singular, vt = np.linalg.svd(centered, full_matrices=False)
    tol = singular.max(initial=0.0) * max(n, d) * np.finfo(float).eps
    rank = int(np.sum(singular > tol))
    if rank < dims:
        raise RankDeficiencyError(
            f"data rank {rank} is below the requested {dims} components",
            achieved_rank=rank,
        )
    return PcaMap(mean=mean, basis=vt[:dims].copy())


def ny_score(y: np.ndarray) -> float:
    """Negative magnitude of lateral acceleration; rises toward 0 when safe."""
    y = np.asarray(y, float)
    if y.shape != (OUTPUT_DIM,):
        raise ValueError(f"expected a {OUTPUT_DIM}-dim output, got {y.shape}")
    return float(-abs(y[NY]))


def build_monitor(spec: MethodSpec, bundle: DatasetBundle,
                  predictor: LinearPredictor | None = None) -> CalibratedMonitor:
    """Construct and calibrate the requested monitor from a dataset bundle."""
    if spec.name in ("full", "pred_ny") and predictor is None:
        raise ValueError(f"method {spec.name!r} requires a fitted predictor")
    error_obs = bundle.error_matrix()
    safe_obs = bundle.safe_matrix()
    meta = {
        "method": spec.name,
        "dt": bundle.metadata["dt"],
        "past_steps": bundle.metadata["past_steps"],
        "lead_steps": bundle.metadata["lead_steps"],
        "n_calibration": error_obs.shape[0],
    }

    if spec.name == "full":
        unsafe_pts = transform_set(predictor, error_obs)
        safe_pts = transform_set(predictor, safe_obs)
        monitor = CalibratedMonitor(
            method=spec.name, transform_kind=TRANSFORM_PREDICTOR, transform=predictor,
            score_kind=SCORE_NEAREST_NEIGHBOR, unsafe_points=unsafe_pts,
            safe_points=safe_pts, alphas_sorted=loo_calibration(unsafe_pts, safe_pts),
            metadata=meta,
        )
    elif spec.name == "no_pred":
        monitor = CalibratedMonitor(
            method=spec.name, transform_kind=TRANSFORM_IDENTITY, transform=None,
            score_kind=SCORE_NEAREST_NEIGHBOR, unsafe_points=error_obs.copy(),
            safe_points=safe_obs.copy(), alphas_sorted=loo_calibration(error_obs, safe_obs),
            metadata=meta,
        )
    elif spec.name == "pca":
        pca = fit_pca(safe_obs, spec.pca_dims)
        unsafe_pts = pca.project_batch(error_obs)
        safe_pts = pca.project_batch(safe_obs)
        monitor = CalibratedMonitor(
            method=spec.name, transform_kind=TRANSFORM_PCA, transform=pca,
            score_kind=SCORE_NEAREST_NEIGHBOR, unsafe_points=unsafe_pts,
            safe_points=safe_pts, alphas_sorted=loo_calibration(unsafe_pts, safe_pts),
            metadata=meta,
        )
    elif spec.name == "current_ny":
        current = error_obs[:, -OUTPUT_DIM:]
        alphas = plain_calibration(-np.abs(current[:, NY]))
        monitor = CalibratedMonitor(
            method=spec.name, transform_kind=TRANSFORM_IDENTITY, transform=None,
            score_kind=SCORE_NEG_ABS_NY, unsafe_points=None, safe_points=None,
            alphas_sorted=alphas, metadata=meta,
        )
    else:  # pred_ny
        predicted = transform_set(predictor, error_obs)
        alphas = plain_calibration(-np.abs(predicted[:, NY]))
        monitor = CalibratedMonitor(
            method=spec.name, transform_kind=TRANSFORM_PREDICTOR, transform=predictor,
            score_kind=SCORE_NEG_ABS_NY, unsafe_points=None, safe_points=None,
            alphas_sorted=alphas, metadata=meta,
        )
    validate_monitor(monitor)
    return monitor
