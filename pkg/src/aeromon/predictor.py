"""Affine least-squares predictor from buffered observations to future outputs.

Minimizes sum ||y - (M o + mu)||^2 over the regression pairs via normal
equations on centered data.  Centering makes the residual mean exactly zero
and keeps the system well scaled; an automatic ridge term covers
near-collinear features.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UnderdeterminedError

CONDITION_LIMIT = 1e10
RIDGE_SCALE = 1e-8


@dataclass(frozen=True)
class LinearPredictor:
    """y_hat = M o + mu, with a summary of the fit."""

    M: np.ndarray              # (target_dim, feature_dim)
    mu: np.ndarray             # (target_dim,)
    n_pairs: int
    rms_residual: np.ndarray   # per-output RMS residual on the training pairs
    ridge_applied: bool = False

    @property
    def feature_dim(self) -> int:
        return self.M.shape[1]

    @property
    def target_dim(self) -> int:
        return self.M.shape[0]


def fit_least_squares(features: np.ndarray, targets: np.ndarray) -> LinearPredictor:
    """Fit the affine map on (n, feature_dim) features and (n, target_dim) targets.

    Requires at least feature_dim + 1 pairs.  If the centered feature
    covariance has condition number above 1e10, a ridge term
    lambda = 1e-8 * trace / feature_dim is added and flagged in the summary.
    """
    X = np.asarray(features, dtype=float)
    Y = np.asarray(targets, dtype=float)
    if X.ndim != 2 or Y.ndim != 2 or X.shape[0] != Y.shape[0]:
        raise ValueError(f"misaligned shapes {X.shape} vs {Y.shape}")
    n, d = X.shape
    if n < d + 1:
        raise UnderdeterminedError(f"{n} pairs cannot determine {d} features + offset")
    x_mean = X.mean(axis=0)
    y_mean = Y.mean(axis=0)
    Xc = X - x_mean
    Yc = Y - y_mean
    cov = Xc.T @ Xc
    ridge_applied = False
    if np.linalg.cond(cov) > CONDITION_LIMIT:
        cov = cov + (RIDGE_SCALE * np.trace(cov) / d) * np.eye(d)
        ridge_applied = True
    # M^T solves cov @ M^T = Xc^T Yc.  Contiguous copy so matmul rounding is
    # identical before and after an artifact round trip.
    Mt = np.linalg.solve(cov, Xc.T @ Yc)
    M = np.ascontiguousarray(Mt.T)
    mu = y_mean - M @ x_mean
    residuals = Y - (X @ Mt + mu)
    rms = np.sqrt(np.mean(residuals ** 2, axis=0))
    return LinearPredictor(M=M, mu=mu, n_pairs=n, rms_residual=rms,
                           ridge_applied=ridge_applied)


def fit_from_pairs(pairs) -> LinearPredictor:
    """Convenience wrapper for a list of (observation-vector, target) pairs."""
    features = np.stack([np.asarray(o.values if hasattr(o, "values") else o, float)
                         for o, _ in pairs])
    targets = np.stack([np.asarray(y, float) for _, y in pairs])
    return fit_least_squares(features, targets)


def predict(model: LinearPredictor, observation: np.ndarray) -> np.ndarray:
    """Apply the affine map to one observation vector."""
    o = np.asarray(observation, dtype=float)
    if o.shape != (model.feature_dim,):
        raise ValueError(f"observation shape {o.shape} != ({model.feature_dim},)")
    return model.M @ o + model.mu


def transform_set(model: LinearPredictor, observations: np.ndarray) -> np.ndarray:
    """Apply the map to each row, preserving order; (0, d) maps to (0, target_dim)."""
    obs = np.asarray(observations, dtype=float)
    if obs.size == 0:
        return np.zeros((0, model.target_dim))
    if obs.ndim != 2 or obs.shape[1] != model.feature_dim:
        raise ValueError(f"expected (n, {model.feature_dim}) observations, got {obs.shape}")
    return obs @ model.M.T + model.mu
