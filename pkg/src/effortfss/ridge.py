"""Dual-form kernel ridge regression, the terminal estimator for every subset.

Predictions are computed from the dual system: solve (K + aI) alpha = z once
per fit, then predict any input x as k(x) . alpha, where K is the training
kernel matrix and k(x) holds kernel values between x and the training rows.
The primal weight vector is never materialized.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import ComputeError
from .metrics import relative_errors
from .search import WORST_SCORE, FeatureSubset


class SingularKernelError(ComputeError):
    """K + aI could not be factorized (singular or not positive definite)."""


@dataclass(frozen=True)
class KernelConfig:
    """Kernel choice: ``rbf`` with width gamma, or ``linear`` (plain dot)."""

    kind: str = "rbf"
    gamma: float = 3.5

    def __post_init__(self):
        if self.kind not in ("rbf", "linear"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "rbf" and not self.gamma > 0:
            raise ValueError("rbf kernel requires gamma > 0")


@dataclass(frozen=True)
class RidgeConfig:
    """Ridge parameter ``a`` (nonnegative; 0 recovers least squares) + kernel."""

    a: float = 0.1
    kernel: KernelConfig = field(default_factory=KernelConfig)

    def __post_init__(self):
        if self.a < 0:
            raise ValueError("ridge parameter a must be nonnegative")


def kernel_eval(x, x2, cfg: KernelConfig) -> float:
    """Kernel value between two vectors: exp(-|x-x2|^2 / (2 gamma^2)) or dot."""
    x = np.asarray(x, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if x.shape != x2.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {x2.shape}")
    if cfg.kind == "linear":
        return float(np.dot(x, x2))
    d2 = float(np.dot(x - x2, x - x2))
    return float(np.exp(-d2 / (2.0 * cfg.gamma**2)))


def kernel_cross(A: np.ndarray, B: np.ndarray, cfg: KernelConfig) -> np.ndarray:
    """Kernel values between every row of A and every row of B."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]} columns")
    if cfg.kind == "linear":
        return A @ B.T
    d2 = (
        np.sum(A * A, axis=1)[:, None]
        + np.sum(B * B, axis=1)[None, :]
        - 2.0 * (A @ B.T)
    )
    np.maximum(d2, 0.0, out=d2)
    return np.exp(-d2 / (2.0 * cfg.gamma**2))


def kernel_matrix(X: np.ndarray, cfg: KernelConfig) -> np.ndarray:
    """Training kernel matrix, symmetrized so K[i, j] == K[j, i] exactly."""
    K = kernel_cross(X, X, cfg)
    K = 0.5 * (K + K.T)
    if cfg.kind == "rbf":
        np.fill_diagonal(K, 1.0)
    return K


@dataclass(frozen=True)
class RidgeModel:
    """Fitted model: training inputs, targets, config and dual coefficients."""

    X_tr: np.ndarray
    z_tr: np.ndarray
    config: RidgeConfig
    dual_coef: np.ndarray

    @property
    def n_train(self) -> int:
        return self.X_tr.shape[0]

    @property
    def n_features(self) -> int:
        return self.X_tr.shape[1]

    def predict(self, X_new) -> np.ndarray:
        """Predicted efforts for each row of X_new."""
        X_new = np.atleast_2d(np.asarray(X_new, dtype=float))
        if X_new.shape[1] != self.n_features:
            raise ValueError(
                f"dimension mismatch: model has {self.n_features} features, "
                f"input has {X_new.shape[1]}"
            )
        k = kernel_cross(X_new, self.X_tr, self.config.kernel)
        return k @ self.dual_coef


def fit(X_tr, z_tr, cfg: RidgeConfig) -> RidgeModel:
    """Solve the dual system (K + aI) alpha = z and keep alpha for prediction.

    For a > 0 the system is solved by Cholesky factorization (K + aI is
    positive definite for the RBF kernel).  For a = 0 the minimum-norm
    solution is used instead, so a rank-deficient linear-kernel matrix still
    reproduces ordinary least-squares predictions.
    """
    X_tr = np.array(X_tr, dtype=float, copy=True)
    z_tr = np.array(z_tr, dtype=float, copy=True).ravel()
    if X_tr.ndim != 2 or X_tr.shape[0] < 1:
        raise ValueError("training matrix must be 2-d with at least one row")
    if X_tr.shape[0] != z_tr.shape[0]:
        raise ValueError("row count mismatch between inputs and targets")

    K = kernel_matrix(X_tr, cfg.kernel)
    n = K.shape[0]
    if cfg.a > 0:
        try:
            factor = cho_factor(K + cfg.a * np.eye(n), lower=True)
        except (LinAlgError, np.linalg.LinAlgError) as exc:
            raise SingularKernelError(
                "K + aI is singular or not positive definite; "
                "increase the ridge parameter a"
            ) from exc
        alpha = cho_solve(factor, z_tr)
    else:
        alpha, *_ = np.linalg.lstsq(K, z_tr, rcond=None)
    if not np.all(np.isfinite(alpha)):
        raise SingularKernelError("dual solve produced non-finite coefficients")

    X_tr.flags.writeable = False
    z_tr.flags.writeable = False
    alpha.flags.writeable = False
    return RidgeModel(X_tr=X_tr, z_tr=z_tr, config=cfg, dual_coef=alpha)


def predict(model: RidgeModel, X_new) -> np.ndarray:
    return model.predict(X_new)


def cv_score(X, z, subset: FeatureSubset, folds, cfg: RidgeConfig) -> float:
    """Pooled 10-fold MMRE of ridge on the given subset (lower is better).

    Trains on nine folds, predicts the held-out fold, pools every per-project
    relative error and returns their mean.  The empty subset scores the
    worst-score sentinel so greedy searches can start from it uniformly.
    """
    if subset.count == 0:
        return WORST_SCORE
    X = np.asarray(X, dtype=float)
    z = np.asarray(z, dtype=float)
    folds = np.asarray(folds)
    Xs = X[:, subset.to_mask()]
    pooled = []
    for f in np.unique(folds):
        held = folds == f
        model = fit(Xs[~held], z[~held], cfg)
        pooled.append(relative_errors(z[held], model.predict(Xs[held])))
    return float(np.mean(np.concatenate(pooled)))
