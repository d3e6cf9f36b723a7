"""Least squares on feature subsets and stepwise selection via partial F-tests.

The F-distribution tail probability is computed from a self-contained
regularized incomplete beta function (continued fraction, 1e-10 absolute
accuracy target) so the selection loop does not depend on a statistics
library.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ComputeError
from .metrics import relative_errors
from .search import WORST_SCORE, FeatureSubset

# Relative tolerance below which an SSE improvement counts as no improvement.
_REL_TOL = 1e-12


class StepwiseCycleError(ComputeError):
    """Stepwise exceeded its step budget, likely add/remove cycling."""


@dataclass(frozen=True)
class LinearModel:
    """Least-squares fit restricted to an active subset, with an intercept."""

    intercept: float
    coefficients: np.ndarray
    subset: FeatureSubset
    n: int
    sse: float

    @property
    def p(self) -> int:
        """Number of slope parameters (active subset size)."""
        return self.subset.count

    @property
    def residual_variance(self) -> float:
        dof = self.n - self.p - 1
        return self.sse / dof if dof > 0 else 0.0

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        cols = self.subset.to_mask()
        return self.intercept + X[:, cols] @ self.coefficients


@dataclass(frozen=True)
class StepwiseConfig:
    """Entry/exit p-value thresholds and direction of the stepwise loop."""

    p_enter: float = 0.05
    p_remove: float = 0.10
    direction: str = "forward"
    max_steps: int = 1000

    def __post_init__(self):
        if not 0.0 < self.p_enter < self.p_remove < 1.0:
            raise ValueError("thresholds must satisfy 0 < p_enter < p_remove < 1")
        if self.direction not in ("forward", "backward"):
            raise ValueError(f"unknown direction {self.direction!r}")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")


# ---------------------------------------------------------------------------
# F-distribution upper tail via the regularized incomplete beta function.
# ---------------------------------------------------------------------------

def _beta_cont_fraction(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz method)."""
    tiny = 1e-300
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 400):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            break
    return h


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if not (a > 0 and b > 0):
        raise ValueError("shape parameters must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    # Use the continued fraction on the side where it converges fast.
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cont_fraction(a, b, x) / a
    return 1.0 - front * _beta_cont_fraction(b, a, 1.0 - x) / b


def f_survival(f_stat: float, d1: float, d2: float) -> float:
    """P(F >= f_stat) for an F(d1, d2) variable."""
    if f_stat <= 0.0:
        return 1.0
    if math.isinf(f_stat):
        return 0.0
    x = d2 / (d2 + d1 * f_stat)
    return regularized_incomplete_beta(d2 / 2.0, d1 / 2.0, x)


# ---------------------------------------------------------------------------
# Fitting and stepwise selection.
# ---------------------------------------------------------------------------

def ls_fit(X, z, subset: FeatureSubset) -> LinearModel:
    """Minimal-norm least squares with intercept on the active subset.

    Rank-deficient designs (duplicated columns, one-hot groups collinear with
    the intercept) get the pseudoinverse solution rather than an error.
    """
    X = np.asarray(X, dtype=float)
    z = np.asarray(z, dtype=float).ravel()
    n = X.shape[0]
    if n != z.shape[0]:
        raise ValueError("row count mismatch between inputs and targets")
    cols = subset.to_mask()
    design = np.column_stack([np.ones(n), X[:, cols]])
    coef, *_ = np.linalg.lstsq(design, z, rcond=None)
    resid = z - design @ coef
    slopes = np.array(coef[1:], copy=True)
    slopes.flags.writeable = False
    return LinearModel(
        intercept=float(coef[0]),
        coefficients=slopes,
        subset=subset,
        n=n,
        sse=float(resid @ resid),
    )


def _sse(X, z, subset: FeatureSubset) -> float:
    return ls_fit(X, z, subset).sse


def partial_f_pvalue(X, z, current: FeatureSubset, candidate: int) -> float:
    """p-value of the partial F-test for adding/removing one candidate.

    If the candidate is outside ``current`` this is the entry test (full
    model = current plus candidate); if inside, the removal test (reduced
    model = current minus candidate).  Degenerate statistics map
    conservatively: no SSE improvement gives p = 1, a perfect full-model fit
    with real improvement gives p = 0.
    """
    X = np.asarray(X, dtype=float)
    z = np.asarray(z, dtype=float).ravel()
    n = X.shape[0]
    if current.contains(candidate):
        full = current
        reduced = current.without_feature(candidate)
    else:
        full = current.with_feature(candidate)
        reduced = current

    dof_full = n - full.count - 1
    if dof_full <= 0:
        return 1.0

    sse_reduced = _sse(X, z, reduced)
    sse_full = _sse(X, z, full)
    scale = max(sse_reduced, sse_full, 1.0)
    improvement = sse_reduced - sse_full
    if improvement <= _REL_TOL * scale:
        return 1.0
    if sse_full <= _REL_TOL * scale:
        return 0.0
    f_stat = improvement * dof_full / sse_full
    return f_survival(f_stat, 1.0, float(dof_full))


def stepwise(X, z, cfg: StepwiseConfig) -> FeatureSubset:
    """Add/remove loop driven by partial F-test p-values.

    Repeatedly adds the smallest-p candidate with p < p_enter; when no
    addition qualifies, removes the largest-p member with p > p_remove and
    returns to adding; terminates when neither step applies.  Forward starts
    from the empty set, backward from the full set.  Ties on equal p-values
    go to the lowest feature index.
    """
    X = np.asarray(X, dtype=float)
    z = np.asarray(z, dtype=float).ravel()
    n_features = X.shape[1]
    current = (
        FeatureSubset.empty(n_features)
        if cfg.direction == "forward"
        else FeatureSubset.full(n_features)
    )
    steps = 0
    while True:
        # Adding phase: repeat while some candidate qualifies.
        added = True
        while added:
            added = False
            best_j, best_p = None, cfg.p_enter
            for j in range(n_features):
                if current.contains(j):
                    continue
                p = partial_f_pvalue(X, z, current, j)
                if p < best_p:
                    best_p, best_j = p, j
            if best_j is not None:
                current = current.with_feature(best_j)
                added = True
                steps += 1
                if steps > cfg.max_steps:
                    raise StepwiseCycleError(
                        f"exceeded {cfg.max_steps} steps; possible add/remove cycling"
                    )
        # Removal phase: one removal, then back to adding; none means done.
        worst_j, worst_p = None, cfg.p_remove
        for j in range(n_features):
            if not current.contains(j):
                continue
            p = partial_f_pvalue(X, z, current, j)
            if p > worst_p:
                worst_p, worst_j = p, j
        if worst_j is None:
            return current
        current = current.without_feature(worst_j)
        steps += 1
        if steps > cfg.max_steps:
            raise StepwiseCycleError(
                f"exceeded {cfg.max_steps} steps; possible add/remove cycling"
            )


def cv_score(X, z, subset: FeatureSubset, folds) -> float:
    """Pooled 10-fold MMRE of plain least squares on the subset.

    The filter-search counterpart of the ridge wrapper score; the empty
    subset scores the worst-score sentinel.
    """
    if subset.count == 0:
        return WORST_SCORE
    X = np.asarray(X, dtype=float)
    z = np.asarray(z, dtype=float)
    folds = np.asarray(folds)
    pooled = []
    for f in np.unique(folds):
        held = folds == f
        model = ls_fit(X[~held], z[~held], subset)
        pooled.append(relative_errors(z[held], model.predict(X[held])))
    return float(np.mean(np.concatenate(pooled)))
