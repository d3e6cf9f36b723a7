"""Accuracy criteria for effort predictions: relative error, MMRE and PRED(l).

All functions expect strictly positive actual efforts; relative errors are
|actual - predicted| / actual, so they are invariant under a common positive
rescaling of both vectors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# PRED(l) counts projects with relative error <= l.  The inclusive comparison
# is the common "within 25%" convention; pass inclusive=False to count strict
# inequality instead.
PRED_INCLUSIVE = True

DEFAULT_PRED_LEVEL = 0.25


@dataclass(frozen=True)
class EvalResult:
    """MMRE/PRED summary plus the per-project relative errors behind it."""

    mmre: float
    pred: float
    level: float
    re: np.ndarray
    n: int


def relative_error(actual: float, predicted: float) -> float:
    """Return |actual - predicted| / actual for a single project."""
    if actual <= 0:
        raise ValueError(f"actual effort must be positive, got {actual}")
    return abs(actual - predicted) / actual


def _validate_pair(actuals, predictions):
    a = np.asarray(actuals, dtype=float)
    p = np.asarray(predictions, dtype=float)
    if a.ndim != 1 or p.ndim != 1:
        raise ValueError("actuals and predictions must be one-dimensional")
    if a.shape != p.shape:
        raise ValueError(f"length mismatch: {a.shape[0]} actuals vs {p.shape[0]} predictions")
    if a.size == 0:
        raise ValueError("empty input")
    if np.any(a <= 0):
        raise ValueError("all actual efforts must be strictly positive")
    return a, p


def relative_errors(actuals, predictions) -> np.ndarray:
    """Vector of per-project relative errors."""
    a, p = _validate_pair(actuals, predictions)
    return np.abs(a - p) / a


def mmre(actuals, predictions) -> float:
    """Mean magnitude of relative error over all pairs."""
    return float(np.mean(relative_errors(actuals, predictions)))


def pred(actuals, predictions, level: float = DEFAULT_PRED_LEVEL, *, inclusive: bool = PRED_INCLUSIVE) -> float:
    """Fraction of projects whose relative error is within ``level``."""
    if level <= 0:
        raise ValueError("level must be positive")
    re = relative_errors(actuals, predictions)
    hits = re <= level if inclusive else re < level
    return float(np.count_nonzero(hits)) / re.size


def evaluate(actuals, predictions, level: float = DEFAULT_PRED_LEVEL, *, inclusive: bool = PRED_INCLUSIVE) -> EvalResult:
    """Compute MMRE and PRED(level) together, keeping the per-project errors."""
    if level <= 0:
        raise ValueError("level must be positive")
    re = relative_errors(actuals, predictions)
    hits = re <= level if inclusive else re < level
    re.flags.writeable = False
    return EvalResult(
        mmre=float(np.mean(re)),
        pred=float(np.count_nonzero(hits)) / re.size,
        level=level,
        re=re,
        n=int(re.size),
    )
