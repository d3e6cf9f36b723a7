"""One-hidden-layer perceptron, connection-weight importance, input elimination.

Training is full-batch gradient descent with momentum on mean squared error
(tanh hidden activation, identity output).  Targets are min-max normalized to
[0, 1] inside this module; validation errors are computed back on the
original effort scale so relative errors stay well defined.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ComputeError
from .metrics import relative_errors
from .search import FeatureSubset


class DivergenceError(ComputeError):
    """Training loss became non-finite (learning rate too high)."""


@dataclass(frozen=True)
class TrainConfig:
    """Gradient-descent settings; ``seed`` fixes the random weight init."""

    max_epochs: int = 500
    learning_rate: float = 0.1
    momentum: float = 0.9
    min_rel_improvement: float = 1e-6
    stall_window: int = 25
    init_scale: float | None = None  # None means 1/sqrt(n_inputs)
    hidden_max: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.max_epochs < 1 or self.stall_window < 1 or self.hidden_max < 1:
            raise ValueError("epoch, window and hidden bounds must be positive")
        if self.learning_rate <= 0 or not 0.0 <= self.momentum < 1.0:
            raise ValueError("learning_rate must be > 0 and momentum in [0, 1)")
        if self.min_rel_improvement <= 0:
            raise ValueError("min_rel_improvement must be positive")


@dataclass(frozen=True)
class MlpModel:
    """Weights of a one-hidden-layer tanh regressor with identity output."""

    w_in: np.ndarray  # (n_inputs, n_hidden)
    b_hidden: np.ndarray  # (n_hidden,)
    w_out: np.ndarray  # (n_hidden,)
    b_out: float
    activation: str = "tanh"

    @property
    def n_inputs(self) -> int:
        return self.w_in.shape[0]

    @property
    def n_hidden(self) -> int:
        return self.w_in.shape[1]

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        hidden = np.tanh(X @ self.w_in + self.b_hidden)
        return hidden @ self.w_out + self.b_out


def mlp_train(X, z01, n_hidden: int, cfg: TrainConfig) -> MlpModel:
    """Train on targets already scaled to [0, 1]; returns the best-MSE weights.

    Deterministic given the seed.  Stops early when the MSE has improved by
    less than ``min_rel_improvement`` (relatively) over the last
    ``stall_window`` epochs.
    """
    X = np.asarray(X, dtype=float)
    t = np.asarray(z01, dtype=float).ravel()
    n, n_in = X.shape
    if n_hidden < 1:
        raise ValueError("n_hidden must be at least 1")

    rng = np.random.default_rng(cfg.seed)
    s = cfg.init_scale if cfg.init_scale is not None else 1.0 / math.sqrt(max(n_in, 1))
    w_in = rng.uniform(-s, s, size=(n_in, n_hidden))
    b_hid = rng.uniform(-s, s, size=n_hidden)
    w_out = rng.uniform(-s, s, size=n_hidden)
    b_out = rng.uniform(-s, s)

    v_w_in = np.zeros_like(w_in)
    v_b_hid = np.zeros_like(b_hid)
    v_w_out = np.zeros_like(w_out)
    v_b_out = 0.0

    best = None
    best_mse = math.inf
    stalled = 0

    for _ in range(cfg.max_epochs):
        hidden = np.tanh(X @ w_in + b_hid)
        out = hidden @ w_out + b_out
        err = out - t
        mse = float(np.mean(err * err))
        if not math.isfinite(mse):
            raise DivergenceError("training diverged; lower the learning rate")
        # Momentum makes the raw MSE oscillate, so stall detection tracks the
        # best value seen rather than epoch-over-epoch differences.
        if best is None or mse < best_mse - cfg.min_rel_improvement * max(best_mse, 1e-30):
            stalled = 0
        else:
            stalled += 1
        if mse < best_mse:
            best_mse = mse
            best = (w_in.copy(), b_hid.copy(), w_out.copy(), float(b_out))
        if stalled >= cfg.stall_window:
            break

        grad_out = 2.0 * err / n
        g_w_out = hidden.T @ grad_out
        g_b_out = float(np.sum(grad_out))
        grad_hidden = np.outer(grad_out, w_out) * (1.0 - hidden * hidden)
        g_w_in = X.T @ grad_hidden
        g_b_hid = grad_hidden.sum(axis=0)

        v_w_in = cfg.momentum * v_w_in - cfg.learning_rate * g_w_in
        v_b_hid = cfg.momentum * v_b_hid - cfg.learning_rate * g_b_hid
        v_w_out = cfg.momentum * v_w_out - cfg.learning_rate * g_w_out
        v_b_out = cfg.momentum * v_b_out - cfg.learning_rate * g_b_out
        w_in = w_in + v_w_in
        b_hid = b_hid + v_b_hid
        w_out = w_out + v_w_out
        b_out = b_out + v_b_out

    w_in, b_hid, w_out, b_out = best
    for arr in (w_in, b_hid, w_out):
        arr.flags.writeable = False
    return MlpModel(w_in=w_in, b_hidden=b_hid, w_out=w_out, b_out=b_out)


def _normalize_targets(z: np.ndarray) -> tuple[np.ndarray, float, float]:
    lo = float(np.min(z))
    hi = float(np.max(z))
    if hi > lo:
        return (z - lo) / (hi - lo), lo, hi
    return np.zeros_like(z), lo, hi


def _denormalize(pred01: np.ndarray, lo: float, hi: float) -> np.ndarray:
    return pred01 * (hi - lo) + lo


def sweep_candidates(n_inputs: int, hidden_max: int = 16) -> list[int]:
    """Hidden-layer sizes tried: from min(n_inputs, hidden_max) up to hidden_max."""
    return list(range(min(n_inputs, hidden_max), hidden_max + 1))


def architecture_sweep(X, z, folds, cfg: TrainConfig) -> MlpModel:
    """Pick the hidden-layer size with the lowest fold-validation MMRE.

    Each candidate size is scored by 10-fold cross validation (targets
    normalized per training fold, predictions mapped back to the original
    effort scale).  The winner is retrained on all rows and returned.
    """
    X = np.asarray(X, dtype=float)
    z = np.asarray(z, dtype=float).ravel()
    folds = np.asarray(folds)
    candidates = sweep_candidates(X.shape[1], cfg.hidden_max)
    unique_folds = np.unique(folds)

    best_h = None
    best_score = math.inf
    for h in candidates:
        pooled = []
        for f in unique_folds:
            held = folds == f
            t01, lo, hi = _normalize_targets(z[~held])
            seed = int(np.random.SeedSequence([cfg.seed, h, int(f)]).generate_state(1)[0])
            model = mlp_train(X[~held], t01, h, replace(cfg, seed=seed))
            pred = _denormalize(model.predict(X[held]), lo, hi)
            pooled.append(relative_errors(z[held], pred))
        score = float(np.mean(np.concatenate(pooled)))
        if score < best_score:
            best_score = score
            best_h = h

    t01, _, _ = _normalize_targets(z)
    seed = int(np.random.SeedSequence([cfg.seed, best_h]).generate_state(1)[0])
    return mlp_train(X, t01, best_h, replace(cfg, seed=seed))


def garson_importance(model: MlpModel) -> np.ndarray:
    """Relative importance of every input, nonnegative and summing to 1.

    Per hidden node, each input's absolute incoming weight is normalized over
    all inputs and scaled by the absolute hidden-to-output weight; these
    contributions are summed over hidden nodes and normalized over inputs.
    Hidden nodes whose incoming weights are all zero contribute nothing.
    """
    w = np.abs(model.w_in)  # (n_inputs, n_hidden)
    col_sums = w.sum(axis=0)
    safe = np.where(col_sums > 0, col_sums, 1.0)
    contrib = (w / safe) * np.abs(model.w_out)  # zero columns stay zero
    contrib[:, col_sums == 0] = 0.0
    raw = contrib.sum(axis=1)
    total = raw.sum()
    if total <= 0:
        return np.zeros(model.n_inputs)
    return raw / total


def garson_eliminate(X, z, folds, cfg: TrainConfig) -> FeatureSubset:
    """Drop the least-important input per round until half the inputs remain.

    Each round runs a fresh architecture sweep on the surviving inputs, ranks
    them by connection-weight importance and removes the weakest; exactly
    ceil(initial/2) inputs survive.
    """
    X = np.asarray(X, dtype=float)
    n_initial = X.shape[1]
    if n_initial < 2:
        raise ValueError("input elimination needs at least 2 features")
    target = math.ceil(n_initial / 2)
    active = list(range(n_initial))
    round_no = 0
    while len(active) > target:
        seed = int(np.random.SeedSequence([cfg.seed, 7919, round_no]).generate_state(1)[0])
        model = architecture_sweep(X[:, active], z, folds, replace(cfg, seed=seed))
        ri = garson_importance(model)
        active.pop(int(np.argmin(ri)))
        round_no += 1
    return FeatureSubset.from_indices(n_initial, active)
