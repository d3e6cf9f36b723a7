"""Subset search engines: greedy forward/backward scans and a genetic algorithm.

Every engine minimizes an Evaluator score (pooled cross-validated MMRE,
lower is better) and is deterministic for fixed inputs and seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

# Score assigned to degenerate candidates such as the empty subset.  Any
# finite score beats the sentinel; two sentinels compare equal.
WORST_SCORE = math.inf


@dataclass(frozen=True)
class FeatureSubset:
    """Immutable bitmask over feature columns; the unit of search.

    Bit i corresponds to column i of the feature matrix.  Instances are
    hashable so searches can cache scores keyed by the bits.
    """

    bits: tuple[int, ...]

    def __post_init__(self):
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("subset bits must all be 0 or 1")

    @classmethod
    def empty(cls, n_features: int) -> "FeatureSubset":
        return cls(bits=(0,) * n_features)

    @classmethod
    def full(cls, n_features: int) -> "FeatureSubset":
        return cls(bits=(1,) * n_features)

    @classmethod
    def from_indices(cls, n_features: int, indices: Iterable[int]) -> "FeatureSubset":
        bits = [0] * n_features
        for i in indices:
            bits[i] = 1
        return cls(bits=tuple(bits))

    @classmethod
    def from_mask(cls, mask) -> "FeatureSubset":
        return cls(bits=tuple(int(bool(b)) for b in mask))

    @property
    def n_features(self) -> int:
        return len(self.bits)

    @property
    def count(self) -> int:
        return sum(self.bits)

    @property
    def indices(self) -> tuple[int, ...]:
        return tuple(i for i, b in enumerate(self.bits) if b)

    def contains(self, i: int) -> bool:
        return bool(self.bits[i])

    def with_feature(self, i: int) -> "FeatureSubset":
        bits = list(self.bits)
        bits[i] = 1
        return FeatureSubset(bits=tuple(bits))

    def without_feature(self, i: int) -> "FeatureSubset":
        bits = list(self.bits)
        bits[i] = 0
        return FeatureSubset(bits=tuple(bits))

    def to_mask(self) -> np.ndarray:
        return np.asarray(self.bits, dtype=bool)


# Contract: (training matrix, targets, fold assignment, subset) -> score.
EvalFn = Callable[[np.ndarray, np.ndarray, np.ndarray, FeatureSubset], float]


@dataclass(frozen=True)
class Evaluator:
    """Deterministic subset scorer; ``kind`` tags the internal estimator."""

    fn: EvalFn
    kind: str  # "ridge-wrapper" or "ls-filter"

    def __call__(self, X, z, folds, subset: FeatureSubset) -> float:
        return self.fn(X, z, folds, subset)


@dataclass(frozen=True)
class GaConfig:
    """Generational GA parameters (population/generations default to 100)."""

    population: int = 100
    generations: int = 100
    crossover_rate: float = 0.8
    mutation_rate: float = 0.01
    elite_fraction: float = 0.10
    seed: int = 0

    def __post_init__(self):
        if self.population < 2:
            raise ValueError("population must be at least 2")
        if self.generations < 0:
            raise ValueError("generations must be nonnegative")
        for name in ("crossover_rate", "mutation_rate", "elite_fraction"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.elite_count < 1:
            raise ValueError("elite fraction times population must round to at least 1")

    @property
    def elite_count(self) -> int:
        return int(round(self.elite_fraction * self.population))


def forward_select(X, z, folds, evaluator: Evaluator) -> FeatureSubset:
    """Grow a subset greedily from empty; stop when no addition strictly improves.

    Ties between equally scoring additions go to the lowest feature index.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[1]
    current = FeatureSubset.empty(n)
    current_score = WORST_SCORE
    while current.count < n:
        best_j = None
        best_score = current_score
        for j in range(n):
            if current.contains(j):
                continue
            s = evaluator(X, z, folds, current.with_feature(j))
            if s < best_score:
                best_score = s
                best_j = j
        if best_j is None:
            break
        current = current.with_feature(best_j)
        current_score = best_score
    return current


def backward_eliminate(X, z, folds, evaluator: Evaluator) -> FeatureSubset:
    """Shrink from the full set; stop when no removal strictly improves."""
    X = np.asarray(X, dtype=float)
    n = X.shape[1]
    current = FeatureSubset.full(n)
    current_score = evaluator(X, z, folds, current)
    while current.count > 0:
        best_j = None
        best_score = current_score
        for j in range(n):
            if not current.contains(j):
                continue
            s = evaluator(X, z, folds, current.without_feature(j))
            if s < best_score:
                best_score = s
                best_j = j
        if best_j is None:
            break
        current = current.without_feature(best_j)
        current_score = best_score
    return current


def _stochastic_uniform_indices(pop_size: int, n_picks: int, rng) -> np.ndarray:
    """Equally spaced picks over rank-linear segments (best rank = longest).

    Individuals are assumed sorted best-first; one random start offset below
    the step size is drawn, then the pointer advances in equal steps.
    """
    weights = np.arange(pop_size, 0, -1, dtype=float)
    cum = np.cumsum(weights)
    step = cum[-1] / n_picks
    start = rng.uniform(0.0, step)
    points = start + step * np.arange(n_picks)
    return np.searchsorted(cum, points, side="right")


def ga_select(X, z, folds, evaluator: Evaluator, cfg: GaConfig) -> FeatureSubset:
    """Genetic search over bit strings; returns the fittest-ever individual.

    Per generation: the fittest ``elite_count`` individuals are copied
    unchanged; the rest of the next population comes from rank-based
    stochastic-uniform parent selection, uniform mask crossover applied with
    ``crossover_rate``, and per-bit mutation with ``mutation_rate``.  Scores
    are cached by bit pattern within the run, so duplicate individuals are
    evaluated once.
    """
    X = np.asarray(X, dtype=float)
    n_feat = X.shape[1]
    rng = np.random.default_rng(cfg.seed)

    pop = rng.integers(0, 2, size=(cfg.population, n_feat), dtype=np.int64)
    pop[-1, :] = 1  # anchor individual: the full feature set

    cache: dict[tuple[int, ...], float] = {}

    def score_of(ind: np.ndarray) -> float:
        key = tuple(int(b) for b in ind)
        if key not in cache:
            cache[key] = evaluator(X, z, folds, FeatureSubset(bits=key))
        return cache[key]

    best_bits: np.ndarray | None = None
    best_score = WORST_SCORE
    elite_n = cfg.elite_count

    def update_best(sorted_pop, sorted_scores):
        nonlocal best_bits, best_score
        if best_bits is None or sorted_scores[0] < best_score:
            best_score = sorted_scores[0]
            best_bits = sorted_pop[0].copy()

    for _ in range(cfg.generations):
        scores = np.array([score_of(ind) for ind in pop])
        order = np.argsort(scores, kind="stable")
        pop = pop[order]
        scores = scores[order]
        update_best(pop, scores)

        n_children = cfg.population - elite_n
        n_pairs = (n_children + 1) // 2
        parent_idx = _stochastic_uniform_indices(cfg.population, 2 * n_pairs, rng)
        children = []
        for k in range(n_pairs):
            pa = pop[parent_idx[2 * k]]
            pb = pop[parent_idx[2 * k + 1]]
            if rng.random() < cfg.crossover_rate:
                mask = rng.integers(0, 2, size=n_feat, dtype=bool)
                c1 = np.where(mask, pa, pb)
                c2 = np.where(mask, pb, pa)
            else:
                c1, c2 = pa.copy(), pb.copy()
            children.append(c1)
            children.append(c2)
        offspring = np.array(children[:n_children])
        if cfg.mutation_rate > 0 and offspring.size:
            flips = rng.random(offspring.shape) < cfg.mutation_rate
            offspring = np.where(flips, 1 - offspring, offspring)
        pop = np.vstack([pop[:elite_n], offspring]) if n_children else pop[:elite_n]

    scores = np.array([score_of(ind) for ind in pop])
    order = np.argsort(scores, kind="stable")
    update_best(pop[order], scores[order])

    return FeatureSubset(bits=tuple(int(b) for b in best_bits))
