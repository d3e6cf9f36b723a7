"""Experiment orchestration: run FSS methods over random partitions.

For every (method, partition) cell the training split drives subset
selection through inner 10-fold cross-validation; ridge is then fitted on
the full training split twice (all features, selected features) and scored
on both the training and the held-out test rows.  Aggregates and
feature-consistency sets are assembled into an ExperimentReport that
serializes deterministically (no timestamps), so identical seeds reproduce
identical report files.
"""

from __future__ import annotations

import csv
import enum
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import ann, linreg, ridge
from .dataset import Dataset, SplitPlan, make_splits
from .errors import DataError
from .metrics import evaluate
from .search import (
    WORST_SCORE,
    Evaluator,
    FeatureSubset,
    GaConfig,
    backward_eliminate,
    forward_select,
    ga_select,
)

REPORT_FORMAT = "effortfss-report/1"

ORACLE_MAX_FEATURES = 20


class MethodId(enum.Enum):
    """The nine feature-selection methods."""

    BFE = "BFE"
    FFS = "FFS"
    BSWF = "BSWF"
    FSWF = "FSWF"
    LSBFE = "LSBFE"
    LSFFS = "LSFFS"
    GARSON = "GARSON"
    LSGA = "LSGA"
    GA = "GA"


METHOD_ORDER = tuple(MethodId)


def parse_method(name: str) -> MethodId:
    try:
        return MethodId(name.upper())
    except ValueError:
        valid = ", ".join(m.value for m in METHOD_ORDER)
        raise DataError(f"unknown method {name!r}; valid methods: {valid}") from None


@dataclass(frozen=True)
class ExperimentConfig:
    """Per-module settings consumed by run_method/run_experiment."""

    ridge: ridge.RidgeConfig = field(default_factory=ridge.RidgeConfig)
    stepwise: linreg.StepwiseConfig = field(default_factory=linreg.StepwiseConfig)
    ga: GaConfig = field(default_factory=GaConfig)
    ann: ann.TrainConfig = field(default_factory=ann.TrainConfig)
    pred_level: float = 0.25

    def to_json_dict(self) -> dict:
        return {
            "ridge": {
                "a": self.ridge.a,
                "kernel": self.ridge.kernel.kind,
                "gamma": self.ridge.kernel.gamma,
            },
            "stepwise": {
                "p_enter": self.stepwise.p_enter,
                "p_remove": self.stepwise.p_remove,
                "max_steps": self.stepwise.max_steps,
            },
            "ga": {
                "population": self.ga.population,
                "generations": self.ga.generations,
                "crossover_rate": self.ga.crossover_rate,
                "mutation_rate": self.ga.mutation_rate,
                "elite_fraction": self.ga.elite_fraction,
            },
            "ann": {
                "max_epochs": self.ann.max_epochs,
                "learning_rate": self.ann.learning_rate,
                "momentum": self.ann.momentum,
                "min_rel_improvement": self.ann.min_rel_improvement,
                "stall_window": self.ann.stall_window,
                "hidden_max": self.ann.hidden_max,
            },
            "pred_level": self.pred_level,
        }


@dataclass(frozen=True)
class PartitionResult:
    """Metrics for one (method, partition) cell.

    "Initial" metrics use the full feature set, "final" the selected subset;
    the same ridge configuration is used for both fits.
    """

    method: str
    partition_id: int
    selected: FeatureSubset
    selected_ids: tuple[int, ...]
    n_selected: int
    train_mmre_initial: float
    train_pred_initial: float
    train_mmre_final: float
    train_pred_final: float
    test_mmre_initial: float
    test_pred_initial: float
    test_mmre_final: float
    test_pred_final: float

    METRIC_FIELDS = (
        "train_mmre_initial",
        "train_pred_initial",
        "train_mmre_final",
        "train_pred_final",
        "test_mmre_initial",
        "test_pred_initial",
        "test_mmre_final",
        "test_pred_final",
    )


def ridge_evaluator(cfg: ridge.RidgeConfig) -> Evaluator:
    """Wrapper evaluator: pooled 10-fold MMRE of ridge on the subset."""
    return Evaluator(
        fn=lambda X, z, folds, s: ridge.cv_score(X, z, s, folds, cfg),
        kind="ridge-wrapper",
    )


def ls_evaluator() -> Evaluator:
    """Filter evaluator: pooled 10-fold MMRE of plain least squares."""
    return Evaluator(
        fn=lambda X, z, folds, s: linreg.cv_score(X, z, s, folds),
        kind="ls-filter",
    )


def _cell_seeds(plan: SplitPlan, method: MethodId) -> tuple[int, int]:
    """Deterministic (GA seed, ANN seed) for one cell, independent of order."""
    ss = np.random.SeedSequence([plan.seed, METHOD_ORDER.index(method)])
    ga_seed, ann_seed = (int(v) for v in ss.generate_state(2, dtype=np.uint64))
    return ga_seed, ann_seed


def select_subset(
    method: MethodId,
    X_tr: np.ndarray,
    z_tr: np.ndarray,
    folds: np.ndarray,
    configs: ExperimentConfig,
    ga_seed: int = 0,
    ann_seed: int = 0,
) -> FeatureSubset:
    """Dispatch one method's subset search on a training split."""
    wrapper = ridge_evaluator(configs.ridge)
    ls = ls_evaluator()
    if method is MethodId.FFS:
        return forward_select(X_tr, z_tr, folds, wrapper)
    if method is MethodId.BFE:
        return backward_eliminate(X_tr, z_tr, folds, wrapper)
    if method is MethodId.GA:
        return ga_select(X_tr, z_tr, folds, wrapper, replace(configs.ga, seed=ga_seed))
    if method is MethodId.LSFFS:
        return forward_select(X_tr, z_tr, folds, ls)
    if method is MethodId.LSBFE:
        return backward_eliminate(X_tr, z_tr, folds, ls)
    if method is MethodId.LSGA:
        return ga_select(X_tr, z_tr, folds, ls, replace(configs.ga, seed=ga_seed))
    if method is MethodId.FSWF:
        return linreg.stepwise(X_tr, z_tr, replace(configs.stepwise, direction="forward"))
    if method is MethodId.BSWF:
        return linreg.stepwise(X_tr, z_tr, replace(configs.stepwise, direction="backward"))
    if method is MethodId.GARSON:
        return ann.garson_eliminate(X_tr, z_tr, folds, replace(configs.ann, seed=ann_seed))
    raise DataError(f"unknown method {method!r}")


def score_subset(
    dataset: Dataset,
    plan: SplitPlan,
    subset: FeatureSubset,
    configs: ExperimentConfig,
) -> tuple[tuple[float, float], tuple[float, float]]:
    """Fit ridge on the training split restricted to ``subset``; score train/test.

    Returns ((train MMRE, train PRED), (test MMRE, test PRED)).  An empty
    subset degenerates to a zero-column kernel (a constant predictor).
    """
    tr = np.asarray(plan.train_indices)
    te = np.asarray(plan.test_indices)
    mask = subset.to_mask()
    model = ridge.fit(dataset.X[tr][:, mask], dataset.z[tr], configs.ridge)
    level = configs.pred_level
    train_eval = evaluate(dataset.z[tr], model.predict(dataset.X[tr][:, mask]), level)
    test_eval = evaluate(dataset.z[te], model.predict(dataset.X[te][:, mask]), level)
    return (train_eval.mmre, train_eval.pred), (test_eval.mmre, test_eval.pred)


def run_method(
    dataset: Dataset,
    plan: SplitPlan,
    method: MethodId,
    configs: ExperimentConfig,
) -> PartitionResult:
    """Select features on the training split, then score full vs selected."""
    tr = np.asarray(plan.train_indices)
    folds = np.asarray(plan.folds)
    X_tr = dataset.X[tr]
    z_tr = dataset.z[tr]
    ga_seed, ann_seed = _cell_seeds(plan, method)
    try:
        selected = select_subset(method, X_tr, z_tr, folds, configs, ga_seed, ann_seed)
        full = FeatureSubset.full(dataset.n_features)
        train_initial, test_initial = score_subset(dataset, plan, full, configs)
        train_final, test_final = score_subset(dataset, plan, selected, configs)
    except Exception as exc:
        raise type(exc)(
            f"[method={method.value} partition={plan.partition_id}] {exc}"
        ) from exc
    return PartitionResult(
        method=method.value,
        partition_id=plan.partition_id,
        selected=selected,
        selected_ids=tuple(dataset.features[j].id for j in selected.indices),
        n_selected=selected.count,
        train_mmre_initial=train_initial[0],
        train_pred_initial=train_initial[1],
        train_mmre_final=train_final[0],
        train_pred_final=train_final[1],
        test_mmre_initial=test_initial[0],
        test_pred_initial=test_initial[1],
        test_mmre_final=test_final[0],
        test_pred_final=test_final[1],
    )


@dataclass(frozen=True)
class ExperimentReport:
    """All per-partition rows plus aggregates, consistency sets, provenance."""

    results: tuple[PartitionResult, ...]
    failures: tuple[dict, ...]
    aggregates: dict
    consistency: dict
    provenance: dict

    def results_for(self, method: str) -> list[PartitionResult]:
        return [r for r in self.results if r.method == method]

    def to_json_dict(self) -> dict:
        return {
            "format": REPORT_FORMAT,
            "provenance": self.provenance,
            "results": [
                {
                    "method": r.method,
                    "partition_id": r.partition_id,
                    "selected_bits": list(r.selected.bits),
                    "selected_ids": list(r.selected_ids),
                    "n_selected": r.n_selected,
                    **{f: getattr(r, f) for f in PartitionResult.METRIC_FIELDS},
                }
                for r in self.results
            ],
            "failures": list(self.failures),
            "aggregates": self.aggregates,
            "consistency": self.consistency,
        }

    def save_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh, sort_keys=True, indent=1)
            fh.write("\n")

    @classmethod
    def from_json_dict(cls, d: dict) -> "ExperimentReport":
        if d.get("format") != REPORT_FORMAT:
            raise DataError(f"unsupported report format {d.get('format')!r}")
        results = tuple(
            PartitionResult(
                method=r["method"],
                partition_id=r["partition_id"],
                selected=FeatureSubset(bits=tuple(r["selected_bits"])),
                selected_ids=tuple(r["selected_ids"]),
                n_selected=r["n_selected"],
                **{f: r[f] for f in PartitionResult.METRIC_FIELDS},
            )
            for r in d["results"]
        )
        return cls(
            results=results,
            failures=tuple(d["failures"]),
            aggregates=d["aggregates"],
            consistency=d["consistency"],
            provenance=d["provenance"],
        )

    @classmethod
    def load_json(cls, path) -> "ExperimentReport":
        try:
            with open(path, encoding="utf-8") as fh:
                d = json.load(fh)
        except OSError as exc:
            raise DataError(f"cannot read {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: not valid JSON: {exc}") from exc
        return cls.from_json_dict(d)

    CSV_HEADER = (
        "method",
        "partition_id",
        "n_selected",
        "selected_ids",
        *PartitionResult.METRIC_FIELDS,
    )

    def save_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.CSV_HEADER)
            for r in self.results:
                writer.writerow(
                    [
                        r.method,
                        r.partition_id,
                        r.n_selected,
                        " ".join(str(i) for i in r.selected_ids),
                        *(repr(getattr(r, f)) for f in PartitionResult.METRIC_FIELDS),
                    ]
                )


def _aggregate(values: list[float]) -> dict:
    return {
        "min": float(min(values)),
        "mean": float(sum(values) / len(values)),
        "max": float(max(values)),
    }


def consistency_threshold(n_partitions: int, fraction: float = 0.8) -> int:
    return math.ceil(fraction * n_partitions)


def build_report(
    dataset: Dataset,
    results: list[PartitionResult],
    failures: list[dict],
    n_partitions: int,
    master_seed: int,
    methods: list[MethodId],
    configs: ExperimentConfig,
) -> ExperimentReport:
    """Aggregate per-partition rows into the report structure.

    Min/mean/max are computed independently per metric across a method's
    successful partitions.  A feature is 100%-consistent when selected in all
    partitions and 80%-consistent when selected in at least
    ceil(0.8 * n_partitions) of them.
    """
    aggregates: dict = {}
    consistency: dict = {}
    most_cut = consistency_threshold(n_partitions)
    for method in methods:
        rows = [r for r in results if r.method == method.value]
        if rows:
            agg = {
                f: _aggregate([getattr(r, f) for r in rows])
                for f in PartitionResult.METRIC_FIELDS
            }
            agg["n_selected"] = _aggregate([float(r.n_selected) for r in rows])
            aggregates[method.value] = agg
            counts: dict[int, int] = {}
            for r in rows:
                for fid in r.selected_ids:
                    counts[fid] = counts.get(fid, 0) + 1
            consistency[method.value] = {
                "all_splits": sorted(f for f, c in counts.items() if c == n_partitions),
                "most_splits": sorted(f for f, c in counts.items() if c >= most_cut),
            }
        else:
            aggregates[method.value] = None
            consistency[method.value] = {"all_splits": [], "most_splits": []}

    provenance = {
        "dataset_hash": dataset.content_hash(),
        "master_seed": master_seed,
        "n_partitions": n_partitions,
        "methods": [m.value for m in methods],
        "configs": configs.to_json_dict(),
        "feature_codes": {f.id: f.display for f in dataset.features},
    }
    return ExperimentReport(
        results=tuple(sorted(results, key=lambda r: (r.method, r.partition_id))),
        failures=tuple(sorted(failures, key=lambda f: (f["method"], f["partition_id"]))),
        aggregates=aggregates,
        consistency=consistency,
        provenance=provenance,
    )


def run_experiment(
    dataset: Dataset,
    methods: list[MethodId] | None = None,
    n_partitions: int = 10,
    master_seed: int = 0,
    configs: ExperimentConfig | None = None,
    jobs: int = 1,
    progress=None,
) -> ExperimentReport:
    """Run every method on every partition and assemble the report.

    Failures are isolated per (method, partition) cell and recorded in the
    report instead of aborting the run.  Cell seeds derive from
    (master_seed, method, partition), so results do not depend on ``jobs``.
    """
    methods = list(methods) if methods else list(METHOD_ORDER)
    configs = configs or ExperimentConfig()
    plans = make_splits(dataset, n_partitions, master_seed)
    cells = [(m, p) for m in methods for p in plans]

    def run_cell(cell):
        method, plan = cell
        try:
            result = run_method(dataset, plan, method, configs)
            if progress:
                progress(method.value, plan.partition_id, result)
            return result, None
        except Exception as exc:  # noqa: BLE001 - cell isolation is the contract
            failure = {
                "method": method.value,
                "partition_id": plan.partition_id,
                "error": str(exc),
            }
            if progress:
                progress(method.value, plan.partition_id, None)
            return None, failure

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(run_cell, cells))
    else:
        outcomes = [run_cell(c) for c in cells]

    results = [r for r, _ in outcomes if r is not None]
    failures = [f for _, f in outcomes if f is not None]
    return build_report(dataset, results, failures, n_partitions, master_seed, methods, configs)


def exhaustive_oracle(
    X, z, folds, evaluator: Evaluator, max_features: int = ORACLE_MAX_FEATURES
) -> tuple[FeatureSubset, float]:
    """Evaluate every non-empty subset and return the best (subset, score).

    Subsets are enumerated in increasing bitmask order (feature 0 is the
    least-significant bit) and the first minimizer wins, so ties break toward
    lower-index subsets.  Hard-capped at ``max_features`` columns.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[1]
    if n > max_features:
        raise DataError(f"exhaustive search capped at {max_features} features, got {n}")
    best_subset = None
    best_score = WORST_SCORE
    for mask in range(1, 2**n):
        subset = FeatureSubset(bits=tuple((mask >> j) & 1 for j in range(n)))
        score = evaluator(X, z, folds, subset)
        if best_subset is None or score < best_score:
            best_subset = subset
            best_score = score
    return best_subset, float(best_score)
