"""Command-line frontend: ingest, run, report, oracle.

Standard output carries machine-readable results only; human-readable
progress goes to standard error.  Exit codes: 0 success, 1 usage, 2 data
error, 3 compute error.  Failures print a single diagnostic line prefixed
with "error:".
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .ann import TrainConfig
from .dataset import Dataset, PreprocessRules, file_sha256, ingest, make_splits, read_csv
from .errors import ComputeError, DataError
from .harness import (
    ExperimentConfig,
    ExperimentReport,
    MethodId,
    exhaustive_oracle,
    ls_evaluator,
    parse_method,
    ridge_evaluator,
    run_experiment,
    select_subset,
)
from .linreg import StepwiseConfig
from .ridge import KernelConfig, RidgeConfig
from .search import GaConfig

OUTPUT_DIR_ENV = "EFFORTFSS_OUT"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_COMPUTE = 3


class UsageError(Exception):
    """Bad command-line arguments or run configuration."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on usage problems, not argparse's 2
        raise UsageError(message)


@dataclass(frozen=True)
class RunConfig:
    """Validated contents of a run configuration file plus flag overrides."""

    dataset: Path
    methods: tuple[MethodId, ...]
    configs: ExperimentConfig
    n_partitions: int = 10
    master_seed: int = 0
    output_dir: Path = Path(".")
    jobs: int = 1

    @classmethod
    def from_file(cls, path, overrides: dict | None = None) -> "RunConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise DataError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise UsageError("config file must contain a JSON object")
        raw.update({k: v for k, v in (overrides or {}).items() if v is not None})

        known = {
            "dataset", "methods", "ridge", "stepwise", "ga", "ann",
            "n_partitions", "master_seed", "pred_level", "output_dir", "jobs",
        }
        unknown = set(raw) - known
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        if "dataset" not in raw:
            raise UsageError("config must set 'dataset'")

        dataset = Path(raw["dataset"])
        if not dataset.exists():
            raise DataError(f"dataset file not found: {dataset}")

        try:
            method_names = raw.get("methods") or [m.value for m in MethodId]
            methods = tuple(parse_method(m) for m in method_names)
            ridge_raw = dict(raw.get("ridge") or {})
            kernel = KernelConfig(
                kind=ridge_raw.pop("kernel", "rbf"),
                gamma=float(ridge_raw.pop("gamma", 3.5)),
            )
            ridge_cfg = RidgeConfig(a=float(ridge_raw.pop("a", 0.1)), kernel=kernel)
            if ridge_raw:
                raise UsageError(f"unknown ridge keys: {sorted(ridge_raw)}")
            configs = ExperimentConfig(
                ridge=ridge_cfg,
                stepwise=StepwiseConfig(**(raw.get("stepwise") or {})),
                ga=GaConfig(**(raw.get("ga") or {})),
                ann=TrainConfig(**(raw.get("ann") or {})),
                pred_level=float(raw.get("pred_level", 0.25)),
            )
        except (TypeError, ValueError) as exc:
            raise UsageError(f"invalid configuration: {exc}") from exc
        except DataError as exc:
            raise UsageError(str(exc)) from exc

        out_default = os.environ.get(OUTPUT_DIR_ENV, ".")
        return cls(
            dataset=dataset,
            methods=methods,
            configs=configs,
            n_partitions=int(raw.get("n_partitions", 10)),
            master_seed=int(raw.get("master_seed", 0)),
            output_dir=Path(raw.get("output_dir", out_default)),
            jobs=int(raw.get("jobs", 1)),
        )


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def cmd_ingest(args) -> int:
    with open(args.rules, encoding="utf-8") as fh:
        rules = PreprocessRules.from_json_dict(json.load(fh))
    raw = read_csv(args.input_csv, rules)
    provenance = {"source_file": str(args.input_csv), "source_sha256": file_sha256(args.input_csv)}
    ds = ingest(raw, rules, provenance=provenance)
    for name in ds.provenance.get("dropped_columns", []):
        _log(f"column {name!r} dropped")
    _log(
        f"rows: {ds.provenance['rows_in']} in, {ds.provenance['rows_out']} kept; "
        f"features: {ds.n_features}"
    )
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    ds.save_json(out)
    print(f"{ds.n_projects} rows, {ds.n_features} features")
    print(str(out))
    return EXIT_OK


def cmd_run(args) -> int:
    overrides = {
        "methods": args.methods.split(",") if args.methods else None,
        "n_partitions": args.partitions,
        "master_seed": args.seed,
        "output_dir": args.output_dir,
        "jobs": args.jobs,
    }
    cfg = RunConfig.from_file(args.config, overrides)
    dataset = Dataset.load_json(cfg.dataset)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)

    def progress(method, partition, result):
        status = "ok" if result is not None else "FAILED"
        _log(f"[{method}] partition {partition}: {status}")

    report = run_experiment(
        dataset,
        methods=list(cfg.methods),
        n_partitions=cfg.n_partitions,
        master_seed=cfg.master_seed,
        configs=cfg.configs,
        jobs=cfg.jobs,
        progress=progress,
    )
    report_path = cfg.output_dir / "report.json"
    csv_path = cfg.output_dir / "partitions.csv"
    report.save_json(report_path)
    report.save_csv(csv_path)
    _log(f"report written to {report_path}")

    print("method\ttest_mmre_initial\ttest_mmre_final\ttest_pred_initial\ttest_pred_final")
    for method in cfg.methods:
        agg = report.aggregates.get(method.value)
        if agg is None:
            print(f"{method.value}\tFAILED\tFAILED\tFAILED\tFAILED")
            continue
        print(
            f"{method.value}"
            f"\t{agg['test_mmre_initial']['mean']:.6f}"
            f"\t{agg['test_mmre_final']['mean']:.6f}"
            f"\t{agg['test_pred_initial']['mean']:.6f}"
            f"\t{agg['test_pred_final']['mean']:.6f}"
        )
    if report.failures:
        _log(f"{len(report.failures)} cell(s) failed; see report failures section")
        return EXIT_COMPUTE
    return EXIT_OK


def cmd_report(args) -> int:
    report = ExperimentReport.load_json(args.report_file)
    codes = {int(k): v for k, v in report.provenance.get("feature_codes", {}).items()}

    def fmt_ids(ids):
        if not ids:
            return "none"
        return ", ".join(f"{i} ({codes.get(i, '?')})" for i in ids)

    if args.consistency:
        print("method\tsplits\tfeatures")
        for method, sets in sorted(report.consistency.items()):
            print(f"{method}\t100%\t{fmt_ids(sets['all_splits'])}")
            print(f"{method}\t80%\t{fmt_ids(sets['most_splits'])}")
    else:
        print("method\tmetric\tmin\tmean\tmax")
        for method, agg in sorted(report.aggregates.items()):
            if agg is None:
                print(f"{method}\t(no successful partitions)")
                continue
            for metric, stats in agg.items():
                print(
                    f"{method}\t{metric}\t{stats['min']:.6f}"
                    f"\t{stats['mean']:.6f}\t{stats['max']:.6f}"
                )
    return EXIT_OK


def cmd_oracle(args) -> int:
    dataset = Dataset.load_json(args.dataset_file)
    kernel = KernelConfig(kind=args.kernel, gamma=args.gamma)
    ridge_cfg = RidgeConfig(a=args.a, kernel=kernel)
    evaluator = ridge_evaluator(ridge_cfg) if args.evaluator == "ridge" else ls_evaluator()

    plan = make_splits(dataset, 1, args.seed)[0]
    tr = np.asarray(plan.train_indices)
    X_tr, z_tr = dataset.X[tr], dataset.z[tr]
    folds = np.asarray(plan.folds)

    best_subset, best_score = exhaustive_oracle(
        X_tr, z_tr, folds, evaluator, max_features=args.max_features
    )
    ids = " ".join(str(dataset.features[j].id) for j in best_subset.indices)
    print(f"oracle\t{best_score:.6f}\t{ids}")

    ok = True
    for name in args.methods.split(",") if args.methods else []:
        method = parse_method(name)
        subset = select_subset(
            method, X_tr, z_tr, folds, ExperimentConfig(ridge=ridge_cfg),
            ga_seed=args.seed, ann_seed=args.seed,
        )
        score = evaluator(X_tr, z_tr, folds, subset)
        dominated = best_score <= score + 1e-12
        ok = ok and dominated
        ids = " ".join(str(dataset.features[j].id) for j in subset.indices)
        print(f"{method.value}\t{score:.6f}\t{ids}\t{'ok' if dominated else 'VIOLATION'}")
    return EXIT_OK if ok else EXIT_COMPUTE


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="effortfss", description=__doc__)
    parser.add_argument("--version", action="version", version=f"effortfss {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="preprocess a raw CSV into a canonical dataset")
    p_ingest.add_argument("input_csv")
    p_ingest.add_argument("--rules", required=True, help="preprocessing rules JSON file")
    p_ingest.add_argument("--output", required=True, help="canonical dataset JSON path")
    p_ingest.set_defaults(func=cmd_ingest)

    p_run = sub.add_parser("run", help="run the full selection/evaluation experiment")
    p_run.add_argument("config", help="run configuration JSON file")
    p_run.add_argument("--methods", help="comma-separated method ids (overrides config)")
    p_run.add_argument("--partitions", type=int, help="number of random partitions")
    p_run.add_argument("--seed", type=int, help="master seed")
    p_run.add_argument("--output-dir", help="output directory")
    p_run.add_argument("--jobs", type=int, help="parallel (method, partition) cells")
    p_run.set_defaults(func=cmd_run)

    p_report = sub.add_parser("report", help="format a report file as text")
    p_report.add_argument("report_file")
    p_report.add_argument("--consistency", action="store_true", help="print consistency sets")
    p_report.set_defaults(func=cmd_report)

    p_oracle = sub.add_parser("oracle", help="exhaustive-search check on a small dataset")
    p_oracle.add_argument("dataset_file")
    p_oracle.add_argument("--evaluator", choices=("ridge", "ls"), default="ridge")
    p_oracle.add_argument("--a", type=float, default=0.1, help="ridge parameter")
    p_oracle.add_argument("--gamma", type=float, default=3.5, help="RBF kernel width")
    p_oracle.add_argument("--kernel", choices=("rbf", "linear"), default="rbf")
    p_oracle.add_argument("--seed", type=int, default=0)
    p_oracle.add_argument("--max-features", type=int, default=20)
    p_oracle.add_argument("--methods", help="comma-separated methods to compare")
    p_oracle.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: usage: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"error: data: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ComputeError as exc:
        print(f"error: compute: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    except OSError as exc:
        print(f"error: data: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
