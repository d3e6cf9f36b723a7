"""Dataset ingestion: CSV parsing, filtering, encoding, normalization, splits.

The preprocessing pipeline applies, in order: (a) drop configured
post-completion columns, (b) drop columns with too many nulls, (c) drop rows
failing the quality-grade rule, (d) drop rows with null numeric values,
(e) expand categorical columns into binary indicator columns, (f) min-max
normalize numeric feature columns to [0, 1].  The effort target is kept in
its original units (person-hours); its min/max are stored for the optional
normalized-target mode.

Canonical datasets persist as JSON with feature descriptors, the normalized
matrix, the effort vector and provenance (source file hash, rules used).
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError

KIND_NUMERIC = "numeric"
KIND_CATEGORICAL = "categorical"
KIND_QUALITY = "quality-grade"
KIND_EFFORT = "effort"

# Besides the empty string, these cell values count as null.  ISBSG-style
# exports vary, so the list is configurable via PreprocessRules.
DEFAULT_NULL_MARKERS = ("", "NULL", "null", "NA", "N/A", "n/a", "?")

N_FOLDS = 10

DATASET_FORMAT = "effortfss-dataset/1"


@dataclass(frozen=True)
class PreprocessRules:
    """Column roles and filtering thresholds driving ``ingest``."""

    effort_column: str
    drop_columns: tuple[str, ...] = ()
    null_threshold: float = 0.40
    quality_column: str | None = None
    quality_cutoff: str = "B"
    null_markers: tuple[str, ...] = DEFAULT_NULL_MARKERS

    def __post_init__(self):
        if not self.effort_column:
            raise DataError("rules must name an effort column")
        if not 0.0 <= self.null_threshold <= 1.0:
            raise DataError("null_threshold must lie in [0, 1]")

    @classmethod
    def from_json_dict(cls, d: dict) -> "PreprocessRules":
        known = {
            "effort_column",
            "drop_columns",
            "null_threshold",
            "quality_column",
            "quality_cutoff",
            "null_markers",
        }
        unknown = set(d) - known
        if unknown:
            raise DataError(f"unknown rule keys: {sorted(unknown)}")
        if "effort_column" not in d:
            raise DataError("rules must name an effort column")
        kwargs = dict(d)
        for key in ("drop_columns", "null_markers"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)

    def to_json_dict(self) -> dict:
        d = asdict(self)
        d["drop_columns"] = list(self.drop_columns)
        d["null_markers"] = list(self.null_markers)
        return d


@dataclass(frozen=True)
class RawColumn:
    """One pre-filter column: name, declared kind, and cells (None = null)."""

    name: str
    kind: str
    values: tuple


@dataclass(frozen=True)
class RawTable:
    """Pre-filter table with uniquely named columns and one effort column."""

    columns: tuple[RawColumn, ...]

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise DataError(f"duplicate column names: {dupes}")
        efforts = [c for c in self.columns if c.kind == KIND_EFFORT]
        if len(efforts) != 1:
            raise DataError("exactly one column must be designated as the effort target")
        lengths = {len(c.values) for c in self.columns}
        if len(lengths) > 1:
            raise DataError("columns have inconsistent row counts")

    @property
    def n_rows(self) -> int:
        return len(self.columns[0].values) if self.columns else 0

    @property
    def effort_column(self) -> RawColumn:
        return next(c for c in self.columns if c.kind == KIND_EFFORT)


def _parse_float(cell: str) -> float | None:
    try:
        return float(cell)
    except ValueError:
        return None


def read_csv(path, rules: PreprocessRules) -> RawTable:
    """Parse an RFC-4180 CSV (UTF-8, header row required) into a RawTable.

    Cells matching a null marker become None.  A column is numeric when every
    non-null cell parses as a float, otherwise categorical; the effort and
    quality columns are designated by the rules.
    """
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8-sig") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise DataError(f"{path}: empty CSV file (no header, no rows)") from None
            rows = list(reader)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc

    header = [h.strip() for h in header]
    if any(not h for h in header):
        raise DataError(f"{path}: blank column name in header")
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise DataError(
                f"{path}: row {i + 2} has {len(row)} cells, expected {len(header)}"
            )
    if rules.effort_column not in header:
        raise DataError(f"{path}: effort column {rules.effort_column!r} not found")
    if rules.quality_column is not None and rules.quality_column not in header:
        raise DataError(f"{path}: quality column {rules.quality_column!r} not found")

    markers = set(rules.null_markers) | {""}
    columns = []
    for j, name in enumerate(header):
        cells = []
        for row in rows:
            cell = row[j].strip()
            cells.append(None if cell in markers else cell)
        if name == rules.effort_column:
            kind = KIND_EFFORT
        elif name == rules.quality_column:
            kind = KIND_QUALITY
        elif all(cell is None or _parse_float(cell) is not None for cell in cells):
            kind = KIND_NUMERIC
        else:
            kind = KIND_CATEGORICAL
        columns.append(RawColumn(name=name, kind=kind, values=tuple(cells)))
    return RawTable(columns=tuple(columns))


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass(frozen=True)
class FeatureDescriptor:
    """Metadata for one feature column of the canonical matrix.

    Ids start at 1; id 0 is reserved for the effort target so feature ids
    line up with the usual attribute-table numbering.  Binary indicator
    features record the categorical value they flag.
    """

    id: int
    code: str
    kind: str  # "numeric" or "binary-indicator"
    source_column: str
    category_value: str | None = None
    norm_min: float = 0.0
    norm_max: float = 1.0

    def __post_init__(self):
        if self.kind not in ("numeric", "binary-indicator"):
            raise DataError(f"bad feature kind {self.kind!r}")
        if self.norm_min > self.norm_max:
            raise DataError("norm_min must not exceed norm_max")

    @property
    def display(self) -> str:
        if self.category_value is not None:
            return f"{self.code}={self.category_value}"
        return self.code


@dataclass(frozen=True)
class Dataset:
    """Immutable canonical dataset: normalized features plus original efforts."""

    X: np.ndarray
    z: np.ndarray
    features: tuple[FeatureDescriptor, ...]
    effort_name: str
    effort_norm: tuple[float, float]
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        z = np.asarray(self.z, dtype=float)
        if X.ndim != 2:
            raise DataError("feature matrix must be 2-d")
        n, d = X.shape
        if d == 0:
            raise DataError("no feature columns survive preprocessing")
        if n == 0:
            raise DataError("no rows survive preprocessing")
        if n < 2 * N_FOLDS:
            raise DataError(
                f"dataset has {n} projects; at least {2 * N_FOLDS} are required "
                f"for {N_FOLDS}-fold cross-validation inside an 80% training split"
            )
        if z.shape != (n,):
            raise DataError("effort vector length must match the matrix rows")
        if not np.all(np.isfinite(X)) or not np.all(np.isfinite(z)):
            raise DataError("dataset contains non-finite values")
        if np.any(X < 0.0) or np.any(X > 1.0):
            raise DataError("normalized features must lie in [0, 1]")
        if np.any(z <= 0.0):
            raise DataError("all effort values must be strictly positive")
        if len(self.features) != d:
            raise DataError("feature descriptor count must match matrix columns")
        for j, f in enumerate(self.features):
            if f.kind == "binary-indicator":
                col = X[:, j]
                if not np.all((col == 0.0) | (col == 1.0)):
                    raise DataError(f"binary indicator {f.display} has non-binary values")
        X.flags.writeable = False
        z.flags.writeable = False
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "z", z)

    @property
    def n_projects(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def normalized_effort(self) -> np.ndarray:
        """Effort rescaled by its stored min/max (for normalized-target mode)."""
        lo, hi = self.effort_norm
        if hi > lo:
            return (self.z - lo) / (hi - lo)
        return np.zeros_like(self.z)

    def denormalize_feature(self, j: int, values) -> np.ndarray:
        f = self.features[j]
        return np.asarray(values, dtype=float) * (f.norm_max - f.norm_min) + f.norm_min

    def feature_by_id(self, fid: int) -> FeatureDescriptor:
        for f in self.features:
            if f.id == fid:
                return f
        raise KeyError(f"no feature with id {fid}")

    def to_json_dict(self) -> dict:
        return {
            "format": DATASET_FORMAT,
            "provenance": self.provenance,
            "effort": {
                "name": self.effort_name,
                "norm_min": self.effort_norm[0],
                "norm_max": self.effort_norm[1],
                "values": [float(v) for v in self.z],
            },
            "features": [
                {
                    "id": f.id,
                    "code": f.code,
                    "kind": f.kind,
                    "source_column": f.source_column,
                    "category_value": f.category_value,
                    "norm_min": f.norm_min,
                    "norm_max": f.norm_max,
                }
                for f in self.features
            ],
            "matrix": [[float(v) for v in row] for row in self.X],
        }

    def save_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh, sort_keys=True, indent=1)
            fh.write("\n")

    @classmethod
    def from_json_dict(cls, d: dict) -> "Dataset":
        if d.get("format") != DATASET_FORMAT:
            raise DataError(f"unsupported dataset format {d.get('format')!r}")
        feats = tuple(
            FeatureDescriptor(
                id=int(f["id"]),
                code=f["code"],
                kind=f["kind"],
                source_column=f["source_column"],
                category_value=f["category_value"],
                norm_min=float(f["norm_min"]),
                norm_max=float(f["norm_max"]),
            )
            for f in d["features"]
        )
        return cls(
            X=np.array(d["matrix"], dtype=float),
            z=np.array(d["effort"]["values"], dtype=float),
            features=feats,
            effort_name=d["effort"]["name"],
            effort_norm=(float(d["effort"]["norm_min"]), float(d["effort"]["norm_max"])),
            provenance=d.get("provenance", {}),
        )

    @classmethod
    def load_json(cls, path) -> "Dataset":
        try:
            with open(path, encoding="utf-8") as fh:
                d = json.load(fh)
        except OSError as exc:
            raise DataError(f"cannot read {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: not valid JSON: {exc}") from exc
        return cls.from_json_dict(d)

    def content_hash(self) -> str:
        blob = json.dumps(self.to_json_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def minmax_normalize(column) -> tuple[np.ndarray, float, float]:
    """Scale a numeric vector to [0, 1]; constant columns map to all zeros."""
    v = np.asarray(column, dtype=float)
    if v.size == 0:
        raise DataError("cannot normalize an empty column")
    if not np.all(np.isfinite(v)):
        raise DataError("cannot normalize a column with nulls or non-finite values")
    lo = float(np.min(v))
    hi = float(np.max(v))
    if hi > lo:
        return (v - lo) / (hi - lo), lo, hi
    return np.zeros_like(v), lo, hi


def one_hot(values) -> list[tuple[str, np.ndarray]]:
    """Expand categorical values into one binary column per distinct value.

    Distinct non-null values are taken in sorted order.  Null cells get 0 in
    every produced column; non-null rows get exactly one 1.
    """
    distinct = sorted({v for v in values if v is not None})
    if not distinct:
        raise DataError("categorical column has no non-null values")
    out = []
    for level in distinct:
        col = np.array([1.0 if v == level else 0.0 for v in values])
        out.append((level, col))
    return out


def ingest(raw: RawTable, rules: PreprocessRules, provenance: dict | None = None) -> Dataset:
    """Run the full preprocessing pipeline and return a canonical Dataset.

    Column filters run first on all rows, then row filters, then encoding and
    normalization; see the module docstring for the exact order.  The quality
    column is consumed by its row filter and never becomes a feature; the
    effort column is exempt from the null-fraction column drop (its nulls
    drop rows instead).
    """
    # (a) configured post-completion columns
    dropped_cols: list[str] = []
    cols = []
    for c in raw.columns:
        if c.name in rules.drop_columns:
            dropped_cols.append(c.name)
            continue
        cols.append(c)
    if not any(c.kind == KIND_EFFORT for c in cols):
        raise DataError("effort column was dropped by the configured column list")

    # (b) columns with too many nulls (effort and quality columns exempt)
    n_rows = raw.n_rows
    if n_rows == 0:
        raise DataError("no rows survive preprocessing (input table is empty)")
    kept = []
    for c in cols:
        if c.kind in (KIND_EFFORT, KIND_QUALITY):
            kept.append(c)
            continue
        null_frac = sum(v is None for v in c.values) / n_rows
        if null_frac > rules.null_threshold:
            dropped_cols.append(c.name)
            continue
        kept.append(c)
    cols = kept

    # (c) rows failing the quality-grade rule (grades beyond the cutoff letter
    # mean lower data quality; null grades also fail)
    keep = np.ones(n_rows, dtype=bool)
    quality = next((c for c in cols if c.kind == KIND_QUALITY), None)
    if quality is not None:
        cutoff = rules.quality_cutoff.strip().upper()
        for i, grade in enumerate(quality.values):
            if grade is None or grade.strip().upper() > cutoff:
                keep[i] = False
        cols = [c for c in cols if c.kind != KIND_QUALITY]

    # (d) rows with any remaining null numeric value (effort included)
    for c in cols:
        if c.kind in (KIND_NUMERIC, KIND_EFFORT):
            for i, v in enumerate(c.values):
                if v is None:
                    keep[i] = False

    row_idx = np.flatnonzero(keep)
    if row_idx.size == 0:
        raise DataError("no rows survive preprocessing")
    feature_cols = [c for c in cols if c.kind in (KIND_NUMERIC, KIND_CATEGORICAL)]
    if not feature_cols:
        raise DataError("no feature columns survive preprocessing")

    effort_raw = next(c for c in cols if c.kind == KIND_EFFORT)
    z = np.array([float(effort_raw.values[i]) for i in row_idx])
    if np.any(z <= 0):
        raise DataError("effort values must be strictly positive after filtering")

    # (e) categorical expansion and (f) min-max normalization, in column order
    matrix_cols: list[np.ndarray] = []
    descriptors: list[FeatureDescriptor] = []
    next_id = 1  # id 0 is reserved for the effort target
    for c in feature_cols:
        cells = [c.values[i] for i in row_idx]
        if c.kind == KIND_CATEGORICAL:
            for level, col in one_hot(cells):
                matrix_cols.append(col)
                descriptors.append(
                    FeatureDescriptor(
                        id=next_id,
                        code=c.name,
                        kind="binary-indicator",
                        source_column=c.name,
                        category_value=level,
                        norm_min=0.0,
                        norm_max=1.0,
                    )
                )
                next_id += 1
        else:
            norm, lo, hi = minmax_normalize([float(v) for v in cells])
            matrix_cols.append(norm)
            descriptors.append(
                FeatureDescriptor(
                    id=next_id,
                    code=c.name,
                    kind="numeric",
                    source_column=c.name,
                    norm_min=lo,
                    norm_max=hi,
                )
            )
            next_id += 1

    prov = dict(provenance or {})
    prov.setdefault("rules", rules.to_json_dict())
    prov["dropped_columns"] = sorted(dropped_cols)
    prov["rows_in"] = n_rows
    prov["rows_out"] = int(row_idx.size)

    return Dataset(
        X=np.column_stack(matrix_cols),
        z=z,
        features=tuple(descriptors),
        effort_name=effort_raw.name,
        effort_norm=(float(np.min(z)), float(np.max(z))),
        provenance=prov,
    )


@dataclass(frozen=True)
class SplitPlan:
    """One 80/20 partition plus a 10-fold assignment of its training rows.

    ``folds`` is aligned with ``train_indices``; both are fully determined by
    (master_seed, partition_id) through a PCG64 generator seeded from
    SeedSequence([master_seed, partition_id]).
    """

    partition_id: int
    train_indices: tuple[int, ...]
    test_indices: tuple[int, ...]
    folds: tuple[int, ...]
    seed: int

    def __post_init__(self):
        train = set(self.train_indices)
        test = set(self.test_indices)
        if train & test:
            raise DataError("train and test indices overlap")
        n = len(self.train_indices) + len(self.test_indices)
        if train | test != set(range(n)):
            raise DataError("train and test indices must cover all rows exactly once")
        if len(self.train_indices) != train_size_for(n):
            raise DataError("training set size must equal round(0.8 * n)")
        if len(self.folds) != len(self.train_indices):
            raise DataError("fold labels must align with the training indices")
        sizes = np.bincount(np.array(self.folds), minlength=N_FOLDS)
        if sizes.max() - sizes.min() > 1:
            raise DataError("fold sizes may differ by at most 1")

    @property
    def fold_assignment(self) -> dict[int, int]:
        return dict(zip(self.train_indices, self.folds))


def train_size_for(n: int) -> int:
    """Training-set size for an 80/20 split: round(0.8 * n), computed exactly.

    Equals (4 n + 2) // 5.  The fractional part of 4n/5 is never one half, so
    the round-half-to-even convention never has to break a tie.
    """
    return (4 * n + 2) // 5


def make_splits(dataset: Dataset, n_partitions: int, master_seed: int) -> list[SplitPlan]:
    """Independent uniform-random 80/20 splits with 10-fold train assignments."""
    if n_partitions < 1:
        raise DataError("n_partitions must be at least 1")
    if master_seed < 0:
        raise DataError("master_seed must be nonnegative")
    n = dataset.n_projects
    n_train = train_size_for(n)
    if n_train < N_FOLDS:
        raise DataError(f"dataset too small for {N_FOLDS} folds")

    plans = []
    for pid in range(n_partitions):
        ss = np.random.SeedSequence([master_seed, pid])
        rng = np.random.default_rng(ss)
        perm = rng.permutation(n)
        train_perm = perm[:n_train]
        test_perm = perm[n_train:]
        # Folds cycle over the shuffled training order, then everything is
        # re-sorted by row index for a canonical representation.
        fold_by_row = {int(row): pos % N_FOLDS for pos, row in enumerate(train_perm)}
        train_sorted = tuple(sorted(int(i) for i in train_perm))
        plans.append(
            SplitPlan(
                partition_id=pid,
                train_indices=train_sorted,
                test_indices=tuple(sorted(int(i) for i in test_perm)),
                folds=tuple(fold_by_row[i] for i in train_sorted),
                seed=int(ss.generate_state(1, dtype=np.uint64)[0]),
            )
        )
    return plans
