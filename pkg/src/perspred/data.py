"""CSV ingestion and train-fitted standardization for tabular data."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import DomainError, LabeledSample

MISSING = frozenset({"", "?", "na", "nan"})


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class Preprocessing:
    """Column selection and standardization learned from a training set.

    ``keep`` indexes the raw columns that survive (non-constant ones);
    ``means`` and ``scales`` are the population statistics of those columns.
    """

    keep: tuple[int, ...]
    means: np.ndarray
    scales: np.ndarray
    dropped: tuple[str, ...] = ()

    def apply(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        return (X[:, list(self.keep)] - self.means) / self.scales

    def apply_query(self, x) -> np.ndarray:
        return self.apply(np.atleast_2d(np.asarray(x, dtype=np.float64)))[0]

    def to_dict(self) -> dict:
        return {
            "keep": list(self.keep),
            "means": [float(v) for v in self.means],
            "scales": [float(v) for v in self.scales],
            "dropped": list(self.dropped),
            "variance": "population",
        }


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...]
    report: dict = field(default_factory=dict)
    preprocessing: Preprocessing | None = None

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int8).reshape(-1)
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise DomainError("features must be (n, d) with n labels")
        if X.shape[1] != len(self.feature_names):
            raise DomainError("one feature name per column is required")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def sample(self) -> LabeledSample:
        return LabeledSample(self.features, self.labels)

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.features[idx], self.labels[idx], self.feature_names, dict(self.report), self.preprocessing)


def _is_missing(cell: str) -> bool:
    return cell.strip().lower() in MISSING


def load_csv(
    path,
    label_column: str,
    positive_label,
    categorical_columns=(),
) -> Dataset:
    """Read a headed CSV; rows with any missing cell are dropped and counted.

    Binary categorical columns map to {0, 1} by sorted value; the label column
    maps to 1 where it equals ``positive_label`` (compared as text).
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"data file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path}: empty file (a header row is required)")
    header = [h.strip() for h in rows[0]]
    if label_column not in header:
        raise DataError(f"{path}: label column {label_column!r} not in header {header}")
    categorical = list(categorical_columns)
    for c in categorical:
        if c not in header:
            raise DataError(f"{path}: categorical column {c!r} not in header")
    lab = header.index(label_column)
    feat_cols = [j for j in range(len(header)) if j != lab]

    body, dropped = [], 0
    for r, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise DataError(f"{path}: row {r} has {len(row)} cells, header has {len(header)}")
        if any(_is_missing(cell) for cell in row):
            dropped += 1
            continue
        body.append((r, [cell.strip() for cell in row]))

    cat_maps = {}
    for c in categorical:
        j = header.index(c)
        values = sorted({row[j] for _, row in body})
        if len(values) > 2:
            raise DataError(f"{path}: categorical column {c!r} is not binary ({len(values)} levels)")
        cat_maps[j] = {v: float(k) for k, v in enumerate(values)}

    X = np.empty((len(body), len(feat_cols)))
    y = np.empty(len(body), dtype=np.int8)
    pos = str(positive_label).strip()
    for i, (r, row) in enumerate(body):
        for k, j in enumerate(feat_cols):
            if j in cat_maps:
                X[i, k] = cat_maps[j][row[j]]
                continue
            try:
                X[i, k] = float(row[j])
            except ValueError:
                raise DataError(f"{path}: unparseable value {row[j]!r} at row {r}, column {header[j]!r}") from None
            if not math.isfinite(X[i, k]):
                raise DataError(f"{path}: non-finite value at row {r}, column {header[j]!r}")
        y[i] = 1 if _same_label(row[lab], pos) else 0

    report = {
        "rows_read": len(rows) - 1,
        "rows_dropped_missing": dropped,
        "one_hot": {header[j]: m for j, m in cat_maps.items()},
        "label_column": label_column,
        "positive_label": pos,
    }
    return Dataset(X, y, [header[j] for j in feat_cols], report)


def _same_label(cell: str, pos: str) -> bool:
    if cell == pos:
        return True
    try:
        return float(cell) == float(pos)
    except ValueError:
        return False


def fit_preprocessing(ds: Dataset) -> Preprocessing:
    if len(ds) < 2:
        raise DomainError("standardization needs at least 2 rows")
    X = ds.features
    means = X.mean(axis=0)
    scales = X.std(axis=0)  # population
    keep = tuple(int(j) for j in np.flatnonzero(scales > 1e-12 * np.maximum(1.0, np.abs(means))))
    dropped = tuple(ds.feature_names[j] for j in range(ds.dim) if j not in keep)
    return Preprocessing(keep, means[list(keep)], scales[list(keep)], dropped)


def apply_preprocessing(ds: Dataset, prep: Preprocessing) -> Dataset:
    report = dict(ds.report)
    report["preprocessing"] = prep.to_dict()
    names = [ds.feature_names[j] for j in prep.keep]
    return Dataset(prep.apply(ds.features), ds.labels, names, report, prep)


def center_normalize(ds: Dataset) -> Dataset:
    """Standardize every column to mean 0, population variance 1; constant
    columns are dropped and listed in the report."""
    return apply_preprocessing(ds, fit_preprocessing(ds))


def split(ds: Dataset, train_fraction: float, seed=0, normalize: bool = True) -> tuple[Dataset, Dataset]:
    """Seeded split into ``ceil(f n)`` train rows and the rest.

    With ``normalize`` the standardization is fitted on the train rows only
    and applied to both parts.
    """
    if not 0 < train_fraction < 1:
        raise DomainError("train_fraction must lie in (0, 1)")
    n = len(ds)
    n_train = min(n, math.ceil(train_fraction * n - 1e-12))
    perm = np.random.default_rng(seed).permutation(n)
    train, test = ds.subset(np.sort(perm[:n_train])), ds.subset(np.sort(perm[n_train:]))
    if normalize:
        prep = fit_preprocessing(train)
        train, test = apply_preprocessing(train, prep), apply_preprocessing(test, prep)
    return train, test
