"""Standardized datasets: construction, splitting, and CSV round trips.

All model fitting happens on z-scored covariates and response; the
per-column statistics are kept on the dataset so predictions and CSV
exports can be mapped back to the original scale.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DataValidationError


@dataclass(frozen=True)
class StandardizationStats:
    """Per-column mean/sd of the raw data, plus the response's."""

    x_mean: np.ndarray
    x_sd: np.ndarray
    y_mean: float
    y_sd: float

    def to_dict(self) -> dict:
        return {
            "x_mean": [float(v) for v in self.x_mean],
            "x_sd": [float(v) for v in self.x_sd],
            "y_mean": float(self.y_mean),
            "y_sd": float(self.y_sd),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StandardizationStats":
        return cls(
            x_mean=np.asarray(d["x_mean"], dtype=np.float64),
            x_sd=np.asarray(d["x_sd"], dtype=np.float64),
            y_mean=float(d["y_mean"]),
            y_sd=float(d["y_sd"]),
        )


@dataclass(frozen=True)
class Dataset:
    """Covariate matrix and response, z-scored column by column.

    ``row_indices`` tracks which rows of a parent dataset a split came
    from; it is informational only.
    """

    X: np.ndarray
    y: np.ndarray
    column_names: list[str]
    stats: StandardizationStats
    row_indices: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.X.ndim != 2:
            raise DataValidationError("X must be a 2-d array")
        if self.y.shape != (self.X.shape[0],):
            raise DataValidationError(
                f"y has shape {self.y.shape}, expected ({self.X.shape[0]},)"
            )
        if self.X.shape[0] < 2:
            raise DataValidationError("need at least 2 rows")
        if len(self.column_names) != self.X.shape[1]:
            raise DataValidationError("column_names length must match X columns")
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.y))):
            raise DataValidationError("non-finite values in dataset")

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def original_X(self) -> np.ndarray:
        """Back-transform covariates to the raw scale."""
        return self.X * self.stats.x_sd + self.stats.x_mean

    def original_y(self) -> np.ndarray:
        """Back-transform the response to the raw scale."""
        return self.y * self.stats.y_sd + self.stats.y_mean


def standardize(
    raw_X: np.ndarray,
    raw_y: np.ndarray,
    column_names: list[str] | None = None,
) -> Dataset:
    """Z-score every covariate column and the response.

    Uses population (ddof=0) moments so a standardized response has
    mean-squared value exactly 1. Constant columns cannot be scaled and
    are rejected by name.
    """
    X = np.asarray(raw_X, dtype=np.float64)
    y = np.asarray(raw_y, dtype=np.float64).ravel()
    if X.ndim != 2:
        raise DataValidationError("X must be a 2-d array")
    if column_names is None:
        column_names = [f"x{j + 1}" for j in range(X.shape[1])]
    x_mean = X.mean(axis=0)
    x_sd = X.std(axis=0)
    for j, sd in enumerate(x_sd):
        if sd == 0.0 or not np.isfinite(sd):
            raise DataValidationError(f"constant column: {column_names[j]}")
    y_mean = float(y.mean())
    y_sd = float(y.std())
    if y_sd == 0.0 or not np.isfinite(y_sd):
        raise DataValidationError("constant column: response")
    stats = StandardizationStats(x_mean=x_mean, x_sd=x_sd, y_mean=y_mean, y_sd=y_sd)
    return Dataset(
        X=(X - x_mean) / x_sd,
        y=(y - y_mean) / y_sd,
        column_names=list(column_names),
        stats=stats,
    )


def train_test_split(
    data: Dataset, test_fraction: float = 0.1, seed: int = 0
) -> tuple[Dataset, Dataset]:
    """Uniform random split without replacement (default 90/10)."""
    n = data.n_samples
    n_test = max(1, int(round(n * test_fraction)))
    if n - n_test < 2:
        raise DataValidationError(
            f"dataset with {n} rows is too small for a {test_fraction:.0%} test split"
        )
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    test_idx = np.sort(perm[:n_test])
    train_idx = np.sort(perm[n_test:])

    def subset(idx):
        return Dataset(
            X=data.X[idx],
            y=data.y[idx],
            column_names=data.column_names,
            stats=data.stats,
            row_indices=idx,
        )

    return subset(train_idx), subset(test_idx)


def derive_seed(master: int, *indices: int) -> int:
    """Deterministic child seed for a (master, index...) coordinate."""
    ss = np.random.SeedSequence([int(master), *[int(i) for i in indices]])
    return int(ss.generate_state(1)[0])


def _format_float(v: float) -> str:
    # repr round-trips doubles exactly, keeping CSV output reproducible
    return repr(float(v))


def write_dataset_csv(data: Dataset, path) -> None:
    """Write the dataset on the original (raw) scale, response last."""
    X = data.original_X()
    y = data.original_y()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(data.column_names) + ["y"])
        for i in range(data.n_samples):
            writer.writerow([_format_float(v) for v in X[i]] + [_format_float(y[i])])


def read_dataset_csv(path) -> Dataset:
    """Parse and standardize a CSV whose final column is the response.

    Validation errors name the offending row/column so a bad file is
    easy to fix.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataValidationError(f"{path}: empty file") from None
        if len(header) < 2:
            raise DataValidationError(f"{path}: need at least one covariate column")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataValidationError(
                    f"{path}: row {lineno} has {len(row)} cells, expected {len(header)}"
                )
            parsed = []
            for j, cell in enumerate(row):
                try:
                    v = float(cell)
                except ValueError:
                    raise DataValidationError(
                        f"{path}: non-numeric cell at row {lineno}, column "
                        f"{header[j]!r}: {cell!r}"
                    ) from None
                if not np.isfinite(v):
                    raise DataValidationError(
                        f"{path}: non-finite cell at row {lineno}, column "
                        f"{header[j]!r}: {cell!r}"
                    )
                parsed.append(v)
            rows.append(parsed)
    if len(rows) < 2:
        raise DataValidationError(f"{path}: need at least 2 data rows")
    arr = np.asarray(rows, dtype=np.float64)
    return standardize(arr[:, :-1], arr[:, -1], column_names=header[:-1])
