"""Penalty-strength sweep over repeated splits and the selection rule.

For every candidate lambda the model is retrained on fresh 90/10 splits
and the mean/sd of the test error recorded. The selected lambda* is the
largest one whose mean minus two standard deviations still touches the
lowest mean on the grid, trading a little accuracy for a sparser model.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np
from joblib import Parallel, delayed

from .data import Dataset, derive_seed, train_test_split
from .errors import ConfigError, DataValidationError
from .training import TrainConfig, default_worker_count, train_prada


@dataclass(frozen=True)
class LambdaPathTable:
    """Per-lambda mean/sd of test error across repeated splits."""

    lambdas: np.ndarray
    mean_test_error: np.ndarray
    sd_test_error: np.ndarray
    n_splits: int

    def __post_init__(self):
        lam = self.lambdas
        if len(lam) == 0:
            raise ConfigError("empty lambda grid")
        if np.any(lam <= 0) or np.any(np.diff(lam) <= 0):
            raise ConfigError("lambdas must be positive and strictly increasing")
        if np.any(self.sd_test_error < 0):
            raise ConfigError("sd must be >= 0")
        if not (
            np.all(np.isfinite(lam))
            and np.all(np.isfinite(self.mean_test_error))
            and np.all(np.isfinite(self.sd_test_error))
        ):
            raise ConfigError("table entries must be finite")


def run_lambda_path(
    data: Dataset,
    lambdas,
    config: TrainConfig,
    n_splits: int = 20,
    test_fraction: float = 0.1,
    n_workers: int | None = None,
) -> LambdaPathTable:
    """Train n_splits models per lambda on fresh splits; tabulate test MSE.

    Split seeds derive deterministically from (config.rng_seed, lambda
    index, split index), so the table is reproducible bit for bit and
    the lambda x split grid can be evaluated in any order or in parallel.
    """
    lambdas = np.sort(np.asarray(list(lambdas), dtype=np.float64))
    if len(lambdas) == 0:
        raise ConfigError("need at least one lambda")
    if n_splits < 2:
        raise ConfigError("n_splits must be >= 2")
    if data.n_samples < 20:
        raise DataValidationError("dataset too small for repeated 90/10 splits")

    jobs = [
        (li, si) for li in range(len(lambdas)) for si in range(n_splits)
    ]

    def one(li: int, si: int) -> float:
        seed = derive_seed(config.rng_seed, li, si)
        train, test = train_test_split(data, test_fraction, seed=seed)
        cfg = replace(config, lam=float(lambdas[li]), rng_seed=seed)
        return train_prada(train, test, cfg).test_mse

    workers = n_workers if n_workers is not None else default_worker_count()
    if workers > 1:
        errors = Parallel(n_jobs=workers)(delayed(one)(li, si) for li, si in jobs)
    else:
        errors = [one(li, si) for li, si in jobs]

    grid = np.asarray(errors, dtype=np.float64).reshape(len(lambdas), n_splits)
    return LambdaPathTable(
        lambdas=lambdas,
        mean_test_error=grid.mean(axis=1),
        sd_test_error=grid.std(axis=1, ddof=1),
        n_splits=n_splits,
    )


def select_lambda(table: LambdaPathTable, rule: str = "two_sd") -> float:
    """Pick lambda* from the path table.

    "two_sd" (default): the largest lambda whose mean - 2 sd does not
    exceed the smallest mean on the grid. "one_se" is the glmnet-style
    alternative: the largest lambda whose mean stays within one standard
    error of the minimum.
    """
    means = table.mean_test_error
    sds = table.sd_test_error
    best = float(means.min())
    if rule == "two_sd":
        ok = means - 2.0 * sds <= best
    elif rule == "one_se":
        se_at_min = sds[int(np.argmin(means))] / np.sqrt(table.n_splits)
        ok = means <= best + se_at_min
    else:
        raise ConfigError(f"unknown selection rule {rule!r}")
    return float(table.lambdas[np.nonzero(ok)[0][-1]])


def default_lambda_grid(
    data: Dataset,
    config: TrainConfig,
    n_points: int = 20,
    n_bisect: int = 8,
    test_fraction: float = 0.1,
) -> np.ndarray:
    """Log-spaced grid auto-calibrated with probe trainings.

    The upper end is bisected until it fully prunes the network (every
    penalized weight zero) and the lower end until it zeroes less than
    1% of them. Probes use a single restart to keep the calibration
    cheap; the returned grid has n_points log-spaced values.
    """
    probe_cfg = replace(config, n_restarts=1)
    train, test = train_test_split(
        data, test_fraction, seed=derive_seed(config.rng_seed, 0xCA11)
    )
    total = None

    def zero_fraction(lam: float) -> float:
        nonlocal total
        res = train_prada(train, test, replace(probe_cfg, lam=lam))
        if total is None:
            total = res.params.input_weights.size + res.params.output_weights.size
        return 1.0 - res.params.count_nonzero_penalized() / total

    # Bracket both ends on a coarse log scale first.
    hi = 1.0
    for _ in range(12):
        if zero_fraction(hi) >= 1.0:
            break
        hi *= 8.0
    lo = min(1e-6, hi / 1e6)
    for _ in range(12):
        if zero_fraction(lo) < 0.01:
            break
        lo /= 8.0

    # Bisect hi downwards: smallest lambda that still fully prunes.
    hi_lo = lo
    for _ in range(n_bisect):
        mid = float(np.sqrt(hi_lo * hi))
        if zero_fraction(mid) >= 1.0:
            hi = mid
        else:
            hi_lo = mid

    # Bisect lo upwards: largest lambda altering < 1% of the parameters.
    lo_hi = hi
    for _ in range(n_bisect):
        mid = float(np.sqrt(lo * lo_hi))
        if zero_fraction(mid) < 0.01:
            lo = mid
        else:
            lo_hi = mid

    return np.geomspace(lo, hi, n_points)


def write_path_csv(table: LambdaPathTable, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["lambda", "mean_test_error", "sd_test_error", "n_splits"])
        for i in range(len(table.lambdas)):
            writer.writerow(
                [
                    repr(float(table.lambdas[i])),
                    repr(float(table.mean_test_error[i])),
                    repr(float(table.sd_test_error[i])),
                    table.n_splits,
                ]
            )


def read_path_csv(path) -> LambdaPathTable:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    if not rows:
        raise DataValidationError(f"{path}: empty path table")
    return LambdaPathTable(
        lambdas=np.array([float(r["lambda"]) for r in rows]),
        mean_test_error=np.array([float(r["mean_test_error"]) for r in rows]),
        sd_test_error=np.array([float(r["sd_test_error"]) for r in rows]),
        n_splits=int(rows[0]["n_splits"]),
    )
