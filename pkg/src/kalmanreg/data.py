"""Regression datasets: CSV loading, synthetic generation, splitting and z-scoring."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np


class DatasetError(ValueError):
    """Raised for malformed or unusable tabular input."""


def _frozen(a, ndim: int) -> np.ndarray:
    arr = np.array(a, dtype=float)
    if arr.ndim != ndim:
        raise DatasetError(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix ``features`` (N x d) and target vector ``targets`` (N,).

    Parts produced by :func:`split` may hold a single row, so only N >= 1 is
    enforced here; loaders and generators require N >= 2.
    """

    features: np.ndarray
    targets: np.ndarray
    feature_names: tuple[str, ...]
    target_name: str = "y"

    def __post_init__(self):
        X = _frozen(self.features, 2)
        y = _frozen(self.targets, 1)
        names = tuple(str(n) for n in self.feature_names)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "targets", y)
        object.__setattr__(self, "feature_names", names)
        n, d = X.shape
        if n < 1 or d < 1:
            raise DatasetError(f"dataset needs at least one row and one feature, got {X.shape}")
        if y.shape[0] != n:
            raise DatasetError(f"{n} feature rows but {y.shape[0]} targets")
        if len(names) != d:
            raise DatasetError(f"{d} feature columns but {len(names)} feature names")
        if not np.all(np.isfinite(X)):
            raise DatasetError("features contain non-finite values")
        if not np.all(np.isfinite(y)):
            raise DatasetError("targets contain non-finite values")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def take(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=int)
        return Dataset(self.features[rows], self.targets[rows], self.feature_names, self.target_name)


@dataclass(frozen=True, eq=False)
class SplitDataset:
    train: Dataset
    test: Dataset
    seed: int
    test_fraction: float
    train_rows: np.ndarray
    test_rows: np.ndarray


def load_csv(path, target_column: str, delimiter: str = ",") -> Dataset:
    """Read a headed numeric CSV; ``target_column`` becomes the target, every other column a feature."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such CSV file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DatasetError(f"{path}: empty file, header row expected") from None
        if target_column not in header:
            raise DatasetError(f"{path}: target column {target_column!r} not in header {header}")
        rows = []
        for lineno, raw in enumerate(reader, start=2):
            if not raw or all(not c.strip() for c in raw):
                continue
            if len(raw) != len(header):
                raise DatasetError(f"{path}:{lineno}: expected {len(header)} cells, got {len(raw)}")
            values = []
            for col, cell in zip(header, raw):
                try:
                    v = float(cell)
                except ValueError:
                    raise DatasetError(
                        f"{path}:{lineno}: non-numeric value {cell!r} in column {col!r}"
                    ) from None
                if not math.isfinite(v):
                    raise DatasetError(f"{path}:{lineno}: non-finite value {cell!r} in column {col!r}")
                values.append(v)
            rows.append(values)
    if len(rows) < 2:
        raise DatasetError(f"{path}: need at least 2 data rows, found {len(rows)}")
    table = np.array(rows, dtype=float)
    t = header.index(target_column)
    feature_cols = [i for i in range(len(header)) if i != t]
    if not feature_cols:
        raise DatasetError(f"{path}: no feature columns besides the target")
    return Dataset(
        features=table[:, feature_cols],
        targets=table[:, t],
        feature_names=tuple(header[i] for i in feature_cols),
        target_name=target_column,
    )


def write_csv(dataset: Dataset, path, delimiter: str = ",") -> None:
    """Write ``dataset`` in the format :func:`load_csv` reads (target as last column)."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow([*dataset.feature_names, dataset.target_name])
        for row, y in zip(dataset.features, dataset.targets):
            w.writerow([repr(float(v)) for v in row] + [repr(float(y))])


def make_synthetic(
    n: int,
    d: int,
    true_weights: Sequence[float],
    true_bias: float,
    noise_std: float = 0.0,
    seed: int = 0,
) -> Dataset:
    """Standard-normal features with a linear target plus optional gaussian noise."""
    if n < 2 or d < 1:
        raise DatasetError(f"need n >= 2 and d >= 1, got n={n}, d={d}")
    w = np.asarray(true_weights, dtype=float)
    if w.shape != (d,):
        raise DatasetError(f"true_weights must have length {d}, got shape {w.shape}")
    if noise_std < 0:
        raise DatasetError("noise_std must be non-negative")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    y = X @ w + true_bias
    if noise_std > 0:
        y = y + rng.normal(0.0, noise_std, size=n)
    return Dataset(X, y, tuple(f"x{j}" for j in range(d)), "y")


def split(dataset: Dataset, test_fraction: float, seed: int) -> SplitDataset:
    """Seeded shuffled train/test partition with ``test.n == round(N * test_fraction)``."""
    if not 0.0 < test_fraction < 1.0:
        raise DatasetError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    n = dataset.n
    n_test = int(math.floor(n * test_fraction + 0.5))
    if n_test < 1 or n_test > n - 1:
        raise DatasetError(
            f"test_fraction {test_fraction} on {n} rows leaves an empty part (test size {n_test})"
        )
    perm = np.random.default_rng(seed).permutation(n)
    test_rows = np.sort(perm[:n_test])
    train_rows = np.sort(perm[n_test:])
    for a in (test_rows, train_rows):
        a.setflags(write=False)
    return SplitDataset(
        train=dataset.take(train_rows),
        test=dataset.take(test_rows),
        seed=seed,
        test_fraction=test_fraction,
        train_rows=train_rows,
        test_rows=test_rows,
    )


@dataclass(frozen=True, eq=False)
class Standardizer:
    means: np.ndarray
    stddevs: np.ndarray

    def apply(self, data: Dataset) -> Dataset:
        return apply_standardizer(self, data)


def fit_standardizer(train: Dataset) -> Standardizer:
    # population std; constant columns get std 1 so they map to 0
    means = train.features.mean(axis=0)
    std = train.features.std(axis=0)
    constant = np.ptp(train.features, axis=0) == 0.0
    std = np.where(constant | (std == 0.0), 1.0, std)
    means.setflags(write=False)
    std.setflags(write=False)
    return Standardizer(means, std)


def apply_standardizer(s: Standardizer, data: Dataset) -> Dataset:
    if data.d != s.means.shape[0]:
        raise DatasetError(f"standardizer fitted on {s.means.shape[0]} columns, data has {data.d}")
    X = (data.features - s.means) / s.stddevs
    return Dataset(X, data.targets, data.feature_names, data.target_name)
