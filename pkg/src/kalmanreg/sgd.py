"""Per-sample SGD for linear regression with per-epoch trajectory recording.

Loss per sample is the plain squared error ``(y_pred - y)**2`` (no 1/2 factor),
so the gradients are ``2*e*x`` for the weights and ``2*e`` for the bias.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import Dataset

INIT_KINDS = ("zeros", "constant", "uniform")


class DivergenceError(ArithmeticError):
    """Training produced a non-finite weight, bias or loss."""

    def __init__(self, message: str, epoch: int | None = None, sample: int | None = None):
        super().__init__(message)
        self.epoch = epoch
        self.sample = sample


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float
    epochs: int
    seed: int = 0
    shuffle_each_epoch: bool = True
    init: str = "zeros"
    init_value: float = 0.0
    init_range: tuple[float, float] = (-0.1, 0.1)

    def __post_init__(self):
        if not (math.isfinite(self.learning_rate) and self.learning_rate > 0):
            raise ValueError(f"learning_rate must be finite and > 0, got {self.learning_rate}")
        if int(self.epochs) != self.epochs or self.epochs < 1:
            raise ValueError(f"epochs must be an integer >= 1, got {self.epochs}")
        if self.init not in INIT_KINDS:
            raise ValueError(f"init must be one of {INIT_KINDS}, got {self.init!r}")
        lo, hi = self.init_range
        if self.init == "uniform" and not lo <= hi:
            raise ValueError(f"init_range must satisfy lo <= hi, got {self.init_range}")


@dataclass(frozen=True, eq=False)
class LinearModel:
    weights: np.ndarray
    bias: float

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).reshape(-1)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", float(self.bias))
        if not (np.all(np.isfinite(w)) and math.isfinite(self.bias)):
            raise DivergenceError("model parameters are not finite")

    @property
    def d(self) -> int:
        return self.weights.shape[0]

    def __eq__(self, other):
        if not isinstance(other, LinearModel):
            return NotImplemented
        return self.bias == other.bias and np.array_equal(self.weights, other.weights)

    def as_dict(self) -> dict:
        return {"weights": self.weights.tolist(), "bias": self.bias}


@dataclass(frozen=True, eq=False)
class EpochRecord:
    epoch: int
    weights: np.ndarray
    bias: float
    loss: float


@dataclass(frozen=True, eq=False)
class Trajectory:
    records: tuple[EpochRecord, ...]

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        if not self.records:
            raise ValueError("trajectory has no records")
        for r in self.records:
            if not (math.isfinite(r.loss) and r.loss >= 0):
                raise ValueError(f"epoch {r.epoch}: loss must be finite and >= 0, got {r.loss}")

    def __len__(self) -> int:
        return len(self.records)

    @property
    def final_model(self) -> LinearModel:
        last = self.records[-1]
        return LinearModel(last.weights, last.bias)

    @property
    def weights(self) -> np.ndarray:
        return np.array([r.weights for r in self.records])

    @property
    def biases(self) -> np.ndarray:
        return np.array([r.bias for r in self.records])

    @property
    def losses(self) -> np.ndarray:
        return np.array([r.loss for r in self.records])

    def zipped(self) -> np.ndarray:
        """Rows ``[w_0..w_{d-1}, bias, loss]``, one per epoch."""
        return np.column_stack([self.weights, self.biases, self.losses])


def predict(model: LinearModel, features) -> np.ndarray:
    X = np.asarray(features, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.shape[1] != model.d:
        raise ValueError(f"model has {model.d} weights but features have {X.shape[1]} columns")
    return X @ model.weights + model.bias


def sgd_step(model: LinearModel, x, y: float, learning_rate: float) -> LinearModel:
    """One update on a single sample ``(x, y)``."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != model.d:
        raise ValueError(f"model has {model.d} weights but sample has {x.shape[0]} features")
    w, b = _step(model.weights, model.bias, x, float(y), learning_rate)
    if not (math.isfinite(b) and np.all(np.isfinite(w))):
        raise DivergenceError("sgd step produced non-finite parameters")
    return LinearModel(w, b)


def _step(w: np.ndarray, b: float, x: np.ndarray, y: float, lr: float):
    e = float(np.dot(x, w)) + b - y
    return w - lr * (2.0 * e * x), b - lr * (2.0 * e)


def sample_loss(model: LinearModel, x, y: float) -> float:
    e = float(predict(model, x)[0]) - y
    return e * e


def loss_gradient(model: LinearModel, X, y) -> tuple[np.ndarray, float]:
    """Mean over rows of the per-sample squared-error gradient."""
    X = np.asarray(X, dtype=float)
    e = predict(model, X) - np.asarray(y, dtype=float)
    return 2.0 * (X.T @ e) / X.shape[0], 2.0 * float(e.mean())


def mean_squared_loss(model: LinearModel, X, y) -> float:
    e = predict(model, X) - np.asarray(y, dtype=float)
    return float(np.mean(e * e))


def initial_model(d: int, config: TrainConfig) -> LinearModel:
    if config.init == "zeros":
        return LinearModel(np.zeros(d), 0.0)
    if config.init == "constant":
        return LinearModel(np.full(d, config.init_value), config.init_value)
    lo, hi = config.init_range
    # separate stream from the shuffling RNG so init never perturbs sample order
    rng = np.random.default_rng([config.seed, 1])
    params = rng.uniform(lo, hi, size=d + 1)
    return LinearModel(params[:d], params[d])


def train(train_data: Dataset, config: TrainConfig, initial: LinearModel | None = None) -> Trajectory:
    """Run ``config.epochs`` passes of per-sample SGD and record one snapshot per epoch.

    The recorded loss is the full-training-set MSE of the end-of-epoch model.
    """
    X, y = train_data.features, train_data.targets
    n, d = X.shape
    model = initial if initial is not None else initial_model(d, config)
    if model.d != d:
        raise ValueError(f"initial model has {model.d} weights, data has {d} features")
    w, b = np.array(model.weights), model.bias
    ys = y.tolist()
    lr = float(config.learning_rate)
    rng = np.random.default_rng(config.seed)
    order = np.arange(n)
    records = []
    for epoch in range(config.epochs):
        if config.shuffle_each_epoch:
            order = rng.permutation(n)
        for i in order:
            w, b = _step(w, b, X[i], ys[i], lr)
            if not math.isfinite(b):
                raise DivergenceError(
                    f"training diverged at epoch {epoch}, sample {int(i)}", epoch=epoch, sample=int(i)
                )
        if not np.all(np.isfinite(w)):
            raise DivergenceError(f"training diverged at epoch {epoch}", epoch=epoch)
        e = X @ w + b - y
        loss = float(np.mean(e * e))
        if not math.isfinite(loss):
            raise DivergenceError(f"loss overflowed at epoch {epoch}", epoch=epoch)
        snap = w.copy()
        snap.setflags(write=False)
        records.append(EpochRecord(epoch, snap, b, loss))
    return Trajectory(tuple(records))


def trajectory_columns(d: int) -> list[str]:
    return ["epoch", *(f"w_{j}" for j in range(d)), "bias", "loss"]


def write_trajectory_csv(trajectory: Trajectory, path) -> None:
    d = trajectory.records[0].weights.shape[0]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(trajectory_columns(d))
        for r in trajectory.records:
            out.writerow([r.epoch, *(repr(float(v)) for v in r.weights), repr(r.bias), repr(r.loss)])


def read_trajectory_csv(path) -> Trajectory:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty trajectory file")
        d = len(header) - 3
        if d < 1 or header != trajectory_columns(d):
            raise ValueError(f"{path}: unexpected trajectory header {header}")
        records = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                vals = [float(v) for v in row]
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric trajectory entry") from None
            if len(vals) != d + 3:
                raise ValueError(f"{path}:{lineno}: expected {d + 3} columns, got {len(vals)}")
            w = np.array(vals[1 : d + 1])
            w.setflags(write=False)
            records.append(EpochRecord(int(vals[0]), w, vals[d + 1], vals[d + 2]))
    return Trajectory(tuple(records))

