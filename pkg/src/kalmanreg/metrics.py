"""MSE, RMSE and R-squared."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np


class UndefinedMetricError(ValueError):
    pass


def _pair(y_true, y_pred) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(y_true, dtype=float).reshape(-1)
    b = np.asarray(y_pred, dtype=float).reshape(-1)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape[0]} true values vs {b.shape[0]} predictions")
    if a.shape[0] == 0:
        raise ValueError("metrics need at least one value")
    return a, b


def mse(y_true, y_pred) -> float:
    a, b = _pair(y_true, y_pred)
    squared_diff = (a - b) ** 2
    return float(np.sum(squared_diff) / a.shape[0])


def rmse(mse_value: float) -> float:
    if mse_value < 0:
        raise ValueError(f"mse must be non-negative, got {mse_value}")
    return math.sqrt(mse_value)


def r_squared(y_true, y_pred) -> float:
    """``1 - SS_res / SS_tot``; negative when worse than predicting the mean."""
    a, b = _pair(y_true, y_pred)
    if a.shape[0] < 2:
        raise UndefinedMetricError("R-squared needs at least 2 values")
    ss_tot = float(np.sum((a - a.mean()) ** 2))
    if ss_tot == 0.0:
        raise UndefinedMetricError("R-squared is undefined for a constant target")
    ss_res = float(np.sum((a - b) ** 2))
    return 1.0 - ss_res / ss_tot


@dataclass(frozen=True)
class MetricsReport:
    mse: float
    rmse: float
    r_squared: float
    n: int

    def as_dict(self) -> dict:
        return asdict(self)


def evaluate(y_true, y_pred) -> MetricsReport:
    m = mse(y_true, y_pred)
    return MetricsReport(mse=m, rmse=rmse(m), r_squared=r_squared(y_true, y_pred), n=len(y_true))
