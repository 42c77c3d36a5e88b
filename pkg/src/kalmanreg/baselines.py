"""Reference regressors: OLS, Ridge and Lasso.

All three fit an unpenalized intercept. Lasso minimizes
``(1/N)||y - Xw - b||^2 + lam * ||w||_1`` by cyclic coordinate descent, so the
all-zero solution is optimal once ``lam >= (2/N) * max_j |X_j^T (y - mean(y))|``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .sgd import LinearModel

MAX_CONDITION = 1e12
BASELINE_KINDS = ("ols", "ridge", "lasso")
DISPLAY_NAMES = {"ols": "OLS", "ridge": "Ridge Regression", "lasso": "Lasso Regression"}


class SingularDesignError(np.linalg.LinAlgError):
    pass


class NotStandardizedError(ValueError):
    pass


class LassoConvergenceWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class BaselineSpec:
    kind: str
    lam: float = 0.0
    max_iters: int = 10000
    tol: float = 1e-8

    def __post_init__(self):
        if self.kind not in BASELINE_KINDS:
            raise ValueError(f"unknown baseline {self.kind!r}; expected one of {BASELINE_KINDS}")
        if not (math.isfinite(self.lam) and self.lam >= 0):
            raise ValueError(f"lambda must be finite and >= 0, got {self.lam}")
        if not self.tol > 0:
            raise ValueError(f"tol must be > 0, got {self.tol}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")

    @property
    def name(self) -> str:
        return DISPLAY_NAMES[self.kind]


@dataclass(frozen=True, eq=False)
class LassoModel(LinearModel):
    converged: bool = True
    n_iter: int = 0


def _design(X: np.ndarray) -> np.ndarray:
    return np.column_stack([X, np.ones(X.shape[0])])


def _solve_qr(A: np.ndarray, y: np.ndarray) -> np.ndarray:
    Q, R = np.linalg.qr(A, mode="reduced")
    cond = np.linalg.cond(R)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise SingularDesignError(
            f"design matrix is rank deficient (condition {cond:.3g}); use ridge with lambda > 0"
        )
    return np.linalg.solve(R, Q.T @ y)


def fit_ols(train: Dataset) -> LinearModel:
    """Least squares with intercept via QR of the design matrix."""
    X, y = train.features, train.targets
    if X.shape[0] <= X.shape[1]:
        raise SingularDesignError(f"OLS needs more rows than features, got {X.shape}")
    beta = _solve_qr(_design(X), y)
    return LinearModel(beta[:-1], beta[-1])


def fit_ridge(train: Dataset, lam: float) -> LinearModel:
    """Solves ``(A^T A + lam I') beta = A^T y`` with ``I'`` skipping the intercept.

    Done as least squares on ``A`` stacked over ``sqrt(lam) I'`` rows.
    """
    if not (math.isfinite(lam) and lam >= 0):
        raise ValueError(f"lambda must be finite and >= 0, got {lam}")
    X, y = train.features, train.targets
    d = X.shape[1]
    A = _design(X)
    if lam > 0:
        penalty = np.zeros((d, d + 1))
        penalty[:, :d] = math.sqrt(lam) * np.eye(d)
        A = np.vstack([A, penalty])
        y = np.concatenate([y, np.zeros(d)])
    beta = _solve_qr(A, y)
    return LinearModel(beta[:-1], beta[-1])


def soft_threshold(z: float, t: float) -> float:
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


def check_standardized(X: np.ndarray, tol: float = 1e-6) -> None:
    means = X.mean(axis=0)
    std = X.std(axis=0)
    ok = (np.abs(means) < tol) & ((np.abs(std - 1.0) < tol) | (np.ptp(X, axis=0) == 0.0))
    if not np.all(ok):
        bad = np.flatnonzero(~ok).tolist()
        raise NotStandardizedError(f"lasso needs standardized features; columns {bad} are not")


def lasso_lambda_max(train: Dataset) -> float:
    X, y = train.features, train.targets
    return float(2.0 / X.shape[0] * np.max(np.abs(X.T @ (y - y.mean()))))


def fit_lasso(train: Dataset, lam: float, max_iters: int = 10000, tol: float = 1e-8) -> LassoModel:
    if not (math.isfinite(lam) and lam >= 0):
        raise ValueError(f"lambda must be finite and >= 0, got {lam}")
    X, y = train.features, train.targets
    check_standardized(X)
    n, d = X.shape
    col_sq = (X * X).sum(axis=0) / n
    w = np.zeros(d)
    b = float(y.mean())
    r = y - b
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        max_change = 0.0
        for j in range(d):
            if col_sq[j] == 0.0:
                continue
            rho = float(X[:, j] @ r) / n + col_sq[j] * w[j]
            new = soft_threshold(rho, lam / 2.0) / col_sq[j]
            delta = new - w[j]
            if delta != 0.0:
                r -= delta * X[:, j]
                w[j] = new
                max_change = max(max_change, abs(delta))
        # intercept stays unpenalized: re-center the residual
        shift = float(r.mean())
        if shift != 0.0:
            b += shift
            r -= shift
            max_change = max(max_change, abs(shift))
        if max_change < tol:
            converged = True
            break
    if not converged:
        warnings.warn(
            f"lasso did not converge within {max_iters} iterations", LassoConvergenceWarning, stacklevel=2
        )
    return LassoModel(w, b, converged=converged, n_iter=it)


def lasso_kkt_residual(train: Dataset, model: LinearModel, lam: float) -> np.ndarray:
    """Per-coordinate violation of the lasso optimality conditions (0 at the optimum)."""
    X, y = train.features, train.targets
    g = 2.0 / X.shape[0] * (X.T @ (y - X @ model.weights - model.bias))
    w = model.weights
    return np.where(w != 0.0, np.abs(g - lam * np.sign(w)), np.maximum(np.abs(g) - lam, 0.0))


def fit_baseline(spec: BaselineSpec, train: Dataset) -> LinearModel:
    if spec.kind == "ols":
        return fit_ols(train)
    if spec.kind == "ridge":
        return fit_ridge(train, spec.lam)
    return fit_lasso(train, spec.lam, spec.max_iters, spec.tol)
