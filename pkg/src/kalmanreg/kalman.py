"""Linear Kalman filter and trajectory consolidation.

The predict step is ``x = F x``, ``P = F P F^T`` (plus ``Q`` only when a process
noise is configured). The correct step is the textbook gain / state /
covariance triple, followed by re-symmetrization of ``P``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .sgd import Trajectory

MAX_CONDITION = 1e12


class KalmanError(ArithmeticError):
    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class SingularInnovationError(KalmanError):
    """Innovation covariance ``H P H^T + R`` is singular or too ill-conditioned to invert."""


class NonFiniteStateError(KalmanError):
    pass


def _matrix(a, name: str) -> np.ndarray:
    m = np.array(a, dtype=float)
    if m.ndim != 2:
        raise ValueError(f"{name} must be a 2-d matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    m.setflags(write=False)
    return m


def _check_psd(m: np.ndarray, name: str, sym_tol: float, eig_tol: float):
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got {m.shape}")
    if np.max(np.abs(m - m.T), initial=0.0) > sym_tol:
        raise ValueError(f"{name} is not symmetric")
    if np.min(np.linalg.eigvalsh(m)) < -eig_tol:
        raise ValueError(f"{name} is not positive semi-definite")


@dataclass(frozen=True, eq=False)
class KalmanModel:
    F: np.ndarray
    H: np.ndarray
    R: np.ndarray
    Q: np.ndarray | None = None

    def __post_init__(self):
        F = _matrix(self.F, "F")
        H = _matrix(self.H, "H")
        R = _matrix(self.R, "R")
        s, m = F.shape[0], H.shape[0]
        if F.shape != (s, s):
            raise ValueError(f"F must be square, got {F.shape}")
        if H.shape != (m, s):
            raise ValueError(f"H must be {m}x{s}, got {H.shape}")
        if R.shape != (m, m):
            raise ValueError(f"R must be {m}x{m}, got {R.shape}")
        _check_psd(R, "R", 1e-12, 1e-10)
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "R", R)
        if self.Q is not None:
            Q = _matrix(self.Q, "Q")
            if Q.shape != (s, s):
                raise ValueError(f"Q must be {s}x{s}, got {Q.shape}")
            _check_psd(Q, "Q", 1e-12, 1e-10)
            object.__setattr__(self, "Q", Q)

    @property
    def state_dim(self) -> int:
        return self.F.shape[0]

    @property
    def measurement_dim(self) -> int:
        return self.H.shape[0]

    @property
    def I(self) -> np.ndarray:  # noqa: E743
        return np.eye(self.state_dim)


@dataclass(frozen=True, eq=False)
class KalmanState:
    x: np.ndarray
    P: np.ndarray

    def __post_init__(self):
        x = np.array(self.x, dtype=float).reshape(-1)
        P = np.array(self.P, dtype=float)
        if P.shape != (x.shape[0], x.shape[0]):
            raise ValueError(f"P must be {x.shape[0]}x{x.shape[0]}, got {P.shape}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(P))):
            raise NonFiniteStateError("state or covariance has non-finite entries")
        x.setflags(write=False)
        P.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "P", P)


@dataclass(frozen=True)
class KalmanConfig:
    ranger: int = 1000
    measurement_noise: float = 1.0
    horizon: int = 1
    process_noise: float = 0.0
    initial_covariance: float = 1.0

    def __post_init__(self):
        if self.ranger < 1:
            raise ValueError(f"ranger must be >= 1, got {self.ranger}")
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        if not self.measurement_noise >= 0:
            raise ValueError(f"measurement_noise must be >= 0, got {self.measurement_noise}")
        if not self.process_noise >= 0:
            raise ValueError(f"process_noise must be >= 0, got {self.process_noise}")
        if not self.initial_covariance > 0:
            raise ValueError(f"initial_covariance must be > 0, got {self.initial_covariance}")


def kf_predict(model: KalmanModel, state: KalmanState, step: int | None = None) -> KalmanState:
    F = model.F
    x = F @ state.x
    P = F @ state.P @ F.T
    if model.Q is not None:
        P = P + model.Q
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(P))):
        raise NonFiniteStateError(f"prediction produced non-finite values (step {step})", step)
    return KalmanState(x, P)


def kf_correct(model: KalmanModel, state: KalmanState, z, step: int | None = None) -> KalmanState:
    z = np.asarray(z, dtype=float).reshape(-1)
    H, P, x = model.H, state.P, state.x
    if z.shape[0] != model.measurement_dim:
        raise ValueError(f"measurement has length {z.shape[0]}, expected {model.measurement_dim}")
    S = H @ P @ H.T + model.R
    cond = np.linalg.cond(S)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise SingularInnovationError(
            f"innovation covariance is singular (condition {cond:.3g}) at step {step}", step
        )
    # K = P H^T S^-1, via a pivoted solve of S^T K^T = H P^T
    K = np.linalg.solve(S.T, H @ P.T).T
    x = x + K @ (z - H @ x)
    P = (model.I - K @ H) @ P
    P = 0.5 * (P + P.T)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(P))):
        raise NonFiniteStateError(f"correction produced non-finite values (step {step})", step)
    return KalmanState(x, P)


def run_filter(
    model: KalmanModel,
    initial: KalmanState,
    measurements: Sequence,
    ranger: int,
) -> KalmanState:
    """Predict-then-correct over at most ``ranger`` measurements, in order."""
    if len(measurements) < 1:
        raise ValueError("run_filter needs at least one measurement")
    if ranger < 1:
        raise ValueError(f"ranger must be >= 1, got {ranger}")
    state = initial
    for step, z in enumerate(measurements[:ranger]):
        state = kf_predict(model, state, step)
        state = kf_correct(model, state, z, step)
    return state


@dataclass(frozen=True, eq=False)
class ConsolidatedWeights:
    horizon_step: int
    weights: np.ndarray
    bias: float


def trajectory_model(d: int, config: KalmanConfig) -> KalmanModel:
    """Identity dynamics over the zipped ``[weights, bias, loss]`` vector."""
    s = d + 2
    Q = config.process_noise * np.eye(s) if config.process_noise > 0 else None
    return KalmanModel(F=np.eye(s), H=np.eye(s), R=config.measurement_noise * np.eye(s), Q=Q)


def consolidate(trajectory: Trajectory, config: KalmanConfig) -> list[ConsolidatedWeights]:
    if len(trajectory) < 2:
        raise ValueError("consolidation needs a trajectory with at least 2 records")
    Z = trajectory.zipped()
    d = Z.shape[1] - 2
    model = trajectory_model(d, config)
    initial = KalmanState(Z[0], config.initial_covariance * np.eye(d + 2))
    state = run_filter(model, initial, Z[1:], config.ranger)
    out = []
    for h in range(1, config.horizon + 1):
        state = kf_predict(model, state, step=len(Z) - 1 + h)
        w = state.x[:d].copy()
        w.setflags(write=False)
        out.append(ConsolidatedWeights(h, w, float(state.x[d])))
    return out


def consolidated_columns(d: int) -> list[str]:
    return ["horizon_step", *(f"w_{j}" for j in range(d)), "bias"]


def write_consolidated_csv(rows: Sequence[ConsolidatedWeights], path) -> None:
    d = rows[0].weights.shape[0]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(consolidated_columns(d))
        for r in rows:
            out.writerow([r.horizon_step, *(repr(float(v)) for v in r.weights), repr(r.bias)])


def read_consolidated_csv(path) -> list[ConsolidatedWeights]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        d = len(header) - 2
        if d < 1 or header != consolidated_columns(d):
            raise ValueError(f"{path}: unexpected consolidated-weights header {header}")
        rows = []
        for row in reader:
            if row:
                vals = [float(v) for v in row]
                rows.append(ConsolidatedWeights(int(vals[0]), np.array(vals[1 : d + 1]), vals[d + 1]))
    return rows
