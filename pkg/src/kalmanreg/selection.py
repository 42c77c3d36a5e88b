"""Candidate ensemble, minimum-AUC selection, and prediction with the winner."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .curve import Curve, auc_trapezoid, build_curve
from .data import Dataset
from .kalman import ConsolidatedWeights, KalmanConfig, consolidate
from .metrics import MetricsReport, evaluate
from .sgd import LinearModel, TrainConfig, Trajectory, train

log = logging.getLogger(__name__)


class NoOptimalCurveError(LookupError):
    pass


class CandidateError(RuntimeError):
    def __init__(self, message: str, candidate_id: str, stage: str):
        super().__init__(message)
        self.candidate_id = candidate_id
        self.stage = stage


@dataclass(frozen=True, eq=False)
class Candidate:
    id: str
    train_config: TrainConfig
    trajectory: Trajectory
    consolidated: tuple[ConsolidatedWeights, ...]
    curve: Curve
    auc: float

    @property
    def consolidated_model(self) -> LinearModel:
        first = self.consolidated[0]
        return LinearModel(first.weights, first.bias)

    @property
    def final_loss(self) -> float:
        return self.trajectory.records[-1].loss


@dataclass(frozen=True)
class CandidateFailure:
    id: str
    stage: str
    message: str


def build_candidate(
    train_data: Dataset,
    config: TrainConfig,
    kconfig: KalmanConfig,
    candidate_id: str,
    scalarize: str = "norm",
) -> Candidate:
    stage = "train"
    try:
        trajectory = train(train_data, config)
        stage = "kalman"
        consolidated = tuple(consolidate(trajectory, kconfig))
        stage = "curve"
        curve = build_curve(trajectory, candidate_id, scalarize)
    except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        raise CandidateError(f"candidate {candidate_id!r} failed in {stage}: {exc}", candidate_id, stage) from exc
    return Candidate(candidate_id, config, trajectory, consolidated, curve, auc_trapezoid(curve))


def _build_job(args):
    try:
        return build_candidate(*args)
    except CandidateError as exc:
        return CandidateFailure(exc.candidate_id, exc.stage, str(exc))


def generate_candidates(
    train_data: Dataset,
    configs: Sequence[TrainConfig],
    kconfig: KalmanConfig,
    ids: Sequence[str] | None = None,
    scalarize: str = "norm",
    parallel: int = 1,
    failures: list | None = None,
) -> list[Candidate]:
    """Train, consolidate and score one candidate per config, in config order.

    Failed candidates are skipped (and appended to ``failures`` when given);
    a :class:`CandidateError` is raised only if every candidate fails.
    """
    if not configs:
        raise ValueError("at least one training config is required")
    ids = list(ids) if ids is not None else [f"c{i}" for i in range(len(configs))]
    if len(ids) != len(configs) or len(set(ids)) != len(ids):
        raise ValueError("candidate ids must be unique and match the configs one-to-one")
    jobs = [(train_data, c, kconfig, i, scalarize) for c, i in zip(configs, ids)]
    if parallel > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(parallel, len(jobs))) as pool:
            results = list(pool.map(_build_job, jobs))
    else:
        results = [_build_job(j) for j in jobs]
    candidates = [r for r in results if isinstance(r, Candidate)]
    failed = [r for r in results if isinstance(r, CandidateFailure)]
    for f in failed:
        log.warning("%s", f.message)
    if failures is not None:
        failures.extend(failed)
    if not candidates:
        first = failed[0]
        raise CandidateError(f"all {len(failed)} candidates failed; first: {first.message}", first.id, first.stage)
    return candidates


def select_optimal(candidates: Sequence) -> tuple[int, float]:
    """Index and AUC of the first candidate with the smallest AUC.

    Accepts candidates or bare AUC values.
    """
    min_area = math.inf
    optimal_index = -1
    for i, c in enumerate(candidates):
        auc = c.auc if isinstance(c, Candidate) else float(c)
        if auc < min_area:
            min_area = auc
            optimal_index = i
    if optimal_index == -1:
        raise NoOptimalCurveError("no optimal curve was found")
    return optimal_index, min_area


def average_input(features) -> float:
    X = np.asarray(features, dtype=float)
    if X.size == 0:
        raise ValueError("average_input needs a non-empty matrix")
    return float(X.sum() / X.size)


def predict_new_values(optimal: Candidate, inputs) -> np.ndarray:
    """Apply the horizon-1 consolidated weights row-wise: ``y = w . x + b``."""
    model = optimal.consolidated_model
    X = inputs.features if isinstance(inputs, Dataset) else np.asarray(inputs, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1) if model.d == 1 else X.reshape(1, -1)
    if X.shape[1] != model.d:
        raise ValueError(f"optimal weights have {model.d} entries but inputs have {X.shape[1]} columns")
    return X @ model.weights + model.bias


@dataclass(frozen=True, eq=False)
class SelectionResult:
    min_area: float
    optimal_index: int
    optimal_id: str
    optimal_weights: np.ndarray
    optimal_bias: float
    predictions: np.ndarray
    metrics: MetricsReport
    average_input: float
    average_prediction: float
    aucs: tuple[float, ...] = field(default_factory=tuple)


def run_selection(candidates: Sequence[Candidate], test: Dataset) -> SelectionResult:
    idx, area = select_optimal(candidates)
    best = candidates[idx]
    model = best.consolidated_model
    preds = predict_new_values(best, test)
    avg = average_input(test.features)
    return SelectionResult(
        min_area=area,
        optimal_index=idx,
        optimal_id=best.id,
        optimal_weights=model.weights,
        optimal_bias=model.bias,
        predictions=preds,
        metrics=evaluate(test.targets, preds),
        average_input=avg,
        average_prediction=float(avg * model.weights.sum() + model.bias),
        aucs=tuple(c.auc for c in candidates),
    )
