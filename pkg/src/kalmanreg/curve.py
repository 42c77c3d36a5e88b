"""Weight-versus-loss curves, two-point segment equations, and trapezoidal AUC."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .sgd import Trajectory

SCALARIZERS = ("norm", "first", "mean")


class CurveError(ValueError):
    pass


class DegenerateSegmentError(CurveError):
    """Two points share a weight value, so no line y = m*x + c passes through both."""


class CurvePoint(NamedTuple):
    weight_scalar: float
    loss: float


class SegmentEquation(NamedTuple):
    slope: float
    intercept: float
    span: tuple[float, float]

    def __call__(self, w):
        return self.slope * np.asarray(w, dtype=float) + self.intercept


def scalarize(weights, bias: float, method: str = "norm") -> float:
    """Collapse a parameter vector to the curve's x-coordinate.

    ``norm`` is the Euclidean norm of ``[weights, bias]``; ``first`` takes
    ``weights[0]``; ``mean`` averages ``[weights, bias]``.
    """
    v = np.append(np.asarray(weights, dtype=float).reshape(-1), float(bias))
    if method == "norm":
        return float(np.linalg.norm(v))
    if method == "first":
        return float(v[0])
    if method == "mean":
        return float(v.mean())
    raise CurveError(f"unknown scalarization {method!r}; expected one of {SCALARIZERS}")


@dataclass(frozen=True, eq=False)
class Curve:
    weights: np.ndarray
    losses: np.ndarray
    source_id: str = ""

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).reshape(-1)
        l = np.array(self.losses, dtype=float).reshape(-1)  # noqa: E741
        if w.shape != l.shape:
            raise CurveError(f"{w.shape[0]} weights but {l.shape[0]} losses")
        if w.shape[0] < 2:
            raise CurveError("a curve needs at least 2 points")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(l))):
            raise CurveError("curve points must be finite")
        if np.any(l < 0):
            raise CurveError("losses must be non-negative")
        if np.any(np.diff(w) < 0):
            raise CurveError("curve weights must be sorted ascending")
        w.setflags(write=False)
        l.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "losses", l)

    def __len__(self) -> int:
        return self.weights.shape[0]

    @property
    def points(self) -> list[CurvePoint]:
        return [CurvePoint(float(w), float(l)) for w, l in zip(self.weights, self.losses)]

    @classmethod
    def from_points(cls, points, source_id: str = "") -> "Curve":
        """Sort arbitrary ``(weight, loss)`` pairs (stable on ties) into a curve."""
        pts = np.array(points, dtype=float).reshape(-1, 2)
        order = np.argsort(pts[:, 0], kind="stable")
        return cls(pts[order, 0], pts[order, 1], source_id)


def build_curve(trajectory: Trajectory, id: str = "", method: str = "norm") -> Curve:
    if len(trajectory) < 2:
        raise CurveError("a curve needs a trajectory with at least 2 records")
    pts = [(scalarize(r.weights, r.bias, method), r.loss) for r in trajectory.records]
    if len(set(pts)) < 2:
        raise CurveError(f"trajectory {id!r} yields fewer than 2 distinct curve points")
    return Curve.from_points(pts, id)


def segment_equation(p1, p2) -> SegmentEquation:
    """Line through two points by the two-point formula."""
    (w1, l1), (w2, l2) = p1, p2
    if w1 == w2:
        raise DegenerateSegmentError(f"vertical segment at weight {w1}")
    slope = (l2 - l1) / (w2 - w1)
    return SegmentEquation(slope, l1 - slope * w1, (min(w1, w2), max(w1, w2)))


def segment_equations(curve: Curve) -> list[SegmentEquation]:
    """Equations of every non-degenerate consecutive segment."""
    pts = curve.points
    return [segment_equation(a, b) for a, b in zip(pts, pts[1:]) if a[0] != b[0]]


def auc_trapezoid(curve: Curve) -> float:
    auc = 0.0
    w, l = curve.weights, curve.losses  # noqa: E741
    for i in range(1, len(w)):
        width = w[i] - w[i - 1]
        average_height = (l[i] + l[i - 1]) / 2.0
        auc += width * average_height
    return float(auc)


def write_curve_csv(curve: Curve, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["weight_scalar", "loss"])
        for w, l in zip(curve.weights, curve.losses):  # noqa: E741
            out.writerow([repr(float(w)), repr(float(l))])


def read_curve_csv(path, source_id: str = "") -> Curve:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["weight_scalar", "loss"]:
            raise CurveError(f"{path}: unexpected curve header {header}")
        pts = [(float(a), float(b)) for a, b in (r for r in reader if r)]
    return Curve.from_points(pts, source_id)
