"""End-to-end experiment: load, train ensemble, consolidate, score curves, select, compare."""

from __future__ import annotations

import json
import math
import shutil
import tempfile
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .baselines import fit_baseline
from .config import ExperimentConfig
from .curve import write_curve_csv
from .data import Dataset, apply_standardizer, fit_standardizer, load_csv, make_synthetic, split
from .kalman import write_consolidated_csv
from .metrics import MetricsReport, evaluate
from .selection import Candidate, CandidateFailure, generate_candidates, run_selection
from .sgd import predict, write_trajectory_csv

PROPOSED = "Proposed Approach"


class PipelineError(RuntimeError):
    def __init__(self, message: str, stage: str, candidate_id: str | None = None):
        super().__init__(message)
        self.stage = stage
        self.candidate_id = candidate_id


@dataclass
class ExperimentReport:
    data: dict
    candidates: list[Candidate] = field(default_factory=list, repr=False)

    @property
    def metrics(self) -> dict[str, dict]:
        return {row["method"]: row for row in self.data["metrics"]}

    def to_json(self) -> str:
        return json.dumps(self.data, indent=2, allow_nan=False) + "\n"


def load_dataset(config: ExperimentConfig) -> Dataset:
    ds = config.dataset
    if ds["kind"] == "synthetic":
        return make_synthetic(
            n=ds["n"],
            d=len(ds["weights"]),
            true_weights=ds["weights"],
            true_bias=ds["bias"],
            noise_std=ds.get("noise_std", 0.0),
            seed=ds["seed"],
        )
    return load_csv(config.base_dir / ds["csv"], ds["target"], ds["delimiter"])


def _stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except PipelineError:
        raise
    except Exception as exc:
        cid = getattr(exc, "candidate_id", None)
        raise PipelineError(f"{name}: {exc}", name, cid) from exc


def _metrics_row(method: str, m: MetricsReport) -> dict:
    return {"method": method, **m.as_dict()}


def run_experiment(config: ExperimentConfig, parallel: int = 1, output_dir=None) -> ExperimentReport:
    data = _stage("load", load_dataset, config)
    parts = _stage("split", split, data, config.test_fraction, config.split_seed)
    train_data, test_data = parts.train, parts.test
    if config.standardize:
        scaler = fit_standardizer(train_data)
        train_data = apply_standardizer(scaler, train_data)
        test_data = apply_standardizer(scaler, test_data)

    failures: list[CandidateFailure] = []
    candidates = _stage(
        "candidates",
        generate_candidates,
        train_data,
        [c.train for c in config.candidates],
        config.kalman,
        ids=[c.id for c in config.candidates],
        scalarize=config.scalarize,
        parallel=parallel,
        failures=failures,
    )
    result = _stage("selection", run_selection, candidates, test_data)

    rows = [_metrics_row(PROPOSED, result.metrics)]
    baselines = []
    for spec in config.baselines:
        model = _stage(f"baseline:{spec.kind}", fit_baseline, spec, train_data)
        m = _stage(f"baseline:{spec.kind}", evaluate, test_data.targets, predict(model, test_data.features))
        rows.append(_metrics_row(spec.name, m))
        entry = {"method": spec.name, "kind": spec.kind, "lambda": spec.lam, **model.as_dict()}
        if hasattr(model, "converged"):
            entry["converged"] = model.converged
            entry["n_iter"] = model.n_iter
        baselines.append(entry)
    for row in rows:
        if not math.isclose(row["rmse"] ** 2, row["mse"], rel_tol=1e-9, abs_tol=0.0) and row["mse"] != 0:
            raise PipelineError(f"{row['method']}: rmse^2 != mse", "metrics")

    ds = config.dataset
    report = {
        "name": config.name,
        "dataset": {
            "source": "synthetic" if ds["kind"] == "synthetic" else Path(ds["csv"]).name,
            "target": data.target_name,
            "feature_names": list(data.feature_names),
            "n": data.n,
            "n_train": parts.train.n,
            "n_test": parts.test.n,
            "test_fraction": config.test_fraction,
            "split_seed": config.split_seed,
            "standardized": config.standardize,
        },
        "kalman": {
            "ranger": config.kalman.ranger,
            "measurement_noise": config.kalman.measurement_noise,
            "process_noise": config.kalman.process_noise,
            "horizon": config.kalman.horizon,
        },
        "candidates": [
            {
                "id": c.id,
                "learning_rate": c.train_config.learning_rate,
                "epochs": c.train_config.epochs,
                "seed": c.train_config.seed,
                "final_loss": c.final_loss,
                "auc": c.auc,
                "consolidated": [
                    {"horizon_step": cw.horizon_step, "weights": cw.weights.tolist(), "bias": cw.bias}
                    for cw in c.consolidated
                ],
            }
            for c in candidates
        ],
        "failures": [{"id": f.id, "stage": f.stage, "message": f.message} for f in failures],
        "selection": {
            "min_area": result.min_area,
            "optimal_index": result.optimal_index,
            "optimal_id": result.optimal_id,
            "weights": result.optimal_weights.tolist(),
            "bias": result.optimal_bias,
            "average_input": result.average_input,
            "average_prediction": result.average_prediction,
        },
        "baselines": baselines,
        "metrics": rows,
        "provenance": {
            "config_digest": config.digest,
            "artifact_version": __version__,
            "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        },
    }
    rep = ExperimentReport(report, candidates)
    out = output_dir if output_dir is not None else config.output_dir
    if out is not None:
        _stage("report", emit_report, rep, out)
    return rep


def metrics_markdown(report: ExperimentReport) -> str:
    lines = [
        f"Performance metrics: {report.data['name']} ({report.data['dataset']['source']}, "
        f"n_test={report.data['dataset']['n_test']})",
        "",
        "| Technique | Mean Squared Error | Root Mean Squared Error | R-squared |",
        "|---|---:|---:|---:|",
    ]
    for row in report.data["metrics"]:
        lines.append(f"| {row['method']} | {row['mse']:.6g} | {row['rmse']:.6g} | {row['r_squared']:.6g} |")
    return "\n".join(lines) + "\n"


def emit_report(report: ExperimentReport, output_dir) -> list[Path]:
    """Write every artifact into a scratch directory, then move it into place."""
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory(dir=output_dir, prefix=".partial-") as tmp:
        tmp = Path(tmp)
        (tmp / "report.json").write_text(report.to_json(), encoding="utf-8")
        (tmp / "metrics.md").write_text(metrics_markdown(report), encoding="utf-8")
        for sub in ("trajectories", "curves", "consolidated"):
            (tmp / sub).mkdir()
        for c in report.candidates:
            write_trajectory_csv(c.trajectory, tmp / "trajectories" / f"{c.id}.csv")
            write_curve_csv(c.curve, tmp / "curves" / f"{c.id}.csv")
            write_consolidated_csv(c.consolidated, tmp / "consolidated" / f"{c.id}.csv")
        written = []
        for src in sorted(tmp.rglob("*")):
            if src.is_file():
                dest = output_dir / src.relative_to(tmp)
                dest.parent.mkdir(parents=True, exist_ok=True)
                shutil.move(str(src), dest)
                written.append(dest)
    return written
