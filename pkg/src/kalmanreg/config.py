"""Experiment configuration: JSON schema, parsing and validation."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema

from .baselines import BaselineSpec
from .curve import SCALARIZERS
from .kalman import KalmanConfig
from .sgd import TrainConfig

_seed = {"type": "integer", "minimum": 0}
_nonneg = {"type": "number", "minimum": 0}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "kalmanreg experiment",
    "type": "object",
    "additionalProperties": False,
    "required": ["dataset", "split", "candidates"],
    "properties": {
        "name": {"type": "string"},
        "dataset": {
            "oneOf": [
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["csv", "target"],
                    "properties": {
                        "csv": {"type": "string", "minLength": 1},
                        "target": {"type": "string", "minLength": 1},
                        "delimiter": {"type": "string", "minLength": 1, "maxLength": 1},
                    },
                },
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["synthetic"],
                    "properties": {
                        "synthetic": {
                            "type": "object",
                            "additionalProperties": False,
                            "required": ["n", "weights", "bias", "seed"],
                            "properties": {
                                "n": {"type": "integer", "minimum": 2},
                                "weights": {"type": "array", "minItems": 1, "items": {"type": "number"}},
                                "bias": {"type": "number"},
                                "noise_std": _nonneg,
                                "seed": _seed,
                            },
                        }
                    },
                },
            ]
        },
        "split": {
            "type": "object",
            "additionalProperties": False,
            "required": ["seed"],
            "properties": {
                "test_fraction": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "seed": _seed,
            },
        },
        "standardize": {"type": "boolean"},
        "scalarize": {"enum": list(SCALARIZERS)},
        "candidates": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["learning_rate", "epochs", "seed"],
                "properties": {
                    "id": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
                    "learning_rate": {"type": "number", "exclusiveMinimum": 0},
                    "epochs": {"type": "integer", "minimum": 1},
                    "seed": _seed,
                    "shuffle": {"type": "boolean"},
                    "init": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["kind"],
                        "properties": {
                            "kind": {"enum": ["zeros", "constant", "uniform"]},
                            "value": {"type": "number"},
                            "low": {"type": "number"},
                            "high": {"type": "number"},
                        },
                    },
                },
            },
        },
        "kalman": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "ranger": {"type": "integer", "minimum": 1},
                "measurement_noise": _nonneg,
                "horizon": {"type": "integer", "minimum": 1},
                "process_noise": _nonneg,
                "initial_covariance": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "baselines": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["kind"],
                "properties": {
                    "kind": {"enum": ["ols", "ridge", "lasso"]},
                    "lambda": _nonneg,
                    "max_iters": {"type": "integer", "minimum": 1},
                    "tol": {"type": "number", "exclusiveMinimum": 0},
                },
            },
        },
        "output_dir": {"type": "string", "minLength": 1},
    },
}

DEFAULT_BASELINES = [{"kind": "ols"}, {"kind": "lasso", "lambda": 0.1}, {"kind": "ridge", "lambda": 1.0}]
DEFAULT_LAMBDA = {"ols": 0.0, "ridge": 1.0, "lasso": 0.1}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class CandidateSpec:
    id: str
    train: TrainConfig


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    dataset: dict
    test_fraction: float
    split_seed: int
    standardize: bool
    scalarize: str
    candidates: tuple[CandidateSpec, ...]
    kalman: KalmanConfig
    baselines: tuple[BaselineSpec, ...]
    output_dir: Path | None
    raw: dict
    base_dir: Path

    @property
    def digest(self) -> str:
        return config_digest(self.raw)


def config_digest(raw: dict) -> str:
    """SHA-256 of the canonical JSON form, ignoring where outputs are written."""
    body = {k: v for k, v in raw.items() if k != "output_dir"}
    text = json.dumps(body, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _where(err: jsonschema.ValidationError) -> str:
    return "/".join(str(p) for p in err.absolute_path) or "<root>"


def _best_error(err: jsonschema.ValidationError) -> jsonschema.ValidationError:
    if err.context:
        return min(err.context, key=lambda e: (-len(e.absolute_path), e.message))
    return err


def parse_config(raw: dict, base_dir=".") -> ExperimentConfig:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        lines = []
        for e in errors:
            e = _best_error(e)
            lines.append(f"{_where(e)}: {e.message}")
        raise ConfigError("invalid config:\n  " + "\n  ".join(lines))
    raw = copy.deepcopy(raw)
    base_dir = Path(base_dir)

    cands = []
    ids = set()
    for i, c in enumerate(raw["candidates"]):
        cid = c.get("id", f"c{i}")
        if cid in ids:
            raise ConfigError(f"candidates/{i}/id: duplicate candidate id {cid!r}")
        ids.add(cid)
        init = c.get("init", {"kind": "zeros"})
        low, high = init.get("low", -0.1), init.get("high", 0.1)
        if low > high:
            raise ConfigError(f"candidates/{i}/init: low must not exceed high")
        cands.append(
            CandidateSpec(
                cid,
                TrainConfig(
                    learning_rate=float(c["learning_rate"]),
                    epochs=int(c["epochs"]),
                    seed=int(c["seed"]),
                    shuffle_each_epoch=bool(c.get("shuffle", True)),
                    init=init["kind"],
                    init_value=float(init.get("value", 0.0)),
                    init_range=(float(low), float(high)),
                ),
            )
        )

    baselines = tuple(
        BaselineSpec(
            kind=b["kind"],
            lam=float(b.get("lambda", DEFAULT_LAMBDA[b["kind"]])),
            max_iters=int(b.get("max_iters", 10000)),
            tol=float(b.get("tol", 1e-8)),
        )
        for b in raw.get("baselines", DEFAULT_BASELINES)
    )
    standardize = bool(raw.get("standardize", True))
    if not standardize and any(b.kind == "lasso" for b in baselines):
        raise ConfigError("baselines: lasso needs standardized features; set standardize to true or drop it")
    ds = raw["dataset"]
    if "synthetic" in ds:
        syn = ds["synthetic"]
        dataset = {"kind": "synthetic", **syn}
    else:
        dataset = {
            "kind": "csv",
            "csv": ds["csv"],
            "target": ds["target"],
            "delimiter": ds.get("delimiter", ","),
        }
    out = raw.get("output_dir")
    return ExperimentConfig(
        name=raw.get("name", "experiment"),
        dataset=dataset,
        test_fraction=float(raw["split"].get("test_fraction", 0.2)),
        split_seed=int(raw["split"]["seed"]),
        standardize=standardize,
        scalarize=raw.get("scalarize", "norm"),
        candidates=tuple(cands),
        kalman=KalmanConfig(**raw.get("kalman", {})),
        baselines=baselines,
        output_dir=(base_dir / out) if out else None,
        raw=raw,
        base_dir=base_dir,
    )


def validate_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from exc
    try:
        return parse_config(raw, base_dir=path.parent)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
