"""Versioned JSON serialization for trained models.

Every model file is a single JSON object:

    {
      "format": "liqlab-model", "version": 1,
      "kind": "logistic" | "svm" | "rf",
      "config": {...trainer hyperparameters, including the seed...},
      "seed": <master seed echo>,
      "feature_names": [...],
      "standardization_hash": "<hash of the train-fit mean/std>" | null,
      "run_config": {...full pipeline config echo...} | null,
      "params": {...kind-specific weights or trees...}
    }

Floats serialize through json's repr-equivalent shortest form, which
round-trips float64 exactly, so save -> load -> save is byte-stable.
"""

from __future__ import annotations

import json
import os

import numpy as np

from ..errors import InputError
from ..util import atomic_write_text
from .forest import ForestConfig, ForestModel, Tree
from .linear import LinearModel, LogisticConfig, SvmConfig

MODEL_FORMAT = "liqlab-model"
MODEL_VERSION = 1


def model_to_dict(model, *, feature_names=None, standardization_hash=None,
                  run_config=None, seed=None) -> dict:
    if isinstance(model, LinearModel):
        params = {
            "weights": [float(v) for v in model.weights],
            "bias": float(model.bias),
            "objective_trace": [float(v) for v in model.objective_trace],
        }
        if model.kind == "svm":
            params["margin_low"] = model.margin_low
            params["margin_high"] = model.margin_high
        kind = model.kind
    elif isinstance(model, ForestModel):
        params = {
            "n_features": model.n_features,
            "importances": [float(v) for v in model.importances],
            "trees": [{
                "feature": t.feature.tolist(),
                "threshold": t.threshold.tolist(),
                "left": t.left.tolist(),
                "right": t.right.tolist(),
                "counts": t.counts.tolist(),
            } for t in model.trees],
        }
        kind = "rf"
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "kind": kind,
        "config": model.config.to_dict(),
        "seed": seed if seed is not None else model.config.seed,
        "feature_names": list(feature_names) if feature_names else None,
        "standardization_hash": standardization_hash,
        "run_config": run_config,
        "params": params,
    }


def model_from_dict(payload: dict):
    """Rebuild a model; returns (model, payload) for access to the echoes."""
    if payload.get("format") != MODEL_FORMAT:
        raise InputError(f"not a model file: format={payload.get('format')!r}")
    if payload.get("version") != MODEL_VERSION:
        raise InputError(f"unsupported model version {payload.get('version')!r}")
    kind = payload["kind"]
    cfg = payload["config"]
    params = payload["params"]
    if kind in ("logistic", "svm"):
        config = (LogisticConfig(**cfg) if kind == "logistic"
                  else SvmConfig(**cfg))
        model = LinearModel(
            kind,
            np.array(params["weights"], dtype=np.float64),
            float(params["bias"]),
            config,
            tuple(params["objective_trace"]),
            margin_low=float(params.get("margin_low", 0.0)),
            margin_high=float(params.get("margin_high", 0.0)))
    elif kind == "rf":
        trees = [Tree(np.array(t["feature"], dtype=np.int32),
                      np.array(t["threshold"], dtype=np.float64),
                      np.array(t["left"], dtype=np.int32),
                      np.array(t["right"], dtype=np.int32),
                      np.array(t["counts"], dtype=np.int64))
                 for t in params["trees"]]
        model = ForestModel(trees, ForestConfig(**cfg),
                            int(params["n_features"]),
                            np.array(params["importances"], dtype=np.float64))
    else:
        raise InputError(f"unknown model kind {kind!r}")
    return model, payload


def save_model(path: str | os.PathLike, model, **meta) -> None:
    payload = model_to_dict(model, **meta)
    atomic_write_text(path, json.dumps(payload, sort_keys=True, indent=1) + "\n")


def load_model(path: str | os.PathLike):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read model file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"model file {path} is not valid JSON: {exc}") from exc
    return model_from_dict(payload)
