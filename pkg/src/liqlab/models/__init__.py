"""Classifier trainers, prediction, and feature importance.

Three model families share one interface: standardized feature matrix in,
(label, score) out, with labels 1 = Up, 0 = Down and scores in [0, 1].
Deliberate tie rules, identical across the package: a logistic score of
exactly 0.5, an SVM margin of exactly 0, and a tied forest vote all predict
Down.
"""

from __future__ import annotations

import warnings

import numpy as np

from ..errors import DimensionMismatch
from .forest import (ForestConfig, ForestModel, Tree, predict_forest,
                     train_forest)
from .linear import (LinearModel, LogisticConfig, SvmConfig, hinge_objective,
                     hinge_subgradient, logistic_gradient, logistic_loss,
                     predict_linear, train_logistic, train_svm)
from .serialize import (load_model, model_from_dict, model_to_dict,
                        save_model)

MODEL_KINDS = ("logistic", "svm", "rf")

__all__ = [
    "ForestConfig", "ForestModel", "LinearModel", "LogisticConfig",
    "SvmConfig", "Tree", "MODEL_KINDS", "feature_importance",
    "hinge_objective", "hinge_subgradient", "load_model", "logistic_gradient",
    "logistic_loss", "model_from_dict", "model_to_dict", "predict",
    "predict_forest", "predict_linear", "predict_one", "save_model",
    "train_forest", "train_logistic", "train_svm",
]


def predict(model, X) -> tuple[np.ndarray, np.ndarray]:
    """Labels (0/1 int array) and scores in [0, 1] for a feature matrix.

    Raises :class:`DimensionMismatch` when the row width disagrees with the
    model.
    """
    if isinstance(model, LinearModel):
        return predict_linear(model, X)
    if isinstance(model, ForestModel):
        return predict_forest(model, X)
    raise TypeError(f"cannot predict with {type(model).__name__}")


def predict_one(model, x) -> tuple[int, float]:
    """Single-row convenience wrapper around :func:`predict`."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionMismatch(f"expected a 1-d feature row, got shape {x.shape}")
    labels, scores = predict(model, x[None, :])
    return int(labels[0]), float(scores[0])


def feature_importance(model) -> np.ndarray:
    """Per-feature importance vector, non-negative, summing to one.

    Forests report the normalized mean decrease in Gini impurity. Linear
    models report |w_i| / sum_j |w_j|; an all-zero weight vector falls back
    to a uniform vector with a warning.
    """
    if isinstance(model, ForestModel):
        return model.importances.copy()
    if isinstance(model, LinearModel):
        mags = np.abs(model.weights)
        total = mags.sum()
        if total == 0.0:
            warnings.warn("all-zero weights; importances fall back to uniform")
            return np.full(len(mags), 1.0 / len(mags))
        return mags / total
    raise TypeError(f"no importances for {type(model).__name__}")
