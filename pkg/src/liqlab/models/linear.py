"""Linear classifiers: full-batch logistic regression and a Pegasos SVM.

Both trainers consume a standardized feature matrix and return a
:class:`LinearModel` holding weights, bias, and the recorded per-epoch
objective trace. Training is deterministic given the config: weights start
at zero unless ``init_scale`` > 0, in which case they are drawn once from a
seeded generator.

Logistic regression minimizes the L2-regularized mean negative
log-likelihood by fixed-step full-batch gradient descent; the bias is not
regularized. Labels are 0/1 (Down/Up).

The SVM minimizes the standard hinge objective
0.5 * lam * ||w||^2 + mean(max(0, 1 - y * (Xw + b))) with labels in
{-1, +1}, using per-sample subgradient steps on a step schedule
eta_t = 1 / (lam * t) where t counts every update since the start of
training. Each epoch visits the samples in a fresh permutation drawn from
one generator seeded at the start of training.
Prediction scores for the SVM are min-max calibrated from the training
margins (clipped to [0, 1]); the sign of the margin decides the label.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatch, NonFiniteLoss
from ..util import rng_for


@dataclass(frozen=True)
class LogisticConfig:
    learning_rate: float = 0.1
    epochs: int = 500
    l2: float = 1e-3
    seed: int = 0
    init_scale: float = 0.0   # 0 -> zero init; else N(0, init_scale) weights

    def to_dict(self) -> dict:
        return {"learning_rate": self.learning_rate, "epochs": self.epochs,
                "l2": self.l2, "seed": self.seed, "init_scale": self.init_scale}


@dataclass(frozen=True)
class SvmConfig:
    lam: float = 1e-2         # L2 weight, also sets the step schedule
    epochs: int = 200
    seed: int = 0
    init_scale: float = 0.0

    def to_dict(self) -> dict:
        return {"lam": self.lam, "epochs": self.epochs,
                "seed": self.seed, "init_scale": self.init_scale}


@dataclass
class LinearModel:
    kind: str                    # "logistic" | "svm"
    weights: np.ndarray
    bias: float
    config: LogisticConfig | SvmConfig
    objective_trace: tuple[float, ...]
    margin_low: float = 0.0      # svm score calibration, from training margins
    margin_high: float = 0.0

    @property
    def n_features(self) -> int:
        return self.weights.shape[0]


# ---------------------------------------------------------------------------
# logistic regression
# ---------------------------------------------------------------------------

def _check_labels(y: np.ndarray, allowed: tuple[int, int]) -> None:
    bad = set(np.unique(y)) - set(allowed)
    if bad:
        raise ValueError(f"labels must lie in {allowed}, found {sorted(bad)}")


def logistic_loss(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray,
                  l2: float) -> float:
    """Mean NLL plus 0.5 * l2 * ||w||^2 (bias unregularized), overflow-safe."""
    with np.errstate(over="ignore"):  # divergence surfaces as inf, by design
        z = X @ w + b
        # log(1 + exp(z)) - y*z, computed as logaddexp(0, z) - y*z
        nll = np.mean(np.logaddexp(0.0, z) - y * z)
        return float(nll + 0.5 * l2 * (w @ w))


def logistic_gradient(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray,
                      l2: float) -> tuple[np.ndarray, float]:
    with np.errstate(over="ignore"):  # exp(-z) saturating to inf gives p = 0
        z = X @ w + b
        p = 1.0 / (1.0 + np.exp(-z))
    resid = p - y
    grad_w = X.T @ resid / len(y) + l2 * w
    grad_b = float(resid.mean())
    return grad_w, grad_b


def train_logistic(X: np.ndarray, y: np.ndarray,
                   config: LogisticConfig = LogisticConfig()) -> LinearModel:
    """Fixed-step full-batch gradient descent on the regularized NLL."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_labels(y, (0, 1))
    n, d = X.shape
    if config.init_scale > 0:
        w = rng_for(config.seed, "logistic-init").normal(
            0.0, config.init_scale, size=d)
    else:
        w = np.zeros(d)
    b = 0.0
    trace = []
    for _ in range(config.epochs):
        grad_w, grad_b = logistic_gradient(w, b, X, y, config.l2)
        w = w - config.learning_rate * grad_w
        b = b - config.learning_rate * grad_b
        loss = logistic_loss(w, b, X, y, config.l2)
        if not np.isfinite(loss):
            raise NonFiniteLoss(f"logistic loss diverged to {loss}")
        trace.append(loss)
    return LinearModel("logistic", w, b, config, tuple(trace))


# ---------------------------------------------------------------------------
# support vector machine
# ---------------------------------------------------------------------------

def hinge_objective(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray,
                    lam: float) -> float:
    margins = y * (X @ w + b)
    return float(0.5 * lam * (w @ w) + np.mean(np.maximum(0.0, 1.0 - margins)))


def hinge_subgradient(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray,
                      lam: float) -> tuple[np.ndarray, float]:
    """Full-batch subgradient of the hinge objective (for checks)."""
    margins = y * (X @ w + b)
    active = margins < 1.0
    n = len(y)
    grad_w = lam * w - (X[active].T @ y[active]) / n
    grad_b = -float(y[active].sum()) / n
    return grad_w, grad_b


def train_svm(X: np.ndarray, y: np.ndarray,
              config: SvmConfig = SvmConfig()) -> LinearModel:
    """Per-sample subgradient descent with the 1/(lam*t) step schedule."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_labels(y, (-1, 1))
    n, d = X.shape
    if config.init_scale > 0:
        w = rng_for(config.seed, "svm-init").normal(
            0.0, config.init_scale, size=d)
    else:
        w = np.zeros(d)
    b = 0.0
    lam = config.lam
    rng = rng_for(config.seed, "svm-shuffle")
    t = 0
    trace = []
    for _ in range(config.epochs):
        for i in rng.permutation(n):
            t += 1
            eta = 1.0 / (lam * t)
            xi = X[i]
            if y[i] * (xi @ w + b) < 1.0:
                w = (1.0 - eta * lam) * w + eta * y[i] * xi
                b = b + eta * y[i]
            else:
                w = (1.0 - eta * lam) * w
        obj = hinge_objective(w, b, X, y, lam)
        if not np.isfinite(obj):
            raise NonFiniteLoss(f"svm objective diverged to {obj}")
        trace.append(obj)
    margins = X @ w + b
    return LinearModel("svm", w, b, config, tuple(trace),
                       margin_low=float(margins.min()),
                       margin_high=float(margins.max()))


# ---------------------------------------------------------------------------
# prediction
# ---------------------------------------------------------------------------

def predict_linear(model: LinearModel, X: np.ndarray
                   ) -> tuple[np.ndarray, np.ndarray]:
    """Labels (0/1) and scores in [0, 1] for a standardized matrix."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.n_features:
        raise DimensionMismatch(
            f"model expects {model.n_features} features, row has {X.shape[1]}")
    raw = X @ model.weights + model.bias
    if model.kind == "logistic":
        with np.errstate(over="ignore"):  # saturated sigmoid is a clean 0
            scores = 1.0 / (1.0 + np.exp(-raw))
        labels = (scores > 0.5).astype(np.int64)  # 0.5 exactly -> Down
    else:
        span = model.margin_high - model.margin_low
        if span > 0:
            scores = np.clip((raw - model.margin_low) / span, 0.0, 1.0)
        else:
            scores = np.full(len(raw), 0.5)
        labels = (raw > 0.0).astype(np.int64)     # zero margin -> Down
    return labels, scores
