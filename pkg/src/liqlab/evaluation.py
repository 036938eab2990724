"""Confusion matrices, accuracy, subset selection, and report artifacts.

Matrix orientation: rows are actual, columns are predicted, Up before Down,
so the top-left cell counts correctly predicted Up minutes:

                 predicted Up   predicted Down
    actual Up        up_up          up_down
    actual Down      down_up        down_down

Percent display truncates to two decimals using integer arithmetic
(floor(correct * 10000 / total) basis points), so 32/51 renders as 62.74%.
Stored accuracies are full-precision floats; truncation is presentation
only.

Reports are written three ways: a schema-validated versioned JSON, a CSV
results table (one row per model, all-feature and selected-subset columns),
and one standalone SVG importance chart per model. All three are
byte-deterministic: the SVG is assembled by hand with fixed-format
coordinates rather than through a plotting library.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np
from jsonschema import validate as _js_validate

from .errors import BudgetExceeded, DataError, EmptyMatrix, LengthMismatch
from .models import (ForestConfig, feature_importance, predict,
                     train_forest, train_logistic, train_svm,
                     LogisticConfig, SvmConfig)
from .util import atomic_write_text, canonical_json

EXHAUSTIVE_BUDGET = 200_000


@dataclass(frozen=True)
class ConfusionMatrix:
    up_up: int
    up_down: int
    down_up: int
    down_down: int

    @property
    def total(self) -> int:
        return self.up_up + self.up_down + self.down_up + self.down_down

    @property
    def correct(self) -> int:
        return self.up_up + self.down_down

    def as_lists(self) -> list[list[int]]:
        return [[self.up_up, self.up_down], [self.down_up, self.down_down]]


def confusion(actual: Sequence[int], predicted: Sequence[int]) -> ConfusionMatrix:
    """Tally a confusion matrix from 0/1 (Down/Up) label sequences."""
    a = np.asarray(actual)
    p = np.asarray(predicted)
    if a.shape != p.shape or a.ndim != 1:
        raise LengthMismatch(
            f"actual has shape {a.shape}, predicted has shape {p.shape}")
    a = a.astype(bool)
    p = p.astype(bool)
    return ConfusionMatrix(
        up_up=int((a & p).sum()),
        up_down=int((a & ~p).sum()),
        down_up=int((~a & p).sum()),
        down_down=int((~a & ~p).sum()))


def accuracy(cm: ConfusionMatrix) -> float:
    if cm.total == 0:
        raise EmptyMatrix("accuracy of an empty confusion matrix")
    return cm.correct / cm.total


def accuracy_percent(cm: ConfusionMatrix) -> str:
    """Two-decimal percent string, truncated (never rounded up)."""
    if cm.total == 0:
        raise EmptyMatrix("accuracy of an empty confusion matrix")
    basis_points = (cm.correct * 10000) // cm.total
    return f"{basis_points // 100}.{basis_points % 100:02d}%"


# ---------------------------------------------------------------------------
# training dispatch used by selection and the CLI
# ---------------------------------------------------------------------------

def fit_model(kind: str, config, X: np.ndarray, y01: np.ndarray):
    """Train one model kind on 0/1 labels, handling the SVM's +-1 encoding."""
    if kind == "logistic":
        return train_logistic(X, y01, config)
    if kind == "svm":
        return train_svm(X, 2 * y01.astype(np.float64) - 1.0, config)
    if kind == "rf":
        return train_forest(X, y01, config)
    raise ValueError(f"unknown model kind {kind!r}")


def default_config(kind: str, seed: int = 0):
    if kind == "logistic":
        return LogisticConfig(seed=seed)
    if kind == "svm":
        return SvmConfig(seed=seed)
    if kind == "rf":
        return ForestConfig(seed=seed)
    raise ValueError(f"unknown model kind {kind!r}")


# ---------------------------------------------------------------------------
# feature subset selection
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SelectionStrategy:
    kind: str            # "forward" | "topk" | "exhaustive"
    k: int | None = None

    @staticmethod
    def parse(text: str) -> "SelectionStrategy":
        if text == "forward":
            return SelectionStrategy("forward")
        for prefix in ("topk", "exhaustive"):
            if text.startswith(prefix + ":"):
                try:
                    k = int(text[len(prefix) + 1:])
                except ValueError:
                    raise DataError(f"bad subset size in strategy {text!r}")
                if k < 1:
                    raise DataError(f"subset size must be >= 1 in {text!r}")
                return SelectionStrategy(prefix, k)
        raise DataError(
            f"unknown selection strategy {text!r}; "
            f"expected forward, topk:<k>, or exhaustive:<k>")

    def describe(self) -> str:
        return self.kind if self.k is None else f"{self.kind}:{self.k}"


@dataclass
class SubsetResult:
    features: tuple[int, ...]          # column indices, ascending
    validation_accuracy: float
    strategy: str
    trace: tuple[tuple[tuple[int, ...], float], ...] = ()


def _subset_accuracy(kind: str, config, X_tr, y_tr, X_va, y_va,
                     cols: Sequence[int]) -> float:
    cols = list(cols)
    model = fit_model(kind, config, X_tr[:, cols], y_tr)
    labels, _ = predict(model, X_va[:, cols])
    return accuracy(confusion(y_va, labels))


def select_subset(kind: str, config,
                  X_train: np.ndarray, y_train: np.ndarray,
                  X_val: np.ndarray, y_val: np.ndarray,
                  strategy: SelectionStrategy) -> SubsetResult:
    """Search feature subsets on train/validation only; test stays untouched.

    forward: grow greedily from empty, adding the single feature with the
    best validation accuracy; stop when no addition strictly improves. The
    accepted-accuracy sequence is strictly increasing by construction.

    topk:<k>: rank features by the importance of a model trained on all
    features, keep the top k, train once on that subset.

    exhaustive:<k>: evaluate every non-empty subset of size <= k in
    lexicographic order; raises :class:`BudgetExceeded` when more than
    200,000 candidates would be enumerated, before evaluating any.

    All ties resolve to the earliest candidate in enumeration order.
    """
    d = X_train.shape[1]
    evaluate = lambda cols: _subset_accuracy(
        kind, config, X_train, y_train, X_val, y_val, cols)

    if strategy.kind == "forward":
        selected: list[int] = []
        best_acc = -1.0
        trace = []
        while len(selected) < d:
            step_best: tuple[float, int] | None = None
            for f in range(d):
                if f in selected:
                    continue
                acc = evaluate(selected + [f])
                if step_best is None or acc > step_best[0]:
                    step_best = (acc, f)
            if step_best is None or step_best[0] <= best_acc:
                break
            best_acc = step_best[0]
            selected.append(step_best[1])
            trace.append((tuple(sorted(selected)), best_acc))
        if not selected:
            # nothing improved on the empty baseline; fall back to the
            # single best feature so the result is always usable
            selected = [0]
            best_acc = evaluate(selected)
            trace = [(tuple(selected), best_acc)]
        return SubsetResult(tuple(sorted(selected)), best_acc,
                            strategy.describe(), tuple(trace))

    if strategy.kind == "topk":
        k = min(strategy.k, d)
        full = fit_model(kind, config, X_train, y_train)
        imp = feature_importance(full)
        ranked = sorted(range(d), key=lambda i: (-imp[i], i))
        cols = tuple(sorted(ranked[:k]))
        acc = evaluate(cols)
        return SubsetResult(cols, acc, strategy.describe(), ((cols, acc),))

    if strategy.kind == "exhaustive":
        k = min(strategy.k, d)
        count = sum(math.comb(d, size) for size in range(1, k + 1))
        if count > EXHAUSTIVE_BUDGET:
            raise BudgetExceeded(
                f"exhaustive search over {count} subsets exceeds the "
                f"{EXHAUSTIVE_BUDGET} budget")
        best: tuple[float, tuple[int, ...]] | None = None
        for size in range(1, k + 1):
            for cols in itertools.combinations(range(d), size):
                acc = evaluate(cols)
                if best is None or acc > best[0]:
                    best = (acc, cols)
        return SubsetResult(best[1], best[0], strategy.describe(),
                            ((best[1], best[0]),))

    raise DataError(f"unknown selection strategy {strategy.kind!r}")


# ---------------------------------------------------------------------------
# report artifacts
# ---------------------------------------------------------------------------

@dataclass
class EvalSide:
    """One evaluated configuration: all features, or a selected subset."""

    confusion: ConfusionMatrix
    feature_names: tuple[str, ...]

    @property
    def accuracy(self) -> float:
        return accuracy(self.confusion)

    @property
    def percent(self) -> str:
        return accuracy_percent(self.confusion)


@dataclass
class ModelReport:
    kind: str
    all_features: EvalSide
    importances: Mapping[str, float]
    seed: int
    subset: EvalSide | None = None
    validation_accuracy: float | None = None
    strategy: str | None = None


REPORT_FORMAT = "liqlab-report"
REPORT_VERSION = 1

_side_schema = {
    "type": "object",
    "required": ["confusion", "accuracy", "accuracy_percent", "features"],
    "properties": {
        "confusion": {
            "type": "array", "minItems": 2, "maxItems": 2,
            "items": {"type": "array", "minItems": 2, "maxItems": 2,
                      "items": {"type": "integer", "minimum": 0}},
        },
        "accuracy": {"type": "number", "minimum": 0, "maximum": 1},
        "accuracy_percent": {"type": "string", "pattern": r"^\d+\.\d\d%$"},
        "features": {"type": "array", "items": {"type": "string"}},
    },
}

REPORT_SCHEMA = {
    "type": "object",
    "required": ["format", "version", "config", "config_hash",
                 "feature_names", "models"],
    "properties": {
        "format": {"const": REPORT_FORMAT},
        "version": {"const": REPORT_VERSION},
        "config": {"type": ["object", "null"]},
        "config_hash": {"type": ["string", "null"]},
        "feature_names": {"type": "array", "items": {"type": "string"}},
        "models": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["model", "seed", "all_features", "importances"],
                "properties": {
                    "model": {"enum": ["logistic", "svm", "rf"]},
                    "seed": {"type": "integer"},
                    "all_features": _side_schema,
                    "subset": {"anyOf": [_side_schema, {"type": "null"}]},
                    "validation_accuracy": {"type": ["number", "null"]},
                    "strategy": {"type": ["string", "null"]},
                    "importances": {
                        "type": "object",
                        "additionalProperties": {"type": "number"},
                    },
                },
            },
        },
    },
}


def _side_dict(side: EvalSide) -> dict:
    return {
        "confusion": side.confusion.as_lists(),
        "accuracy": side.accuracy,
        "accuracy_percent": side.percent,
        "features": list(side.feature_names),
    }


def report_dict(reports: Sequence[ModelReport],
                feature_names: Sequence[str],
                config: dict | None,
                cfg_hash: str | None) -> dict:
    payload = {
        "format": REPORT_FORMAT,
        "version": REPORT_VERSION,
        "config": config,
        "config_hash": cfg_hash,
        "feature_names": list(feature_names),
        "models": [{
            "model": r.kind,
            "seed": r.seed,
            "all_features": _side_dict(r.all_features),
            "subset": _side_dict(r.subset) if r.subset else None,
            "validation_accuracy": r.validation_accuracy,
            "strategy": r.strategy,
            "importances": {k: float(v) for k, v in r.importances.items()},
        } for r in reports],
    }
    _js_validate(payload, REPORT_SCHEMA)
    return payload


def _matrix_cell(cm: ConfusionMatrix) -> str:
    return f"[[{cm.up_up}, {cm.up_down}], [{cm.down_up}, {cm.down_down}]]"


def results_table_csv(reports: Sequence[ModelReport]) -> str:
    """One row per model: all-feature and subset matrices with accuracies."""
    lines = ["model,confusion_all,accuracy_all,subset,confusion_subset,accuracy_subset"]
    for r in reports:
        if r.subset is not None:
            subset_names = " ".join(r.subset.feature_names)
            sub_cm = f"\"{_matrix_cell(r.subset.confusion)}\""
            sub_acc = r.subset.percent
        else:
            subset_names = sub_cm = sub_acc = ""
        lines.append(
            f"{r.kind},\"{_matrix_cell(r.all_features.confusion)}\","
            f"{r.all_features.percent},{subset_names},{sub_cm},{sub_acc}")
    return "\n".join(lines) + "\n"


# hand-rolled SVG: plotting libraries do not promise byte-stable output
_SVG_W, _SVG_H = 720, 400
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 60, 20, 40, 120


def importance_svg(importances: Mapping[str, float], title: str) -> str:
    items = sorted(importances.items(), key=lambda kv: (-kv[1], kv[0]))
    plot_w = _SVG_W - _MARGIN_L - _MARGIN_R
    plot_h = _SVG_H - _MARGIN_T - _MARGIN_B
    top = max((v for _, v in items), default=0.0)
    n = max(len(items), 1)
    slot = plot_w / n
    bar_w = slot * 0.7
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SVG_W}" '
        f'height="{_SVG_H}" viewBox="0 0 {_SVG_W} {_SVG_H}">',
        f'<rect width="{_SVG_W}" height="{_SVG_H}" fill="white"/>',
        f'<text x="{_SVG_W / 2:.2f}" y="24" text-anchor="middle" '
        f'font-family="monospace" font-size="16">{title}</text>',
        f'<line x1="{_MARGIN_L}" y1="{_MARGIN_T + plot_h}" '
        f'x2="{_SVG_W - _MARGIN_R}" y2="{_MARGIN_T + plot_h}" stroke="black"/>',
    ]
    for i, (name, value) in enumerate(items):
        h = 0.0 if top <= 0 else (value / top) * plot_h
        x = _MARGIN_L + i * slot + (slot - bar_w) / 2
        y = _MARGIN_T + plot_h - h
        cx = x + bar_w / 2
        ty = _MARGIN_T + plot_h + 8
        parts.append(f'<rect x="{x:.2f}" y="{y:.2f}" width="{bar_w:.2f}" '
                     f'height="{h:.2f}" fill="#4878a8"/>')
        parts.append(f'<text x="{cx:.2f}" y="{ty:.2f}" text-anchor="end" '
                     f'font-family="monospace" font-size="11" '
                     f'transform="rotate(-60 {cx:.2f} {ty:.2f})">{name}</text>')
        parts.append(f'<text x="{cx:.2f}" y="{y - 4:.2f}" text-anchor="middle" '
                     f'font-family="monospace" font-size="10">{value:.4f}</text>')
    parts.append('</svg>')
    return "\n".join(parts) + "\n"


def render_report(out_dir: str | os.PathLike,
                  reports: Sequence[ModelReport],
                  feature_names: Sequence[str],
                  config: dict | None = None,
                  cfg_hash: str | None = None) -> dict[str, str]:
    """Write report.json, results_table.csv, and per-model importance SVGs.

    Returns {artifact name: path}. The JSON is validated against
    REPORT_SCHEMA before writing.
    """
    out_dir = os.fspath(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    payload = report_dict(reports, feature_names, config, cfg_hash)
    written = {}
    path = os.path.join(out_dir, "report.json")
    atomic_write_text(path, canonical_json(payload) + "\n")
    written["report.json"] = path
    path = os.path.join(out_dir, "results_table.csv")
    atomic_write_text(path, results_table_csv(reports))
    written["results_table.csv"] = path
    for r in reports:
        name = f"importance_{r.kind}.svg"
        path = os.path.join(out_dir, name)
        atomic_write_text(path, importance_svg(
            r.importances, f"feature importance ({r.kind})"))
        written[name] = path
    return written
