"""Labeled rows, chronological splitting, and train-fit standardization.

A row pairs the feature vector of minute t with the direction of the first
trade price from t to t+1 within the same ticker-day: Up when P_{t+1} > P_t,
Down when P_{t+1} < P_t. Tie minutes and each day's final bucket yield no
row, and rows whose active features carry any masked metric are excluded;
all drops are counted, not silent.

The 70/15/15 split is chronological by default: within every ticker stream
all training rows precede all validation rows precede all test rows. Split
boundaries are floor(p1*n/100) and floor((p1+p2)*n/100) computed in integer
arithmetic, so n=340 gives 238/51/51 exactly. A shuffled mode exists for
leakage experiments and is never the default. Standardization (per-column
mean and population std) is fit on the training slice only and applied
unchanged to validation and test; a constant training column is an error.
"""

from __future__ import annotations

import enum
import os
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ConstantFeature, DataError, DatasetTooSmall
from .liquidity import (FeatureVector, METRIC_NAMES, compute_feature_vector)
from .sampler import MinuteBucket
from .util import atomic_write_text, canonical_json, config_hash, rng_for

MIN_ROWS = 20
DEFAULT_PERCENTS = (70, 15, 15)


class Label(enum.IntEnum):
    DOWN = 0
    UP = 1


@dataclass(frozen=True, slots=True)
class LabeledRow:
    ticker: str
    minute_start: int
    features: FeatureVector
    label: Label


@dataclass
class LabelReport:
    """Accounting for one labeling pass."""

    labeled: int = 0
    dropped_tie: int = 0
    dropped_no_successor: int = 0
    dropped_masked: int = 0

    def merge(self, other: "LabelReport") -> None:
        self.labeled += other.labeled
        self.dropped_tie += other.dropped_tie
        self.dropped_no_successor += other.dropped_no_successor
        self.dropped_masked += other.dropped_masked


def label_rows(buckets: Sequence[MinuteBucket],
               active_features: Sequence[str] = METRIC_NAMES,
               ) -> tuple[list[LabeledRow], LabelReport]:
    """Label the buckets of one ticker-day.

    Feature vectors chain each bucket to its emitted predecessor. The active
    feature set controls only the masked-row exclusion; the stored vectors
    always carry all metrics.
    """
    report = LabelReport()
    rows: list[LabeledRow] = []
    vectors: list[FeatureVector] = []
    prev: MinuteBucket | None = None
    for b in buckets:
        vectors.append(compute_feature_vector(b, prev))
        prev = b
    last = len(buckets) - 1
    for t, b in enumerate(buckets):
        if t == last:
            report.dropped_no_successor += 1
            continue
        dp = buckets[t + 1].first_trade_price - b.first_trade_price
        if dp == 0.0:
            report.dropped_tie += 1
            continue
        fv = vectors[t]
        if not fv.valid_mask.all_valid(active_features):
            report.dropped_masked += 1
            continue
        rows.append(LabeledRow(b.ticker, b.minute_start, fv,
                               Label.UP if dp > 0 else Label.DOWN))
    report.labeled = len(rows)
    return rows, report


# ---------------------------------------------------------------------------
# splitting and standardization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SplitDataset:
    """Ordered rows with split boundaries and train-fit standardization."""

    rows: tuple[LabeledRow, ...]
    train_end: int
    val_end: int
    feature_names: tuple[str, ...]
    mean: np.ndarray
    std: np.ndarray
    percents: tuple[int, int, int]
    mode: str

    SECTIONS = ("train", "validation", "test")

    def section(self, name: str) -> tuple[LabeledRow, ...]:
        if name == "train":
            return self.rows[:self.train_end]
        if name == "validation":
            return self.rows[self.train_end:self.val_end]
        if name == "test":
            return self.rows[self.val_end:]
        raise ValueError(f"unknown section {name!r}")

    def raw_matrix(self, name: str) -> np.ndarray:
        rows = self.section(name)
        return np.array([[getattr(r.features, f) for f in self.feature_names]
                         for r in rows], dtype=np.float64).reshape(
            len(rows), len(self.feature_names))

    def arrays(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        """Standardized feature matrix and 0/1 label vector for a section."""
        X = (self.raw_matrix(name) - self.mean) / self.std
        y = np.array([int(r.label) for r in self.section(name)], dtype=np.int64)
        return X, y

    def standardization(self) -> dict:
        return {
            "feature_names": list(self.feature_names),
            "mean": [float(v) for v in self.mean],
            "std": [float(v) for v in self.std],
        }

    def standardization_hash(self) -> str:
        return config_hash(self.standardization())


def split_dataset(rows: Sequence[LabeledRow],
                  percents: Sequence[int] = DEFAULT_PERCENTS,
                  mode: str = "chrono",
                  seed: int = 0,
                  feature_names: Sequence[str] = METRIC_NAMES) -> SplitDataset:
    """Split rows 70/15/15 (or as given) and fit standardization on train.

    *percents* must be three positive integers summing to 100; boundaries
    are exact integer floors. ``mode="shuffled"`` permutes rows first with a
    seeded generator and exists only for leakage comparisons.
    """
    p = tuple(int(v) for v in percents)
    if len(p) != 3 or any(v <= 0 for v in p) or sum(p) != 100:
        raise DataError(f"split percents must be three positive integers "
                        f"summing to 100, got {percents}")
    if mode not in ("chrono", "shuffled"):
        raise DataError(f"unknown split mode {mode!r}")
    n = len(rows)
    if n < MIN_ROWS:
        raise DatasetTooSmall(f"{n} labeled rows, need at least {MIN_ROWS}")
    ordered = list(rows)
    if mode == "shuffled":
        perm = rng_for(seed, "split-shuffle").permutation(n)
        ordered = [ordered[i] for i in perm]
    train_end = (p[0] * n) // 100
    val_end = ((p[0] + p[1]) * n) // 100

    names = tuple(feature_names)
    X_train = np.array([[getattr(r.features, f) for f in names]
                        for r in ordered[:train_end]], dtype=np.float64)
    mean = X_train.mean(axis=0)
    std = X_train.std(axis=0)  # population std, ddof=0
    # a constant column must be caught by value equality, not std == 0: the
    # float mean of n identical values can differ from them by an ulp,
    # leaving std tiny but nonzero
    constant = np.all(X_train == X_train[:1], axis=0) | (std == 0.0)
    dead = [names[i] for i in np.nonzero(constant)[0]]
    if dead:
        raise ConstantFeature(f"constant on the training slice: {dead}")
    return SplitDataset(tuple(ordered), train_end, val_end, names,
                        mean, std, p, mode)


# ---------------------------------------------------------------------------
# dumps
# ---------------------------------------------------------------------------

def write_dataset_csv(ds: SplitDataset, path: str | os.PathLike,
                      cfg_hash: str | None = None) -> None:
    """Raw (unstandardized) features with label and split columns."""
    lines = []
    if cfg_hash is not None:
        lines.append(f"# liqlab_config_hash={cfg_hash}")
    lines.append("ticker,minute_start,label,split,"
                 + ",".join(ds.feature_names))
    for sec in ds.SECTIONS:
        for r in ds.section(sec):
            vals = ",".join(repr(getattr(r.features, f))
                            for f in ds.feature_names)
            lines.append(f"{r.ticker},{r.minute_start},"
                         f"{'up' if r.label is Label.UP else 'down'},{sec},{vals}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_standardization_json(ds: SplitDataset, path: str | os.PathLike) -> None:
    payload = {
        "format": "liqlab-standardization",
        "version": 1,
        **ds.standardization(),
        "hash": ds.standardization_hash(),
    }
    atomic_write_text(path, canonical_json(payload) + "\n")


def assemble_rows(per_day_rows: Iterable[list[LabeledRow]]) -> list[LabeledRow]:
    """Concatenate per-day row lists and order ticker-major, time-minor."""
    rows = [r for day in per_day_rows for r in day]
    rows.sort(key=lambda r: (r.ticker, r.minute_start))
    return rows
