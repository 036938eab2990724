"""Random forest of CART trees with Gini splits, built on numpy.

Trees are grown on bootstrap resamples; every node draws a fresh random
feature subset (ceil(sqrt(d)) by default) and scans all midpoint thresholds
between consecutive distinct values of each candidate, keeping the split
with the largest Gini decrease. Ties break toward the earlier candidate
feature and the lowest threshold. Nodes stop at max_depth, below
2 * min_samples_leaf samples, on purity, or when no split improves.

Determinism: tree i draws from PCG64 seeded by
SeedSequence(entropy=seed, spawn_key=(code("forest"), i)). Before any
bootstrapping the training rows are put into a canonical lexicographic
order (feature columns, then label), so permuting the caller's row order
changes nothing whatsoever: per-tree samples, the grown trees, and the
importances are identical.

Feature importance is the normalized mean decrease in Gini impurity: each
tree's decreases are weighted by node sample share and normalized to sum to
one, then averaged across trees and renormalized. A forest that never
splits falls back to a uniform vector with a warning.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatch
from ..util import derive_seed


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 200
    max_depth: int | None = 12
    min_samples_leaf: int = 5
    max_features: int | None = None   # None -> ceil(sqrt(d))
    bootstrap: bool = True
    seed: int = 0

    def to_dict(self) -> dict:
        return {"n_trees": self.n_trees, "max_depth": self.max_depth,
                "min_samples_leaf": self.min_samples_leaf,
                "max_features": self.max_features,
                "bootstrap": self.bootstrap, "seed": self.seed}


@dataclass
class Tree:
    """Flat node arrays; feature == -1 marks a leaf."""

    feature: np.ndarray     # int32
    threshold: np.ndarray   # float64
    left: np.ndarray        # int32
    right: np.ndarray       # int32
    counts: np.ndarray      # (n_nodes, 2) int64, [down, up] training counts

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index for every row."""
        node = np.zeros(len(X), dtype=np.int32)
        while True:
            feat = self.feature[node]
            internal = feat >= 0
            if not internal.any():
                return node
            rows = np.nonzero(internal)[0]
            f = feat[rows]
            go_left = X[rows, f] <= self.threshold[node[rows]]
            node[rows] = np.where(go_left,
                                  self.left[node[rows]],
                                  self.right[node[rows]])

    def vote(self, X: np.ndarray) -> np.ndarray:
        """Per-row 0/1 majority vote; leaf count ties go Down."""
        leaves = self.apply(X)
        c = self.counts[leaves]
        return (c[:, 1] > c[:, 0]).astype(np.int64)


@dataclass
class ForestModel:
    trees: list[Tree]
    config: ForestConfig
    n_features: int
    importances: np.ndarray   # sums to 1

    @property
    def kind(self) -> str:
        return "rf"


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

def _gini(n_up: float, n: float) -> float:
    p = n_up / n
    return 1.0 - (p * p + (1.0 - p) * (1.0 - p))


def _best_split(Xc: np.ndarray, yc: np.ndarray, idx: np.ndarray,
                feats: np.ndarray, msl: int, g_parent: float):
    """Best (feature, threshold, gini decrease) over candidate features.

    Vectorized over all cut positions of all candidate columns at once.
    Returns None when no cut with positive decrease and legal leaf sizes
    exists.
    """
    n = len(idx)
    A = Xc[np.ix_(idx, feats)]
    order = np.argsort(A, axis=0, kind="stable")
    xs = np.take_along_axis(A, order, axis=0)
    ys = yc[idx][order]
    c1 = np.cumsum(ys, axis=0, dtype=np.float64)
    tot1 = float(c1[-1, 0])

    nl = np.arange(1, n, dtype=np.float64)[:, None]
    nr = n - nl
    c1l = c1[:-1, :]
    c1r = tot1 - c1l
    pl = c1l / nl
    pr = c1r / nr
    gl = 1.0 - (pl * pl + (1.0 - pl) * (1.0 - pl))
    gr = 1.0 - (pr * pr + (1.0 - pr) * (1.0 - pr))
    dec = g_parent - (nl * gl + nr * gr) / n
    valid = (xs[1:] != xs[:-1]) & (nl >= msl) & (nr >= msl)
    dec = np.where(valid, dec, -np.inf)

    # first maximum in column-major order: earlier candidate feature wins
    # ties, then the lowest threshold within a feature
    flat = dec.T.ravel()
    k = int(np.argmax(flat))
    best = flat[k]
    if not best > 0.0:
        return None
    col, row = divmod(k, n - 1)
    lo = xs[row, col]
    hi = xs[row + 1, col]
    thr = 0.5 * (lo + hi)
    if thr >= hi:   # midpoint collapsed onto the upper value
        thr = lo
    return int(feats[col]), float(thr), float(best)


def _grow_tree(Xc: np.ndarray, yc: np.ndarray, sample: np.ndarray,
               config: ForestConfig, mtry: int,
               rng: np.random.Generator,
               importance_out: np.ndarray) -> Tree:
    d = Xc.shape[1]
    n_root = len(sample)
    max_depth = math.inf if config.max_depth is None else config.max_depth
    msl = config.min_samples_leaf

    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    counts: list[tuple[int, int]] = []

    def new_node() -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        counts.append((0, 0))
        return len(feature) - 1

    root = new_node()
    stack = [(sample, 0, root)]
    while stack:
        idx, depth, slot = stack.pop()
        n = len(idx)
        ups = int(yc[idx].sum())
        counts[slot] = (n - ups, ups)
        if depth >= max_depth or n < 2 * msl or ups == 0 or ups == n:
            continue
        g_parent = _gini(ups, n)
        feats = rng.choice(d, size=mtry, replace=False)
        found = _best_split(Xc, yc, idx, feats, msl, g_parent)
        if found is None:
            continue
        f, thr, dec = found
        go_left = Xc[idx, f] <= thr
        left_idx = idx[go_left]
        right_idx = idx[~go_left]
        importance_out[f] += n * dec / n_root
        feature[slot] = f
        threshold[slot] = thr
        left_slot = new_node()
        right_slot = new_node()
        left[slot] = left_slot
        right[slot] = right_slot
        # right first so the left child is processed (and numbered) next
        stack.append((right_idx, depth + 1, right_slot))
        stack.append((left_idx, depth + 1, left_slot))
    return Tree(np.array(feature, dtype=np.int32),
                np.array(threshold, dtype=np.float64),
                np.array(left, dtype=np.int32),
                np.array(right, dtype=np.int32),
                np.array(counts, dtype=np.int64))


def train_forest(X: np.ndarray, y: np.ndarray,
                 config: ForestConfig = ForestConfig()) -> ForestModel:
    """Grow the forest. Row order of (X, y) is irrelevant by construction."""
    X = np.ascontiguousarray(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("X must be 2-d with one label per row")
    bad = set(np.unique(y)) - {0, 1}
    if bad:
        raise ValueError(f"labels must be 0/1, found {sorted(bad)}")
    n, d = X.shape
    # canonical row order: sort by feature columns then label, so that any
    # permutation of the input rows yields the identical forest
    order = np.lexsort((y,) + tuple(X[:, j] for j in range(d - 1, -1, -1)))
    Xc = np.ascontiguousarray(X[order])
    yc = y[order]

    mtry = config.max_features or math.ceil(math.sqrt(d))
    mtry = min(mtry, d)
    trees: list[Tree] = []
    imp_sum = np.zeros(d)
    contributing = 0
    for i in range(config.n_trees):
        rng = np.random.Generator(np.random.PCG64(
            derive_seed(config.seed, "forest", i)))
        if config.bootstrap:
            sample = np.sort(rng.integers(0, n, size=n))
        else:
            sample = np.arange(n)
        tree_imp = np.zeros(d)
        trees.append(_grow_tree(Xc, yc, sample, config, mtry, rng, tree_imp))
        total = tree_imp.sum()
        if total > 0:
            imp_sum += tree_imp / total
            contributing += 1
    if contributing:
        importances = imp_sum / imp_sum.sum()
    else:
        warnings.warn("no tree produced a split; importances fall back to uniform")
        importances = np.full(d, 1.0 / d)
    return ForestModel(trees, config, d, importances)


def predict_forest(model: ForestModel, X: np.ndarray
                   ) -> tuple[np.ndarray, np.ndarray]:
    """Labels (0/1) and vote-share scores. A tied vote (score 0.5) is Down."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.n_features:
        raise DimensionMismatch(
            f"model expects {model.n_features} features, row has {X.shape[1]}")
    votes = np.zeros(len(X), dtype=np.int64)
    for tree in model.trees:
        votes += tree.vote(X)
    scores = votes / len(model.trees)
    return (scores > 0.5).astype(np.int64), scores
