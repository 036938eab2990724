"""Random forest: split oracle, voting rules, invariance, determinism."""

from __future__ import annotations

import numpy as np
import pytest

from liqlab.errors import DimensionMismatch
from liqlab.models.forest import (ForestConfig, ForestModel, Tree,
                                  predict_forest, train_forest)
from liqlab.util import rng_for

from oracle_helpers import separable_blobs


def hand_tree():
    """Root split on feature 0 at 0.5; left leaf Down(3:1), right Up(1:4)."""
    return Tree(feature=np.array([0, -1, -1], dtype=np.int32),
                threshold=np.array([0.5, 0.0, 0.0]),
                left=np.array([1, -1, -1], dtype=np.int32),
                right=np.array([2, -1, -1], dtype=np.int32),
                counts=np.array([[4, 5], [3, 1], [1, 4]], dtype=np.int64))


def test_hand_built_tree_votes():
    t = hand_tree()
    X = np.array([[0.4, 9.0], [0.5, -9.0], [0.51, 0.0]])
    assert t.apply(X).tolist() == [1, 1, 2]  # x <= threshold goes left
    assert t.vote(X).tolist() == [0, 0, 1]


def test_leaf_count_tie_votes_down():
    t = Tree(feature=np.array([-1], dtype=np.int32),
             threshold=np.array([0.0]),
             left=np.array([-1], dtype=np.int32),
             right=np.array([-1], dtype=np.int32),
             counts=np.array([[2, 2]], dtype=np.int64))
    assert t.vote(np.array([[1.0]])).tolist() == [0]


def test_forest_vote_recount_oracle():
    # recompute every prediction by walking each tree by hand
    X, y = separable_blobs(n=150, d=4, seed=0, margin=0.1)
    model = train_forest(X, y, ForestConfig(n_trees=15, max_depth=4))
    Xq = rng_for(1, "test-forest-query").normal(size=(40, 4))

    def walk(tree, x):
        node = 0
        while tree.feature[node] >= 0:
            if x[tree.feature[node]] <= tree.threshold[node]:
                node = tree.left[node]
            else:
                node = tree.right[node]
        c = tree.counts[node]
        return 1 if c[1] > c[0] else 0

    labels, scores = predict_forest(model, Xq)
    for i, x in enumerate(Xq):
        votes = sum(walk(t, x) for t in model.trees)
        assert scores[i] == votes / len(model.trees)
        assert labels[i] == (1 if votes / len(model.trees) > 0.5 else 0)


def test_forest_tied_vote_is_down():
    # two stumps voting opposite ways -> score 0.5 -> Down
    up = Tree(feature=np.array([-1], dtype=np.int32), threshold=np.array([0.0]),
              left=np.array([-1], dtype=np.int32),
              right=np.array([-1], dtype=np.int32),
              counts=np.array([[0, 5]], dtype=np.int64))
    down = Tree(feature=np.array([-1], dtype=np.int32),
                threshold=np.array([0.0]),
                left=np.array([-1], dtype=np.int32),
                right=np.array([-1], dtype=np.int32),
                counts=np.array([[5, 0]], dtype=np.int64))
    model = ForestModel([up, down], ForestConfig(n_trees=2), 1,
                        np.array([1.0]))
    labels, scores = predict_forest(model, np.array([[0.0]]))
    assert scores.tolist() == [0.5]
    assert labels.tolist() == [0]


# ---------------------------------------------------------------------------
# split quality
# ---------------------------------------------------------------------------

def test_single_dominant_feature_gets_the_importance():
    rng = rng_for(2, "test-forest")
    n = 400
    X = rng.normal(size=(n, 5))
    y = (X[:, 3] > 0).astype(np.int64)  # label is feature 3's sign
    model = train_forest(X, y, ForestConfig(n_trees=40, max_depth=6))
    assert model.importances.sum() == pytest.approx(1.0, abs=1e-12)
    assert model.importances[3] > 0.8
    assert int(np.argmax(model.importances)) == 3
    labels, _ = predict_forest(model, X)
    assert (labels == y).mean() > 0.97


def test_memorizes_distinct_rows_without_depth_limit():
    rng = rng_for(3, "test-forest")
    X = rng.normal(size=(120, 4))
    y = rng.integers(0, 2, size=120).astype(np.int64)
    model = train_forest(X, y, ForestConfig(
        n_trees=120, max_depth=None, min_samples_leaf=1))
    labels, _ = predict_forest(model, X)
    assert (labels == y).mean() == 1.0


def test_stump_matches_exhaustive_gini_oracle():
    # d=1 and mtry=1 remove feature sampling; depth 1 leaves one split whose
    # threshold must match a brute-force scan over all cut points
    rng = rng_for(4, "test-forest")
    x = np.round(rng.normal(size=31), 1)
    y = (x + 0.3 * rng.normal(size=31) > 0).astype(np.int64)
    X = x[:, None]
    model = train_forest(X, y, ForestConfig(
        n_trees=1, max_depth=1, min_samples_leaf=1, bootstrap=False))
    tree = model.trees[0]
    assert tree.feature[0] == 0

    def gini(labels):
        if len(labels) == 0:
            return 0.0
        p = labels.mean()
        return 1.0 - p * p - (1 - p) * (1 - p)

    xs = np.sort(np.unique(x))
    best_dec, best_thr = -1.0, None
    n = len(x)
    for lo, hi in zip(xs[:-1], xs[1:]):
        thr = 0.5 * (lo + hi)
        if thr >= hi:
            thr = lo
        left, right = y[x <= thr], y[x > thr]
        dec = gini(y) - (len(left) * gini(left) + len(right) * gini(right)) / n
        if dec > best_dec + 1e-15:
            best_dec, best_thr = dec, thr
    assert tree.threshold[0] == pytest.approx(best_thr, abs=0.0)


def test_min_samples_leaf_respected():
    X, y = separable_blobs(n=200, d=3, seed=5, margin=0.05)
    model = train_forest(X, y, ForestConfig(n_trees=10, max_depth=None,
                                            min_samples_leaf=7))
    for tree in model.trees:
        leaf = tree.feature == -1
        sizes = tree.counts[leaf].sum(axis=1)
        assert sizes.min() >= 7


def test_max_depth_respected():
    X, y = separable_blobs(n=300, d=3, seed=6, margin=0.02)
    model = train_forest(X, y, ForestConfig(n_trees=5, max_depth=2,
                                            min_samples_leaf=1))
    for tree in model.trees:
        # depth-2 tree has at most 7 nodes
        assert len(tree.feature) <= 7


def test_pure_node_stops():
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    y = np.array([0, 0, 0, 0])
    with pytest.warns(UserWarning):  # splitless forest also warns
        model = train_forest(X, y, ForestConfig(n_trees=3, min_samples_leaf=1))
    for tree in model.trees:
        assert len(tree.feature) == 1 and tree.feature[0] == -1


# ---------------------------------------------------------------------------
# invariance and determinism
# ---------------------------------------------------------------------------

def serialized(model):
    return [(t.feature.tobytes(), t.threshold.tobytes(), t.left.tobytes(),
             t.right.tobytes(), t.counts.tobytes()) for t in model.trees]


def test_row_permutation_invariance():
    X, y = separable_blobs(n=200, d=4, seed=7, margin=0.05)
    cfg = ForestConfig(n_trees=12, max_depth=6)
    base = train_forest(X, y, cfg)
    perm = rng_for(8, "test-forest-perm").permutation(len(X))
    shuffled = train_forest(X[perm], y[perm], cfg)
    assert serialized(base) == serialized(shuffled)
    assert base.importances.tobytes() == shuffled.importances.tobytes()


def test_training_is_bitwise_deterministic():
    X, y = separable_blobs(n=150, d=4, seed=9, margin=0.05)
    cfg = ForestConfig(n_trees=8)
    assert serialized(train_forest(X, y, cfg)) == \
        serialized(train_forest(X, y, cfg))


def test_seed_changes_forest():
    X, y = separable_blobs(n=150, d=4, seed=10, margin=0.05)
    a = train_forest(X, y, ForestConfig(n_trees=8, seed=1))
    b = train_forest(X, y, ForestConfig(n_trees=8, seed=2))
    assert serialized(a) != serialized(b)


def test_bootstrap_false_uses_all_rows():
    X, y = separable_blobs(n=100, d=3, seed=11, margin=0.1)
    model = train_forest(X, y, ForestConfig(n_trees=2, bootstrap=False,
                                            max_depth=1, max_features=3))
    t0, t1 = model.trees
    # without bootstrap and with full mtry both trees are identical
    assert serialized(model)[0] == serialized(model)[1]
    assert t0.counts[0].sum() == 100


# ---------------------------------------------------------------------------
# guards
# ---------------------------------------------------------------------------

def test_label_and_shape_validation():
    X = np.ones((10, 2))
    with pytest.raises(ValueError):
        train_forest(X, np.full(10, 2))
    with pytest.raises(ValueError):
        train_forest(X, np.zeros(9))
    with pytest.raises(ValueError):
        train_forest(np.ones(10), np.zeros(10))


def test_constant_features_warn_uniform_importance():
    X = np.ones((30, 3))
    y = np.arange(30) % 2
    with pytest.warns(UserWarning, match="no tree produced a split"):
        model = train_forest(X, y, ForestConfig(n_trees=3, bootstrap=False))
    assert model.importances.tolist() == [1 / 3] * 3
    labels, scores = predict_forest(model, np.ones((2, 3)))
    assert labels.tolist() == [0, 0]  # every leaf is the exactly tied root


def test_dimension_mismatch():
    X, y = separable_blobs(n=60, d=3, seed=12)
    model = train_forest(X, y, ForestConfig(n_trees=2))
    with pytest.raises(DimensionMismatch):
        predict_forest(model, np.ones((2, 4)))
