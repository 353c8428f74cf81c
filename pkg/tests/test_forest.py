import numpy as np
import pytest

from ddos_hybrid.forest import (
    ForestConfig,
    best_split,
    fit_forest,
    forest_votes,
    gini,
    majority_vote,
    predict_forest,
    predict_proba_forest,
)
from oracles import brute_best_split, brute_vote, walk_tree


def test_gini_examples():
    assert gini([1.0]) == 0.0
    assert gini([0.5, 0.5]) == 0.5
    assert gini([0.7, 0.2, 0.1]) == pytest.approx(0.46, abs=1e-12)
    with pytest.raises(ValueError):
        gini([0.5, 0.6])


def test_gini_bounds(rng):
    for _ in range(1000):
        C = int(rng.integers(1, 8))
        p = rng.dirichlet(np.ones(C))
        g = gini(p)
        assert -1e-12 <= g <= 1 - 1 / C + 1e-12
    for C in range(1, 6):
        assert gini(np.eye(C)[0]) == 0.0


def test_best_split_examples():
    X = np.array([[1.0], [2.0], [3.0], [4.0]])
    s = best_split(X, [0, 0, 1, 1])
    assert (s.feature, s.threshold, s.impurity) == (0, 2.5, 0.0)
    s = best_split(X, [0, 1, 0, 1])
    assert s.threshold == 1.5
    assert s.impurity == pytest.approx(1 / 3, abs=1e-12)
    assert best_split(X[:3], [0, 0, 0]) is None


def test_best_split_no_improvement():
    # identical feature values: nothing to split on
    assert best_split(np.ones((4, 2)), [0, 1, 0, 1]) is None


def test_best_split_matches_brute_force(rng):
    for _ in range(300):
        n = int(rng.integers(2, 21))
        d = int(rng.integers(1, 4))
        X = rng.integers(0, 5, size=(n, d)).astype(float)
        y = rng.integers(0, 3, size=n)
        got = best_split(X, y, n_classes=3)
        ref = brute_best_split(X, y)
        if ref is None:
            assert got is None
        else:
            assert (got.feature, got.threshold) == (ref[0], ref[1])
            assert got.impurity == pytest.approx(float(ref[2]), abs=1e-12)


def test_hand_traced_tree():
    X = np.array([[1.0], [2.0], [3.0], [4.0]])
    m = fit_forest(X, [0, 0, 1, 1], ForestConfig(tree_count=1, bootstrap=False))
    r = m.roots[0]
    assert m.feature[r] == 0 and m.threshold[r] == 2.5
    assert m.value[m.left[r]] == 0 and m.value[m.right[r]] == 1
    assert m.feature[m.left[r]] == -1 and m.feature[m.right[r]] == -1


def blobs(rng, n=200):
    y = np.arange(n) % 2
    X = rng.normal(size=(n, 4)) + 6.0 * y[:, None]
    return X, y


def test_forest_training_accuracy(rng):
    X, y = blobs(rng)
    m = fit_forest(X, y, ForestConfig(tree_count=15, seed=3))
    assert (predict_forest(m, X) == y).mean() >= 0.99


def test_forest_deterministic(rng):
    X, y = blobs(rng)
    cfg = ForestConfig(tree_count=5, seed=9)
    a, b = fit_forest(X, y, cfg), fit_forest(X, y, cfg)
    for name in ("feature", "threshold", "left", "right", "value", "roots"):
        assert np.array_equal(getattr(a, name), getattr(b, name))
    probe = rng.normal(size=(50, 4)) * 4
    assert np.array_equal(predict_forest(a, probe), predict_forest(b, probe))


def test_depth_limit(rng):
    X = rng.normal(size=(300, 5))
    y = rng.integers(0, 3, size=300)
    for depth in (1, 2, 4):
        m = fit_forest(X, y, ForestConfig(tree_count=4, max_depth=depth))
        assert m.max_tree_depth() <= depth


def test_vote_rules():
    assert majority_vote([[2, 1]]).tolist() == [0]  # A, A, B
    assert majority_vote([[1, 1]]).tolist() == [0]  # tie -> smaller id
    assert majority_vote([[0, 2, 2]]).tolist() == [1]


def test_proba_fractions(rng):
    X, y = blobs(rng, 80)
    m = fit_forest(X, y, ForestConfig(tree_count=4, seed=1))
    P = predict_proba_forest(m, X)
    assert np.allclose(P.sum(axis=1), 1.0)
    assert set(np.unique(P * 4).tolist()) <= {0.0, 1.0, 2.0, 3.0, 4.0}
    assert np.array_equal(np.argmax(P, axis=1), predict_forest(m, X))


def test_votes_against_brute_count(rng):
    for _ in range(20):
        X = rng.normal(size=(60, 3))
        y = rng.integers(0, 3, size=60)
        t = int(rng.integers(1, 6))
        m = fit_forest(X, y, ForestConfig(tree_count=t, seed=int(rng.integers(1000)), max_depth=3), 3)
        probe = rng.normal(size=(40, 3))
        pred = predict_forest(m, probe)
        for i, x in enumerate(probe):
            assert pred[i] == brute_vote([walk_tree(m, k, x) for k in range(t)], 3)


def test_single_tree_equals_traversal(rng):
    X = rng.normal(size=(80, 3))
    y = rng.integers(0, 2, size=80)
    m = fit_forest(X, y, ForestConfig(tree_count=3, seed=5))
    probe = rng.normal(size=(100, 3))
    for t in range(3):
        single = m.tree(t)
        assert single.tree_count == 1
        assert predict_forest(single, probe).tolist() == [walk_tree(m, t, x) for x in probe]


def test_errors(rng):
    X, y = blobs(rng, 20)
    with pytest.raises(ValueError):
        fit_forest(X, np.zeros(20, int))
    with pytest.raises(ValueError):
        fit_forest(X[:1], y[:1])
    with pytest.raises(ValueError):
        ForestConfig(tree_count=0)
    m = fit_forest(X, y, ForestConfig(tree_count=2))
    with pytest.raises(ValueError):
        forest_votes(m, np.ones((2, 3)))
