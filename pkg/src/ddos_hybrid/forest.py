"""Random forest of CART trees split on Gini impurity, combined by majority vote."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from ddos_hybrid import _kernels
from ddos_hybrid.rng import Pcg32, derive_seed


class Split(NamedTuple):
    feature: int
    threshold: float
    impurity: float


@dataclass(frozen=True)
class ForestConfig:
    tree_count: int = 100
    max_depth: int | None = None
    min_samples_split: int = 2
    features_per_split: int | None = None  # None -> ceil(sqrt(d))
    bootstrap: bool = True
    seed: int = 42

    def __post_init__(self):
        if self.tree_count < 1:
            raise ValueError("tree_count must be >= 1")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be >= 1 or None")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if self.features_per_split is not None and self.features_per_split < 1:
            raise ValueError("features_per_split must be >= 1")

    def resolve_m(self, d: int) -> int:
        m = self.features_per_split or math.ceil(math.sqrt(d))
        if m > d:
            raise ValueError(f"features_per_split={m} exceeds feature count {d}")
        return m


@dataclass(frozen=True)
class ForestModel:
    """All trees packed into flat node arrays; ``roots[t]`` is tree t's root.

    Internal nodes have ``feature >= 0`` and route ``x[feature] <= threshold``
    to ``left``. Leaves have ``feature == -1`` and vote for ``value``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    depth: np.ndarray
    counts: np.ndarray
    roots: np.ndarray
    n_classes: int
    n_features: int
    config: ForestConfig = field(default_factory=ForestConfig)

    def __post_init__(self):
        for name, dt in (("feature", np.intp), ("threshold", np.float64), ("left", np.intp),
                         ("right", np.intp), ("value", np.intp), ("depth", np.intp),
                         ("counts", np.int64), ("roots", np.intp)):
            a = np.ascontiguousarray(getattr(self, name), dtype=dt)
            a.flags.writeable = False
            object.__setattr__(self, name, a)

    @property
    def tree_count(self) -> int:
        return self.roots.shape[0]

    def tree(self, t: int) -> "ForestModel":
        """Single-tree forest sharing the node arrays."""
        return replace(self, roots=self.roots[t:t + 1], config=replace(self.config, tree_count=1))

    def max_tree_depth(self) -> int:
        return int(self.depth.max())


def gini(p) -> float:
    """1 - sum p_i^2 for a probability vector."""
    p = np.asarray(p, dtype=np.float64)
    if (p < 0).any() or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("proportions must be non-negative and sum to 1")
    return float(1.0 - np.dot(p, p))


def best_split(X, y, features=None, rows=None, n_classes=None) -> Split | None:
    """Size-weighted-Gini-minimizing split over candidate features, or None.

    Thresholds are midpoints between consecutive distinct values. Ties go to
    the smaller threshold, then the smaller feature index. None when the node
    is pure or no split lowers impurity.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.intp)
    if features is None:
        features = range(X.shape[1])
    if rows is None:
        rows = np.arange(X.shape[0])
    if n_classes is None:
        n_classes = int(y.max()) + 1
    res = _kernels.best_split(X, y, np.asarray(rows, dtype=np.intp),
                              np.asarray(list(features), dtype=np.intp), n_classes)
    return None if res is None else Split(*res)


def _check_xy(X, y):
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.intp)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be n x d with one label per row")
    if X.shape[0] < 2:
        raise ValueError("need at least 2 rows")
    if not np.isfinite(X).all():
        raise ValueError("features must be finite")
    return X, y


def fit_forest(X, y, config: ForestConfig = ForestConfig(), n_classes: int | None = None) -> ForestModel:
    """Grow ``config.tree_count`` trees; tree t uses PCG32(splitmix64(seed + t))."""
    X, y = _check_xy(X, y)
    if n_classes is None:
        n_classes = int(y.max()) + 1
    if y.min() < 0 or y.max() >= n_classes:
        raise ValueError("labels out of range")
    if np.unique(y).size < 2:
        raise ValueError("need at least 2 classes present")
    n, d = X.shape
    m = config.resolve_m(d)
    max_depth = -1 if config.max_depth is None else config.max_depth
    parts = []
    offset = 0
    roots = []
    for t in range(config.tree_count):
        rng = Pcg32(derive_seed(config.seed, t))
        if config.bootstrap:
            rows = rng.bounded_many(np.full(n, n, dtype=np.uint32)).astype(np.intp)
        else:
            rows = np.arange(n, dtype=np.intp)
        arrays, rng.state = _kernels.grow_tree(
            X, y, rows, n_classes, max_depth, config.min_samples_split, m, rng.state, rng.inc
        )
        for key in ("left", "right"):
            a = arrays[key]
            arrays[key] = np.where(a >= 0, a + offset, -1)
        roots.append(offset)
        offset += arrays["feature"].shape[0]
        parts.append(arrays)
    cat = {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}
    return ForestModel(roots=np.array(roots), n_classes=n_classes, n_features=d, config=config, **cat)


def forest_votes(model: ForestModel, X) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ValueError(f"expected {model.n_features} features, got shape {X.shape}")
    return _kernels.forest_votes(model.feature, model.threshold, model.left, model.right,
                                 model.value, model.roots, X, model.n_classes)


def majority_vote(votes) -> np.ndarray:
    """argmax of vote counts per row; ties go to the smallest class id."""
    return np.argmax(np.asarray(votes), axis=1)


def predict_forest(model: ForestModel, X) -> np.ndarray:
    return majority_vote(forest_votes(model, X))


def predict_proba_forest(model: ForestModel, X) -> np.ndarray:
    """Fraction of trees voting for each class."""
    return forest_votes(model, X) / float(model.tree_count)
