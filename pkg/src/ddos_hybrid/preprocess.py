"""Splitting, fold assignment and z-score standardization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ddos_hybrid.rng import Pcg32


@dataclass(frozen=True)
class SplitIndices:
    train_idx: np.ndarray
    test_idx: np.ndarray
    seed: int
    ratio: float


def _check_ratio(ratio):
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"ratio must lie in (0, 1), got {ratio}")


def train_test_split(n: int, ratio: float = 0.8, seed: int = 42) -> SplitIndices:
    """Shuffle 0..n-1 with PCG32(seed); the first floor(ratio*n) go to train."""
    if n < 2:
        raise ValueError(f"need at least 2 rows to split, got {n}")
    _check_ratio(ratio)
    perm = Pcg32(seed).permutation(n)
    n_train = int(np.floor(ratio * n))
    return SplitIndices(perm[:n_train].copy(), perm[n_train:].copy(), seed, ratio)


def stratified_split(labels, ratio: float = 0.8, seed: int = 42) -> SplitIndices:
    """Per-class version of train_test_split: floor(ratio*n_c) of each class to train."""
    y = np.asarray(labels)
    if y.shape[0] < 2:
        raise ValueError("need at least 2 rows to split")
    _check_ratio(ratio)
    rng = Pcg32(seed)
    train, test = [], []
    for c in np.unique(y):
        members = np.flatnonzero(y == c)
        members = members[rng.permutation(members.size)]
        k = int(np.floor(ratio * members.size))
        train.append(members[:k])
        test.append(members[k:])
    return SplitIndices(np.concatenate(train), np.concatenate(test), seed, ratio)


def stratified_kfold(labels, k: int, seed: int) -> list[np.ndarray]:
    """Assign rows to k folds, class by class in id order.

    Members of each class (ascending row index) are shuffled with one PCG32
    stream and dealt round-robin, continuing the deal position across
    classes, so per-class and overall fold sizes differ by at most one.
    Depends only on the label vector, never on feature values.
    """
    y = np.asarray(labels)
    if k < 2:
        raise ValueError("k must be >= 2")
    classes, counts = np.unique(y, return_counts=True)
    if counts.min() < k:
        bad = classes[counts < k].tolist()
        raise ValueError(f"classes {bad} have fewer than k={k} members")
    rng = Pcg32(seed)
    fold_of = np.empty(y.shape[0], dtype=np.intp)
    pos = 0
    for c in classes:
        members = np.flatnonzero(y == c)
        members = members[rng.permutation(members.size)]
        fold_of[members] = (pos + np.arange(members.size)) % k
        pos += members.size
    return [np.flatnonzero(fold_of == f) for f in range(k)]


def plain_kfold(n: int, k: int, seed: int) -> list[np.ndarray]:
    """Unstratified k-fold: shuffled rows dealt round-robin."""
    if k < 2 or k > n:
        raise ValueError(f"need 2 <= k <= n, got k={k}, n={n}")
    perm = Pcg32(seed).permutation(n)
    fold_of = np.empty(n, dtype=np.intp)
    fold_of[perm] = np.arange(n) % k
    return [np.flatnonzero(fold_of == f) for f in range(k)]


@dataclass(frozen=True)
class Standardizer:
    means: np.ndarray
    stds: np.ndarray
    fitted_on: int

    def __post_init__(self):
        for name in ("means", "stds"):
            a = np.array(getattr(self, name), dtype=np.float64)
            a.flags.writeable = False
            object.__setattr__(self, name, a)
        if self.means.shape != self.stds.shape or self.means.ndim != 1:
            raise ValueError("means and stds must be equal-length vectors")
        if (self.stds < 0).any():
            raise ValueError("standard deviations must be non-negative")
        # divisor and zero-variance mask, computed once for the per-record path
        object.__setattr__(self, "_divisor", np.where(self.stds > 0, self.stds, 1.0))
        object.__setattr__(self, "_constant", self.stds == 0)
        object.__setattr__(self, "_any_constant", bool(self._constant.any()))

    @property
    def n_features(self) -> int:
        return self.means.shape[0]

    @property
    def constant_columns(self) -> np.ndarray:
        return np.flatnonzero(self.stds == 0)

    def transform(self, X) -> np.ndarray:
        return transform(self, X)


def fit_standardizer(X) -> Standardizer:
    """Column means and population (divide-by-N) standard deviations."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("cannot fit a standardizer on an empty matrix")
    means = X.mean(axis=0)
    stds = np.sqrt(((X - means) ** 2).mean(axis=0))
    return Standardizer(means, stds, X.shape[0])


def transform(standardizer: Standardizer, X) -> np.ndarray:
    """(x - mean) / std per column; zero-variance columns become 0."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != standardizer.n_features:
        raise ValueError(
            f"expected {standardizer.n_features} columns, got shape {X.shape}"
        )
    Z = (X - standardizer.means) / standardizer._divisor
    if standardizer._any_constant:
        Z[:, standardizer._constant] = 0.0
    return Z


def reshape_for_conv(X, kernel_size: int = 1) -> np.ndarray:
    """n x d matrix -> n x 1 x d single-channel sequences (a view, values untouched)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("expected a 2-D feature matrix")
    if X.shape[1] < kernel_size:
        raise ValueError(f"sequence length {X.shape[1]} shorter than kernel size {kernel_size}")
    return X.reshape(X.shape[0], 1, X.shape[1])


def flatten_from_conv(S) -> np.ndarray:
    S = np.asarray(S)
    if S.ndim != 3 or S.shape[1] != 1:
        raise ValueError("expected n x 1 x d sequences")
    return S.reshape(S.shape[0], S.shape[2])
