"""Stacked hybrid: conv features -> {random forest, MLP} -> softmax meta-learner."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from functools import partial
from typing import Callable

import numpy as np

from ddos_hybrid import _kernels
from ddos_hybrid.extractor import (
    DEFAULT_FILTERS,
    DEFAULT_KERNEL_SIZE,
    ConvExtractor,
    extract_features,
    init_extractor,
)
from ddos_hybrid.forest import ForestConfig, ForestModel, fit_forest, predict_proba_forest
from ddos_hybrid.ingest import ColumnSpec, FlowTable, LabelCodec
from ddos_hybrid.mlp import MlpConfig, MlpModel, fit_mlp, predict_proba_mlp, softmax
from ddos_hybrid.preprocess import Standardizer, fit_standardizer, reshape_for_conv, stratified_kfold, transform
from ddos_hybrid.rng import Pcg32, derive_seed

log = logging.getLogger(__name__)

# A base trainer fits on (X, y, n_classes, seed) and returns X -> probability rows.
ProbaFn = Callable[[np.ndarray], np.ndarray]
BaseTrainer = Callable[[np.ndarray, np.ndarray, int, int], ProbaFn]

META_BLOCK_ORDER = ("rf", "mlp")


@dataclass(frozen=True)
class StackConfig:
    folds: int = 5
    seed: int = 42
    learning_rate: float = 0.5
    epochs: int = 300
    passthrough: bool = False

    def __post_init__(self):
        if self.folds < 2:
            raise ValueError("stack folds must be >= 2")
        if self.learning_rate <= 0 or self.epochs < 1:
            raise ValueError("meta learning_rate must be > 0 and epochs >= 1")


@dataclass(frozen=True)
class ExtractorConfig:
    filters: int = DEFAULT_FILTERS
    kernel_size: int = DEFAULT_KERNEL_SIZE
    seed: int = 42


@dataclass(frozen=True)
class HybridConfig:
    extractor: ExtractorConfig = field(default_factory=ExtractorConfig)
    forest: ForestConfig = field(default_factory=ForestConfig)
    mlp: MlpConfig = field(default_factory=MlpConfig)
    stack: StackConfig = field(default_factory=StackConfig)


@dataclass(frozen=True)
class MetaLearner:
    """Multinomial logistic regression over concatenated base probabilities."""

    weights: np.ndarray  # C x width
    biases: np.ndarray

    def __post_init__(self):
        W = np.array(self.weights, dtype=np.float64, order="C")
        b = np.array(self.biases, dtype=np.float64)
        if W.ndim != 2 or b.shape != (W.shape[0],):
            raise ValueError("meta weights must be C x width with C biases")
        W.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "weights", W)
        object.__setattr__(self, "biases", b)

    @property
    def n_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def input_width(self) -> int:
        return self.weights.shape[1]

    def predict_proba(self, Z) -> np.ndarray:
        Z = np.ascontiguousarray(Z, dtype=np.float64)
        if Z.ndim != 2 or Z.shape[1] != self.input_width:
            raise ValueError(f"meta-learner expects width {self.input_width}, got {Z.shape}")
        return softmax(_kernels.dense(Z, self.weights, self.biases))


def fit_meta(Z, y, n_classes: int, learning_rate: float = 0.5, epochs: int = 300, seed: int = 42) -> MetaLearner:
    """Full-batch gradient descent on mean cross-entropy from a seeded uniform start."""
    Z = np.asarray(Z, dtype=np.float64)
    y = np.asarray(y, dtype=np.intp)
    n, width = Z.shape
    bound = np.sqrt(1.0 / width)
    W = Pcg32(seed).uniform_range(-bound, bound, n_classes * width).reshape(n_classes, width)
    b = np.zeros(n_classes)
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), y] = 1.0
    for _ in range(epochs):
        P = softmax(Z @ W.T + b)
        G = (P - onehot) / n
        W = W - learning_rate * (G.T @ Z)
        b = b - learning_rate * G.sum(axis=0)
    if not (np.isfinite(W).all() and np.isfinite(b).all()):
        raise FloatingPointError("meta-learner diverged; lower stack.learning_rate")
    return MetaLearner(W, b)


def forest_trainer(config: ForestConfig) -> BaseTrainer:
    def train(X, y, n_classes, seed):
        model = fit_forest(X, y, replace(config, seed=seed), n_classes)
        return partial(predict_proba_forest, model)
    return train


def mlp_trainer(config: MlpConfig) -> BaseTrainer:
    def train(X, y, n_classes, seed):
        model = fit_mlp(X, y, replace(config, seed=seed), n_classes)
        return partial(predict_proba_mlp, model)
    return train


def oof_meta_features(X, y, trainers, k: int = 5, seed: int = 42, n_classes: int | None = None) -> np.ndarray:
    """Out-of-fold base probabilities, one C-wide block per trainer.

    Rows of fold f are filled by models trained on the other k-1 folds with
    seed derive_seed(seed, f, j) for trainer j.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.intp)
    if n_classes is None:
        n_classes = int(y.max()) + 1
    if k > X.shape[0]:
        raise ValueError(f"k={k} exceeds row count {X.shape[0]}")
    folds = stratified_kfold(y, k, seed)
    out = np.full((X.shape[0], n_classes * len(trainers)), np.nan)
    for f, held in enumerate(folds):
        train_idx = np.concatenate([folds[g] for g in range(k) if g != f])
        train_idx.sort()
        for j, trainer in enumerate(trainers):
            proba = trainer(X[train_idx], y[train_idx], n_classes, derive_seed(seed, f, j))
            out[held, j * n_classes:(j + 1) * n_classes] = proba(X[held])
    return out


@dataclass(frozen=True)
class HybridModel:
    standardizer: Standardizer
    extractor: ConvExtractor
    forest: ForestModel
    mlp: MlpModel
    meta: MetaLearner
    codec: LabelCodec
    column_spec: ColumnSpec
    config: HybridConfig = field(default_factory=HybridConfig)
    format_version: int = 1

    def __post_init__(self):
        C = self.codec.n_classes
        if not (self.forest.n_classes == self.mlp.n_classes == self.meta.n_classes == C):
            raise ValueError("sub-models disagree on class count")
        F = self.extractor.filter_count
        if self.forest.n_features != F or self.mlp.input_dim != F:
            raise ValueError("base models must consume the extractor's feature width")
        expected = 2 * C + (F if self.config.stack.passthrough else 0)
        if self.meta.input_width != expected:
            raise ValueError(f"meta-learner width {self.meta.input_width}, expected {expected}")
        if self.standardizer.n_features != len(self.column_spec.feature_columns):
            raise ValueError("standardizer width does not match column spec")

    @property
    def n_features(self) -> int:
        return self.standardizer.n_features

    @property
    def n_classes(self) -> int:
        return self.codec.n_classes

    def standardize(self, rows) -> np.ndarray:
        """Validate raw rows and apply the stored standardizer."""
        X = np.asarray(rows, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} raw features, got shape {np.shape(rows)}")
        if not np.isfinite(X).all():
            raise ValueError("input contains NaN or infinity")
        return transform(self.standardizer, X)

    def conv_features(self, rows) -> np.ndarray:
        return self.conv_from_standardized(self.standardize(rows))

    def conv_from_standardized(self, Z) -> np.ndarray:
        return extract_features(self.extractor, reshape_for_conv(Z, self.extractor.kernel_size))

    def predict_standardized(self, Z) -> tuple[np.ndarray, np.ndarray]:
        conv = self.conv_from_standardized(Z)
        probs = self.meta.predict_proba(self.meta_input(conv))
        return np.argmax(probs, axis=1), probs

    def meta_input(self, conv) -> np.ndarray:
        blocks = [predict_proba_forest(self.forest, conv), predict_proba_mlp(self.mlp, conv)]
        if self.config.stack.passthrough:
            blocks.append(conv)
        return np.hstack(blocks)

    def predict(self, rows) -> np.ndarray:
        return predict_hybrid(self, rows)[0]

    def component_predictions(self, rows) -> dict[str, np.ndarray]:
        """Class ids from the forest alone, the MLP alone, and the stack."""
        conv = self.conv_features(rows)
        pf = predict_proba_forest(self.forest, conv)
        pm = predict_proba_mlp(self.mlp, conv)
        blocks = [pf, pm] + ([conv] if self.config.stack.passthrough else [])
        ph = self.meta.predict_proba(np.hstack(blocks))
        return {"rf": np.argmax(pf, axis=1), "mlp": np.argmax(pm, axis=1), "hybrid": np.argmax(ph, axis=1)}


def predict_hybrid(model: HybridModel, rows) -> tuple[np.ndarray, np.ndarray]:
    """standardize -> conv -> base probas (forest block first) -> meta softmax -> argmax."""
    return model.predict_standardized(model.standardize(rows))


def _conv_pipeline(X, config: ExtractorConfig):
    standardizer = fit_standardizer(X)
    extractor = init_extractor(config.seed, config.filters, config.kernel_size)
    Z = transform(standardizer, X)
    conv = extract_features(extractor, reshape_for_conv(Z, extractor.kernel_size))
    return standardizer, extractor, conv


def _require_classes(table: FlowTable):
    present = np.unique(table.labels)
    if present.size < 2:
        raise ValueError(f"need at least 2 classes to train, found {present.size}")


def fit_hybrid(table: FlowTable, config: HybridConfig = HybridConfig()) -> HybridModel:
    """Fit the full stack on every row of ``table`` (pass the training split)."""
    _require_classes(table)
    C = table.n_classes
    y = table.labels
    standardizer, extractor, conv = _conv_pipeline(table.features, config.extractor)
    trainers = [forest_trainer(config.forest), mlp_trainer(config.mlp)]
    Z = oof_meta_features(conv, y, trainers, config.stack.folds, config.stack.seed, C)
    if config.stack.passthrough:
        Z = np.hstack([Z, conv])
    meta = fit_meta(Z, y, C, config.stack.learning_rate, config.stack.epochs,
                    derive_seed(config.stack.seed, config.stack.folds))
    forest = fit_forest(conv, y, config.forest, C)
    mlp = fit_mlp(conv, y, config.mlp, C)
    log.info("hybrid fitted on %d rows, %d classes", table.n_rows, C)
    return HybridModel(standardizer, extractor, forest, mlp, meta, table.codec, table.column_spec, config)


@dataclass(frozen=True)
class SinglePipeline:
    """Standardizer + extractor + one base learner (the RF-only / MLP-only baselines)."""

    standardizer: Standardizer
    extractor: ConvExtractor
    proba: ProbaFn
    kind: str

    def predict_proba(self, rows) -> np.ndarray:
        Z = transform(self.standardizer, rows)
        return self.proba(extract_features(self.extractor, reshape_for_conv(Z, self.extractor.kernel_size)))

    def predict(self, rows) -> np.ndarray:
        return np.argmax(self.predict_proba(rows), axis=1)


def fit_single(table: FlowTable, kind: str, config: HybridConfig = HybridConfig()) -> SinglePipeline:
    _require_classes(table)
    standardizer, extractor, conv = _conv_pipeline(table.features, config.extractor)
    if kind == "rf":
        proba = partial(predict_proba_forest, fit_forest(conv, table.labels, config.forest, table.n_classes))
    elif kind == "mlp":
        proba = partial(predict_proba_mlp, fit_mlp(conv, table.labels, config.mlp, table.n_classes))
    else:
        raise ValueError(f"unknown base learner {kind!r}")
    return SinglePipeline(standardizer, extractor, proba, kind)


def pipeline_trainer(kind: str, config: HybridConfig = HybridConfig()) -> Callable[[FlowTable], object]:
    """FlowTable -> fitted predictor, for cross-validation of 'rf', 'mlp' or 'hybrid'."""
    if kind == "hybrid":
        return partial(fit_hybrid, config=config)
    return partial(fit_single, kind=kind, config=config)
