"""Multilayer perceptron: ReLU hidden layers, softmax output, plain SGD.

Training minimizes mean softmax cross-entropy. The output error is
``onehot(target) - probabilities``, which for this loss is the negative
gradient w.r.t. the output pre-activations; each weight then moves by
``-lr * dLoss/dv_j * y_i`` where ``y_i`` is the incoming activation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ddos_hybrid import _kernels
from ddos_hybrid.rng import Pcg32

log = logging.getLogger(__name__)


class MlpDivergedError(RuntimeError):
    pass


@dataclass(frozen=True)
class LayerParams:
    weights: np.ndarray  # out x in
    biases: np.ndarray
    activation: str = "relu"

    def __post_init__(self):
        if self.activation not in ("relu", "softmax"):
            raise ValueError(f"unknown activation {self.activation!r}")
        W = np.array(self.weights, dtype=np.float64, order="C")
        b = np.array(self.biases, dtype=np.float64)
        if W.ndim != 2 or b.shape != (W.shape[0],):
            raise ValueError("weights must be out x in with one bias per output")
        W.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "weights", W)
        object.__setattr__(self, "biases", b)


@dataclass(frozen=True)
class MlpConfig:
    hidden: tuple[int, ...] = (100,)
    learning_rate: float = 0.001
    epochs: int = 200
    batch_size: int = 64
    seed: int = 42
    shuffle: bool = True

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if any(h < 1 for h in self.hidden):
            raise ValueError("hidden layer sizes must be >= 1")


@dataclass
class TrainLog:
    loss: list[float] = field(default_factory=list)
    accuracy: list[float] = field(default_factory=list)


@dataclass(frozen=True)
class MlpModel:
    layers: tuple[LayerParams, ...]
    input_dim: int
    n_classes: int
    train_log: TrainLog = field(default_factory=TrainLog, compare=False)

    def __post_init__(self):
        layers = tuple(self.layers)
        object.__setattr__(self, "layers", layers)
        width = self.input_dim
        for i, layer in enumerate(layers):
            if layer.weights.shape[1] != width:
                raise ValueError(f"layer {i} expects {layer.weights.shape[1]} inputs, got {width}")
            last = i == len(layers) - 1
            if (layer.activation == "softmax") != last:
                raise ValueError("softmax must be the final layer and only the final layer")
            width = layer.weights.shape[0]
        if width != self.n_classes:
            raise ValueError("final layer width must equal class count")


@dataclass(frozen=True)
class ForwardCache:
    layers: tuple[LayerParams, ...]
    activations: tuple[np.ndarray, ...]  # input, then each layer's output
    pre_activations: tuple[np.ndarray, ...]


def softmax(z) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def init_mlp(input_dim: int, n_classes: int, hidden=(100,), seed: int = 42, rng: Pcg32 | None = None) -> MlpModel:
    """Uniform [-sqrt(1/fan_in), sqrt(1/fan_in)] weights, zero biases, layer by layer."""
    rng = rng or Pcg32(seed)
    sizes = [input_dim, *hidden, n_classes]
    layers = []
    for i in range(len(sizes) - 1):
        fan_in, fan_out = sizes[i], sizes[i + 1]
        bound = np.sqrt(1.0 / fan_in)
        W = rng.uniform_range(-bound, bound, fan_out * fan_in).reshape(fan_out, fan_in)
        act = "softmax" if i == len(sizes) - 2 else "relu"
        layers.append(LayerParams(W, np.zeros(fan_out), act))
    return MlpModel(tuple(layers), input_dim, n_classes)


def _as_batch(model: MlpModel, x) -> np.ndarray:
    X = np.asarray(x, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != model.input_dim:
        raise ValueError(f"expected input width {model.input_dim}, got shape {np.shape(x)}")
    return X


def forward(model: MlpModel, x) -> tuple[np.ndarray, ForwardCache]:
    """Probabilities for one vector or a batch, plus the cache backward() needs."""
    a = _as_batch(model, x)
    acts, pres = [a], []
    for layer in model.layers:
        v = a @ layer.weights.T + layer.biases
        pres.append(v)
        a = softmax(v) if layer.activation == "softmax" else np.maximum(v, 0.0)
        acts.append(a)
    probs = a[0] if np.ndim(x) == 1 else a
    return probs, ForwardCache(model.layers, tuple(acts), tuple(pres))


def output_error(probs, target, n_classes: int | None = None) -> np.ndarray:
    """onehot(target) - probs, row-wise for batches."""
    p = np.asarray(probs, dtype=np.float64)
    C = p.shape[-1] if n_classes is None else n_classes
    t = np.asarray(target)
    if (t < 0).any() or (t >= C).any():
        raise ValueError(f"class id out of range for {C} classes")
    onehot = np.zeros_like(p)
    if p.ndim == 1:
        onehot[int(t)] = 1.0
    else:
        onehot[np.arange(p.shape[0]), t] = 1.0
    return onehot - p


def backward(model: MlpModel, cache: ForwardCache, error) -> list[tuple[np.ndarray, np.ndarray]]:
    """(dW, db) per layer for the batch-mean cross-entropy.

    ``error`` is output_error(); the loss gradient w.r.t. the final
    pre-activations is ``-error / batch``. ReLU passes gradient only where
    its pre-activation is strictly positive.
    """
    if cache.layers is not model.layers:
        raise ValueError("forward cache was produced by different parameters")
    e = np.asarray(error, dtype=np.float64)
    if e.ndim == 1:
        e = e[None, :]
    B = cache.activations[0].shape[0]
    if e.shape != (B, model.n_classes):
        raise ValueError("error shape does not match cached batch")
    delta = -e / B
    grads = [None] * len(model.layers)
    for i in range(len(model.layers) - 1, -1, -1):
        a_prev = cache.activations[i]
        grads[i] = (delta.T @ a_prev, delta.sum(axis=0))
        if i > 0:
            delta = (delta @ model.layers[i].weights) * (cache.pre_activations[i - 1] > 0)
    return grads


def sgd_step(layers, grads, lr: float) -> tuple[LayerParams, ...]:
    """w <- w - lr * grad for every layer."""
    if len(layers) != len(grads):
        raise ValueError("one gradient pair per layer required")
    out = []
    for layer, (gW, gb) in zip(layers, grads):
        if gW.shape != layer.weights.shape or gb.shape != layer.biases.shape:
            raise ValueError("gradient shape mismatch")
        out.append(LayerParams(layer.weights - lr * gW, layer.biases - lr * gb, layer.activation))
    return tuple(out)


def cross_entropy(probs, y) -> np.ndarray:
    p = probs[np.arange(len(y)), y]
    return -np.log(np.maximum(p, np.finfo(np.float64).tiny))


def fit_mlp(X, y, config: MlpConfig = MlpConfig(), n_classes: int | None = None) -> MlpModel:
    """Mini-batch SGD. One PCG32(seed) stream drives init, then per-epoch shuffles."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.intp)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be n x d with one label per row")
    if n_classes is None:
        n_classes = int(y.max()) + 1
    if np.unique(y).size < 2:
        raise ValueError("need at least 2 classes present")
    n = X.shape[0]
    if n < config.batch_size:
        raise ValueError(f"batch_size {config.batch_size} exceeds row count {n}")
    rng = Pcg32(config.seed)
    model = init_mlp(X.shape[1], n_classes, config.hidden, rng=rng)
    # raw arrays in the loop; same arithmetic as forward/backward/sgd_step
    Ws = [l.weights.copy() for l in model.layers]
    bs = [l.biases.copy() for l in model.layers]
    lr = config.learning_rate
    last = len(Ws) - 1
    tlog = TrainLog()
    order = np.arange(n)
    for epoch in range(config.epochs):
        if config.shuffle:
            order = rng.permutation(n)
        total_loss = 0.0
        correct = 0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            yb = y[idx]
            B = idx.shape[0]
            acts = [X[idx]]
            for i in range(last):
                acts.append(np.maximum(acts[-1] @ Ws[i].T + bs[i], 0.0))
            probs = softmax(acts[-1] @ Ws[last].T + bs[last])
            total_loss += float(cross_entropy(probs, yb).sum())
            correct += int((np.argmax(probs, axis=1) == yb).sum())
            delta = probs
            delta[np.arange(B), yb] -= 1.0
            delta /= B
            for i in range(last, -1, -1):
                gW = delta.T @ acts[i]
                gb = delta.sum(axis=0)
                if i > 0:
                    delta = (delta @ Ws[i]) * (acts[i] > 0)
                Ws[i] -= lr * gW
                bs[i] -= lr * gb
        mean_loss = total_loss / n
        if not np.isfinite(mean_loss) or not all(np.isfinite(W).all() for W in Ws):
            raise MlpDivergedError(
                f"training diverged at epoch {epoch}: mean loss {mean_loss}; lower the learning rate"
            )
        tlog.loss.append(mean_loss)
        tlog.accuracy.append(correct / n)
    layers = tuple(LayerParams(W, b, l.activation) for W, b, l in zip(Ws, bs, model.layers))
    model = MlpModel(layers, model.input_dim, n_classes, tlog)
    log.debug("mlp trained: final loss %.5f, accuracy %.4f", tlog.loss[-1], tlog.accuracy[-1])
    return model


def predict_proba_mlp(model: MlpModel, X) -> np.ndarray:
    """Row-independent inference (sequential dot products, no BLAS batching)."""
    a = np.ascontiguousarray(_as_batch(model, X))
    for layer in model.layers:
        v = _kernels.dense(a, layer.weights, layer.biases)
        a = softmax(v) if layer.activation == "softmax" else np.where(v > 0.0, v, 0.0)
    return a


def predict_mlp(model: MlpModel, X) -> np.ndarray:
    return np.argmax(predict_proba_mlp(model, X), axis=1)
