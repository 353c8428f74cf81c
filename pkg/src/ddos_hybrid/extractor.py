"""Frozen single-layer 1D convolutional feature extractor.

Each flow record is treated as a length-d, single-channel sequence. Every
filter slides over it without padding (cross-correlation, no kernel flip),
passes through ReLU and is averaged over positions, so a record maps to a
vector with one entry per filter.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ddos_hybrid import _kernels
from ddos_hybrid.rng import Pcg32

DEFAULT_FILTERS = 64
DEFAULT_KERNEL_SIZE = 3


@dataclass(frozen=True)
class ConvExtractor:
    weights: np.ndarray  # filters x kernel_size
    biases: np.ndarray
    init_seed: int = 0

    def __post_init__(self):
        W = np.array(self.weights, dtype=np.float64, order="C")
        b = np.array(self.biases, dtype=np.float64)
        if W.ndim != 2 or W.shape[0] < 1 or W.shape[1] < 1:
            raise ValueError("weights must be a non-empty filters x kernel matrix")
        if b.shape != (W.shape[0],):
            raise ValueError("one bias per filter required")
        if not (np.isfinite(W).all() and np.isfinite(b).all()):
            raise ValueError("extractor parameters must be finite")
        W.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "weights", W)
        object.__setattr__(self, "biases", b)

    @property
    def filter_count(self) -> int:
        return self.weights.shape[0]

    @property
    def kernel_size(self) -> int:
        return self.weights.shape[1]


def init_extractor(seed: int = 42, filter_count: int = DEFAULT_FILTERS,
                   kernel_size: int = DEFAULT_KERNEL_SIZE) -> ConvExtractor:
    """Weights uniform in [-sqrt(1/N), sqrt(1/N)] from PCG32(seed), biases zero."""
    if filter_count < 1 or kernel_size < 1:
        raise ValueError("filter_count and kernel_size must be >= 1")
    bound = np.sqrt(1.0 / kernel_size)
    W = Pcg32(seed).uniform_range(-bound, bound, filter_count * kernel_size)
    return ConvExtractor(W.reshape(filter_count, kernel_size), np.zeros(filter_count), seed)


def conv1d_valid(x, w, bias: float = 0.0) -> np.ndarray:
    """y[i] = bias + sum_j x[i + j] * w[j] for i in 0..L-N."""
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    L, N = x.shape[0], w.shape[0]
    if L < N:
        raise ValueError(f"input length {L} shorter than kernel {N}")
    P = L - N + 1
    y = np.full(P, float(bias))
    for j in range(N):
        y += x[j:j + P] * w[j]
    return y


def relu(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return np.where(x < 0.0, 0.0, x)


def global_avg_pool(seqs) -> np.ndarray:
    """Mean of each filter's sequence; input is F sequences (or an F x P array)."""
    out = []
    for s in seqs:
        s = np.asarray(s, dtype=np.float64)
        if s.size == 0:
            raise ValueError("cannot pool an empty sequence")
        out.append(s.mean())
    return np.array(out)


def extract_features(extractor: ConvExtractor, samples) -> np.ndarray:
    """n samples (n x d, or n x 1 x d) -> n x F pooled activations."""
    S = np.asarray(samples, dtype=np.float64)
    if S.ndim == 3:
        if S.shape[1] != 1:
            raise ValueError("extractor expects single-channel sequences")
        S = S.reshape(S.shape[0], S.shape[2])
    if S.ndim != 2:
        raise ValueError("samples must be n x d or n x 1 x d")
    if S.shape[0] == 0:
        return np.empty((0, extractor.filter_count))
    if S.shape[1] < extractor.kernel_size:
        raise ValueError(
            f"sequence length {S.shape[1]} shorter than kernel size {extractor.kernel_size}"
        )
    return _kernels.conv_gap(np.ascontiguousarray(S), extractor.weights, extractor.biases)
