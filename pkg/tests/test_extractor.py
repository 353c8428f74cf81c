import numpy as np
import pytest

from ddos_hybrid.extractor import (
    ConvExtractor,
    conv1d_valid,
    extract_features,
    global_avg_pool,
    init_extractor,
    relu,
)


def triple_loop(X, W, b):
    n, L = X.shape
    F, N = W.shape
    out = np.zeros((n, F))
    for s in range(n):
        for f in range(F):
            acc = 0.0
            for i in range(L - N + 1):
                y = b[f]
                for j in range(N):
                    y += X[s, i + j] * W[f, j]
                acc += max(0.0, y)
            out[s, f] = acc / (L - N + 1)
    return out


def test_conv_examples():
    assert conv1d_valid([3, 1, 4, 1, 5], [1, 0, -1]).tolist() == [-1.0, 0.0, -1.0]
    assert conv1d_valid([1, 1, 1], [1, 1, 1], 0.5).tolist() == [3.5]
    x = [0.3, -2.0, 7.5]
    assert conv1d_valid(x, [1.0]).tolist() == x


def test_conv_length_contract(rng):
    for L in range(3, 12):
        for N in range(1, L + 1):
            assert conv1d_valid(rng.normal(size=L), rng.normal(size=N)).shape == (L - N + 1,)
    with pytest.raises(ValueError):
        conv1d_valid([1, 2], [1, 2, 3])


def test_conv_linearity(rng):
    x, w = rng.normal(size=10), rng.normal(size=3)
    a = 3.7
    assert np.allclose(conv1d_valid(a * x, w), a * conv1d_valid(x, w), rtol=1e-12, atol=0)


def test_relu_and_pool():
    assert relu([-1, 0, 2]).tolist() == [0, 0, 2]
    x = np.array([0.0, 1.5, 3.0])
    assert relu(x).tolist() == x.tolist()
    v = np.random.default_rng(0).normal(size=50)
    assert np.array_equal(relu(relu(v)), relu(v))
    assert global_avg_pool([[2, 4, 6]]).tolist() == [4.0]
    assert global_avg_pool([[1.5] * 4, [2, 4, 6], [1]]).tolist() == [1.5, 4.0, 1.0]
    with pytest.raises(ValueError):
        global_avg_pool([[]])


def test_init_extractor():
    a, b = init_extractor(42, 64, 3), init_extractor(42, 64, 3)
    assert a.weights.shape == (64, 3) and a.biases.shape == (64,)
    assert np.array_equal(a.weights, b.weights)
    assert np.abs(a.weights).max() <= np.sqrt(1 / 3)
    assert not np.array_equal(a.weights, init_extractor(43, 64, 3).weights)
    assert (a.biases == 0).all()


def test_extractor_frozen():
    e = init_extractor(1, 4, 3)
    with pytest.raises(ValueError):
        e.weights[0, 0] = 2.0
    with pytest.raises(Exception):
        e.weights = np.zeros((4, 3))


def test_identity_extractor_is_mean():
    e = ConvExtractor(np.array([[1.0]]), np.array([0.0]), 0)
    v = np.array([[1.0, 2.0, 6.0, 3.0]])
    assert extract_features(e, v)[0, 0] == pytest.approx(3.0)


def test_extract_empty_and_duplicates():
    e = init_extractor(3, 5, 3)
    assert extract_features(e, np.empty((0, 6))).shape == (0, 5)
    X = np.tile(np.arange(6.0), (2, 1))
    out = extract_features(e, X)
    assert np.array_equal(out[0], out[1])


def test_extract_matches_triple_loop(rng):
    for _ in range(50):
        X = rng.normal(size=(5, 8))
        W = rng.normal(size=(2, 3))
        b = rng.normal(size=2)
        got = extract_features(ConvExtractor(W, b, 0), X)
        assert np.abs(got - triple_loop(X, W, b)).max() <= 1e-12
