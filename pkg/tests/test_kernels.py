import numpy as np
import pytest

from ddos_hybrid import _kernels
from ddos_hybrid._kernels import fallback

core = pytest.importorskip("ddos_hybrid._kernels._core")


def test_backend_selected():
    assert _kernels.BACKEND in ("cython", "python")


def test_rng_parity():
    state, inc = 0x853C49E6748FEA9B, 0xDA3E39CB94B95BDB
    a = core.pcg32_u32(state, inc, 100)
    b = fallback.pcg32_u32(state, inc, 100)
    assert np.array_equal(a[0], b[0]) and a[1] == b[1]
    bounds = np.arange(1, 101, dtype=np.uint32)
    a = core.pcg32_bounded(state, inc, bounds)
    b = fallback.pcg32_bounded(state, inc, bounds)
    assert np.array_equal(a[0], b[0]) and a[1] == b[1]


def test_conv_dense_parity(rng):
    X = rng.normal(size=(37, 11))
    W = rng.normal(size=(5, 3))
    bias = rng.normal(size=5)
    assert core.conv_gap(X, W, bias).tobytes() == fallback.conv_gap(X, W, bias).tobytes()
    W2 = rng.normal(size=(7, 11))
    b2 = rng.normal(size=7)
    assert core.dense(X, W2, b2).tobytes() == fallback.dense(X, W2, b2).tobytes()


def test_best_split_parity(rng):
    for _ in range(100):
        n = int(rng.integers(2, 30))
        X = rng.integers(0, 4, size=(n, 3)).astype(float)
        y = rng.integers(0, 3, size=n).astype(np.intp)
        rows = np.arange(n, dtype=np.intp)
        feats = np.arange(3, dtype=np.intp)
        assert core.best_split(X, y, rows, feats, 3) == fallback.best_split(X, y, rows, feats, 3)


def test_tree_and_vote_parity(rng):
    X = rng.normal(size=(200, 6))
    y = rng.integers(0, 3, size=200).astype(np.intp)
    rows = rng.integers(0, 200, size=200).astype(np.intp)
    args = (X, y, rows, 3, -1, 2, 3, 12345, 0xDA3E39CB94B95BDB | 1)
    ta, sa = core.grow_tree(*args)
    tb, sb = fallback.grow_tree(*args)
    assert sa == sb
    for key in ta:
        assert np.array_equal(ta[key], tb[key]), key
    roots = np.array([0], dtype=np.intp)
    probe = rng.normal(size=(50, 6))
    va = core.forest_votes(ta["feature"], ta["threshold"], ta["left"], ta["right"], ta["value"], roots, probe, 3)
    vb = fallback.forest_votes(tb["feature"], tb["threshold"], tb["left"], tb["right"], tb["value"], roots, probe, 3)
    assert np.array_equal(va, vb)


_FIT = """
import hashlib
from ddos_hybrid import store, _kernels
from ddos_hybrid.hybrid import fit_hybrid
from ddos_hybrid.synth import blob_table
from conftest import SMALL
print(_kernels.BACKEND, hashlib.sha256(store.dumps(fit_hybrid(blob_table(n=300, d=8, n_classes=3, seed=11), SMALL))).hexdigest())
"""


def test_pure_backend_gives_identical_model(small_model):
    import hashlib
    import os
    import subprocess
    import sys
    from pathlib import Path

    env = dict(os.environ, DDOS_HYBRID_PURE="1")
    r = subprocess.run([sys.executable, "-c", _FIT], env=env, capture_output=True, text=True,
                       cwd=Path(__file__).parent, timeout=600)
    assert r.returncode == 0, r.stderr
    backend, digest = r.stdout.split()
    assert backend == "python"
    from ddos_hybrid import store
    assert digest == hashlib.sha256(store.dumps(small_model)).hexdigest()
