"""Time each hot kernel in the compiled core against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--rows 1600] [--repeat 5]

Both backends must agree bitwise; the script checks that before timing.
"""

import argparse
import time

import numpy as np

from ddos_hybrid._kernels import fallback

try:
    from ddos_hybrid._kernels import _core
except ImportError:  # extension not built
    _core = None

INC = 0xDA3E39CB94B95BDB | 1


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    if isinstance(a, dict):
        return all(np.array_equal(a[k], b[k]) for k in a)
    if isinstance(a, np.ndarray):
        return a.tobytes() == b.tobytes()
    return a == b


def cases(rows, seed):
    g = np.random.default_rng(seed)
    X = g.normal(size=(rows, 64))
    y = g.integers(0, 4, size=rows).astype(np.intp)
    boot = g.integers(0, rows, size=rows).astype(np.intp)
    tree, _ = fallback.grow_tree(X, y, boot, 4, -1, 2, 8, 7, INC)
    roots = np.array([0], dtype=np.intp)
    Xs = g.normal(size=(rows, 20))
    W, b = g.normal(size=(64, 3)), np.zeros(64)
    D, db = g.normal(size=(100, 64)), g.normal(size=100)
    bounds = np.full(rows * 10, rows, dtype=np.uint32)
    return {
        "pcg32_bounded": lambda k: k.pcg32_bounded(7, INC, bounds),
        "best_split (root)": lambda k: k.best_split(X, y, np.arange(rows, dtype=np.intp),
                                                    np.arange(8, dtype=np.intp), 4),
        "grow_tree": lambda k: k.grow_tree(X, y, boot, 4, -1, 2, 8, 7, INC),
        "forest_votes (1 tree)": lambda k: k.forest_votes(tree["feature"], tree["threshold"], tree["left"],
                                                         tree["right"], tree["value"], roots, X, 4),
        "conv_gap": lambda k: k.conv_gap(Xs, W, b),
        "dense": lambda k: k.dense(X, D, db),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=1600)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if _core is None:
        raise SystemExit("compiled core not built; run: pip install -e . --no-build-isolation")
    print(f"{'kernel':<24}{'fallback ms':>13}{'core ms':>10}{'speedup':>9}  parity")
    for name, run in cases(args.rows, args.seed).items():
        tf, of = best_of(lambda: run(fallback), args.repeat)
        tc, oc = best_of(lambda: run(_core), args.repeat)
        print(f"{name:<24}{tf * 1e3:>13.3f}{tc * 1e3:>10.3f}{tf / tc:>8.1f}x  {'ok' if same(of, oc) else 'MISMATCH'}")


if __name__ == "__main__":
    main()
