"""Pure numpy implementations of the hot kernels.

Every function here has a twin in ``_core.pyx`` that must return bitwise
identical results. Floating point sums are therefore written as explicit
sequential accumulations (no BLAS, no pairwise reductions) wherever the
compiled twin loops.
"""

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF
_MULT = 6364136223846793005


def _pcg_next(state, inc):
    old = state
    state = (old * _MULT + inc) & _MASK64
    xorshifted = (((old >> 18) ^ old) >> 27) & 0xFFFFFFFF
    rot = old >> 59
    return ((xorshifted >> rot) | (xorshifted << ((-rot) & 31))) & 0xFFFFFFFF, state


def _pcg_bounded(state, inc, bound):
    threshold = ((1 << 32) - bound) % bound
    while True:
        r, state = _pcg_next(state, inc)
        if r >= threshold:
            return r % bound, state


def pcg32_u32(state, inc, n):
    out = np.empty(n, dtype=np.uint32)
    for i in range(n):
        out[i], state = _pcg_next(state, inc)
    return out, state


def pcg32_bounded(state, inc, bounds):
    out = np.empty(len(bounds), dtype=np.uint32)
    for i, b in enumerate(bounds.tolist()):
        out[i], state = _pcg_bounded(state, inc, b)
    return out, state


def apply_swaps(perm, draws):
    n = perm.shape[0]
    for t, j in enumerate(draws.tolist()):
        i = n - 1 - t
        perm[i], perm[j] = perm[j], perm[i]


def _midpoint(lo, hi):
    mid = 0.5 * (lo + hi)
    if not (mid < hi):
        mid = lo
    return mid


def best_split(X, y, rows, features, n_classes):
    """Best (feature, threshold, weighted gini) over ``features`` or None.

    Candidate thresholds are midpoints between consecutive distinct values.
    A split's score is sum_l^2/n_l + sum_r^2/n_r (class-count squares),
    evaluated as one division of exact integers so that equal rationals
    compare equal. Ties: smaller threshold, then smaller feature index.
    """
    rows = np.asarray(rows, dtype=np.intp)
    n = rows.shape[0]
    if n < 2:
        return None
    yr = y[rows]
    parent = np.bincount(yr, minlength=n_classes).astype(np.int64)
    parent_score = float(np.dot(parent, parent)) / float(n)
    nl = np.arange(1, n, dtype=np.int64)
    nr = n - nl
    den = (nl * nr).astype(np.float64)
    eye = np.eye(n_classes, dtype=np.int64)
    best_f, best_thr, best_score = -1, 0.0, -np.inf
    for f in features:
        f = int(f)
        v = X[rows, f]
        order = np.argsort(v, kind="stable")
        vs = v[order]
        pos = np.flatnonzero(vs[:-1] < vs[1:])
        if pos.size == 0:
            continue
        cl = np.cumsum(eye[yr[order]], axis=0)[:-1]
        cr = parent - cl
        a_l = np.einsum("ij,ij->i", cl, cl)
        a_r = np.einsum("ij,ij->i", cr, cr)
        score = (a_l * nr + a_r * nl).astype(np.float64) / den
        i = int(pos[np.argmax(score[pos])])
        s = float(score[i])
        thr = _midpoint(float(vs[i]), float(vs[i + 1]))
        if s > best_score or (
            s == best_score and (thr < best_thr or (thr == best_thr and f < best_f))
        ):
            best_f, best_thr, best_score = f, thr, s
    if best_f < 0 or not (best_score > parent_score):
        return None
    return best_f, best_thr, 1.0 - best_score / n


def grow_tree(X, y, rows, n_classes, max_depth, min_samples_split, m, state, inc):
    """Grow one CART tree depth-first (preorder, left child first).

    ``max_depth`` < 0 means unbounded. At each splittable node a fresh
    identity pool of feature indices is partially Fisher-Yates shuffled to
    pick ``m`` candidates. Returns (arrays dict, new rng state).
    """
    d = X.shape[1]
    feature, threshold, left, right, value, depth, counts = [], [], [], [], [], [], []
    stack = [(np.asarray(rows, dtype=np.intp), 0, -1, False)]
    while stack:
        node_rows, node_depth, parent, is_left = stack.pop()
        nid = len(feature)
        if parent >= 0:
            if is_left:
                left[parent] = nid
            else:
                right[parent] = nid
        c = np.bincount(y[node_rows], minlength=n_classes).astype(np.int64)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(int(np.argmax(c)))
        depth.append(node_depth)
        counts.append(c)
        n = node_rows.shape[0]
        if (
            (max_depth >= 0 and node_depth >= max_depth)
            or n < min_samples_split
            or n < 2
            or np.count_nonzero(c) <= 1
        ):
            continue
        pool = list(range(d))
        for i in range(m):
            j, state = _pcg_bounded(state, inc, d - i)
            j += i
            pool[i], pool[j] = pool[j], pool[i]
        split = best_split(X, y, node_rows, pool[:m], n_classes)
        if split is None:
            continue
        f, thr, _ = split
        feature[nid] = f
        threshold[nid] = thr
        go_left = X[node_rows, f] <= thr
        stack.append((node_rows[~go_left], node_depth + 1, nid, False))
        stack.append((node_rows[go_left], node_depth + 1, nid, True))
    arrays = {
        "feature": np.asarray(feature, dtype=np.intp),
        "threshold": np.asarray(threshold, dtype=np.float64),
        "left": np.asarray(left, dtype=np.intp),
        "right": np.asarray(right, dtype=np.intp),
        "value": np.asarray(value, dtype=np.intp),
        "depth": np.asarray(depth, dtype=np.intp),
        "counts": np.asarray(counts, dtype=np.int64).reshape(len(feature), n_classes),
    }
    return arrays, state


def forest_votes(feature, threshold, left, right, value, roots, X, n_classes):
    """Per-row vote counts over the trees rooted at ``roots`` (n x C int64)."""
    n = X.shape[0]
    votes = np.zeros((n, n_classes), dtype=np.int64)
    ar = np.arange(n)
    for root in roots:
        node = np.full(n, root, dtype=np.intp)
        active = feature[node] >= 0
        while active.any():
            idx = ar[active]
            nd = node[idx]
            go_left = X[idx, feature[nd]] <= threshold[nd]
            node[idx] = np.where(go_left, left[nd], right[nd])
            active = feature[node] >= 0
        np.add.at(votes, (ar, value[node]), 1)
    return votes


def conv_gap(X, W, b):
    """Valid 1D cross-correlation + ReLU + global average pool, per row.

    out[r, f] = mean_p relu(b[f] + sum_j X[r, p + j] * W[f, j])
    """
    n, L = X.shape
    F, N = W.shape
    P = L - N + 1
    Y = np.empty((n, P, F))
    Y[...] = b
    for j in range(N):
        Y += X[:, j:j + P, None] * W[:, j]
    Y = np.where(Y < 0.0, 0.0, Y)
    acc = np.zeros((n, F))
    for p in range(P):
        acc += Y[:, p, :]
    return acc / P


def dense(X, W, b):
    """out[i, j] = b[j] + sum_k X[i, k] * W[j, k], summed in k order."""
    n = X.shape[0]
    out = np.empty((n, W.shape[0]))
    out[...] = b
    for k in range(W.shape[1]):
        out += X[:, k:k + 1] * W[:, k]
    return out
