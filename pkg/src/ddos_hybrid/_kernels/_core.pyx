# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
# distutils: language = c++
"""Compiled hot kernels. Must stay bitwise identical to ``fallback.py``."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint32_t, uint64_t, int64_t
from libcpp.vector cimport vector
from libcpp.pair cimport pair
from libcpp.algorithm cimport sort

cnp.import_array()

cdef uint64_t PCG_MULT = 6364136223846793005ULL


cdef inline uint32_t _pcg_next(uint64_t* state, uint64_t inc) noexcept nogil:
    cdef uint64_t old = state[0]
    state[0] = old * PCG_MULT + inc
    cdef uint32_t xorshifted = <uint32_t>(((old >> 18) ^ old) >> 27)
    cdef uint32_t rot = <uint32_t>(old >> 59)
    return (xorshifted >> rot) | (xorshifted << ((-rot) & 31))


cdef inline uint32_t _pcg_bounded(uint64_t* state, uint64_t inc, uint32_t bound) noexcept nogil:
    cdef uint32_t threshold = (<uint32_t>(-bound)) % bound
    cdef uint32_t r
    while True:
        r = _pcg_next(state, inc)
        if r >= threshold:
            return r % bound


def pcg32_u32(state, inc, Py_ssize_t n):
    cdef uint64_t s = state, c = inc
    out = np.empty(n, dtype=np.uint32)
    cdef uint32_t[::1] o = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            o[i] = _pcg_next(&s, c)
    return out, int(s)


def pcg32_bounded(state, inc, const uint32_t[::1] bounds):
    cdef uint64_t s = state, c = inc
    cdef Py_ssize_t i, n = bounds.shape[0]
    out = np.empty(n, dtype=np.uint32)
    cdef uint32_t[::1] o = out
    with nogil:
        for i in range(n):
            o[i] = _pcg_bounded(&s, c, bounds[i])
    return out, int(s)


def apply_swaps(cnp.intp_t[::1] perm, const uint32_t[::1] draws):
    cdef Py_ssize_t n = perm.shape[0], t, i, j
    cdef cnp.intp_t tmp
    for t in range(draws.shape[0]):
        i = n - 1 - t
        j = draws[t]
        tmp = perm[i]
        perm[i] = perm[j]
        perm[j] = tmp


cdef inline double _midpoint(double lo, double hi) noexcept nogil:
    cdef double mid = 0.5 * (lo + hi)
    if not (mid < hi):
        mid = lo
    return mid


cdef struct Split:
    Py_ssize_t feature
    double threshold
    double score


cdef Split _best_split(const double[:, ::1] X, const cnp.intp_t[::1] y,
                       cnp.intp_t* rows, Py_ssize_t n,
                       cnp.intp_t* features, Py_ssize_t nf, Py_ssize_t n_classes,
                       int64_t* parent, int64_t* cl, int64_t* cr,
                       vector[pair[double, cnp.intp_t]]& buf) noexcept nogil:
    cdef Split best
    best.feature = -1
    best.threshold = 0.0
    best.score = -1.0
    cdef Py_ssize_t fi, f, i, k, cls
    cdef int64_t a_l, a_r, nl, nr
    cdef double s, thr, lo, hi
    cdef double fbest_score
    cdef Py_ssize_t fbest_i
    cdef int64_t a_parent = 0
    for k in range(n_classes):
        a_parent += parent[k] * parent[k]
    for fi in range(nf):
        f = features[fi]
        buf.clear()
        for i in range(n):
            buf.push_back(pair[double, cnp.intp_t](X[rows[i], f], y[rows[i]]))
        sort(buf.begin(), buf.end())
        for k in range(n_classes):
            cl[k] = 0
            cr[k] = parent[k]
        a_l = 0
        a_r = a_parent
        fbest_i = -1
        fbest_score = -1.0
        for i in range(n - 1):
            cls = buf[i].second
            a_l += 2 * cl[cls] + 1
            cl[cls] += 1
            a_r -= 2 * cr[cls] - 1
            cr[cls] -= 1
            if buf[i].first < buf[i + 1].first:
                nl = i + 1
                nr = n - nl
                s = (<double>(a_l * nr + a_r * nl)) / (<double>(nl * nr))
                if s > fbest_score:
                    fbest_score = s
                    fbest_i = i
        if fbest_i < 0:
            continue
        thr = _midpoint(buf[fbest_i].first, buf[fbest_i + 1].first)
        s = fbest_score
        if s > best.score or (s == best.score and (thr < best.threshold or
                                                   (thr == best.threshold and f < best.feature))):
            best.feature = f
            best.threshold = thr
            best.score = s
    return best


def best_split(const double[:, ::1] X, const cnp.intp_t[::1] y, rows, features, Py_ssize_t n_classes):
    cdef cnp.intp_t[::1] r = np.ascontiguousarray(rows, dtype=np.intp)
    cdef cnp.intp_t[::1] fs = np.ascontiguousarray(features, dtype=np.intp)
    cdef Py_ssize_t n = r.shape[0], i
    if n < 2:
        return None
    cdef int64_t[::1] parent = np.zeros(n_classes, dtype=np.int64)
    cdef int64_t[::1] cl = np.zeros(n_classes, dtype=np.int64)
    cdef int64_t[::1] cr = np.zeros(n_classes, dtype=np.int64)
    cdef vector[pair[double, cnp.intp_t]] buf
    for i in range(n):
        parent[y[r[i]]] += 1
    cdef int64_t a_parent = 0
    for i in range(n_classes):
        a_parent += parent[i] * parent[i]
    cdef double parent_score = (<double>a_parent) / (<double>n)
    cdef Split sp = _best_split(X, y, &r[0], n, &fs[0] if fs.shape[0] else NULL, fs.shape[0],
                                n_classes, &parent[0], &cl[0], &cr[0], buf)
    if sp.feature < 0 or not (sp.score > parent_score):
        return None
    return int(sp.feature), float(sp.threshold), 1.0 - sp.score / n


cdef struct Frame:
    Py_ssize_t start
    Py_ssize_t stop
    Py_ssize_t depth
    Py_ssize_t parent
    bint is_left


def grow_tree(const double[:, ::1] X, const cnp.intp_t[::1] y, rows, Py_ssize_t n_classes,
              Py_ssize_t max_depth, Py_ssize_t min_samples_split, Py_ssize_t m, state, inc):
    cdef uint64_t s = state, c = inc
    cdef Py_ssize_t d = X.shape[1]
    cdef cnp.intp_t[::1] r = np.array(rows, dtype=np.intp, copy=True)
    cdef cnp.intp_t[::1] tmp = np.empty_like(np.asarray(r))
    cdef cnp.intp_t[::1] pool = np.empty(d, dtype=np.intp)
    cdef int64_t[::1] parent = np.zeros(n_classes, dtype=np.int64)
    cdef int64_t[::1] cl = np.zeros(n_classes, dtype=np.int64)
    cdef int64_t[::1] cr = np.zeros(n_classes, dtype=np.int64)
    cdef vector[pair[double, cnp.intp_t]] buf
    cdef vector[Frame] stack
    cdef vector[cnp.intp_t] feature, left, right, value, depth
    cdef vector[double] threshold
    cdef vector[int64_t] counts
    cdef Frame fr, child
    cdef Py_ssize_t nid, n, i, j, k, nonzero, argmax, nleft, nright
    cdef cnp.intp_t t
    cdef Split sp
    cdef double parent_score
    cdef int64_t a_parent

    fr.start = 0
    fr.stop = r.shape[0]
    fr.depth = 0
    fr.parent = -1
    fr.is_left = False
    stack.push_back(fr)
    with nogil:
        while stack.size() > 0:
            fr = stack.back()
            stack.pop_back()
            nid = feature.size()
            if fr.parent >= 0:
                if fr.is_left:
                    left[fr.parent] = nid
                else:
                    right[fr.parent] = nid
            n = fr.stop - fr.start
            for k in range(n_classes):
                parent[k] = 0
            for i in range(fr.start, fr.stop):
                parent[y[r[i]]] += 1
            nonzero = 0
            argmax = 0
            a_parent = 0
            for k in range(n_classes):
                counts.push_back(parent[k])
                a_parent += parent[k] * parent[k]
                if parent[k] > 0:
                    nonzero += 1
                if parent[k] > parent[argmax]:
                    argmax = k
            feature.push_back(-1)
            threshold.push_back(0.0)
            left.push_back(-1)
            right.push_back(-1)
            value.push_back(argmax)
            depth.push_back(fr.depth)
            if ((max_depth >= 0 and fr.depth >= max_depth) or n < min_samples_split
                    or n < 2 or nonzero <= 1):
                continue
            for i in range(d):
                pool[i] = i
            for i in range(m):
                j = i + _pcg_bounded(&s, c, <uint32_t>(d - i))
                t = pool[i]
                pool[i] = pool[j]
                pool[j] = t
            sp = _best_split(X, y, &r[fr.start], n, &pool[0], m, n_classes,
                             &parent[0], &cl[0], &cr[0], buf)
            parent_score = (<double>a_parent) / (<double>n)
            if sp.feature < 0 or not (sp.score > parent_score):
                continue
            feature[nid] = sp.feature
            threshold[nid] = sp.threshold
            # stable partition of r[start:stop] into left/right
            nleft = 0
            nright = 0
            for i in range(fr.start, fr.stop):
                if X[r[i], sp.feature] <= sp.threshold:
                    r[fr.start + nleft] = r[i]
                    nleft += 1
                else:
                    tmp[nright] = r[i]
                    nright += 1
            for i in range(nright):
                r[fr.start + nleft + i] = tmp[i]
            child.depth = fr.depth + 1
            child.parent = nid
            child.start = fr.start + nleft
            child.stop = fr.stop
            child.is_left = False
            stack.push_back(child)
            child.start = fr.start
            child.stop = fr.start + nleft
            child.is_left = True
            stack.push_back(child)

    cdef Py_ssize_t nn = feature.size()
    out = {
        "feature": np.asarray(<cnp.intp_t[:nn]> feature.data(), dtype=np.intp).copy() if nn else np.empty(0, np.intp),
        "threshold": np.asarray(<double[:nn]> threshold.data()).copy(),
        "left": np.asarray(<cnp.intp_t[:nn]> left.data()).copy(),
        "right": np.asarray(<cnp.intp_t[:nn]> right.data()).copy(),
        "value": np.asarray(<cnp.intp_t[:nn]> value.data()).copy(),
        "depth": np.asarray(<cnp.intp_t[:nn]> depth.data()).copy(),
        "counts": np.asarray(<int64_t[:nn * n_classes]> counts.data()).copy().reshape(nn, n_classes),
    }
    return out, int(s)


def forest_votes(const cnp.intp_t[::1] feature, const double[::1] threshold,
                 const cnp.intp_t[::1] left, const cnp.intp_t[::1] right,
                 const cnp.intp_t[::1] value, const cnp.intp_t[::1] roots,
                 const double[:, ::1] X, Py_ssize_t n_classes):
    cdef Py_ssize_t n = X.shape[0], i, t, node
    votes = np.zeros((n, n_classes), dtype=np.int64)
    cdef int64_t[:, ::1] v = votes
    with nogil:
        for i in range(n):
            for t in range(roots.shape[0]):
                node = roots[t]
                while feature[node] >= 0:
                    if X[i, feature[node]] <= threshold[node]:
                        node = left[node]
                    else:
                        node = right[node]
                v[i, value[node]] += 1
    return votes


def conv_gap(const double[:, ::1] X, const double[:, ::1] W, const double[::1] b):
    cdef Py_ssize_t n = X.shape[0], L = X.shape[1], F = W.shape[0], N = W.shape[1]
    cdef Py_ssize_t P = L - N + 1, i, f, p, j
    cdef double y, acc
    out = np.empty((n, F))
    cdef double[:, ::1] o = out
    with nogil:
        for i in range(n):
            for f in range(F):
                acc = 0.0
                for p in range(P):
                    y = b[f]
                    for j in range(N):
                        y += X[i, p + j] * W[f, j]
                    if y < 0.0:
                        y = 0.0
                    acc += y
                o[i, f] = acc / P
    return out


def dense(const double[:, ::1] X, const double[:, ::1] W, const double[::1] b):
    cdef Py_ssize_t n = X.shape[0], J = W.shape[0], K = W.shape[1], i, j, k
    cdef double acc
    out = np.empty((n, J))
    cdef double[:, ::1] o = out
    with nogil:
        for i in range(n):
            for j in range(J):
                acc = b[j]
                for k in range(K):
                    acc += X[i, k] * W[j, k]
                o[i, j] = acc
    return out
