# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: SMO for epsilon-SVR and regression-tree growth/prediction.

Arithmetic mirrors ``_pykernels`` operation for operation so both backends
produce the same trees bit for bit and the same SVR solution to rounding.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, INFINITY
from libc.stdint cimport uint64_t, int64_t
from libc.stdlib cimport malloc, free
from libc.string cimport memcpy

cnp.import_array()

cdef double TAU = 1e-12


# --- SVR ---------------------------------------------------------------------------

cdef inline double _kval(const double[:, ::1] X, Py_ssize_t a, Py_ssize_t b, double inv_s2) noexcept nogil:
    cdef Py_ssize_t k
    cdef double d, acc = 0.0
    for k in range(X.shape[1]):
        d = X[a, k] - X[b, k]
        acc += d * d
    return exp(-acc * inv_s2)


cdef class _RowCache:
    """Direct-mapped cache of kernel rows K[r, :] for base indices r < n."""
    cdef double[:, ::1] X
    cdef double inv_s2
    cdef Py_ssize_t n, slots
    cdef double[:, ::1] rows
    cdef double[::1] scratch
    cdef int64_t[::1] tags

    def __cinit__(self, double[:, ::1] X, double inv_s2, Py_ssize_t slots):
        self.X = X
        self.inv_s2 = inv_s2
        self.n = X.shape[0]
        self.slots = max(1, min(slots, self.n))
        self.rows = np.empty((self.slots, self.n))
        self.scratch = np.empty(self.n)
        self.tags = np.full(self.slots, -1, dtype=np.int64)

    cdef double* row(self, Py_ssize_t r, Py_ssize_t keep) noexcept nogil:
        """Row r; never evicts row ``keep`` (computed into scratch instead)."""
        cdef Py_ssize_t s = r % self.slots
        cdef Py_ssize_t k
        if self.tags[s] == r:
            return &self.rows[s, 0]
        if self.tags[s] == keep and keep >= 0:
            for k in range(self.n):
                self.scratch[k] = _kval(self.X, r, k, self.inv_s2)
            return &self.scratch[0]
        for k in range(self.n):
            self.rows[s, k] = _kval(self.X, r, k, self.inv_s2)
        self.tags[s] = r
        return &self.rows[s, 0]


def smo_solve(double[:, ::1] X, double[::1] z, double epsilon, double C, double scale,
              double tol, long long max_iter, Py_ssize_t cache_rows=1024):
    """Solve the epsilon-SVR dual with maximal-violating-pair SMO.

    Returns (alpha of length 2n, gradient, rho, iterations, converged, max_violation).
    """
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t l = 2 * n
    cdef double inv_s2 = 1.0 / (scale * scale)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] alpha_arr = np.zeros(l)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] G_arr = np.empty(l)
    cdef double[::1] alpha = alpha_arr
    cdef double[::1] G = G_arr
    cdef signed char* y = <signed char*> malloc(l * sizeof(signed char))
    cdef _RowCache cache = _RowCache(X, inv_s2, cache_rows)
    cdef Py_ssize_t t, i, j, ri, rj
    cdef double Gmax, Gmin, v, quad, delta, diff, ssum, old_i, old_j, di, dj
    cdef double yi, yj, kij
    cdef double* Ki
    cdef double* Kj
    cdef long long it = 0
    cdef bint converged = False
    cdef double viol = 0.0

    for t in range(n):
        y[t] = 1
        y[t + n] = -1
        G[t] = epsilon - z[t]
        G[t + n] = epsilon + z[t]

    try:
        with nogil:
            while it < max_iter:
                Gmax = -INFINITY
                Gmin = INFINITY
                i = -1
                j = -1
                for t in range(l):
                    v = -y[t] * G[t]
                    if (y[t] == 1 and alpha[t] < C) or (y[t] == -1 and alpha[t] > 0):
                        if v > Gmax:
                            Gmax = v
                            i = t
                    if (y[t] == 1 and alpha[t] > 0) or (y[t] == -1 and alpha[t] < C):
                        if v < Gmin:
                            Gmin = v
                            j = t
                if i < 0 or j < 0:
                    viol = 0.0
                    converged = True
                    break
                viol = Gmax - Gmin
                if viol < tol:
                    converged = True
                    break
                it += 1

                ri = i % n
                rj = j % n
                Ki = cache.row(ri, -1)
                Kj = cache.row(rj, ri)
                kij = Ki[rj]
                yi = y[i]
                yj = y[j]
                old_i = alpha[i]
                old_j = alpha[j]
                if y[i] != y[j]:
                    quad = 2.0 - 2.0 * kij
                    if quad <= 0:
                        quad = TAU
                    delta = (-G[i] - G[j]) / quad
                    diff = alpha[i] - alpha[j]
                    alpha[i] += delta
                    alpha[j] += delta
                    if diff > 0:
                        if alpha[j] < 0:
                            alpha[j] = 0
                            alpha[i] = diff
                    else:
                        if alpha[i] < 0:
                            alpha[i] = 0
                            alpha[j] = -diff
                    if diff > 0:
                        if alpha[i] > C:
                            alpha[i] = C
                            alpha[j] = C - diff
                    else:
                        if alpha[j] > C:
                            alpha[j] = C
                            alpha[i] = C + diff
                else:
                    quad = 2.0 - 2.0 * kij
                    if quad <= 0:
                        quad = TAU
                    delta = (G[i] - G[j]) / quad
                    ssum = alpha[i] + alpha[j]
                    alpha[i] -= delta
                    alpha[j] += delta
                    if ssum > C:
                        if alpha[i] > C:
                            alpha[i] = C
                            alpha[j] = ssum - C
                    else:
                        if alpha[j] < 0:
                            alpha[j] = 0
                            alpha[i] = ssum
                    if ssum > C:
                        if alpha[j] > C:
                            alpha[j] = C
                            alpha[i] = ssum - C
                    else:
                        if alpha[i] < 0:
                            alpha[i] = 0
                            alpha[j] = ssum

                di = (alpha[i] - old_i) * yi
                dj = (alpha[j] - old_j) * yj
                for t in range(n):
                    G[t] += Ki[t] * di + Kj[t] * dj
                    G[t + n] -= Ki[t] * di + Kj[t] * dj
        rho = _calculate_rho(alpha, G, y, C, l)
    finally:
        free(y)
    return alpha_arr, G_arr, rho, int(it), bool(converged), float(viol)


cdef double _calculate_rho(double[::1] alpha, double[::1] G, signed char* y, double C, Py_ssize_t l):
    cdef Py_ssize_t t, nr_free = 0
    cdef double ub = INFINITY, lb = -INFINITY, sum_free = 0.0, yG
    for t in range(l):
        yG = y[t] * G[t]
        if alpha[t] >= C:
            if y[t] == -1:
                ub = min(ub, yG)
            else:
                lb = max(lb, yG)
        elif alpha[t] <= 0:
            if y[t] == 1:
                ub = min(ub, yG)
            else:
                lb = max(lb, yG)
        else:
            nr_free += 1
            sum_free += yG
    if nr_free > 0:
        return sum_free / nr_free
    return (ub + lb) / 2.0


def kernel_matrix(double[:, ::1] A, double[:, ::1] B, double scale):
    cdef Py_ssize_t na = A.shape[0], nb = B.shape[0], p = A.shape[1], a, b, k
    cdef double inv_s2 = 1.0 / (scale * scale), d, acc
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out_arr = np.empty((na, nb))
    cdef double[:, ::1] out = out_arr
    with nogil:
        for a in range(na):
            for b in range(nb):
                acc = 0.0
                for k in range(p):
                    d = A[a, k] - B[b, k]
                    acc += d * d
                out[a, b] = exp(-acc * inv_s2)
    return out_arr


# --- trees -------------------------------------------------------------------------

cdef inline uint64_t _splitmix(uint64_t* state) noexcept nogil:
    state[0] += <uint64_t>0x9E3779B97F4A7C15
    cdef uint64_t x = state[0]
    x = (x ^ (x >> 30)) * <uint64_t>0xBF58476D1CE4E5B9
    x = (x ^ (x >> 27)) * <uint64_t>0x94D049BB133111EB
    return x ^ (x >> 31)


cdef void _stable_sort(int64_t* idx, double* key, Py_ssize_t n, int64_t* tmp_i, double* tmp_k) noexcept nogil:
    """Bottom-up merge sort of idx by key; equal keys keep their order."""
    cdef Py_ssize_t width = 1, lo, mid, hi, a, b, o
    cdef int64_t* src_i = idx
    cdef double* src_k = key
    cdef int64_t* dst_i = tmp_i
    cdef double* dst_k = tmp_k
    cdef int64_t* sw_i
    cdef double* sw_k
    while width < n:
        lo = 0
        while lo < n:
            mid = min(lo + width, n)
            hi = min(lo + 2 * width, n)
            a = lo
            b = mid
            o = lo
            while a < mid and b < hi:
                if src_k[a] <= src_k[b]:
                    dst_i[o] = src_i[a]
                    dst_k[o] = src_k[a]
                    a += 1
                else:
                    dst_i[o] = src_i[b]
                    dst_k[o] = src_k[b]
                    b += 1
                o += 1
            while a < mid:
                dst_i[o] = src_i[a]
                dst_k[o] = src_k[a]
                a += 1
                o += 1
            while b < hi:
                dst_i[o] = src_i[b]
                dst_k[o] = src_k[b]
                b += 1
                o += 1
            lo += 2 * width
        sw_i = src_i
        src_i = dst_i
        dst_i = sw_i
        sw_k = src_k
        src_k = dst_k
        dst_k = sw_k
        width *= 2
    if src_i != idx:
        memcpy(idx, src_i, n * sizeof(int64_t))
        memcpy(key, src_k, n * sizeof(double))


def build_tree(double[:, ::1] X, double[::1] y, int64_t[::1] sample_idx,
               Py_ssize_t min_split, Py_ssize_t min_leaf, Py_ssize_t mtry, uint64_t rng_state):
    """Grow one regression tree on the (bootstrap) rows ``sample_idx``.

    Returns flat node arrays (feature, threshold, left, right, value); leaves
    have feature -1.
    """
    cdef Py_ssize_t n = sample_idx.shape[0], p = X.shape[1]
    cdef Py_ssize_t cap = max(2 * n - 1, 1)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] feat_a = np.full(cap, -1, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] thr_a = np.zeros(cap)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] left_a = np.full(cap, -1, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] right_a = np.full(cap, -1, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] val_a = np.zeros(cap)
    cdef int64_t[::1] feat = feat_a
    cdef int64_t[::1] left = left_a
    cdef int64_t[::1] right = right_a
    cdef double[::1] thr = thr_a
    cdef double[::1] val = val_a

    cdef cnp.ndarray[cnp.int64_t, ndim=1] order_a = np.array(sample_idx, dtype=np.int64)
    cdef int64_t[::1] order = order_a
    cdef int64_t* work_i = <int64_t*> malloc(n * sizeof(int64_t))
    cdef double* work_k = <double*> malloc(n * sizeof(double))
    cdef int64_t* tmp_i = <int64_t*> malloc(n * sizeof(int64_t))
    cdef double* tmp_k = <double*> malloc(n * sizeof(double))
    cdef double* csum = <double*> malloc(n * sizeof(double))
    cdef int64_t* perm = <int64_t*> malloc(p * sizeof(int64_t))
    # stack of (node id, start, end)
    cdef int64_t* stack = <int64_t*> malloc(3 * cap * sizeof(int64_t))
    cdef uint64_t state = rng_state
    cdef Py_ssize_t top = 0, n_nodes = 1, node, start, end, m, k, f, q, r, best_f, best_k
    cdef double s, ymin, ymax, total, sl, sr, proxy, best, xk, xk1, mid
    cdef int64_t tmp

    stack[0] = 0
    stack[1] = 0
    stack[2] = n
    top = 1
    try:
        with nogil:
            while top > 0:
                top -= 1
                node = stack[3 * top]
                start = stack[3 * top + 1]
                end = stack[3 * top + 2]
                m = end - start
                s = 0.0
                ymin = INFINITY
                ymax = -INFINITY
                for k in range(start, end):
                    s += y[order[k]]
                    ymin = min(ymin, y[order[k]])
                    ymax = max(ymax, y[order[k]])
                val[node] = min(max(s / m, ymin), ymax)
                if m < min_split or m < 2 * min_leaf or ymin == ymax:
                    continue

                for q in range(p):
                    perm[q] = q
                for q in range(mtry):
                    r = q + <Py_ssize_t>(_splitmix(&state) % <uint64_t>(p - q))
                    tmp = perm[q]
                    perm[q] = perm[r]
                    perm[r] = tmp

                best = -INFINITY
                best_f = -1
                best_k = -1
                for q in range(mtry):
                    f = perm[q]
                    for k in range(m):
                        work_i[k] = order[start + k]
                        work_k[k] = X[work_i[k], f]
                    _stable_sort(work_i, work_k, m, tmp_i, tmp_k)
                    total = 0.0
                    for k in range(m):
                        total += y[work_i[k]]
                        csum[k] = total
                    for k in range(min_leaf, m - min_leaf + 1):
                        if work_k[k - 1] < work_k[k]:
                            sl = csum[k - 1]
                            sr = total - sl
                            proxy = sl * sl / k + sr * sr / (m - k)
                            if proxy > best:
                                best = proxy
                                best_f = f
                                best_k = k
                if best_f < 0:
                    continue

                for k in range(m):
                    work_i[k] = order[start + k]
                    work_k[k] = X[work_i[k], best_f]
                _stable_sort(work_i, work_k, m, tmp_i, tmp_k)
                for k in range(m):
                    order[start + k] = work_i[k]
                xk1 = work_k[best_k - 1]
                xk = work_k[best_k]
                mid = 0.5 * (xk1 + xk)
                if mid >= xk:
                    mid = xk1
                feat[node] = best_f
                thr[node] = mid
                left[node] = n_nodes
                right[node] = n_nodes + 1
                # right pushed first so the left subtree is grown first
                stack[3 * top] = n_nodes + 1
                stack[3 * top + 1] = start + best_k
                stack[3 * top + 2] = end
                top += 1
                stack[3 * top] = n_nodes
                stack[3 * top + 1] = start
                stack[3 * top + 2] = start + best_k
                top += 1
                n_nodes += 2
    finally:
        free(work_i)
        free(work_k)
        free(tmp_i)
        free(tmp_k)
        free(csum)
        free(perm)
        free(stack)
    return (feat_a[:n_nodes].copy(), thr_a[:n_nodes].copy(), left_a[:n_nodes].copy(),
            right_a[:n_nodes].copy(), val_a[:n_nodes].copy())


def forest_predict(double[:, ::1] X, int64_t[::1] feature, double[::1] threshold, int64_t[::1] left,
                   int64_t[::1] right, double[::1] value, int64_t[::1] roots):
    """Mean leaf value over trees; trees are concatenated node arrays starting at ``roots``."""
    cdef Py_ssize_t n = X.shape[0], T = roots.shape[0], i, t
    cdef int64_t node
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out_a = np.zeros(n)
    cdef double[::1] out = out_a
    with nogil:
        for t in range(T):
            for i in range(n):
                node = roots[t]
                while feature[node] >= 0:
                    if X[i, feature[node]] <= threshold[node]:
                        node = left[node]
                    else:
                        node = right[node]
                out[i] += value[node]
        for i in range(n):
            out[i] /= T
    return out_a
