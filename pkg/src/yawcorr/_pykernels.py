"""Pure-Python twins of the compiled kernels in ``_kernels.pyx``.

Used when the extension is not built, or when ``YAWCORR_BACKEND=python``.
Tree growth reproduces the compiled trees bit for bit: stable sorts,
sequential running sums and the same splitmix64 feature draws.
"""

from __future__ import annotations

import numpy as np

TAU = 1e-12
_MASK = 0xFFFFFFFFFFFFFFFF


def _kernel_rows(X, rows, scale):
    d = X[None, :, :] - X[rows][:, None, :]
    return np.exp(-np.einsum("rnk,rnk->rn", d, d) / (scale * scale))


def smo_solve(X, z, epsilon, C, scale, tol, max_iter, cache_rows=1024):
    X = np.ascontiguousarray(X, dtype=float)
    z = np.asarray(z, dtype=float)
    n = X.shape[0]
    y = np.concatenate([np.ones(n), -np.ones(n)])
    alpha = np.zeros(2 * n)
    G = np.concatenate([epsilon - z, epsilon + z])
    cache: dict[int, np.ndarray] = {}
    it = 0
    converged = False
    viol = 0.0
    while it < max_iter:
        v = -y * G
        up = ((y == 1) & (alpha < C)) | ((y == -1) & (alpha > 0))
        low = ((y == 1) & (alpha > 0)) | ((y == -1) & (alpha < C))
        if not up.any() or not low.any():
            viol = 0.0
            converged = True
            break
        i = int(np.argmax(np.where(up, v, -np.inf)))
        j = int(np.argmin(np.where(low, v, np.inf)))
        viol = float(v[i] - v[j])
        if viol < tol:
            converged = True
            break
        it += 1
        ri, rj = i % n, j % n
        for r, keep in ((ri, -1), (rj, ri)):
            if r not in cache:
                if len(cache) >= cache_rows:
                    # oldest row, but never the partner row of this step
                    cache.pop(next(k for k in cache if k != keep))
                cache[r] = _kernel_rows(X, [r], scale)[0]
        Ki, Kj = cache[ri], cache[rj]
        kij = Ki[rj]
        ai, aj = alpha[i], alpha[j]
        old_i, old_j = ai, aj
        quad = 2.0 - 2.0 * kij
        if quad <= 0:
            quad = TAU
        if y[i] != y[j]:
            delta = (-G[i] - G[j]) / quad
            diff = ai - aj
            ai += delta
            aj += delta
            if diff > 0:
                if aj < 0:
                    aj, ai = 0.0, diff
            else:
                if ai < 0:
                    ai, aj = 0.0, -diff
            if diff > 0:
                if ai > C:
                    ai, aj = C, C - diff
            else:
                if aj > C:
                    aj, ai = C, C + diff
        else:
            delta = (G[i] - G[j]) / quad
            s = ai + aj
            ai -= delta
            aj += delta
            if s > C:
                if ai > C:
                    ai, aj = C, s - C
            else:
                if aj < 0:
                    aj, ai = 0.0, s
            if s > C:
                if aj > C:
                    aj, ai = C, s - C
            else:
                if ai < 0:
                    ai, aj = 0.0, s
        alpha[i], alpha[j] = ai, aj
        di = (ai - old_i) * y[i]
        dj = (aj - old_j) * y[j]
        step = Ki * di + Kj * dj
        G[:n] += step
        G[n:] -= step
    return alpha, G, calculate_rho(alpha, G, y, C), it, converged, viol


def calculate_rho(alpha, G, y, C):
    yG = y * G
    at_ub = alpha >= C
    at_lb = (alpha <= 0) & ~at_ub
    free = ~at_ub & ~at_lb
    if free.any():
        return float(np.add.accumulate(yG[free])[-1] / free.sum())
    ub_set = (at_ub & (y == -1)) | (at_lb & (y == 1))
    lb_set = (at_ub & (y == 1)) | (at_lb & (y == -1))
    ub = yG[ub_set].min() if ub_set.any() else np.inf
    lb = yG[lb_set].max() if lb_set.any() else -np.inf
    return float((ub + lb) / 2.0)


def kernel_matrix(A, B, scale):
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    out = np.empty((A.shape[0], B.shape[0]))
    for a in range(A.shape[0]):
        d = B - A[a]
        out[a] = np.exp(-np.einsum("nk,nk->n", d, d) / (scale * scale))
    return out


def _splitmix(state):
    state = (state + 0x9E3779B97F4A7C15) & _MASK
    x = state
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return state, x ^ (x >> 31)


def build_tree(X, y, sample_idx, min_split, min_leaf, mtry, rng_state):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    order = np.array(sample_idx, dtype=np.int64)
    n, p = order.size, X.shape[1]
    cap = max(2 * n - 1, 1)
    feat = np.full(cap, -1, dtype=np.int64)
    thr = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    val = np.zeros(cap)
    state = int(rng_state) & _MASK
    stack = [(0, 0, n)]
    n_nodes = 1
    while stack:
        node, start, end = stack.pop()
        seg = order[start:end]
        m = end - start
        ys = y[seg]
        ymin, ymax = ys.min(), ys.max()
        val[node] = min(max(np.add.accumulate(ys)[-1] / m, ymin), ymax)
        if m < min_split or m < 2 * min_leaf or ymin == ymax:
            continue

        perm = list(range(p))
        for q in range(mtry):
            state, r = _splitmix(state)
            r = q + r % (p - q)
            perm[q], perm[r] = perm[r], perm[q]

        best, best_f, best_k = -np.inf, -1, -1
        ks = np.arange(min_leaf, m - min_leaf + 1)
        for f in perm[:mtry]:
            xs = X[seg, f]
            srt = np.argsort(xs, kind="stable")
            xk = xs[srt]
            csum = np.add.accumulate(y[seg[srt]])
            total = csum[-1]
            valid = xk[ks - 1] < xk[ks]
            if not valid.any():
                continue
            sl = csum[ks - 1]
            sr = total - sl
            proxy = sl * sl / ks + sr * sr / (m - ks)
            proxy = np.where(valid, proxy, -np.inf)
            k = int(np.argmax(proxy))
            if proxy[k] > best:
                best, best_f, best_k = proxy[k], f, int(ks[k])
        if best_f < 0:
            continue

        xs = X[seg, best_f]
        srt = np.argsort(xs, kind="stable")
        order[start:end] = seg[srt]
        x_lo, x_hi = xs[srt][best_k - 1], xs[srt][best_k]
        mid = 0.5 * (x_lo + x_hi)
        if mid >= x_hi:
            mid = x_lo
        feat[node] = best_f
        thr[node] = mid
        left[node] = n_nodes
        right[node] = n_nodes + 1
        stack.append((n_nodes + 1, start + best_k, end))
        stack.append((n_nodes, start, start + best_k))
        n_nodes += 2
    return (feat[:n_nodes].copy(), thr[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), val[:n_nodes].copy())


def forest_predict(X, feature, threshold, left, right, value, roots):
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    out = np.zeros(n)
    rows = np.arange(n)
    for root in roots:
        node = np.full(n, root, dtype=np.int64)
        active = feature[node] >= 0
        while active.any():
            f = feature[node[active]]
            go_left = X[rows[active], f] <= threshold[node[active]]
            node[active] = np.where(go_left, left[node[active]], right[node[active]])
            active = feature[node] >= 0
        out += value[node]
    return out / len(roots)
