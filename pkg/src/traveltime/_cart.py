"""Compiled kernels for regression-tree growth and prediction.

Trees are stored as parallel arrays indexed by node id (node 0 is the root):
``feature`` is -1 for leaves, ``left``/``right`` are child ids (-1 for leaves),
``gain`` is the sum-of-squared-errors decrease achieved by a split.
"""

import numpy as np
from numba import njit

LEAF = -1


@njit(cache=True, nogil=True)
def _node_stats(y, idx, start, end):
    n = end - start
    s = 0.0
    lo = y[idx[start]]
    hi = lo
    for i in range(start, end):
        v = y[idx[i]]
        s += v
        if v < lo:
            lo = v
        if v > hi:
            hi = v
    mean = s / n
    sse = 0.0
    for i in range(start, end):
        d = y[idx[i]] - mean
        sse += d * d
    return mean, sse, lo == hi


@njit(cache=True, nogil=True)
def grow_tree(X, y, max_depth, min_samples_split, max_features, feature_keys):
    """Grow one variance-reduction tree on rows ``X``/``y``.

    ``feature_keys`` holds one row of random sort keys per potential node id;
    when ``max_features`` is below the column count, a node considers the
    ``max_features`` columns with the smallest keys. Pass an empty (0, F)
    array when every feature is used.
    """
    n, n_feat = X.shape
    cap = 2 * n + 1
    feature = np.full(cap, LEAF, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, LEAF, dtype=np.int64)
    right = np.full(cap, LEAF, dtype=np.int64)
    value = np.zeros(cap)
    n_samples = np.zeros(cap, dtype=np.int64)
    gain = np.zeros(cap)

    idx = np.arange(n)
    buf = np.empty(n, dtype=np.int64)
    xs = np.empty(n)
    ys = np.empty(n)

    # (node id, start, end, depth)
    stack = np.empty((cap, 4), dtype=np.int64)
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = n
    stack[0, 3] = 0
    top = 1
    n_nodes = 1

    candidates = np.arange(n_feat)
    subsample = max_features < n_feat

    while top > 0:
        top -= 1
        node = stack[top, 0]
        start = stack[top, 1]
        end = stack[top, 2]
        depth = stack[top, 3]
        m = end - start

        mean, sse, constant = _node_stats(y, idx, start, end)
        value[node] = mean
        n_samples[node] = m
        if depth >= max_depth or m < min_samples_split or constant:
            continue

        if subsample:
            order = np.argsort(feature_keys[node], kind="mergesort")
            candidates = np.sort(order[:max_features])

        # a candidate must beat the incumbent by more than tol; exact ties
        # therefore keep the lowest feature, then the lowest threshold
        tol = 1e-12 * sse
        best_crit = sse
        best_f = -1
        best_t = 0.0
        for f in candidates:
            for i in range(m):
                r = idx[start + i]
                xs[i] = X[r, f]
                ys[i] = y[r] - mean
            order = np.argsort(xs[:m], kind="mergesort")
            tot_s = 0.0
            tot_q = 0.0
            for i in range(m):
                tot_s += ys[i]
                tot_q += ys[i] * ys[i]
            ls = 0.0
            lq = 0.0
            for i in range(m - 1):
                v = ys[order[i]]
                ls += v
                lq += v * v
                a = xs[order[i]]
                b = xs[order[i + 1]]
                if not a < b:
                    continue
                nl = i + 1
                nr = m - nl
                rs = tot_s - ls
                rq = tot_q - lq
                crit = (lq - ls * ls / nl) + (rq - rs * rs / nr)
                if crit < best_crit - tol:
                    best_crit = crit
                    best_f = f
                    t = 0.5 * (a + b)
                    if not t < b:
                        t = a
                    best_t = t
        if best_f < 0:
            continue

        # stable partition: rows with x <= t go left
        nl = 0
        nr = 0
        for i in range(start, end):
            r = idx[i]
            if X[r, best_f] <= best_t:
                idx[start + nl] = r
                nl += 1
            else:
                buf[nr] = r
                nr += 1
        for i in range(nr):
            idx[start + nl + i] = buf[i]

        lid = n_nodes
        rid = n_nodes + 1
        n_nodes += 2
        feature[node] = best_f
        threshold[node] = best_t
        left[node] = lid
        right[node] = rid

        _, sse_l, _ = _node_stats(y, idx, start, start + nl)
        _, sse_r, _ = _node_stats(y, idx, start + nl, end)
        gain[node] = sse - sse_l - sse_r

        stack[top, 0] = rid
        stack[top, 1] = start + nl
        stack[top, 2] = end
        stack[top, 3] = depth + 1
        top += 1
        stack[top, 0] = lid
        stack[top, 1] = start
        stack[top, 2] = start + nl
        stack[top, 3] = depth + 1
        top += 1

    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        value[:n_nodes].copy(),
        n_samples[:n_nodes].copy(),
        gain[:n_nodes].copy(),
    )


@njit(cache=True, nogil=True)
def predict_rows(feature, threshold, left, right, value, X):
    out = np.empty(X.shape[0])
    for i in range(X.shape[0]):
        node = 0
        while feature[node] != LEAF:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out
