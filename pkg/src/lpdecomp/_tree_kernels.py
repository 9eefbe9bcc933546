"""Numba kernels for tree building, routing, and weight accumulation.

Everything here is deliberately single-threaded with a fixed summation order,
so forests are bit-reproducible for a given (seed, params, data) no matter how
many threads the caller runs elsewhere.  The in-kernel RNG is an inline
xorshift64*; per-tree seeds come from the caller.
"""
from __future__ import annotations

import numpy as np
from numba import njit

_MULT = np.uint64(0x2545F4914F6CDD1D)
_S12 = np.uint64(12)
_S25 = np.uint64(25)
_S27 = np.uint64(27)

# relative gain a split must achieve; also guards pure nodes against roundoff
_GAIN_TOL = 1e-12
# sse below m * _PURE_TOL * max|y|^2 is indistinguishable from roundoff noise
_PURE_TOL = 7.7e-31


@njit(cache=True)
def _rand_below(state, n):
    # xorshift64* step; modulo bias is irrelevant for candidate draws
    state ^= state >> _S12
    state ^= state << _S25
    state ^= state >> _S27
    return state, np.int64((state * _MULT) % np.uint64(n))


@njit(cache=True)
def build_tree(x, y, inbag, min_node, n_rand, always, seed):
    """Grow one CART regression tree on the in-bag multiset.

    x: (T, K) float64 design, y: (T,) outcomes, inbag: (n,) int32 original row
    ids with bootstrap repeats.  Split search minimizes total within-child SSE
    over midpoint thresholds of the candidate columns (a random draw of
    ``n_rand`` plus the forced ``always`` set), requiring ``min_node`` rows on
    each side.  Ties break toward the lowest column index, then the lowest
    threshold, because candidates are scanned in sorted order and only strict
    improvements are accepted.

    Returns (feature, threshold, left, right, seg_start, seg_end, samples,
    n_nodes); leaves have feature == -1 and own the slice
    samples[seg_start:seg_end] of original row ids.
    """
    n = inbag.shape[0]
    k = x.shape[1]
    max_nodes = 2 * n + 1
    feature = np.full(max_nodes, -1, np.int32)
    threshold = np.zeros(max_nodes, np.float64)
    left = np.full(max_nodes, -1, np.int32)
    right = np.full(max_nodes, -1, np.int32)
    seg_start = np.zeros(max_nodes, np.int32)
    seg_end = np.zeros(max_nodes, np.int32)
    samples = inbag.copy()

    stack_node = np.empty(max_nodes, np.int32)
    stack_lo = np.empty(max_nodes, np.int32)
    stack_hi = np.empty(max_nodes, np.int32)
    top = 0
    stack_node[top] = 0
    stack_lo[top] = 0
    stack_hi[top] = n
    top += 1
    n_nodes = 1

    cand = np.empty(k, np.int32)
    perm = np.empty(k, np.int32)
    chosen = np.zeros(k, np.uint8)
    state = np.uint64(seed) | np.uint64(1)

    while top > 0:
        top -= 1
        node = stack_node[top]
        lo = stack_lo[top]
        hi = stack_hi[top]
        seg_start[node] = lo
        seg_end[node] = hi
        m = hi - lo

        sum_y = 0.0
        sum_y2 = 0.0
        max_abs = 0.0
        for i in range(lo, hi):
            v = y[samples[i]]
            sum_y += v
            sum_y2 += v * v
            av = abs(v)
            if av > max_abs:
                max_abs = av
        parent_sse = sum_y2 - sum_y * sum_y / m
        if parent_sse < 0.0:
            parent_sse = 0.0

        if m < 2 * min_node or parent_sse <= m * _PURE_TOL * max_abs * max_abs:
            continue  # leaf

        # candidate columns: forced set plus a random distinct draw, sorted
        nc = 0
        for j in range(always.shape[0]):
            c = always[j]
            if chosen[c] == 0:
                cand[nc] = c
                chosen[c] = 1
                nc += 1
        for j in range(k):
            perm[j] = j
        avail = k
        drawn = 0
        while drawn < n_rand and avail > 0:
            state, r = _rand_below(state, avail)
            col = perm[r]
            perm[r] = perm[avail - 1]
            avail -= 1
            drawn += 1
            if chosen[col] == 0:
                cand[nc] = col
                chosen[col] = 1
                nc += 1
        for j in range(1, nc):  # insertion sort, nc is small
            cj = cand[j]
            i = j - 1
            while i >= 0 and cand[i] > cj:
                cand[i + 1] = cand[i]
                i -= 1
            cand[i + 1] = cj

        best_sse = np.inf
        best_col = -1
        best_thresh = 0.0
        best_count = 0
        vals = np.empty(m, np.float64)
        for jc in range(nc):
            c = cand[jc]
            chosen[c] = 0
            for i in range(m):
                vals[i] = x[samples[lo + i], c]
            order = np.argsort(vals)
            sl = 0.0
            sl2 = 0.0
            for i in range(1, m):
                yv = y[samples[lo + order[i - 1]]]
                sl += yv
                sl2 += yv * yv
                if i < min_node or m - i < min_node:
                    continue
                v_prev = vals[order[i - 1]]
                v_here = vals[order[i]]
                if v_prev < v_here:
                    sr = sum_y - sl
                    sr2 = sum_y2 - sl2
                    sse = (sl2 - sl * sl / i) + (sr2 - sr * sr / (m - i))
                    if sse < best_sse:
                        thr = 0.5 * (v_prev + v_here)
                        if thr >= v_here:  # keep training rows routing consistently
                            thr = v_prev
                        best_sse = sse
                        best_col = c
                        best_thresh = thr
                        best_count = i

        if best_col < 0 or not (best_sse < parent_sse * (1.0 - _GAIN_TOL)):
            continue  # leaf: no variance-reducing split

        for i in range(m):
            vals[i] = x[samples[lo + i], best_col]
        order = np.argsort(vals)
        buf = np.empty(m, np.int32)
        for i in range(m):
            buf[i] = samples[lo + order[i]]
        for i in range(m):
            samples[lo + i] = buf[i]

        feature[node] = best_col
        threshold[node] = best_thresh
        left[node] = n_nodes
        right[node] = n_nodes + 1
        stack_node[top] = n_nodes
        stack_lo[top] = lo
        stack_hi[top] = lo + best_count
        top += 1
        stack_node[top] = n_nodes + 1
        stack_lo[top] = lo + best_count
        stack_hi[top] = hi
        top += 1
        n_nodes += 2

    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        seg_start[:n_nodes].copy(),
        seg_end[:n_nodes].copy(),
        samples,
        n_nodes,
    )


@njit(cache=True)
def leaf_profiles(feature, seg_start, seg_end, samples, n_nodes):
    """Run-length encode each leaf's in-bag rows: (row id, multiplicity/count).

    Profiles are sorted by original row id, so a weighted sum over a profile is
    a fixed ascending-date reduction.
    """
    n = samples.shape[0]
    prof_t = np.empty(n, np.int32)
    prof_w = np.empty(n, np.float64)
    prof_ptr = np.zeros(n_nodes + 1, np.int64)
    pos = 0
    for node in range(n_nodes):
        if feature[node] >= 0:
            prof_ptr[node + 1] = pos
            continue
        lo = seg_start[node]
        hi = seg_end[node]
        cnt = hi - lo
        seg = np.sort(samples[lo:hi].copy())
        i = 0
        while i < cnt:
            t0 = seg[i]
            j = i
            while j < cnt and seg[j] == t0:
                j += 1
            prof_t[pos] = t0
            prof_w[pos] = (j - i) / cnt
            pos += 1
            i = j
        prof_ptr[node + 1] = pos
    return prof_t[:pos].copy(), prof_w[:pos].copy(), prof_ptr


@njit(cache=True)
def weight_matrix(feature, threshold, left, right, roots, prof_t, prof_w, prof_ptr, q, t_train):
    """Sum of per-tree leaf profiles for each query row; caller divides by B.

    Row i of the result, scaled by 1/B, is the forest weight vector over the
    training dates for query q[i].
    """
    nq = q.shape[0]
    n_trees = roots.shape[0]
    w = np.zeros((nq, t_train))
    for b in range(n_trees):
        for i in range(nq):
            node = roots[b]
            while feature[node] >= 0:
                if q[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            for p in range(prof_ptr[node], prof_ptr[node + 1]):
                w[i, prof_t[p]] += prof_w[p]
    return w


@njit(cache=True)
def per_tree_predictions(feature, threshold, left, right, roots, prof_t, prof_w, prof_ptr, q, y):
    """P[i, b]: tree b's prediction at query i, as the profile-weighted sum of y."""
    nq = q.shape[0]
    n_trees = roots.shape[0]
    p_out = np.empty((nq, n_trees))
    for b in range(n_trees):
        for i in range(nq):
            node = roots[b]
            while feature[node] >= 0:
                if q[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            acc = 0.0
            for p in range(prof_ptr[node], prof_ptr[node + 1]):
                acc += prof_w[p] * y[prof_t[p]]
            p_out[i, b] = acc
    return p_out
