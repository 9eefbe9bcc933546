"""Kernel-level tests: the compiled tree builder against a plain-python reference.

The reference mirrors the split rules exactly (midpoint thresholds, min_node
on both children, strict-improvement tie-breaking toward the lowest column and
threshold, relative gain tolerance, pure-node guard) and accumulates sums in
the same left-to-right order, so on tie-free data the comparison is bitwise.
"""
import numpy as np
import pytest

from lpdecomp import _tree_kernels as tk

GAIN_TOL = 1e-12
PURE_TOL = 7.7e-31


def ref_build(x, y, rows, min_node, cand_cols):
    m = len(rows)
    sum_y = 0.0
    sum_y2 = 0.0
    max_abs = 0.0
    for t in rows:
        v = float(y[t])
        sum_y += v
        sum_y2 += v * v
        max_abs = max(max_abs, abs(v))
    parent_sse = max(sum_y2 - sum_y * sum_y / m, 0.0)
    if m < 2 * min_node or parent_sse <= m * PURE_TOL * max_abs * max_abs:
        return {"rows": sorted(rows)}
    best = None
    for c in cand_cols:
        ordered = sorted(rows, key=lambda t: x[t, c])
        vals = [float(x[t, c]) for t in ordered]
        sl = 0.0
        sl2 = 0.0
        for i in range(1, m):
            yv = float(y[ordered[i - 1]])
            sl += yv
            sl2 += yv * yv
            if i < min_node or m - i < min_node:
                continue
            if vals[i - 1] < vals[i]:
                sr = sum_y - sl
                sr2 = sum_y2 - sl2
                sse = (sl2 - sl * sl / i) + (sr2 - sr * sr / (m - i))
                if best is None or sse < best[0]:
                    thr = 0.5 * (vals[i - 1] + vals[i])
                    if thr >= vals[i]:
                        thr = vals[i - 1]
                    best = (sse, c, thr, i, ordered)
    if best is None or not (best[0] < parent_sse * (1.0 - GAIN_TOL)):
        return {"rows": sorted(rows)}
    _, c, thr, cnt, ordered = best
    return {
        "col": c,
        "thr": thr,
        "left": ref_build(x, y, ordered[:cnt], min_node, cand_cols),
        "right": ref_build(x, y, ordered[cnt:], min_node, cand_cols),
    }


def ref_route(tree, row):
    while "col" in tree:
        tree = tree["left"] if row[tree["col"]] <= tree["thr"] else tree["right"]
    return tree["rows"]


def ref_leaf_count(tree):
    if "rows" in tree:
        return 1
    return ref_leaf_count(tree["left"]) + ref_leaf_count(tree["right"])


def kernel_route(arrs, row):
    feature, threshold, left, right, seg_lo, seg_hi, samples, _ = arrs
    node = 0
    while feature[node] >= 0:
        node = left[node] if row[feature[node]] <= threshold[node] else right[node]
    return sorted(samples[seg_lo[node]:seg_hi[node]].tolist())


def grow(x, y, min_node, inbag=None, n_rand=0, always=None, seed=99):
    t, k = x.shape
    if inbag is None:
        inbag = np.arange(t, dtype=np.int32)
    if always is None:
        always = np.arange(k, dtype=np.int32)
    return tk.build_tree(
        np.ascontiguousarray(x), np.ascontiguousarray(y), inbag,
        min_node, n_rand, always, np.uint64(seed),
    )


@pytest.mark.parametrize("seed,t,k,min_node", [
    (0, 18, 3, 1), (1, 25, 4, 2), (2, 40, 5, 5),
    (3, 33, 3, 3), (4, 20, 4, 1), (5, 37, 5, 2),
    (6, 24, 3, 4), (7, 30, 4, 6),
])
def test_tree_matches_reference_partition(seed, t, k, min_node):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((t, k))
    y = x[:, 0] + 0.5 * np.sin(3.0 * x[:, 1]) + 0.3 * rng.standard_normal(t)
    arrs = grow(x, y, min_node)
    ref = ref_build(x, y, list(range(t)), min_node, list(range(k)))

    feature = arrs[0]
    assert np.count_nonzero(feature[: arrs[7]] < 0) == ref_leaf_count(ref)
    if "col" in ref:
        assert feature[0] == ref["col"]
        assert arrs[1][0] == ref["thr"]
    queries = np.vstack([x, rng.standard_normal((20, k))])
    for row in queries:
        assert kernel_route(arrs, row) == ref_route(ref, row)


def test_tree_matches_reference_with_repeated_inbag():
    # exact quarter-integer data keeps every sum exact, so bootstrap ties are safe
    rng = np.random.default_rng(11)
    t, k = 22, 3
    x = rng.integers(-8, 9, size=(t, k)).astype(np.float64) / 4.0
    y = rng.integers(-8, 9, size=t).astype(np.float64) / 4.0
    inbag = rng.integers(0, t, size=t).astype(np.int32)
    arrs = grow(x, y, 2, inbag=inbag)
    ref = ref_build(x, y, sorted(inbag.tolist()), 2, list(range(k)))
    for row in np.vstack([x, rng.standard_normal((10, k))]):
        assert kernel_route(arrs, row) == ref_route(ref, row)


def test_constant_outcome_gives_single_leaf():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((30, 4))
    y = np.full(30, 2.5)
    arrs = grow(x, y, 1)
    assert arrs[7] == 1
    assert arrs[0][0] == -1


def test_near_constant_outcome_is_treated_as_pure():
    rng = np.random.default_rng(4)
    x = rng.standard_normal((40, 3))
    y = 1.0 + rng.uniform(-5e-16, 5e-16, size=40)
    arrs = grow(x, y, 1)
    assert arrs[7] == 1


def test_step_function_is_fit_exactly():
    rng = np.random.default_rng(5)
    t = 24
    x = np.column_stack([np.linspace(-1.0, 1.0, t), rng.standard_normal(t)])
    y = np.where(x[:, 0] > 0.3, 4.0, -1.0)
    arrs = grow(x, y, 1)
    for i in range(t):
        leaf_rows = kernel_route(arrs, x[i])
        assert all(y[r] == y[i] for r in leaf_rows)


def test_min_node_size_is_respected_at_every_leaf():
    rng = np.random.default_rng(6)
    x = rng.standard_normal((60, 4))
    y = x[:, 0] ** 2 + rng.standard_normal(60)
    min_node = 7
    feature, _, _, _, seg_lo, seg_hi, _, n_nodes = grow(x, y, min_node)
    for node in range(n_nodes):
        if feature[node] == -1:
            assert seg_hi[node] - seg_lo[node] >= min_node


def test_forced_columns_are_always_candidates():
    rng = np.random.default_rng(7)
    t, k = 50, 6
    x = rng.standard_normal((t, k))
    y = 3.0 * x[:, 3] + 0.01 * rng.standard_normal(t)
    always = np.array([3], dtype=np.int32)
    for seed in range(25):
        arrs = grow(x, y, 2, n_rand=1, always=always, seed=seed + 1)
        assert arrs[0][0] == 3


def test_candidate_draw_depends_on_seed():
    rng = np.random.default_rng(8)
    t, k = 80, 20
    x = rng.standard_normal((t, k))
    y = x.sum(axis=1)
    roots = set()
    for seed in range(1, 7):
        arrs = grow(x, y, 2, n_rand=1, always=np.empty(0, dtype=np.int32), seed=seed)
        roots.add(int(arrs[0][0]))
    assert len(roots) >= 2


def test_build_tree_is_deterministic():
    rng = np.random.default_rng(9)
    x = rng.standard_normal((35, 5))
    y = rng.standard_normal(35)
    inbag = rng.integers(0, 35, size=35).astype(np.int32)
    a = grow(x, y, 3, inbag=inbag, n_rand=2, always=np.array([0], dtype=np.int32), seed=42)
    b = grow(x, y, 3, inbag=inbag.copy(), n_rand=2, always=np.array([0], dtype=np.int32), seed=42)
    for u, v in zip(a[:7], b[:7]):
        assert np.array_equal(u, v)
    assert a[7] == b[7]


def test_leaf_profiles_for_explicit_multiset():
    x = np.zeros((4, 2))
    y = np.full(4, 1.0)
    inbag = np.array([0, 0, 1, 3], dtype=np.int32)
    arrs = grow(x, y, 1, inbag=inbag)
    assert arrs[7] == 1
    prof_t, prof_w, prof_ptr = tk.leaf_profiles(arrs[0], arrs[4], arrs[5], arrs[6], arrs[7])
    assert prof_t.tolist() == [0, 1, 3]
    assert prof_w.tolist() == [0.5, 0.25, 0.25]
    assert prof_ptr.tolist() == [0, 3]


def test_leaf_profiles_structure_on_random_tree():
    rng = np.random.default_rng(10)
    t = 45
    x = rng.standard_normal((t, 3))
    y = x[:, 1] + 0.2 * rng.standard_normal(t)
    inbag = rng.integers(0, t, size=t).astype(np.int32)
    arrs = grow(x, y, 4, inbag=inbag)
    feature, n_nodes = arrs[0], arrs[7]
    prof_t, prof_w, prof_ptr = tk.leaf_profiles(feature, arrs[4], arrs[5], arrs[6], n_nodes)
    assert prof_ptr[0] == 0 and prof_ptr[-1] == len(prof_t)
    for node in range(n_nodes):
        lo, hi = prof_ptr[node], prof_ptr[node + 1]
        if feature[node] >= 0:
            assert lo == hi
        else:
            assert hi > lo
            assert np.all(np.diff(prof_t[lo:hi]) > 0)
            assert abs(prof_w[lo:hi].sum() - 1.0) < 1e-12


def test_weight_matrix_and_per_tree_predictions_match_manual_routing():
    rng = np.random.default_rng(12)
    t, k = 40, 4
    x = rng.standard_normal((t, k))
    y = x[:, 0] - x[:, 2] + 0.3 * rng.standard_normal(t)

    trees = []
    for seed in (1, 2):
        inbag = rng.integers(0, t, size=t).astype(np.int32)
        arrs = grow(x, y, 3, inbag=inbag, seed=seed)
        profs = tk.leaf_profiles(arrs[0], arrs[4], arrs[5], arrs[6], arrs[7])
        trees.append((arrs, profs))

    # pack into global arrays the way the forest wrapper does
    offs = [0, trees[0][0][7]]
    feature = np.concatenate([a[0] for a, _ in trees])
    threshold = np.concatenate([a[1] for a, _ in trees])
    left = np.concatenate([np.where(a[2] >= 0, a[2] + o, -1).astype(np.int32)
                           for (a, _), o in zip(trees, offs)])
    right = np.concatenate([np.where(a[3] >= 0, a[3] + o, -1).astype(np.int32)
                            for (a, _), o in zip(trees, offs)])
    roots = np.array(offs, dtype=np.int64)
    prof_t = np.concatenate([p[0] for _, p in trees])
    prof_w = np.concatenate([p[1] for _, p in trees])
    total_nodes = trees[0][0][7] + trees[1][0][7]
    prof_ptr = np.zeros(total_nodes + 1, dtype=np.int64)
    prof_ptr[1: trees[0][0][7] + 1] = trees[0][1][2][1:]
    base = trees[0][1][2][-1]
    prof_ptr[trees[0][0][7] + 1:] = base + trees[1][1][2][1:]

    q = np.ascontiguousarray(np.vstack([x[:6], rng.standard_normal((4, k))]))
    w = tk.weight_matrix(feature, threshold, left, right, roots,
                         prof_t, prof_w, prof_ptr, q, t)
    p = tk.per_tree_predictions(feature, threshold, left, right, roots,
                                prof_t, prof_w, prof_ptr, q, y)

    for i, row in enumerate(q):
        w_ref = np.zeros(t)
        for b, (arrs, profs) in enumerate(trees):
            node = 0
            while arrs[0][node] >= 0:
                node = arrs[2][node] if row[arrs[0][node]] <= arrs[1][node] else arrs[3][node]
            pt, pw, pptr = profs
            acc = 0.0
            for jp in range(pptr[node], pptr[node + 1]):
                w_ref[pt[jp]] += pw[jp]
                acc += pw[jp] * y[pt[jp]]
            assert p[i, b] == acc
        assert np.array_equal(w[i], w_ref)
