"""Random-forest local projections and their exact weight decomposition.

A regression tree predicts with the in-bag mean of its leaf, so a whole forest
prediction is a convex combination of training outcomes:

    yhat(q) = sum_t w_t(q) * y_t,  w_t(q) = (1/B) sum_b mult_bt(q) / leafsize_b(q)

where mult counts bootstrap repeats.  Impulse responses are differences of two
scenario predictions whose query rows differ only in the shock entry, so the
IRF inherits a weight vector w(delta) = w_treat - w_base that sums to zero.
Averaging those weights over many contexts gives the unconditional IRF and its
decomposition; averaging over a cluster's members gives cluster IRFs.

Predictions are computed from the weights via one canonical reduction
(util.weighted_sum), which makes the weight/prediction duality exact rather
than approximate.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _tree_kernels as _tk
from .dataset import HorizonDesign
from .util import DataError, DesignError, weighted_sum

__all__ = [
    "ForestParams",
    "TreeForest",
    "ScenarioWeights",
    "ConditionalIRF",
    "UnconditionalIRF",
    "TreeBand",
    "fit_forest",
    "fit_forest_path",
    "forest_weights",
    "forest_predictions",
    "scenario_weights",
    "scenario_irf",
    "common_training_contexts",
    "unconditional_irf",
    "tree_band",
]


@dataclass(frozen=True)
class ForestParams:
    """Forest hyperparameters; defaults follow the reference configuration."""

    n_trees: int = 1000
    min_node_size: int = 5
    split_candidate_fraction: float = 1.0 / 15.0
    bootstrap: bool = True
    seed: int = 0
    always_split: tuple[str, ...] | None = None  # None: shock plus target lags

    def __post_init__(self) -> None:
        if self.n_trees < 1:
            raise DesignError(f"n_trees must be >= 1, got {self.n_trees}")
        if self.min_node_size < 1:
            raise DesignError(f"min_node_size must be >= 1, got {self.min_node_size}")
        if not 0.0 < self.split_candidate_fraction <= 1.0:
            raise DesignError(
                f"split_candidate_fraction must be in (0, 1], got {self.split_candidate_fraction}"
            )
        if self.always_split is not None:
            object.__setattr__(self, "always_split", tuple(self.always_split))


@dataclass
class TreeForest:
    """One fitted forest for one horizon design, packed as flat node arrays."""

    design: HorizonDesign
    params: ForestParams
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    roots: np.ndarray
    prof_t: np.ndarray
    prof_w: np.ndarray
    prof_ptr: np.ndarray

    @property
    def n_trees(self) -> int:
        return int(self.roots.shape[0])

    @property
    def horizon(self) -> int:
        return self.design.horizon


@dataclass
class ScenarioWeights:
    """Forest weights for the dosed and baseline versions of one context."""

    treat: np.ndarray
    base: np.ndarray
    delta: float

    @property
    def irf_weights(self) -> np.ndarray:
        return self.treat - self.base


@dataclass
class ConditionalIRF:
    horizons: np.ndarray
    values: np.ndarray
    weights: list[ScenarioWeights]
    delta: float


@dataclass
class UnconditionalIRF:
    """Context-averaged IRF path with its averaged weights and the per-context matrix."""

    horizons: np.ndarray
    values: np.ndarray
    weights: list[ScenarioWeights]
    conditional: np.ndarray  # (n_contexts, n_horizons)
    context_dates: tuple[str, ...]
    delta: float


@dataclass
class TreeBand:
    """Percentile band of per-tree context-averaged IRFs, horizon by horizon."""

    horizons: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    per_tree: np.ndarray  # (n_horizons, n_trees)
    percentiles: tuple[float, float]


def _resolve_always(design: HorizonDesign, params: ForestParams) -> np.ndarray:
    names = design.column_names
    if params.always_split is None:
        wanted = [design.shock] + [
            f"{design.target}.l{j}" for j in range(1, design.lags + 1)
        ]
        idx = [names.index(w) for w in wanted if w in names]
    else:
        missing = [w for w in params.always_split if w not in names]
        if missing:
            raise DesignError(f"always_split column(s) not in design: {', '.join(missing)}")
        idx = [names.index(w) for w in params.always_split]
    return np.array(sorted(set(idx)), dtype=np.int32)


def fit_forest(design: HorizonDesign, params: ForestParams) -> TreeForest:
    """Fit ``n_trees`` CART trees on one horizon design.

    Each tree's bootstrap draw and candidate-column stream are derived from
    a per-tree seed sequence keyed by (seed, tree index), so the forest is
    reproducible and individual trees do not depend on B.
    """
    x = np.ascontiguousarray(design.X, dtype=np.float64)
    y = np.ascontiguousarray(design.y, dtype=np.float64)
    t, k = x.shape
    n_rand = min(k, max(1, int(k * params.split_candidate_fraction)))
    always = _resolve_always(design, params)

    features, thresholds, lefts, rights = [], [], [], []
    prof_ts, prof_ws = [], []
    roots = np.empty(params.n_trees, dtype=np.int64)
    node_counts = np.empty(params.n_trees, dtype=np.int64)
    ptrs = []
    for b in range(params.n_trees):
        ss = np.random.SeedSequence(entropy=params.seed, spawn_key=(b,))
        rng = np.random.Generator(np.random.PCG64(ss))
        if params.bootstrap:
            inbag = rng.integers(0, t, size=t).astype(np.int32)
        else:
            inbag = np.arange(t, dtype=np.int32)
        kernel_seed = np.uint64(rng.integers(1, 2**63 - 1))
        feat, thr, lft, rgt, seg_lo, seg_hi, samples, n_nodes = _tk.build_tree(
            x, y, inbag, params.min_node_size, n_rand, always, kernel_seed
        )
        pt, pw, pptr = _tk.leaf_profiles(feat, seg_lo, seg_hi, samples, n_nodes)
        features.append(feat)
        thresholds.append(thr)
        lefts.append(lft)
        rights.append(rgt)
        prof_ts.append(pt)
        prof_ws.append(pw)
        ptrs.append(pptr)
        node_counts[b] = n_nodes

    node_offsets = np.concatenate(([0], np.cumsum(node_counts)))
    total_nodes = int(node_offsets[-1])
    roots[:] = node_offsets[:-1]
    left_g = np.concatenate(
        [np.where(l >= 0, l + off, -1).astype(np.int32) for l, off in zip(lefts, node_offsets)]
    )
    right_g = np.concatenate(
        [np.where(r >= 0, r + off, -1).astype(np.int32) for r, off in zip(rights, node_offsets)]
    )
    prof_ptr = np.zeros(total_nodes + 1, dtype=np.int64)
    prof_off = 0
    for b in range(params.n_trees):
        lo = int(node_offsets[b])
        n_nodes = int(node_counts[b])
        prof_ptr[lo + 1 : lo + n_nodes + 1] = prof_off + ptrs[b][1:]
        prof_off += int(ptrs[b][-1])
    return TreeForest(
        design=design,
        params=params,
        feature=np.concatenate(features),
        threshold=np.concatenate(thresholds),
        left=left_g,
        right=right_g,
        roots=roots,
        prof_t=np.concatenate(prof_ts),
        prof_w=np.concatenate(prof_ws),
        prof_ptr=prof_ptr,
    )


def fit_forest_path(designs: list[HorizonDesign], params: ForestParams) -> list[TreeForest]:
    """One forest per horizon design, all from the same seed recipe."""
    return [fit_forest(d, params) for d in designs]


def _as_query_matrix(forest: TreeForest, rows: np.ndarray) -> np.ndarray:
    q = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    k = forest.design.n_regressors
    if q.shape[1] != k:
        raise DesignError(f"query rows have {q.shape[1]} columns, design has {k}")
    if not np.all(np.isfinite(q)):
        raise DataError("query rows contain non-finite values")
    return np.ascontiguousarray(q)


def forest_weights(forest: TreeForest, rows: np.ndarray) -> np.ndarray:
    """Per-observation forest weights for each query row; rows sum to one."""
    q = _as_query_matrix(forest, rows)
    w = _tk.weight_matrix(
        forest.feature, forest.threshold, forest.left, forest.right, forest.roots,
        forest.prof_t, forest.prof_w, forest.prof_ptr, q, forest.design.n_obs,
    )
    w *= 1.0 / forest.n_trees
    return w


def forest_predictions(forest: TreeForest, rows: np.ndarray) -> np.ndarray:
    """Forest predictions, defined as the weighted sums of training outcomes."""
    w = forest_weights(forest, rows)
    y = forest.design.y
    return np.array([weighted_sum(w[i], y) for i in range(w.shape[0])])


def _scenario_pair(context: np.ndarray, shock_col: int, delta: float) -> np.ndarray:
    ctx = np.asarray(context, dtype=np.float64)
    if ctx.ndim != 1:
        raise DesignError("context must be a single design row")
    treat = ctx.copy()
    base = ctx.copy()
    treat[shock_col] = delta
    base[shock_col] = 0.0
    return np.vstack([treat, base])


def scenario_weights(forest: TreeForest, context: np.ndarray, delta: float) -> ScenarioWeights:
    """Weights under shock = delta and shock = 0 for one context row."""
    pair = _scenario_pair(context, forest.design.shock_col, delta)
    w = forest_weights(forest, pair)
    return ScenarioWeights(treat=w[0], base=w[1], delta=float(delta))


def scenario_irf(forests: list[TreeForest], context: np.ndarray, delta: float) -> ConditionalIRF:
    """IRF path for one context: difference of the two scenario predictions."""
    horizons = np.array([f.horizon for f in forests])
    values = np.empty(len(forests))
    weights = []
    for i, forest in enumerate(forests):
        sw = scenario_weights(forest, context, delta)
        values[i] = weighted_sum(sw.irf_weights, forest.design.y)
        weights.append(sw)
    return ConditionalIRF(horizons=horizons, values=values, weights=weights, delta=float(delta))


def common_training_contexts(forests: list[TreeForest]) -> tuple[np.ndarray, tuple[str, ...]]:
    """Training rows present in every horizon design (the leading common dates).

    Under the maximal sample policy longer-horizon designs lose trailing rows,
    so the usable shared contexts are the first min_h T_h rows; the same date's
    design row is identical in every design, which is asserted here.
    """
    n_common = min(f.design.n_obs for f in forests)
    base = forests[0].design.X[:n_common]
    for f in forests[1:]:
        if not np.array_equal(f.design.X[:n_common], base):
            raise DesignError(
                "designs disagree on shared context rows; build them from one frame and spec"
            )
    return base.copy(), forests[0].design.dates[:n_common]


def unconditional_irf(
    forests: list[TreeForest],
    delta: float,
    contexts: np.ndarray | None = None,
    context_dates: tuple[str, ...] | None = None,
) -> UnconditionalIRF:
    """Average the conditional IRFs over contexts, exactly, via averaged weights.

    Defaults to the training rows shared by all horizons with their realized
    shock replaced by the dose.  The returned per-horizon weights are the
    context averages, and values are their weighted sums with the outcomes:
    the same numbers as averaging the per-context IRFs.
    """
    if contexts is None:
        contexts, context_dates = common_training_contexts(forests)
    contexts = np.atleast_2d(np.asarray(contexts, dtype=np.float64))
    if context_dates is None:
        context_dates = tuple(f"context{i}" for i in range(contexts.shape[0]))
    horizons = np.array([f.horizon for f in forests])
    values = np.empty(len(forests))
    conditional = np.empty((contexts.shape[0], len(forests)))
    weights = []
    for j, forest in enumerate(forests):
        shock_col = forest.design.shock_col
        treat_rows = contexts.copy()
        treat_rows[:, shock_col] = delta
        base_rows = contexts.copy()
        base_rows[:, shock_col] = 0.0
        w_treat = forest_weights(forest, treat_rows)
        w_base = forest_weights(forest, base_rows)
        y = forest.design.y
        diff = w_treat - w_base
        for i in range(diff.shape[0]):
            conditional[i, j] = weighted_sum(diff[i], y)
        avg = ScenarioWeights(
            treat=np.mean(w_treat, axis=0), base=np.mean(w_base, axis=0), delta=float(delta)
        )
        weights.append(avg)
        values[j] = weighted_sum(avg.irf_weights, y)
    return UnconditionalIRF(
        horizons=horizons,
        values=values,
        weights=weights,
        conditional=conditional,
        context_dates=tuple(context_dates),
        delta=float(delta),
    )


def tree_band(
    forests: list[TreeForest],
    delta: float,
    contexts: np.ndarray | None = None,
    percentiles: tuple[float, float] = (16.0, 84.0),
) -> TreeBand:
    """Spread of the per-tree context-averaged IRFs at the given percentiles."""
    lo_p, hi_p = percentiles
    if not 0.0 <= lo_p < hi_p <= 100.0:
        raise DesignError(f"percentiles must satisfy 0 <= lo < hi <= 100, got {percentiles}")
    if contexts is None:
        contexts, _ = common_training_contexts(forests)
    contexts = np.atleast_2d(np.asarray(contexts, dtype=np.float64))
    horizons = np.array([f.horizon for f in forests])
    n_h = len(forests)
    per_tree = np.empty((n_h, forests[0].n_trees))
    lower = np.empty(n_h)
    upper = np.empty(n_h)
    for j, forest in enumerate(forests):
        shock_col = forest.design.shock_col
        treat_rows = contexts.copy()
        treat_rows[:, shock_col] = delta
        base_rows = contexts.copy()
        base_rows[:, shock_col] = 0.0
        q_t = _as_query_matrix(forest, treat_rows)
        q_b = _as_query_matrix(forest, base_rows)
        args = (
            forest.feature, forest.threshold, forest.left, forest.right, forest.roots,
            forest.prof_t, forest.prof_w, forest.prof_ptr,
        )
        p_t = _tk.per_tree_predictions(*args, q_t, forest.design.y)
        p_b = _tk.per_tree_predictions(*args, q_b, forest.design.y)
        per_tree[j] = np.mean(p_t - p_b, axis=0)
        lower[j] = np.percentile(per_tree[j], lo_p)
        upper[j] = np.percentile(per_tree[j], hi_p)
    return TreeBand(
        horizons=horizons, lower=lower, upper=upper, per_tree=per_tree,
        percentiles=(float(lo_p), float(hi_p)),
    )
