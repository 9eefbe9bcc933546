"""K-means over the per-context IRF matrix and cluster-level IRF aggregation.

The conditional IRFs evaluated at every training context form a matrix with
one row per context date and one column per horizon.  Partitioning those rows
groups dates whose estimated dynamic responses look alike; averaging the
forest weights within each group then gives a cluster-specific IRF that is,
by construction, an exact reshuffling of the unconditional one.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .forest import (
    ScenarioWeights,
    TreeForest,
    UnconditionalIRF,
    common_training_contexts,
    forest_weights,
)
from .util import DesignError, EstimationError, weighted_sum

_MAX_ITER = 300


@dataclass(frozen=True)
class IRFDataset:
    """Conditional IRFs as rows: one context date per row, one horizon per column."""

    matrix: np.ndarray
    date_index: tuple[str, ...]

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] == 0:
            raise DesignError("IRF dataset must be a nonempty 2-d matrix")
        if not np.all(np.isfinite(m)):
            raise DesignError("IRF dataset contains non-finite entries")
        if len(self.date_index) != m.shape[0]:
            raise DesignError(
                f"date index has {len(self.date_index)} entries for {m.shape[0]} rows"
            )
        object.__setattr__(self, "matrix", m)

    @property
    def n_contexts(self) -> int:
        return self.matrix.shape[0]


def irf_dataset(unconditional: UnconditionalIRF) -> IRFDataset:
    """Package an unconditional fit's per-context matrix for clustering."""
    return IRFDataset(
        matrix=unconditional.conditional.copy(),
        date_index=unconditional.context_dates,
    )


@dataclass
class ClusterResult:
    k: int
    assignments: np.ndarray
    centroids: np.ndarray  # k x H, means of the original (unstandardized) rows
    shares: np.ndarray
    sse: float
    n_iter: int
    sse_history: np.ndarray  # one entry per Lloyd iteration of the winning restart
    n_repairs: int  # empty-cluster re-seeds in the winning restart


def _kmeanspp_seed(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[int(rng.integers(n))]
    d2 = np.sum((x - centers[0]) ** 2, axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total > 0.0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            idx = int(rng.integers(n))
        centers[c] = x[idx]
        d2 = np.minimum(d2, np.sum((x - centers[c]) ** 2, axis=1))
    return centers


def _fix_empty(assign: np.ndarray, d2: np.ndarray, k: int) -> int:
    """Move the farthest point into each empty cluster.  Returns the move count."""
    n = assign.size
    counts = np.bincount(assign, minlength=k)
    moves = 0
    for c in range(k):
        if counts[c] > 0:
            continue
        dist_own = d2[np.arange(n), assign].copy()
        dist_own[counts[assign] <= 1] = -np.inf  # never empty a singleton
        far = int(np.argmax(dist_own))
        counts[assign[far]] -= 1
        assign[far] = c
        counts[c] += 1
        moves += 1
    return moves


def _lloyd(x: np.ndarray, centers: np.ndarray, k: int):
    n = x.shape[0]
    assign = np.full(n, -1, dtype=np.int64)
    history = []
    repairs = 0
    for it in range(_MAX_ITER):
        d2 = np.sum((x[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        new_assign = np.argmin(d2, axis=1).astype(np.int64)
        repairs += _fix_empty(new_assign, d2, k)
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for c in range(k):
            centers[c] = np.mean(x[assign == c], axis=0)
        history.append(float(np.sum((x - centers[assign]) ** 2)))
    sse = history[-1] if history else float(np.sum((x - centers[assign]) ** 2))
    return assign, centers, sse, len(history), np.array(history), repairs


def kmeans(
    data: IRFDataset,
    k: int = 2,
    seed: int = 0,
    restarts: int = 25,
    standardize: bool = False,
) -> ClusterResult:
    """Best-of-restarts Lloyd iterations from k-means++ seeds.

    Each restart draws its own seed stream keyed by (seed, restart index),
    runs to assignment convergence or 300 iterations, and the run with the
    lowest within-cluster SSE wins; ties keep the earliest restart.  Empty
    clusters are repaired by re-seeding them from the farthest point.  With
    ``standardize`` the columns are scaled to unit variance before any
    distance is computed; reported centroids are always means of the
    original rows.
    """
    n = data.n_contexts
    if k < 1:
        raise DesignError(f"k must be positive, got {k}")
    if k > n:
        raise DesignError(f"cannot form {k} clusters from {n} contexts")
    if restarts < 1:
        raise DesignError(f"restarts must be positive, got {restarts}")
    x = data.matrix
    if standardize:
        sd = np.std(x, axis=0)
        x = (x - np.mean(x, axis=0)) / np.where(sd > 0, sd, 1.0)
    best = None
    for r in range(restarts):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(r,)))
        centers = _kmeanspp_seed(x, k, rng)
        assign, centers, sse, n_iter, history, repairs = _lloyd(x, centers.copy(), k)
        if best is None or sse < best[2]:
            best = (assign, centers, sse, n_iter, history, repairs)
    assign, _, sse, n_iter, history, repairs = best
    counts = np.bincount(assign, minlength=k)
    centroids = np.vstack([np.mean(data.matrix[assign == c], axis=0) for c in range(k)])
    return ClusterResult(
        k=k,
        assignments=assign,
        centroids=centroids,
        shares=counts / float(n),
        sse=sse,
        n_iter=n_iter,
        sse_history=history,
        n_repairs=repairs,
    )


@dataclass
class SilhouetteReport:
    ks: tuple[int, ...]
    scores: np.ndarray
    results: list[ClusterResult] = field(repr=False)

    @property
    def best_k(self) -> int:
        return int(self.ks[int(np.argmax(self.scores))])


def silhouette_scores(
    data: IRFDataset,
    ks: tuple[int, ...] = (2, 3, 4, 5),
    seed: int = 0,
    restarts: int = 25,
    standardize: bool = False,
) -> SilhouetteReport:
    """Mean silhouette width for each candidate k, higher is better separated."""
    if any(k < 2 for k in ks):
        raise DesignError("silhouette needs k >= 2")
    if any(k > data.n_contexts for k in ks):
        raise DesignError("candidate k exceeds the number of contexts")
    x = data.matrix
    if standardize:
        sd = np.std(x, axis=0)
        x = (x - np.mean(x, axis=0)) / np.where(sd > 0, sd, 1.0)
    dist = np.sqrt(
        np.maximum(np.sum((x[:, None, :] - x[None, :, :]) ** 2, axis=2), 0.0)
    )
    results = [kmeans(data, k, seed=seed, restarts=restarts, standardize=standardize) for k in ks]
    scores = np.empty(len(ks))
    for j, res in enumerate(results):
        scores[j] = _mean_silhouette(dist, res.assignments, res.k)
    return SilhouetteReport(ks=tuple(int(k) for k in ks), scores=scores, results=results)


def _mean_silhouette(dist: np.ndarray, assign: np.ndarray, k: int) -> float:
    n = assign.size
    s = np.zeros(n)
    counts = np.bincount(assign, minlength=k)
    for i in range(n):
        c = assign[i]
        if counts[c] <= 1:
            continue  # singleton clusters score zero by convention
        a = np.sum(dist[i][assign == c]) / (counts[c] - 1)
        b = np.inf
        for other in range(k):
            if other != c and counts[other] > 0:
                b = min(b, float(np.mean(dist[i][assign == other])))
        top = max(a, b)
        if top > 0:
            s[i] = (b - a) / top
    return float(np.mean(s))


@dataclass
class ClusterIRFSet:
    """Per-cluster IRF paths with the weight vectors behind them."""

    horizons: np.ndarray
    delta: float
    k: int
    shares: np.ndarray
    counts: np.ndarray
    values: np.ndarray  # k x n_horizons
    weights: list[list[ScenarioWeights]]  # [cluster][horizon]


def cluster_irf(
    forests: list[TreeForest],
    delta: float,
    assignments: np.ndarray,
    contexts: np.ndarray | None = None,
) -> ClusterIRFSet:
    """Average scenario weights within each cluster of contexts.

    Runs the same reduction as the unconditional IRF restricted to each
    cluster's member rows, so a single cluster holding every context
    reproduces the unconditional weights and values identically, and the
    share-weighted cluster values recombine to the unconditional path.
    """
    if contexts is None:
        contexts, _ = common_training_contexts(forests)
    contexts = np.atleast_2d(np.asarray(contexts, dtype=np.float64))
    assign = np.asarray(assignments)
    if assign.ndim != 1 or assign.size != contexts.shape[0]:
        raise DesignError(
            f"need one assignment per context, got {assign.size} for {contexts.shape[0]}"
        )
    if not np.issubdtype(assign.dtype, np.integer):
        raise DesignError("assignments must be integer cluster ids")
    if assign.min() < 0:
        raise DesignError("cluster ids must be nonnegative")
    k = int(assign.max()) + 1
    counts = np.bincount(assign, minlength=k)
    if np.any(counts == 0):
        empty = np.flatnonzero(counts == 0)
        raise EstimationError(f"empty cluster id(s): {', '.join(map(str, empty))}")

    horizons = np.array([f.horizon for f in forests])
    values = np.empty((k, len(forests)))
    weights: list[list[ScenarioWeights]] = [[] for _ in range(k)]
    for j, forest in enumerate(forests):
        shock_col = forest.design.shock_col
        treat_rows = contexts.copy()
        treat_rows[:, shock_col] = delta
        base_rows = contexts.copy()
        base_rows[:, shock_col] = 0.0
        w_treat = forest_weights(forest, treat_rows)
        w_base = forest_weights(forest, base_rows)
        y = forest.design.y
        for c in range(k):
            mask = assign == c
            sw = ScenarioWeights(
                treat=np.mean(w_treat[mask], axis=0),
                base=np.mean(w_base[mask], axis=0),
                delta=float(delta),
            )
            weights[c].append(sw)
            values[c, j] = weighted_sum(sw.irf_weights, y)
    return ClusterIRFSet(
        horizons=horizons,
        delta=float(delta),
        k=k,
        shares=counts / float(assign.size),
        counts=counts,
        values=values,
        weights=weights,
    )
