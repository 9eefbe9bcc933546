"""Batch orchestration: fit, decompose, check, and write artifacts.

Every run writes CSV tables first, then charts drawn from the same numbers,
then a manifest listing each artifact with its checksum next to the
self-check records.  A failure at any point removes the files written so
far, so an output directory never holds a half-finished bundle.
"""
from __future__ import annotations

import csv
import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .clustering import cluster_irf, irf_dataset, kmeans, silhouette_scores
from .config import RunConfig, config_text
from .dataset import HorizonDesign, build_designs, load_csv, subsample
from .diagnostics import concentration, influence_split, trimmed_irf, window_paths
from .forest import (
    TreeForest,
    fit_forest,
    forest_predictions,
    forest_weights,
    tree_band,
    unconditional_irf,
)
from .hac import path_inference
from .linear import LinearLPFit, contributions, fit_linear_lp, purify_shock
from .proximity import (
    cosine_decomposition,
    dual_coefficients,
    embed,
    proximity_weights,
)
from .svg import line_chart
from .util import DataError, EstimationError, fmt_float, moving_average, weighted_sum

ALL_PARTS = frozenset(
    {
        "linear-irf",
        "decompose",
        "concentration",
        "robustness",
        "forest-irf",
        "cluster",
        "charts",
        "manifest",
    }
)

_TREE_BAND_PCTS = (16.0, 84.0)


def thread_count() -> int:
    """Worker count from LPDECOMP_THREADS; defaults to 1."""
    raw = os.environ.get("LPDECOMP_THREADS", "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise DataError(f"LPDECOMP_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise DataError(f"LPDECOMP_THREADS must be >= 1, got {n}")
    return n


def _pmap(fn, items):
    items = list(items)
    n = min(thread_count(), len(items))
    if n <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


@dataclass
class CheckRecord:
    name: str
    max_violation: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_violation <= self.tolerance


@dataclass
class RunResult:
    output_dir: str
    artifacts: tuple[str, ...]
    checks: list[CheckRecord]
    manifest_path: str | None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def load_frame(cfg: RunConfig):
    frame = load_csv(cfg.data_path, cfg.date_column)
    if cfg.subsample_start or cfg.subsample_end:
        frame = subsample(frame, cfg.subsample_start, cfg.subsample_end)
    return frame


class _Writer:
    """Tracks written files so a failure can remove the partial bundle."""

    def __init__(self, outdir: Path):
        self.outdir = outdir
        self.written: list[str] = []

    def text(self, name: str, content: str) -> None:
        path = self.outdir / name
        path.write_text(content, encoding="utf-8", newline="")
        self.written.append(name)

    def csv(self, name: str, header: list[str], rows) -> None:
        path = self.outdir / name
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\r\n")
            w.writerow(header)
            w.writerows(rows)
        self.written.append(name)

    def cleanup(self) -> None:
        for name in self.written:
            try:
                (self.outdir / name).unlink()
            except OSError:
                pass


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return fmt_float(float(v))
    return str(v)


def _date_ticks(dates: tuple[str, ...], n: int = 6):
    if len(dates) <= n:
        idx = range(len(dates))
    else:
        idx = sorted({int(round(i)) for i in np.linspace(0, len(dates) - 1, n)})
    return [(i, dates[i]) for i in idx]


def _resolve_omega(cfg: RunConfig, design: HorizonDesign) -> int:
    if cfg.window is not None:
        return cfg.window
    return min(design.n_obs, max(design.n_regressors + 2, design.n_obs // 3))


def run(cfg: RunConfig, parts: frozenset[str] | None = None) -> RunResult:
    """Execute the requested artifact groups and return what was written.

    ``parts`` selects artifact groups (defaults to everything the config
    enables); the estimator setting decides which model families run inside
    the shared groups.  Raises on any failure after removing partial output.
    """
    if parts is None:
        parts = ALL_PARTS
        if not cfg.cluster_enabled:
            parts = parts - {"cluster"}
    unknown = parts - ALL_PARTS
    if unknown:
        raise DataError(f"unknown run part(s): {', '.join(sorted(unknown))}")
    parts = set(parts)
    if not cfg.wants("linear"):
        parts -= {"linear-irf", "decompose", "robustness"}
    if not cfg.wants("forest"):
        parts -= {"forest-irf", "cluster"}

    outdir = Path(cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    writer = _Writer(outdir)
    checks: list[CheckRecord] = []
    try:
        frame = load_frame(cfg)
        designs = build_designs(frame, cfg.spec())
        writer.text("config_resolved.ini", config_text(cfg))

        need_linear = bool(
            parts & {"linear-irf", "decompose", "robustness"}
        ) or (cfg.wants("linear") and bool(parts & {"concentration", "charts"}))
        need_forest = bool(parts & {"forest-irf", "cluster"}) or (
            cfg.wants("forest") and bool(parts & {"concentration", "charts"})
        )

        fits: list[LinearLPFit] = []
        inference = None
        if need_linear:
            fits = _pmap(fit_linear_lp, designs)
            inference = path_inference(
                fits, bandwidth=cfg.bandwidth, levels=cfg.band_levels
            )
            checks.extend(_linear_checks(fits))

        forests: list[TreeForest] = []
        uncond = None
        band = None
        if need_forest:
            params = cfg.forest_params()
            forests = _pmap(lambda d: fit_forest(d, params), designs)
            uncond = unconditional_irf(forests, cfg.delta)
            band = tree_band(forests, cfg.delta, percentiles=_TREE_BAND_PCTS)
            checks.extend(_forest_checks(forests, uncond, band))

        if "linear-irf" in parts:
            _write_linear_irf(writer, inference)
        if "decompose" in parts:
            for fit in fits:
                _write_decomposition(writer, cfg, fit)
        if "concentration" in parts:
            if fits:
                _write_concentration(
                    writer, "concentration_linear.csv", cfg,
                    [(f.horizon, f.weights, f.design.y) for f in fits],
                )
            if forests:
                _write_concentration(
                    writer, "concentration_forest.csv", cfg,
                    [
                        (f.horizon, sw.irf_weights, f.design.y)
                        for f, sw in zip(forests, uncond.weights)
                    ],
                )
        if "robustness" in parts:
            _write_robustness(writer, cfg, fits)
        if "forest-irf" in parts:
            _write_forest_irf(writer, forests, uncond, band)
        cluster_bundle = None
        if "cluster" in parts:
            cluster_bundle = _write_clusters(writer, cfg, forests, uncond, checks)
        if "charts" in parts and "svg" in cfg.formats:
            _write_charts(writer, cfg, fits, inference, uncond, band, cluster_bundle)

        failed = [c for c in checks if not c.passed]
        if failed:
            worst = failed[0]
            raise EstimationError(
                f"self-check {worst.name!r} failed: "
                f"{worst.max_violation:g} > {worst.tolerance:g}"
            )

        manifest_path = None
        if "manifest" in parts and "json" in cfg.formats:
            manifest_path = _write_manifest(writer, cfg, checks)
        return RunResult(
            output_dir=str(outdir),
            artifacts=tuple(writer.written),
            checks=checks,
            manifest_path=manifest_path,
        )
    except BaseException:
        writer.cleanup()
        raise


def _linear_checks(fits: list[LinearLPFit]) -> list[CheckRecord]:
    w_sum = 0.0
    c_gap = 0.0
    for fit in fits:
        w_sum = max(w_sum, abs(float(np.sum(fit.weights))))
        dec = contributions(fit)
        c_gap = max(
            c_gap,
            abs(float(np.sum(dec.contributions)) - fit.beta) / max(1.0, abs(fit.beta)),
        )
    return [
        CheckRecord("linear-weight-sum", w_sum, 1e-12),
        CheckRecord("linear-contribution-identity", c_gap, 1e-10),
    ]


def _forest_checks(forests, uncond, band) -> list[CheckRecord]:
    irf_sum = 0.0
    for sw in uncond.weights:
        irf_sum = max(irf_sum, abs(float(np.sum(sw.irf_weights))))
    convex = 0.0
    for sw in uncond.weights:
        for w in (sw.treat, sw.base):
            convex = max(convex, abs(float(np.sum(w)) - 1.0), max(0.0, -float(w.min())))
    # independent route: mean of per-tree IRFs versus the weight-route values
    dual_route = float(np.max(np.abs(np.mean(band.per_tree, axis=1) - uncond.values)))
    return [
        CheckRecord("forest-irf-weight-sum", irf_sum, 1e-12),
        CheckRecord("forest-weight-convexity", convex, 1e-12),
        CheckRecord("forest-dual-route", dual_route, 1e-8),
    ]


def _write_linear_irf(writer: _Writer, inference) -> None:
    header = ["horizon", "beta", "se", "bandwidth"]
    levels = sorted(inference.bands)
    for lvl in levels:
        header += [f"lower_{lvl:g}", f"upper_{lvl:g}"]
    rows = []
    for i, h in enumerate(inference.horizons):
        row = [
            int(h),
            _cell(inference.betas[i]),
            _cell(inference.ses[i]),
            int(inference.bandwidths[i]),
        ]
        for lvl in levels:
            b = inference.bands[lvl]
            row += [_cell(b.lower[i]), _cell(b.upper[i])]
        rows.append(row)
    writer.csv("irf_linear.csv", header, rows)


def _write_decomposition(writer: _Writer, cfg: RunConfig, fit: LinearLPFit) -> None:
    dec = contributions(fit)
    d = fit.design
    smoothed = {}
    for win in cfg.ma_windows:
        if win <= d.n_obs:
            smoothed[win] = moving_average(fit.weights, win)
    header = ["date", "outcome", "weight", "contribution", "evidence"]
    header += [f"weight_ma{w}" for w in sorted(smoothed)]
    rows = []
    for t in range(d.n_obs):
        row = [
            d.dates[t],
            _cell(d.y[t]),
            _cell(fit.weights[t]),
            _cell(dec.contributions[t]),
            _cell(dec.curve.values[t]),
        ]
        for win in sorted(smoothed):
            lead = win - 1
            row.append("" if t < lead else _cell(smoothed[win][t - lead]))
        rows.append(row)
    writer.csv(f"decomposition_h{d.horizon}.csv", header, rows)


def _write_concentration(writer: _Writer, name: str, cfg: RunConfig, triples) -> None:
    rows = []
    for h, w, y in triples:
        wc = concentration(w, cfg.concentration_q)
        cc = concentration(np.asarray(w) * np.asarray(y), cfg.concentration_q)
        rows.append(
            [
                int(h),
                _cell(cfg.concentration_q),
                _cell(wc.share),
                _cell(cc.share),
                wc.count,
                str(wc.floored).lower(),
            ]
        )
    writer.csv(name, ["horizon", "q", "wc", "cc", "count", "floored"], rows)


def _write_robustness(writer: _Writer, cfg: RunConfig, fits: list[LinearLPFit]) -> None:
    rows = []
    for fit in fits:
        tr = trimmed_irf(fit.weights, fit.design.y, cfg.trim_lower, cfg.trim_upper)
        rows.append(
            [
                fit.horizon,
                _cell(cfg.trim_lower),
                _cell(cfg.trim_upper),
                _cell(fit.beta),
                _cell(tr.value),
                tr.n_trimmed,
            ]
        )
    writer.csv(
        "trimmed_linear.csv",
        ["horizon", "lower_pct", "upper_pct", "beta", "trimmed_value", "n_trimmed"],
        rows,
    )
    for fit in fits:
        wp = window_paths(fit.design, _resolve_omega(cfg, fit.design))
        rows = [
            [
                wp.dates[t],
                _cell(wp.expanding[t]),
                _cell(wp.rolling[t]),
                _cell(wp.cumulative[t]),
            ]
            for t in range(len(wp.dates))
        ]
        writer.csv(
            f"windows_h{fit.horizon}.csv",
            ["date", "expanding", "rolling", "cumulative"],
            rows,
        )


def _write_forest_irf(writer: _Writer, forests, uncond, band) -> None:
    rows = []
    for i, h in enumerate(uncond.horizons):
        rows.append(
            [
                int(h),
                _cell(uncond.values[i]),
                _cell(band.lower[i]),
                _cell(band.upper[i]),
            ]
        )
    writer.csv(
        "irf_forest.csv",
        [
            "horizon",
            "value",
            f"band_lower_{_TREE_BAND_PCTS[0]:g}",
            f"band_upper_{_TREE_BAND_PCTS[1]:g}",
        ],
        rows,
    )
    header = ["date"] + [f"h{int(h)}" for h in uncond.horizons]
    rows = []
    for i, date in enumerate(uncond.context_dates):
        rows.append([date] + [_cell(v) for v in uncond.conditional[i]])
    writer.csv("conditional_irf.csv", header, rows)
    for forest, sw in zip(forests, uncond.weights):
        d = forest.design
        irf_w = sw.irf_weights
        evidence = np.cumsum(irf_w * d.y)
        rows = [
            [
                d.dates[t],
                _cell(d.y[t]),
                _cell(sw.treat[t]),
                _cell(sw.base[t]),
                _cell(irf_w[t]),
                _cell(irf_w[t] * d.y[t]),
                _cell(evidence[t]),
            ]
            for t in range(d.n_obs)
        ]
        writer.csv(
            f"forest_decomposition_h{d.horizon}.csv",
            ["date", "outcome", "treat_weight", "base_weight", "irf_weight",
             "contribution", "evidence"],
            rows,
        )


def _write_clusters(writer: _Writer, cfg: RunConfig, forests, uncond, checks):
    data = irf_dataset(uncond)
    res = kmeans(data, k=cfg.cluster_k, seed=cfg.cluster_seed)
    cs = cluster_irf(forests, cfg.delta, res.assignments)
    recombined = cs.shares @ cs.values
    checks.append(
        CheckRecord(
            "cluster-share-recombination",
            float(np.max(np.abs(recombined - uncond.values))),
            1e-12,
        )
    )
    writer.csv(
        "cluster_assignments.csv",
        ["date", "cluster"],
        [[d, int(c)] for d, c in zip(data.date_index, res.assignments)],
    )
    header = ["cluster", "share", "count"] + [f"h{int(h)}" for h in cs.horizons]
    rows = []
    for c in range(cs.k):
        rows.append(
            [c, _cell(cs.shares[c]), int(cs.counts[c])]
            + [_cell(v) for v in cs.values[c]]
        )
    writer.csv("cluster_irf.csv", header, rows)
    if data.n_contexts >= 5:
        sil = silhouette_scores(data, seed=cfg.cluster_seed)
        writer.csv(
            "silhouette.csv",
            ["k", "score"],
            [[k, _cell(s)] for k, s in zip(sil.ks, sil.scores)],
        )
    return cs


def _write_charts(writer, cfg, fits, inference, uncond, band, cluster_bundle) -> None:
    if inference is not None:
        lvl = sorted(inference.bands)[0]
        b = inference.bands[lvl]
        writer.text(
            "chart_irf_linear.svg",
            line_chart(
                inference.horizons,
                [("beta", inference.betas)],
                band=(f"{lvl:g} band", b.lower, b.upper),
                title="Linear LP impulse response",
                x_label="horizon",
                y_label="response",
            ),
        )
    for fit in fits:
        d = fit.design
        dec = contributions(fit)
        x = np.arange(d.n_obs)
        ticks = _date_ticks(d.dates)
        writer.text(
            f"chart_evidence_h{d.horizon}.svg",
            line_chart(
                x,
                [("evidence", dec.curve.values)],
                title=f"Evidence curve, horizon {d.horizon}",
                x_ticks=ticks,
                y_label="cumulative contribution",
            ),
        )
        series = [("weight", fit.weights)]
        for win in cfg.ma_windows:
            if win <= d.n_obs:
                ma = moving_average(fit.weights, win)
                padded = np.full(d.n_obs, np.nan)
                padded[win - 1 :] = ma
                series.append((f"ma{win}", padded))
        writer.text(
            f"chart_weights_h{d.horizon}.svg",
            line_chart(
                x,
                series,
                title=f"Observation weights, horizon {d.horizon}",
                x_ticks=ticks,
                y_label="weight",
            ),
        )
    if uncond is not None:
        writer.text(
            "chart_irf_forest.svg",
            line_chart(
                uncond.horizons,
                [("forest IRF", uncond.values)],
                band=(
                    f"tree band {_TREE_BAND_PCTS[0]:g}-{_TREE_BAND_PCTS[1]:g}",
                    band.lower,
                    band.upper,
                ),
                title=f"Forest impulse response, delta={uncond.delta:g}",
                x_label="horizon",
                y_label="response",
            ),
        )
    if cluster_bundle is not None:
        writer.text(
            "chart_cluster_irf.svg",
            line_chart(
                cluster_bundle.horizons,
                [
                    (f"cluster {c} (share {cluster_bundle.shares[c]:.2f})",
                     cluster_bundle.values[c])
                    for c in range(cluster_bundle.k)
                ],
                title="Cluster impulse responses",
                x_label="horizon",
                y_label="response",
            ),
        )


def _write_manifest(writer: _Writer, cfg: RunConfig, checks) -> str:
    artifacts = []
    for name in sorted(writer.written):
        data = (writer.outdir / name).read_bytes()
        artifacts.append(
            {
                "path": name,
                "bytes": len(data),
                "sha256": hashlib.sha256(data).hexdigest(),
            }
        )
    manifest = {
        "version": __version__,
        "config": config_text(cfg),
        "artifacts": artifacts,
        "self_checks": [
            {
                "name": c.name,
                "max_violation": c.max_violation,
                "tolerance": c.tolerance,
                "passed": c.passed,
            }
            for c in checks
        ],
    }
    writer.text("manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return str(writer.outdir / "manifest.json")


def verify(cfg: RunConfig) -> list[CheckRecord]:
    """Run the algebraic identity suite on the configured data.

    Covers the weight/contribution identities, FWL, the dual (pseudoinverse)
    route, the proximity recombination, the influence split, and forest
    weight duality, reporting the max absolute violation of each.
    """
    frame = load_frame(cfg)
    designs = build_designs(frame, cfg.spec())
    checks: list[CheckRecord] = []
    if cfg.wants("linear"):
        fits = _pmap(fit_linear_lp, designs)
        checks.extend(_linear_checks(fits))
        fwl = 0.0
        dual = 0.0
        prox = 0.0
        recomb = 0.0
        influence = 0.0
        for fit in fits:
            d = fit.design
            pur = purify_shock(d)
            scale = max(1.0, float(np.max(np.abs(fit.weights))))
            fwl = max(fwl, float(np.max(np.abs(pur.weights - fit.weights))) / scale)
            ds = dual_coefficients(d.X, d.y)
            dual = max(dual, float(np.max(np.abs(ds.coef - fit.coef))))
            emb = embed(d.X, d.column_names)
            cos = cosine_decomposition(emb, d.shock_col, cfg.delta)
            pwts = proximity_weights(emb, d.shock_col, cfg.delta)
            prox = max(prox, float(np.max(np.abs(pwts.weights - fit.weights))))
            lhs = pwts.weights * cfg.delta
            rhs = cos.intervention_norm * cos.cos_theta * cos.f_norms
            recomb = max(recomb, float(np.max(np.abs(lhs - rhs))))
            if d.n_obs - 1 > d.n_regressors:
                inf = influence_split(fit)
                influence = max(
                    influence,
                    float(
                        np.max(
                            np.abs(
                                inf.residual_part
                                - (1.0 - inf.leverage) * inf.loo_influence
                            )
                        )
                    ),
                )
        checks.append(CheckRecord("fwl-weights", fwl, 1e-10))
        checks.append(CheckRecord("primal-dual-coefficients", dual, 1e-8))
        checks.append(CheckRecord("proximity-weights", prox, 1e-8))
        checks.append(CheckRecord("proximity-recombination", recomb, 1e-8))
        checks.append(CheckRecord("influence-split", influence, 1e-7))
    if cfg.wants("forest"):
        params = cfg.forest_params()
        forests = _pmap(lambda d: fit_forest(d, params), designs)
        uncond = unconditional_irf(forests, cfg.delta)
        band = tree_band(forests, cfg.delta, percentiles=_TREE_BAND_PCTS)
        checks.extend(_forest_checks(forests, uncond, band))
        exact = 0.0
        for forest in forests:
            rng = np.random.default_rng(0)
            d = forest.design
            take = rng.integers(0, d.n_obs, size=min(20, d.n_obs))
            queries = d.X[take]
            w = forest_weights(forest, queries)
            preds = forest_predictions(forest, queries)
            for i in range(w.shape[0]):
                exact = max(exact, abs(preds[i] - weighted_sum(w[i], d.y)))
        checks.append(CheckRecord("forest-weight-duality", exact, 0.0))
    return checks
