"""Shared fuzz-corpus builders used by module tests and the acceptance suite."""
import numpy as np

from lpdecomp.dataset import HorizonDesign, LPSpec, TimeSeriesFrame, build_designs


def month_dates(n, start_year=1900):
    out = []
    for i in range(n):
        y, m = divmod(start_year * 12 + i, 12)
        out.append(f"{y:04d}-{m + 1:02d}")
    return tuple(out)


def direct_design(rng, t, k, horizon=0):
    """Random correlated design built by hand: [intercept, shock, K-2 controls]."""
    s = rng.standard_normal(t)
    cols = [np.ones(t), s]
    names = ["const", "s"]
    if k > 2:
        mix = rng.standard_normal((k - 2, k - 2)) * 0.5 + np.eye(k - 2)
        raw = rng.standard_normal((t, k - 2)) @ mix
        raw += np.outer(s, rng.uniform(-0.8, 0.8, k - 2))  # correlate with the shock
        for j in range(k - 2):
            cols.append(raw[:, j])
            names.append(f"z{j}")
    x = np.column_stack(cols)
    coef = rng.standard_normal(k)
    y = x @ coef + rng.standard_normal(t)
    return HorizonDesign(
        horizon=horizon,
        y=y,
        X=x,
        shock_col=1,
        column_names=tuple(names),
        dates=month_dates(t),
        target="y",
        shock="s",
        lags=0,
        sample_policy="maximal",
    )


def pipeline_designs(rng):
    """Random designs produced through frame -> spec -> build_designs."""
    while True:
        p = int(rng.integers(0, 4))
        nc = int(rng.integers(0, 4))
        trend = int(rng.integers(0, 3))
        horizons = int(rng.integers(0, 5))
        k = 2 + trend + 2 * p + nc * p
        if 2 <= k <= 20:
            break
    t = int(rng.integers(max(48, k + p + horizons + 12), 401))
    names = tuple(f"x{i}" for i in range(nc))
    cols = {"y": rng.standard_normal(t), "s": rng.standard_normal(t)}
    for nm in names:
        cols[nm] = rng.standard_normal(t) + 0.3 * cols["s"]
    frame = TimeSeriesFrame(dates=month_dates(t), columns=cols)
    spec = LPSpec(
        target="y",
        shock="s",
        controls=names,
        lags=p,
        horizons=horizons,
        trend_degree=trend,
        common_sample=bool(rng.integers(0, 2)),
    )
    return build_designs(frame, spec)


def make_fuzz_corpus(n_designs, seed):
    """At least n_designs random designs, T in [40, 400], K in [2, 20]."""
    rng = np.random.default_rng(seed)
    corpus = []
    while len(corpus) < n_designs:
        if rng.uniform() < 0.5:
            t = int(rng.integers(40, 401))
            k = int(rng.integers(2, 21))
            if t <= k + 2:
                continue
            corpus.append(direct_design(rng, t, k))
        else:
            corpus.extend(pipeline_designs(rng))
    assert all(40 <= d.n_obs <= 400 and 2 <= d.n_regressors <= 20 for d in corpus)
    return corpus
