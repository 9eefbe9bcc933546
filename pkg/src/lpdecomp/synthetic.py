"""Simulated series with known impulse responses.

These generators back the package's statistical self-checks and the bundled
demo dataset.  Each scenario returns the frame together with ready-made
specifications and the true response path, so tests and scripts do not
re-derive them.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import LPSpec, TimeSeriesFrame

__all__ = [
    "LinearPathScenario",
    "AsymmetricScenario",
    "TwoRegimeIRFs",
    "linear_path_scenario",
    "asymmetric_scenario",
    "two_regime_irfs",
    "demo_frame",
]


def _month_dates(n: int, start_year: int = 1950) -> tuple[str, ...]:
    return tuple(f"{start_year + i // 12:04d}-{i % 12 + 1:02d}" for i in range(n))


@dataclass(frozen=True)
class LinearPathScenario:
    """Linear moving-average process whose shock response is decay**h."""

    frame: TimeSeriesFrame
    true_path: np.ndarray
    forest_spec: LPSpec
    linear_spec: LPSpec
    delta: float


def linear_path_scenario(
    t: int = 400,
    horizons: int = 6,
    decay: float = 0.8,
    noise_sd: float = 0.2,
    seed: int = 0,
    ma_order: int = 30,
    n_lead_controls: int = 5,
) -> LinearPathScenario:
    """y_t = sum_j decay^j s_{t-j} + noise, s iid standard normal.

    The response of y_{t+h} to a unit shock at t is decay**h by construction.
    The frame also carries lead columns s_{t+2}..s_{t+n+1}: at horizon h the
    projection residual contains the h intervening future shocks, which no
    amount of smoothing removes, so conditioning on them is what makes the
    forest's unconditional IRF estimable at T of a few hundred.  They are
    exogenous, hence harmless for the dose contrast.  The forest spec takes
    them contemporaneously (columns span s_{t+1}..s_{t+n+1} through the lag
    structure without ever duplicating s_t); the linear spec takes them
    lag-only, because the contemporaneous layout duplicates columns and is
    rejected by the rank check.
    """
    rng = np.random.default_rng(seed)
    burn = 40
    pad = n_lead_controls + 3
    s = rng.standard_normal(t + burn + pad)
    coefs = decay ** np.arange(ma_order + 1)
    y = np.convolve(s, coefs, mode="full")[: t + burn + pad]
    y = y + noise_sd * rng.standard_normal(t + burn + pad)
    cols = {"y": y[burn : burn + t], "s": s[burn : burn + t]}
    controls = []
    for j in range(2, 2 + n_lead_controls):
        name = f"slead{j}"
        cols[name] = s[burn + j : burn + j + t]
        controls.append(name)
    frame = TimeSeriesFrame(dates=_month_dates(t), columns=cols)
    forest_spec = LPSpec(
        target="y", shock="s", controls=tuple(controls), lags=1,
        horizons=horizons, contemporaneous_controls=True,
    )
    linear_spec = LPSpec(
        target="y", shock="s", controls=tuple(controls), lags=1,
        horizons=horizons, contemporaneous_controls=False,
    )
    return LinearPathScenario(
        frame=frame,
        true_path=decay ** np.arange(horizons + 1),
        forest_spec=forest_spec,
        linear_spec=linear_spec,
        delta=1.0,
    )


@dataclass(frozen=True)
class AsymmetricScenario:
    """Sign-dependent process: positive and negative shocks act with different slopes."""

    frame: TimeSeriesFrame
    spec: LPSpec
    pos_effect: float
    neg_effect: float
    delta: float


def asymmetric_scenario(
    t: int = 400,
    pos_effect: float = 1.0,
    neg_effect: float = 0.2,
    noise_sd: float = 0.1,
    seed: int = 0,
) -> AsymmetricScenario:
    """y_t = pos*max(s_{t-1},0) + neg*min(s_{t-1},0) + noise.

    The response to a +1 shock at horizon 1 is pos_effect and to a -1 shock
    is -neg_effect; a linear fit sees a slope between the two.
    """
    rng = np.random.default_rng(seed)
    s = rng.standard_normal(t)
    eps = rng.standard_normal(t)
    y = np.zeros(t)
    for i in range(1, t):
        y[i] = (
            pos_effect * max(s[i - 1], 0.0)
            + neg_effect * min(s[i - 1], 0.0)
            + noise_sd * eps[i]
        )
    frame = TimeSeriesFrame(dates=_month_dates(t), columns={"y": y, "s": s})
    spec = LPSpec(target="y", shock="s", lags=1, horizons=1)
    return AsymmetricScenario(
        frame=frame, spec=spec, pos_effect=pos_effect, neg_effect=neg_effect, delta=1.0
    )


@dataclass(frozen=True)
class TwoRegimeIRFs:
    """Per-context IRF paths drawn from two distinct regimes, with labels."""

    matrix: np.ndarray  # (n_contexts, horizons + 1)
    labels: np.ndarray  # regime index per row
    regime_paths: np.ndarray  # (2, horizons + 1)
    dates: tuple[str, ...]


def two_regime_irfs(
    n_rows: int = 200,
    horizons: int = 8,
    noise_sd: float = 0.1,
    seed: int = 0,
) -> TwoRegimeIRFs:
    """Rows are one of two response paths plus iid noise, in random order."""
    rng = np.random.default_rng(seed)
    h = np.arange(horizons + 1)
    paths = np.vstack([1.0 * 0.8 ** h, -0.4 * 0.9 ** h])
    labels = (rng.random(n_rows) < 0.5).astype(np.int64)
    matrix = paths[labels] + noise_sd * rng.standard_normal((n_rows, horizons + 1))
    return TwoRegimeIRFs(
        matrix=matrix, labels=labels, regime_paths=paths, dates=_month_dates(n_rows)
    )


def demo_frame(t: int = 360, seed: int = 11) -> TimeSeriesFrame:
    """Bundled demo process: y_t = 0.6 y_{t-1} + 0.9 s_t + 0.25 g_t + 0.3 eps_t.

    s is the iid shock of interest (response path 0.9 * 0.6**h), g an
    autocorrelated control.
    """
    rng = np.random.default_rng(seed)
    s = rng.standard_normal(t)
    g = np.zeros(t)
    y = np.zeros(t)
    eps = rng.standard_normal(t)
    eta = rng.standard_normal(t)
    for i in range(1, t):
        g[i] = 0.7 * g[i - 1] + 0.5 * eta[i]
        y[i] = 0.6 * y[i - 1] + 0.9 * s[i] + 0.25 * g[i] + 0.3 * eps[i]
    return TimeSeriesFrame(
        dates=_month_dates(t, start_year=1960), columns={"y": y, "s": s, "g": g}
    )
