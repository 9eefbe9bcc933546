"""Concentration statistics, robustness trims, and influence cross-checks.

Concentration asks how much of an estimate rides on a few observations: the
share of total absolute weight (or absolute contribution) carried by the top
Q percent of observations.  Trimming zeroes extreme weights and re-sums the
surviving contributions without re-estimating.  The influence split separates
each observation's pull into a systematic part (through the fitted value) and
a residual part, and ties the latter to literal leave-one-out refits through
the leverage identity.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .dataset import HorizonDesign
from .linear import LinearLPFit, fit_linear_lp
from .util import DesignError, EstimationError, moving_average, weighted_sum

__all__ = [
    "ConcentrationShare",
    "ConcentrationReport",
    "TrimmedIRF",
    "InfluenceSplit",
    "WindowPaths",
    "concentration",
    "concentration_report",
    "trimmed_irf",
    "influence_split",
    "window_paths",
    "moving_average",
]


@dataclass(frozen=True)
class ConcentrationShare:
    """Share of total absolute mass held by the top observations."""

    share: float
    count: int
    floored: bool  # True when floor(q*T/100) was 0 and one observation was used


def concentration(values: np.ndarray, q: float = 10.0) -> ConcentrationShare:
    """Top-q-percent share of the absolute values of a weight or contribution vector."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise DesignError("concentration expects a nonempty 1-d vector")
    if not 0.0 < q <= 100.0:
        raise DesignError(f"q must be in (0, 100], got {q}")
    a = np.abs(v)
    total = float(np.sum(a))
    if total == 0.0:
        raise EstimationError("concentration is undefined for an all-zero vector")
    count = int(q * a.size / 100.0)
    floored = count == 0
    if floored:
        count = 1
    top = np.sort(a)[::-1][:count]
    return ConcentrationShare(share=float(np.sum(top)) / total, count=count, floored=floored)


@dataclass
class ConcentrationReport:
    """WC/CC per horizon at a common q."""

    q: float
    horizons: np.ndarray
    wc: np.ndarray
    cc: np.ndarray
    counts: np.ndarray
    floored: np.ndarray
    wc_horizon_invariant: bool


def concentration_report(
    weight_vectors: list[np.ndarray],
    outcome_vectors: list[np.ndarray],
    horizons: np.ndarray,
    q: float = 10.0,
) -> ConcentrationReport:
    """Weight and contribution concentration for one weight vector per horizon.

    WC uses the weights alone; CC uses the per-observation contributions
    w_t * y_{t+h}.  When every horizon shares one design (the common-sample
    policy) the weight vectors coincide and WC is horizon-invariant; the flag
    records whether that held so reports can print WC once.
    """
    if not len(weight_vectors) == len(outcome_vectors) == len(horizons):
        raise DesignError("weight, outcome, and horizon lists must align")
    wc, cc, counts, floored = [], [], [], []
    for w, y in zip(weight_vectors, outcome_vectors):
        sw = concentration(w, q)
        sc = concentration(np.asarray(w) * np.asarray(y), q)
        wc.append(sw.share)
        cc.append(sc.share)
        counts.append(sw.count)
        floored.append(sw.floored)
    wc = np.array(wc)
    invariant = bool(wc.size > 0 and np.all(wc == wc[0]))
    return ConcentrationReport(
        q=float(q),
        horizons=np.asarray(horizons),
        wc=wc,
        cc=np.array(cc),
        counts=np.array(counts),
        floored=np.array(floored),
        wc_horizon_invariant=invariant,
    )


@dataclass(frozen=True)
class TrimmedIRF:
    """Estimate recomputed after zeroing extreme weights."""

    value: float
    n_trimmed: int
    lower_threshold: float
    upper_threshold: float
    kept: np.ndarray


def trimmed_irf(
    weights: np.ndarray,
    outcomes: np.ndarray,
    lower_pct: float = 1.0,
    upper_pct: float = 99.0,
    use_contributions: bool = False,
) -> TrimmedIRF:
    """Zero weights at or beyond the percentile thresholds, keep the rest's sum.

    Thresholds are empirical percentiles (linear interpolation) of the signed
    weights, or of the signed contributions when ``use_contributions`` is set.
    A percentile of 0 (or 100) trims nothing on that side.  No re-estimation
    happens: the trimmed value is the sum of surviving contributions.
    """
    w = np.asarray(weights, dtype=np.float64)
    y = np.asarray(outcomes, dtype=np.float64)
    if w.shape != y.shape or w.ndim != 1:
        raise DesignError("weights and outcomes must be aligned 1-d vectors")
    if not 0.0 <= lower_pct < upper_pct <= 100.0:
        raise DesignError(
            f"need 0 <= lower < upper <= 100, got ({lower_pct}, {upper_pct})"
        )
    basis = w * y if use_contributions else w
    lo = float(np.percentile(basis, lower_pct))
    hi = float(np.percentile(basis, upper_pct))
    kept = np.ones(w.size, dtype=bool)
    if lower_pct > 0.0:
        kept &= ~(basis <= lo)
    if upper_pct < 100.0:
        kept &= ~(basis >= hi)
    if not kept.any():
        raise EstimationError("trimming removed every observation")
    value = weighted_sum(np.where(kept, w, 0.0), y)
    return TrimmedIRF(
        value=value,
        n_trimmed=int(w.size - kept.sum()),
        lower_threshold=lo,
        upper_threshold=hi,
        kept=kept,
    )


@dataclass
class InfluenceSplit:
    """Per-observation pull on the estimate, systematic versus residual."""

    systematic: np.ndarray  # w_t * fitted_t, sums to beta
    residual_part: np.ndarray  # w_t * residual_t, sums to zero
    leverage: np.ndarray  # hat-matrix diagonal
    loo_influence: np.ndarray  # beta minus the leave-one-out beta
    beta: float


def influence_split(fit: LinearLPFit) -> InfluenceSplit:
    """Split w*y into w*yhat + w*vhat and tie the latter to leave-one-out refits.

    The leave-one-out influences are computed by literally refitting without
    each observation; the identity w_t vhat_t = (1 - H_tt) * LOOI_t is checked
    here rather than trusted.
    """
    x = fit.design.X
    y = fit.design.y
    t, k = x.shape
    if t - 1 <= k:
        raise EstimationError(
            f"leave-one-out refits need T - 1 > K, got T={t}, K={k}"
        )
    systematic = fit.weights * fit.fitted
    residual_part = fit.weights * fit.residuals
    q, _ = np.linalg.qr(x)
    leverage = np.sum(q * q, axis=1)
    shock = fit.design.shock_col
    loo = np.empty(t)
    for i in range(t):
        keep = np.ones(t, dtype=bool)
        keep[i] = False
        coef, _, _, _ = np.linalg.lstsq(x[keep], y[keep], rcond=None)
        loo[i] = fit.beta - coef[shock]
    scale = max(1.0, float(np.max(np.abs(residual_part))))
    if np.max(np.abs(residual_part - (1.0 - leverage) * loo)) > 1e-7 * scale:
        raise EstimationError(
            "leverage identity violated; the design is too ill-conditioned to trust"
        )
    return InfluenceSplit(
        systematic=systematic,
        residual_part=residual_part,
        leverage=leverage,
        loo_influence=loo,
        beta=fit.beta,
    )


@dataclass
class WindowPaths:
    """Expanding, rolling, and cumulative-contribution views of one horizon's beta."""

    dates: tuple[str, ...]
    expanding: np.ndarray  # NaN until enough rows accumulate
    rolling: np.ndarray  # NaN until the first full window
    cumulative: np.ndarray
    omega: int
    beta: float


def window_paths(design: HorizonDesign, omega: int) -> WindowPaths:
    """Re-estimate beta over expanding and rolling subsamples, plus the c-path.

    Each point is an independent OLS on the subsample ending at that date.
    The cumulative path needs no refits: it is the running sum of the full
    fit's contributions, ending at beta.
    """
    t = design.n_obs
    k = design.n_regressors
    min_rows = k + 2
    if omega < min_rows:
        raise DesignError(f"rolling window must be >= K + 2 = {min_rows}, got {omega}")
    if omega > t:
        raise DesignError(f"rolling window {omega} exceeds sample length {t}")
    full = fit_linear_lp(design)
    cumulative = np.cumsum(full.weights * design.y)

    def sub_beta(lo: int, hi: int) -> float:
        sub = dataclasses.replace(
            design, X=design.X[lo:hi], y=design.y[lo:hi], dates=design.dates[lo:hi]
        )
        return fit_linear_lp(sub).beta

    expanding = np.full(t, np.nan)
    for m in range(min_rows, t + 1):
        expanding[m - 1] = sub_beta(0, m)
    rolling = np.full(t, np.nan)
    for m in range(omega, t + 1):
        rolling[m - 1] = sub_beta(m - omega, m)
    return WindowPaths(
        dates=design.dates,
        expanding=expanding,
        rolling=rolling,
        cumulative=cumulative,
        omega=int(omega),
        beta=full.beta,
    )
