"""Newey-West standard errors and normal confidence bands for IRF paths.

The long-run variance of the score series g_t = X_t * v_{t+h} is estimated
with the Bartlett kernel:

    S = Gamma_0 + sum_{l=1..L} (1 - l/(L+1)) (Gamma_l + Gamma_l')

and the coefficient variance is the sandwich (X'X)^{-1} (T S) (X'X)^{-1}.
With L = 0 this is exactly the White heteroskedasticity-robust estimator.
The default bandwidth grows with the horizon, L = h + 1, because the
projection residuals are serially correlated by construction up to order h.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .linear import LinearLPFit
from .util import EstimationError

__all__ = ["HACResult", "ConfidenceBand", "PathInference", "newey_west_se", "confidence_band", "path_inference"]


@dataclass
class HACResult:
    se: float
    variance: float
    bandwidth: int
    dof_adjusted: bool


@dataclass
class ConfidenceBand:
    level: float
    z: float
    lower: np.ndarray
    upper: np.ndarray


@dataclass
class PathInference:
    """Per-horizon betas, HAC ses, and bands at the requested levels."""

    horizons: np.ndarray
    betas: np.ndarray
    ses: np.ndarray
    bandwidths: np.ndarray
    bands: dict[float, ConfidenceBand]


def newey_west_se(fit: LinearLPFit, bandwidth: int | None = None, dof_adjust: bool = True) -> HACResult:
    """HAC standard error of the shock coefficient for one horizon fit."""
    x = fit.design.X
    t, k = x.shape
    h = fit.design.horizon
    lag = h + 1 if bandwidth is None else int(bandwidth)
    if lag < 0:
        raise EstimationError(f"bandwidth must be >= 0, got {lag}")
    if lag >= t:
        raise EstimationError(
            f"bandwidth {lag} must be smaller than the sample size {t} at horizon {h}"
        )
    g = x * fit.residuals[:, None]
    meat = g.T @ g / t
    for l in range(1, lag + 1):
        gamma = g[l:].T @ g[:-l] / t
        meat += (1.0 - l / (lag + 1.0)) * (gamma + gamma.T)
    e = np.zeros(k)
    e[fit.design.shock_col] = 1.0
    a = np.linalg.solve(x.T @ x, e)
    variance = float(t * (a @ meat @ a))
    if dof_adjust:
        variance *= t / (t - k)
    if variance < 0.0:
        # Bartlett weights keep S psd, so this can only be roundoff at zero
        variance = 0.0
    return HACResult(se=float(np.sqrt(variance)), variance=variance, bandwidth=lag, dof_adjusted=dof_adjust)


def confidence_band(betas: np.ndarray, ses: np.ndarray, level: float) -> ConfidenceBand:
    """Two-sided normal band beta +- z_{(1+level)/2} * se."""
    if not 0.0 < level < 1.0:
        raise EstimationError(f"band level must be in (0, 1), got {level}")
    betas = np.atleast_1d(np.asarray(betas, dtype=np.float64))
    ses = np.atleast_1d(np.asarray(ses, dtype=np.float64))
    if betas.shape != ses.shape:
        raise EstimationError("betas and ses must align")
    z = float(norm.ppf(0.5 + level / 2.0))
    return ConfidenceBand(level=level, z=z, lower=betas - z * ses, upper=betas + z * ses)


def path_inference(
    fits: list[LinearLPFit],
    bandwidth: int | None = None,
    dof_adjust: bool = True,
    levels: tuple[float, ...] = (0.84, 0.95),
) -> PathInference:
    """HAC inference for a whole IRF path, one fit per horizon."""
    horizons = np.array([f.design.horizon for f in fits])
    betas = np.array([f.beta for f in fits])
    results = [newey_west_se(f, bandwidth=bandwidth, dof_adjust=dof_adjust) for f in fits]
    ses = np.array([r.se for r in results])
    bands = {lvl: confidence_band(betas, ses, lvl) for lvl in levels}
    return PathInference(
        horizons=horizons,
        betas=betas,
        ses=ses,
        bandwidths=np.array([r.bandwidth for r in results]),
        bands=bands,
    )
