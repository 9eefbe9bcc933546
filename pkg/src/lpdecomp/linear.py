"""OLS local projections and the exact decomposition of the shock coefficient.

For the horizon-h regression y = X b + v the shock coefficient is a linear
statistic of the outcomes:

    beta_h = w . y,   w = [(X'X)^{-1} X']_{shock row}

so each observation contributes c_t = w_t * y_t and the running sum of the
contributions is an evidence curve that ends exactly at beta_h.  The weights
depend only on X; with an intercept they sum to zero.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .dataset import HorizonDesign
from .util import DesignError, EstimationError, rank_tolerance, weighted_sum

__all__ = [
    "LinearLPFit",
    "PurifiedShock",
    "EvidenceCurve",
    "Decomposition",
    "fit_linear_lp",
    "purify_shock",
    "contributions",
]


@dataclass
class LinearLPFit:
    """Coefficients, weights, and residuals for one horizon's projection."""

    design: HorizonDesign
    coef: np.ndarray
    weights: np.ndarray
    fitted: np.ndarray
    residuals: np.ndarray
    rank: int

    @property
    def beta(self) -> float:
        """Shock coefficient, the horizon-h impulse response."""
        return float(self.coef[self.design.shock_col])

    @property
    def horizon(self) -> int:
        return self.design.horizon


@dataclass
class PurifiedShock:
    """Shock with everything explainable by the other regressors removed.

    ``s_tilde`` is the residual from regressing the shock on the remaining
    columns; ``s_star = s_tilde / Var(s_tilde)`` uses the population (1/T)
    variance so that beta_h = (1/T) * sum(s_star * y) holds exactly, and the
    weight vector is s_tilde / (s_tilde'.s_tilde), identical to the primal row.
    """

    s_tilde: np.ndarray
    s_star: np.ndarray
    weights: np.ndarray
    variance: float


@dataclass
class EvidenceCurve:
    """Cumulative contributions in date order; the last value is beta_h."""

    values: np.ndarray
    dates: tuple[str, ...]

    @property
    def terminal(self) -> float:
        return float(self.values[-1])


@dataclass
class Decomposition:
    contributions: np.ndarray
    curve: EvidenceCurve
    beta: float


def _check_rank(x: np.ndarray, column_names: tuple[str, ...]) -> tuple[int, float]:
    """Return (rank, tolerance); raise naming the dependent columns if deficient."""
    t, k = x.shape
    sv = np.linalg.svd(x, compute_uv=False)
    tol = rank_tolerance((t, k), float(sv[0]))
    rank = int(np.sum(sv > tol))
    if rank < k:
        # pivoted QR pushes the numerically dependent columns to the end
        _, r, piv = scipy.linalg.qr(x, mode="economic", pivoting=True)
        offending = sorted(column_names[j] for j in piv[rank:])
        raise DesignError(
            f"design matrix is rank deficient (rank {rank} of {k}); "
            f"dependent column(s): {', '.join(offending)}"
        )
    return rank, tol


def fit_linear_lp(design: HorizonDesign) -> LinearLPFit:
    """Least-squares fit of one horizon design, with the shock weight vector.

    Solved through a QR factorization; the rank check uses the singular-value
    cutoff max(T, K) * eps * sv_max and fails loudly, naming the collinear
    columns, rather than silently dropping directions.
    """
    x, y = design.X, design.y
    t, k = x.shape
    if t <= k:
        raise EstimationError(
            f"need more observations than regressors: T={t}, K={k} at horizon {design.horizon}"
        )
    rank, _ = _check_rank(x, design.column_names)
    q, r = np.linalg.qr(x)
    coef = scipy.linalg.solve_triangular(r, q.T @ y)
    # one iterative-refinement pass; ill-conditioned designs otherwise leak
    # cond(X)*eps into the weight-sum and contribution identities
    coef += scipy.linalg.solve_triangular(r, q.T @ (y - x @ coef))
    # weights: shock row of (X'X)^{-1} X'  ==  X (X'X)^{-1} e_shock, transposed
    e = np.zeros(k)
    e[design.shock_col] = 1.0

    def _normal_solve(rhs: np.ndarray) -> np.ndarray:
        half = scipy.linalg.solve_triangular(r.T, rhs, lower=True)
        return scipy.linalg.solve_triangular(r, half)

    a = _normal_solve(e)
    a += _normal_solve(e - x.T @ (x @ a))
    weights = x @ a
    fitted = x @ coef
    return LinearLPFit(
        design=design,
        coef=coef,
        weights=weights,
        fitted=fitted,
        residuals=y - fitted,
        rank=rank,
    )


def purify_shock(design: HorizonDesign) -> PurifiedShock:
    """Partial the other regressors out of the shock (the FWL residual route).

    Runs even when the full X is rank deficient, as long as the deficiency is
    the shock itself: a shock that the remaining columns reproduce exactly has
    no variation left and is reported as such.
    """
    x = design.X
    s = x[:, design.shock_col]
    z = np.delete(x, design.shock_col, axis=1)
    gamma, *_ = np.linalg.lstsq(z, s, rcond=None)
    s_tilde = s - z @ gamma
    # refine the projection once so s_tilde is orthogonal to Z at machine level
    correction, *_ = np.linalg.lstsq(z, s_tilde, rcond=None)
    s_tilde = s_tilde - z @ correction
    sv_max = float(np.linalg.svd(x, compute_uv=False)[0])
    tol = rank_tolerance(x.shape, sv_max)
    ss = float(np.sum(s_tilde * s_tilde))
    if np.sqrt(ss) <= tol:
        raise EstimationError(
            f"shock {design.shock!r} has no variation left after partialling out "
            f"the other regressors at horizon {design.horizon}"
        )
    variance = float(np.mean(s_tilde * s_tilde))
    return PurifiedShock(
        s_tilde=s_tilde,
        s_star=s_tilde / variance,
        weights=s_tilde / ss,
        variance=variance,
    )


def contributions(fit: LinearLPFit) -> Decomposition:
    """Per-observation contributions w_t * y_t and their running-sum curve."""
    c = fit.weights * fit.design.y
    curve = EvidenceCurve(values=np.cumsum(c), dates=fit.design.dates)
    return Decomposition(contributions=c, curve=curve, beta=weighted_sum(fit.weights, fit.design.y))
