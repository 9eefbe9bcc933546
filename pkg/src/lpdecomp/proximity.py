"""The dual reading of least squares: weights as proximity differentials.

Embedding the rows of X as F_t = X_t U L^{-1/2}, where X'X = U L U' with
eigenvalues sorted descending, makes F'F the identity, so inner products in
F-space compute X_i (X'X)^{-1} X_j'.  The per-observation weight on y_t is a
difference of proximities between observation t and two counterfactual
contexts that differ only in the shock entry:

    w_t = (1/delta) * ( <F_tau_delta, F_t> - <F_tau_0, F_t> )

The difference vector I = F_tau_delta - F_tau_0 is the intervention; splitting
its inner products into norms and cosines separates "how relevant is date t"
from "how large is date t in the embedding".  The weights do not depend on the
dose delta or on the context entries outside the shock column.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import HorizonDesign
from .linear import _check_rank
from .util import DesignError, rank_tolerance

__all__ = [
    "Embedding",
    "ProximityWeights",
    "DualSolution",
    "CosineDecomposition",
    "embed",
    "default_context",
    "proximity_weights",
    "dual_coefficients",
    "cosine_decomposition",
]


@dataclass
class Embedding:
    """Row embedding F plus the spectral pieces it was built from."""

    F: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def map_rows(self, rows: np.ndarray) -> np.ndarray:
        """Embed arbitrary rows given in design coordinates."""
        rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
        return rows @ (self.eigenvectors / np.sqrt(self.eigenvalues))


@dataclass
class ProximityWeights:
    weights: np.ndarray
    intervention: np.ndarray
    f_treat: np.ndarray
    f_base: np.ndarray
    delta: float


@dataclass
class DualSolution:
    coef: np.ndarray
    rank: int
    rank_deficient: bool


@dataclass
class CosineDecomposition:
    cos_theta: np.ndarray
    f_norms: np.ndarray
    intervention_norm: float
    delta: float
    degenerate: np.ndarray  # rows where F_t has zero norm and the cosine is set to 0

    def recombined_weights(self) -> np.ndarray:
        """w_t = ||I|| * cos(theta_t) * ||F_t|| / delta, the split put back together."""
        return self.intervention_norm * self.cos_theta * self.f_norms / self.delta


def embed(x: np.ndarray, column_names: tuple[str, ...] | None = None) -> Embedding:
    """Spectral embedding of the design rows with F'F = I.

    Eigenvalues are those of the forward Gram matrix X'X, sorted descending.
    A non-positive eigenvalue means X is numerically rank deficient and is a
    hard failure rather than something to truncate silently.
    """
    x = np.asarray(x, dtype=np.float64)
    t, k = x.shape
    names = column_names or tuple(f"c{i}" for i in range(k))
    _check_rank(x, tuple(names))
    lam, u = np.linalg.eigh(x.T @ x)
    lam, u = lam[::-1].copy(), u[:, ::-1].copy()
    if lam[-1] <= 0.0:
        raise DesignError(
            f"Gram matrix has a non-positive eigenvalue ({lam[-1]:.3e}); "
            "columns are numerically collinear"
        )
    f = x @ (u / np.sqrt(lam))
    return Embedding(F=f, eigenvalues=lam, eigenvectors=u)


def default_context(x: np.ndarray, shock_col: int) -> np.ndarray:
    """Average design row with the shock entry zeroed out."""
    ctx = np.asarray(x, dtype=np.float64).mean(axis=0)
    ctx[shock_col] = 0.0
    return ctx


def _scenario_rows(context: np.ndarray, shock_col: int, delta: float) -> tuple[np.ndarray, np.ndarray]:
    base = np.asarray(context, dtype=np.float64).copy()
    base[shock_col] = 0.0
    treat = base.copy()
    treat[shock_col] = delta
    return treat, base


def proximity_weights(
    embedding: Embedding,
    shock_col: int,
    delta: float = 1.0,
    context: np.ndarray | None = None,
) -> ProximityWeights:
    """Per-observation weights as a scaled proximity differential.

    ``context`` is any row in design coordinates; entries outside the shock
    column cancel in the differential, so the result matches the regression
    weight row for every choice.  ``delta`` must be nonzero and likewise
    cancels after the 1/delta scaling.
    """
    if delta == 0.0:
        raise DesignError("delta must be nonzero; the differential needs a dose")
    x_dim = embedding.eigenvectors.shape[0]
    if context is None:
        # recover the average design row from the embedding: X = F L^{1/2} U'
        back = np.sqrt(embedding.eigenvalues)[:, None] * embedding.eigenvectors.T
        context = embedding.F.mean(axis=0) @ back
    ctx = np.asarray(context, dtype=np.float64)
    if ctx.shape != (x_dim,):
        raise DesignError(f"context must have {x_dim} entries, got shape {ctx.shape}")
    treat, base = _scenario_rows(ctx, shock_col, delta)
    f_pair = embedding.map_rows(np.vstack([treat, base]))
    f_treat, f_base = f_pair[0], f_pair[1]
    intervention = f_treat - f_base
    weights = embedding.F @ intervention / delta
    return ProximityWeights(
        weights=weights,
        intervention=intervention,
        f_treat=f_treat,
        f_base=f_base,
        delta=float(delta),
    )


def dual_coefficients(x: np.ndarray, y: np.ndarray) -> DualSolution:
    """Coefficients through the observation-space route b = X'(XX')^+ y.

    The pseudoinverse truncation uses the same singular-value cutoff as the
    primal rank check, so both routes agree on which directions exist.  When X
    is rank deficient this returns the minimum-norm solution, flagged.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    t, k = x.shape
    sv = np.linalg.svd(x, compute_uv=False)
    tol = rank_tolerance((t, k), float(sv[0]))
    rank = int(np.sum(sv > tol))
    if rank == 0:
        raise DesignError("design matrix is numerically zero")
    gram = x @ x.T
    lam, v = np.linalg.eigh(gram)
    lam, v = lam[::-1], v[:, ::-1]  # descending; keep the `rank` live directions
    v_kept = v[:, :rank]
    inv_applied = v_kept @ ((v_kept.T @ y) / lam[:rank])
    coef = x.T @ inv_applied
    return DualSolution(coef=coef, rank=rank, rank_deficient=rank < k)


def cosine_decomposition(
    embedding: Embedding,
    shock_col: int,
    delta: float = 1.0,
    context: np.ndarray | None = None,
) -> CosineDecomposition:
    """Split each proximity into cos(theta_t) and the two norms.

    Rows whose embedded norm is exactly zero get cos(theta) = 0 and are
    flagged in ``degenerate`` instead of dividing by zero.
    """
    prox = proximity_weights(embedding, shock_col, delta, context)
    f_norms = np.linalg.norm(embedding.F, axis=1)
    i_norm = float(np.linalg.norm(prox.intervention))
    if i_norm == 0.0:
        raise DesignError("intervention vector is zero; check the shock column")
    inner = embedding.F @ prox.intervention
    degenerate = f_norms == 0.0
    denom = np.where(degenerate, 1.0, i_norm * f_norms)
    cos_theta = np.where(degenerate, 0.0, inner / denom)
    return CosineDecomposition(
        cos_theta=cos_theta,
        f_norms=f_norms,
        intervention_norm=i_norm,
        delta=float(delta),
        degenerate=degenerate,
    )
