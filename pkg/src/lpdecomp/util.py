"""Shared numeric helpers and the package exception hierarchy."""
from __future__ import annotations

import numpy as np

__all__ = [
    "LPDecompError",
    "DataError",
    "DesignError",
    "EstimationError",
    "rank_tolerance",
    "weighted_sum",
    "moving_average",
    "fmt_float",
]


class LPDecompError(Exception):
    """Base class for all lpdecomp failures."""


class DataError(LPDecompError):
    """Raised when input data violates a precondition (dates, missing values, shapes)."""


class DesignError(LPDecompError):
    """Raised when a design matrix cannot support the requested estimate."""


class EstimationError(LPDecompError):
    """Raised when an estimator's own preconditions fail at fit time."""


def rank_tolerance(shape: tuple[int, int], sv_max: float) -> float:
    """Singular-value cutoff below which a direction counts as numerically null.

    The same cutoff is used by the least-squares rank check and by the
    pseudoinverse truncation in the dual solver so both agree on what
    "rank deficient" means.
    """
    t, k = shape
    return max(t, k) * np.finfo(np.float64).eps * sv_max


def weighted_sum(weights: np.ndarray, values: np.ndarray) -> float:
    """Canonical reduction used for every weight-times-outcome identity.

    All predictions and decomposition checks funnel through this one routine
    so that "the weighted sum equals the prediction" can hold bit for bit.
    """
    w = np.ascontiguousarray(weights, dtype=np.float64)
    v = np.ascontiguousarray(values, dtype=np.float64)
    if w.shape != v.shape:
        raise ValueError(f"shape mismatch in weighted_sum: {w.shape} vs {v.shape}")
    return float(np.sum(w * v))


def moving_average(series: np.ndarray, window: int) -> np.ndarray:
    """Trailing moving average; output has length len(series) - window + 1."""
    x = np.asarray(series, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("moving_average expects a 1-d series")
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    if window > x.size:
        raise DataError(
            f"moving average window {window} exceeds series length {x.size}"
        )
    kernel = np.full(window, 1.0 / window)
    return np.convolve(x, kernel, mode="valid")


def fmt_float(x: float) -> str:
    """Deterministic shortest round-trip text for a float (CSV/JSON/SVG output)."""
    if x != x:
        return "nan"
    return repr(float(x))
