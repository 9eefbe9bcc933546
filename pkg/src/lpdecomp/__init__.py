"""Local projections with exact per-observation weight and contribution decompositions."""

__version__ = "0.1.0"

from .clustering import IRFDataset, cluster_irf, irf_dataset, kmeans, silhouette_scores
from .config import RunConfig, load_config
from .dataset import (
    HorizonDesign,
    LPSpec,
    TimeSeriesFrame,
    build_designs,
    load_csv,
    subsample,
)
from .diagnostics import (
    concentration,
    concentration_report,
    influence_split,
    trimmed_irf,
    window_paths,
)
from .forest import (
    ForestParams,
    fit_forest,
    fit_forest_path,
    forest_predictions,
    forest_weights,
    scenario_irf,
    scenario_weights,
    tree_band,
    unconditional_irf,
)
from .hac import confidence_band, newey_west_se, path_inference
from .linear import contributions, fit_linear_lp, purify_shock
from .proximity import (
    cosine_decomposition,
    dual_coefficients,
    embed,
    proximity_weights,
)
from .runner import run, verify
from .util import (
    DataError,
    DesignError,
    EstimationError,
    LPDecompError,
    moving_average,
    weighted_sum,
)

__all__ = [
    "DataError",
    "DesignError",
    "EstimationError",
    "ForestParams",
    "HorizonDesign",
    "IRFDataset",
    "LPDecompError",
    "LPSpec",
    "RunConfig",
    "TimeSeriesFrame",
    "build_designs",
    "cluster_irf",
    "concentration",
    "concentration_report",
    "confidence_band",
    "contributions",
    "cosine_decomposition",
    "dual_coefficients",
    "embed",
    "fit_forest",
    "fit_forest_path",
    "fit_linear_lp",
    "forest_predictions",
    "forest_weights",
    "influence_split",
    "irf_dataset",
    "kmeans",
    "load_config",
    "load_csv",
    "moving_average",
    "newey_west_se",
    "path_inference",
    "proximity_weights",
    "purify_shock",
    "run",
    "scenario_irf",
    "scenario_weights",
    "silhouette_scores",
    "subsample",
    "tree_band",
    "trimmed_irf",
    "unconditional_irf",
    "verify",
    "weighted_sum",
    "window_paths",
]
