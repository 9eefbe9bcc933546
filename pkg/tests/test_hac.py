import numpy as np
import pytest

from conftest import direct_design, month_dates
from lpdecomp.dataset import HorizonDesign
from lpdecomp.hac import confidence_band, newey_west_se, path_inference
from lpdecomp.linear import fit_linear_lp
from lpdecomp.util import EstimationError


def simple_fit(t=120, seed=0, beta=0.5, horizon=0):
    rng = np.random.default_rng(seed)
    s = rng.standard_normal(t)
    y = 1.0 + beta * s + rng.standard_normal(t)
    x = np.column_stack([np.ones(t), s])
    d = HorizonDesign(
        horizon=horizon, y=y, X=x, shock_col=1, column_names=("const", "s"),
        dates=month_dates(t), target="y", shock="s", lags=0, sample_policy="maximal",
    )
    return fit_linear_lp(d)


def test_zero_bandwidth_equals_white_oracle():
    fit = simple_fit(seed=1)
    x, v = fit.design.X, fit.residuals
    xtx_inv = np.linalg.inv(x.T @ x)
    meat = (x * v[:, None]).T @ (x * v[:, None])
    oracle = (xtx_inv @ meat @ xtx_inv)[1, 1]
    got = newey_west_se(fit, bandwidth=0, dof_adjust=False)
    assert abs(got.variance - oracle) / oracle < 1e-10
    assert got.bandwidth == 0


def test_dof_adjustment_scales_variance():
    fit = simple_fit(seed=2)
    t, k = fit.design.X.shape
    raw = newey_west_se(fit, bandwidth=3, dof_adjust=False)
    adj = newey_west_se(fit, bandwidth=3, dof_adjust=True)
    assert abs(adj.variance - raw.variance * t / (t - k)) < 1e-14
    assert adj.dof_adjusted and not raw.dof_adjusted


def test_default_bandwidth_is_horizon_plus_one():
    for h in (0, 3, 7):
        fit = simple_fit(t=150, seed=3, horizon=h)
        assert newey_west_se(fit).bandwidth == h + 1


def test_iid_homoskedastic_close_to_classical():
    fit = simple_fit(t=2000, seed=4)
    x = fit.design.X
    sigma2 = float(fit.residuals @ fit.residuals) / (x.shape[0] - x.shape[1])
    classical = float(np.sqrt(sigma2 * np.linalg.inv(x.T @ x)[1, 1]))
    nw = newey_west_se(fit, bandwidth=0).se
    assert abs(nw - classical) / classical < 0.15


def test_autocorrelated_scores_widen_se():
    # persistent regressor and persistent errors make the scores autocorrelated,
    # so the Bartlett estimator must exceed the L=0 (White) one
    rng = np.random.default_rng(5)
    t = 800
    s = np.zeros(t)
    e = np.zeros(t)
    for i in range(1, t):
        s[i] = 0.8 * s[i - 1] + rng.standard_normal()
        e[i] = 0.8 * e[i - 1] + rng.standard_normal()
    y = 0.3 * s + e
    x = np.column_stack([np.ones(t), s])
    d = HorizonDesign(
        horizon=0, y=y, X=x, shock_col=1, column_names=("const", "s"),
        dates=month_dates(t), target="y", shock="s", lags=0, sample_policy="maximal",
    )
    fit = fit_linear_lp(d)
    assert newey_west_se(fit, bandwidth=12).se > newey_west_se(fit, bandwidth=0).se


def test_band_z_frozen_values():
    band84 = confidence_band(np.array([0.0]), np.array([1.0]), 0.84)
    assert abs(band84.z - 1.4050715603096329) < 1e-12
    band95 = confidence_band(np.array([3.0]), np.array([2.0]), 0.95)
    assert abs(band95.lower[0] - -0.919927969080108) < 1e-10
    assert abs(band95.upper[0] - 6.919927969080108) < 1e-10


def test_band_level_validation():
    with pytest.raises(EstimationError, match="level"):
        confidence_band(np.array([0.0]), np.array([1.0]), 1.2)


def test_bandwidth_validation():
    fit = simple_fit(t=40, seed=6)
    with pytest.raises(EstimationError, match="smaller than the sample"):
        newey_west_se(fit, bandwidth=40)
    with pytest.raises(EstimationError, match=">= 0"):
        newey_west_se(fit, bandwidth=-1)


def test_path_inference_shapes_and_levels():
    fits = [simple_fit(t=130, seed=7 + h, horizon=h) for h in range(4)]
    path = path_inference(fits, levels=(0.84, 0.95))
    assert path.betas.shape == (4,)
    assert set(path.bands) == {0.84, 0.95}
    assert np.all(path.bands[0.95].lower <= path.bands[0.84].lower)
    assert np.all(path.bands[0.84].upper <= path.bands[0.95].upper)
    assert path.bandwidths.tolist() == [1, 2, 3, 4]


def test_band_coverage_simulation():
    # 95% band should cover the true coefficient in roughly 95% of draws
    truth = 0.4
    t, reps = 400, 500
    rng = np.random.default_rng(8)
    hits = 0
    for _ in range(reps):
        s = rng.standard_normal(t)
        y = truth * s + rng.standard_normal(t)
        x = np.column_stack([np.ones(t), s])
        d = HorizonDesign(
            horizon=0, y=y, X=x, shock_col=1, column_names=("const", "s"),
            dates=month_dates(t), target="y", shock="s", lags=0, sample_policy="maximal",
        )
        fit = fit_linear_lp(d)
        se = newey_west_se(fit).se
        band = confidence_band(np.array([fit.beta]), np.array([se]), 0.95)
        hits += int(band.lower[0] <= truth <= band.upper[0])
    coverage = hits / reps
    assert abs(coverage - 0.95) < 0.05
