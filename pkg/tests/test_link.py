import warnings

import numpy as np
import pytest
from sklearn.base import clone

from fsir.link import (
    LocalLinearRegressor,
    default_link_bandwidths,
    fit_link,
    predict_link,
    surface_grid,
)
from fsir.simulation import SimConfig, TrueModel, simulate_dataset

from conftest import epan, wls_intercept


@pytest.fixture(scope="module")
def bm_indices():
    cfg = SimConfig(n=300, seed=31)
    _, paths = simulate_dataset(cfg)
    g = cfg.grid
    w = np.full(g.size, g[1] - g[0])
    first = np.sqrt(2) * np.sin(0.5 * np.pi * g)
    Z = np.column_stack([paths @ (w * TrueModel.default(g).beta.values), paths @ (w * first)])
    y = 3 + np.exp(Z[:, 0]) + np.random.default_rng(0).normal(0, 0.1, 300)
    return Z, y


def test_linear_surface_is_reproduced():
    rng = np.random.default_rng(1)
    Z = rng.normal(size=(80, 2))
    y = 1 - 2 * Z[:, 0] + 0.5 * Z[:, 1]
    fit = fit_link(Z, y)
    assert fit.fitted_error < 1e-18 * y.var()
    P = rng.uniform(-0.5, 0.5, (10, 2))
    np.testing.assert_allclose(predict_link(fit, P), 1 - 2 * P[:, 0] + 0.5 * P[:, 1], atol=1e-9)


def test_constant_response():
    Z = np.random.default_rng(2).normal(size=(40, 1))
    fit = fit_link(Z, np.full(40, 2.5))
    np.testing.assert_allclose(fit.fitted, 2.5, atol=1e-12)
    assert fit.fitted_error >= 0 and fit.fitted.shape == (40,)


def test_noise_floor():
    rng = np.random.default_rng(3)
    z = rng.normal(0, 0.5, 500)
    y = np.exp(z) + rng.normal(0, 0.01, 500)
    fit = fit_link(z, y)
    assert 0.5e-4 <= fit.fitted_error <= 2e-4


def test_predict_at_training_point(bm_indices):
    Z, y = bm_indices
    fit = fit_link(Z, y)
    np.testing.assert_allclose(predict_link(fit, Z[:5]), fit.fitted[:5], atol=1e-9)


def test_surface_matches_wls_oracle(bm_indices):
    Z, y = bm_indices
    fit = fit_link(Z, y)
    surf = surface_grid(fit, 20)
    assert surf.shape == (400, 3)
    h = fit.bandwidths
    checked = 0
    for p0, p1, val in surf:
        w = epan((Z[:, 0] - p0) / h[0]) * epan((Z[:, 1] - p1) / h[1])
        if np.count_nonzero(w) < 10 or not fit.in_hull([[p0, p1]])[0]:
            continue
        design = np.column_stack([np.ones(len(y)), Z[:, 0] - p0, Z[:, 1] - p1])
        assert abs(val - wls_intercept(design, y, w)) < 1e-8
        checked += 1
    assert checked > 50


def test_extrapolation_warns(bm_indices):
    Z, y = bm_indices
    fit = fit_link(Z, y)
    with pytest.warns(UserWarning):
        predict_link(fit, [[Z[:, 0].max() + 0.05, 0.0]])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        predict_link(fit, Z.mean(axis=0, keepdims=True))


def test_affine_rescaling_invariance(bm_indices):
    Z, y = bm_indices
    base = fit_link(Z, y)
    a = np.array([3.0, 0.2])
    moved = fit_link(Z * a + [1.0, -4.0], y, bandwidths=base.bandwidths * a)
    assert moved.fitted_error == pytest.approx(base.fitted_error, rel=1e-9)


def test_bandwidth_rule():
    Z = np.random.default_rng(4).normal(size=(64, 2)) * [1, 3]
    np.testing.assert_allclose(default_link_bandwidths(Z), Z.std(axis=0, ddof=1) / 2)


def test_link_validation():
    with pytest.raises(ValueError):
        fit_link(np.zeros((20, 3)), np.zeros(20))
    with pytest.raises(ValueError):
        fit_link(np.random.default_rng(0).normal(size=(8, 2)), np.zeros(8))
    with pytest.raises(ValueError):
        fit_link(np.zeros((20, 1)), np.zeros(19))


def test_regressor_api(bm_indices):
    Z, y = bm_indices
    reg = LocalLinearRegressor().fit(Z, y)
    assert reg.n_features_in_ == 2
    assert reg.score(Z, y) > 0.8
    np.testing.assert_allclose(reg.predict(Z[:3]), reg.link_.fitted[:3])
    twin = clone(reg)
    assert twin.get_params() == {"bandwidths": None, "kernel": "epanechnikov"}
    assert not hasattr(twin, "link_")
