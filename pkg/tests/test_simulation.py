import numpy as np
import pytest

from fsir.data import FunctionOnGrid, trapezoid_weights
from fsir.exceptions import ConfigInvalid
from fsir.simulation import (
    SimConfig,
    TrueModel,
    evaluation_paths,
    generate_responses,
    sample_design,
    simulate_brownian,
    simulate_dataset,
    sparsify,
    true_beta,
)


@pytest.mark.parametrize(
    "changes, field",
    [
        ({"n": 1}, "n"),
        ({"grid_size": 2}, "grid_size"),
        ({"noise_sd": -0.1}, "noise_sd"),
        ({"n_obs_range": (2, 31)}, "n_obs_range"),
        ({"n_obs_range": (5, 3)}, "n_obs_range"),
        ({"fixed_n_obs": 0}, "fixed_n_obs"),
        ({"seed": -1}, "seed"),
    ],
)
def test_config_validation(changes, field):
    with pytest.raises(ConfigInvalid) as err:
        SimConfig(**changes)
    assert err.value.field == field


def test_true_beta_unit_norm():
    assert abs(true_beta(np.linspace(0, 1, 31)).norm() ** 2 - 1) < 2e-2
    assert abs(true_beta(np.linspace(0, 1, 1001)).norm() ** 2 - 1) < 1e-4


def test_brownian_starts_at_zero_and_is_deterministic():
    cfg = SimConfig(n=50, seed=3)
    a, b = simulate_brownian(cfg), simulate_brownian(cfg)
    assert np.all(a[:, 0] == 0)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, simulate_brownian(cfg.replace(seed=4)))


def test_brownian_terminal_variance():
    X = simulate_brownian(SimConfig(n=10_000, seed=1))
    assert 0.95 <= X[:, -1].var(ddof=1) <= 1.05


def test_brownian_increment_covariance():
    X = simulate_brownian(SimConfig(n=10_000, seed=2))
    inc = np.diff(X, axis=1)
    C = np.cov(inc.T)
    dt = 1 / 30
    assert np.abs(np.diag(C) - dt).max() < 0.1 * dt
    assert np.abs(C - np.diag(np.diag(C))).max() < 0.1 * dt


def test_responses_at_zero_path():
    cfg = SimConfig(n=3, noise_sd=0.0)
    y = generate_responses(np.zeros((3, 31)), config=cfg)
    np.testing.assert_array_equal(y, 4.0)


def test_responses_match_oracle():
    cfg = SimConfig(n=2, noise_sd=0.0, seed=8)
    x = simulate_brownian(cfg)[0]
    t = cfg.grid
    b = np.sqrt(2) * np.sin(1.5 * np.pi * t)
    integral = np.sum((b[1:] * x[1:] + b[:-1] * x[:-1]) / 2 * np.diff(t))
    y = generate_responses(x[None, :], config=cfg)
    assert abs(y[0] - (3 + np.exp(integral))) < 1e-12


def test_link_range():
    cfg = SimConfig(n=10_000, seed=4)
    X = simulate_brownian(cfg)
    f = np.exp(TrueModel.default(cfg.grid).index(X))
    lo, hi = np.quantile(f, [0.05, 0.95])
    assert 0.4 < lo and hi < 1.8


def test_noise_level():
    cfg = SimConfig(n=5_000, seed=5)
    X = simulate_brownian(cfg)
    resid = generate_responses(X, config=cfg) - generate_responses(X, config=cfg.replace(noise_sd=0.0))
    assert abs(resid.std() - 0.1) < 0.005


def test_custom_model_index():
    grid = np.linspace(0, 1, 31)
    model = TrueModel(FunctionOnGrid(grid, np.ones(31)))
    X = np.tile(grid, (2, 1))
    np.testing.assert_allclose(model.index(X), np.sum(trapezoid_weights(grid) * grid))


def test_fixed_design_is_exhaustive():
    cfg = SimConfig(n=5, sparse=True, fixed_n_obs=30, seed=1)
    for idx in sample_design(cfg):
        np.testing.assert_array_equal(idx, np.arange(1, 31))


def test_complete_design_skips_time_zero():
    data, paths = simulate_dataset(SimConfig(n=4, seed=2))
    for t, x, p in zip(data.times, data.values, paths):
        np.testing.assert_array_equal(t, np.linspace(0, 1, 31)[1:])
        np.testing.assert_array_equal(x, p[1:])


def test_sparse_design_properties():
    cfg = SimConfig(n=10_000, sparse=True, seed=6)
    designs = sample_design(cfg)
    counts = np.array([d.size for d in designs])
    assert 5.9 <= counts.mean() <= 6.1
    assert counts.min() == 2 and counts.max() == 10
    for d in designs[:500]:
        assert np.all(np.diff(d) > 0) and d[0] >= 1 and d[-1] <= 30


def test_sparse_values_are_path_values():
    cfg = SimConfig(n=30, sparse=True, seed=7)
    data, paths = simulate_dataset(cfg)
    for t, x, p in zip(data.times, data.values, paths):
        idx = np.rint(t * 30).astype(int)
        np.testing.assert_array_equal(x, p[idx])


def test_sparsify_same_seed_identical():
    cfg = SimConfig(n=40, sparse=True, seed=9)
    a, _ = simulate_dataset(cfg)
    b, _ = simulate_dataset(cfg)
    assert a.equals(b)
    paths = simulate_brownian(cfg)
    assert sparsify(paths, np.zeros(40), cfg).equals(sparsify(paths, np.zeros(40), cfg))


@pytest.mark.parametrize("sparse", [False, True])
def test_prefix_stability(sparse):
    small, ps = simulate_dataset(SimConfig(n=100, sparse=sparse, seed=10))
    large, pl = simulate_dataset(SimConfig(n=200, sparse=sparse, seed=10))
    assert np.array_equal(ps, pl[:100])
    assert np.array_equal(small.response, large.response[:100])
    for i in range(100):
        assert np.array_equal(small.times[i], large.times[i])
        assert np.array_equal(small.values[i], large.values[i])


def test_designs_share_paths():
    dense, pd = simulate_dataset(SimConfig(n=20, seed=11))
    sparse, ps = simulate_dataset(SimConfig(n=20, sparse=True, seed=11))
    assert np.array_equal(pd, ps)
    assert np.array_equal(dense.response, sparse.response)


def test_evaluation_paths_are_independent_of_training():
    cfg = SimConfig(n=50, seed=12)
    ev = evaluation_paths(50, cfg)
    assert ev.shape == (50, 31)
    assert not np.array_equal(ev, simulate_brownian(cfg))
    assert np.array_equal(ev, evaluation_paths(50, cfg))
