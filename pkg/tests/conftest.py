import numpy as np
import pytest

from fsir.data import LongitudinalDataset
from fsir.simulation import SimConfig, simulate_dataset


def wls_intercept(design, x, w):
    """Brute-force weighted least squares intercept via lstsq on sqrt(w)-scaled rows."""
    keep = w > 0
    sw = np.sqrt(w[keep])
    coef, *_ = np.linalg.lstsq(design[keep] * sw[:, None], x[keep] * sw, rcond=None)
    return coef[0]


def epan(u):
    u = np.asarray(u, dtype=float)
    return np.where(np.abs(u) <= 1, 0.75 * (1 - u * u), 0.0)


@pytest.fixture(scope="session")
def dense_bm_400():
    data, paths = simulate_dataset(SimConfig(n=400, seed=42))
    return data, paths


@pytest.fixture(scope="session")
def sparse_bm_400():
    data, paths = simulate_dataset(SimConfig(n=400, sparse=True, seed=43))
    return data, paths


def constant_process(n, c, seed=0):
    rng = np.random.default_rng(seed)
    grid = np.linspace(0, 1, 31)[1:]
    return LongitudinalDataset(
        times=[grid] * n,
        values=[np.full(grid.size, c)] * n,
        response=rng.normal(size=n),
    )
