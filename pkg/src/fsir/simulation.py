"""Synthetic single-index data driven by standard Brownian motion.

Random numbers come from per-subject Philox substreams.  Subject ``i`` of a
run with seed ``s`` draws its path from ``SeedSequence(s, spawn_key=(0, i))``,
its response noise from ``spawn_key=(1, i)`` and its observation design from
``spawn_key=(2, i)``.  Growing ``n`` therefore leaves the first subjects
untouched, which pairs runs across sample sizes and designs.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .data import FunctionOnGrid, LongitudinalDataset, trapezoid_weights, uniform_grid
from .exceptions import ConfigInvalid

PATHS, NOISE, DESIGN, EVAL = 0, 1, 2, 3


@dataclass(frozen=True)
class SimConfig:
    n: int = 100
    grid_size: int = 31
    t0: float = 0.0
    t_end: float = 1.0
    noise_sd: float = 0.1
    sparse: bool = False
    n_obs_range: tuple = (2, 10)
    fixed_n_obs: int | None = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "n_obs_range", tuple(int(v) for v in self.n_obs_range))
        self.validate()

    def validate(self):
        if int(self.n) < 2:
            raise ConfigInvalid("n", "need at least 2 subjects")
        if int(self.grid_size) < 3:
            raise ConfigInvalid("grid_size", "need at least 3 grid points")
        if not self.t_end > self.t0:
            raise ConfigInvalid("t_end", "must exceed t0")
        if self.noise_sd < 0:
            raise ConfigInvalid("noise_sd", "must be nonnegative")
        lo, hi = self.n_obs_range
        available = self.grid_size - 1
        if not 1 <= lo <= hi:
            raise ConfigInvalid("n_obs_range", f"invalid range {self.n_obs_range}")
        if hi > available:
            raise ConfigInvalid("n_obs_range", f"only {available} grid indices can be sampled")
        if self.fixed_n_obs is not None and not 1 <= self.fixed_n_obs <= available:
            raise ConfigInvalid("fixed_n_obs", f"must lie in 1..{available}")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigInvalid("seed", "must be a 64-bit unsigned integer")

    @property
    def grid(self):
        return uniform_grid((self.t0, self.t_end), self.grid_size)

    def replace(self, **changes):
        d = asdict(self)
        d.update(changes)
        return SimConfig(**d)


def substream(seed, purpose, index):
    """Independent counter-based generator for one (purpose, subject) pair."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(purpose), int(index)))
    return np.random.Generator(np.random.Philox(ss))


def true_beta(grid):
    """The index direction ``sqrt(2) sin(3 pi t / 2)``."""
    grid = np.asarray(grid, dtype=float)
    return FunctionOnGrid(grid, np.sqrt(2.0) * np.sin(1.5 * np.pi * grid))


@dataclass(frozen=True)
class TrueModel:
    """``Y = 3 + exp(<beta, X>) + eps``."""

    beta: FunctionOnGrid

    @classmethod
    def default(cls, grid):
        return cls(true_beta(grid))

    def index(self, paths):
        w = trapezoid_weights(self.beta.grid)
        return np.asarray(paths, dtype=float) @ (w * self.beta.values)

    def link(self, index):
        return 3.0 + np.exp(index)


def simulate_brownian(config, purpose=PATHS):
    """Brownian paths on ``config.grid``, one row per subject, starting at 0."""
    grid = config.grid
    sd = np.sqrt(np.diff(grid))
    paths = np.zeros((config.n, grid.size))
    for i in range(config.n):
        inc = substream(config.seed, purpose, i).standard_normal(grid.size - 1) * sd
        paths[i, 1:] = np.cumsum(inc)
    return paths


def generate_responses(paths, model=None, config=None):
    """Responses ``3 + exp(<beta, X_i>) + eps_i`` with trapezoid quadrature."""
    config = config or SimConfig(n=max(2, len(paths)))
    model = model or TrueModel.default(config.grid)
    y = model.link(model.index(paths))
    if config.noise_sd > 0:
        eps = np.array([substream(config.seed, NOISE, i).standard_normal() for i in range(len(paths))])
        y = y + config.noise_sd * eps
    return y


def sample_design(config):
    """Observed grid indices per subject (sorted, distinct, never index 0)."""
    p = config.grid_size
    lo, hi = config.n_obs_range
    designs = []
    for i in range(config.n):
        if not config.sparse and config.fixed_n_obs is None:
            designs.append(np.arange(1, p))
            continue
        rng = substream(config.seed, DESIGN, i)
        k = config.fixed_n_obs if config.fixed_n_obs is not None else int(rng.integers(lo, hi + 1))
        idx = rng.choice(np.arange(1, p), size=k, replace=False)
        designs.append(np.sort(idx))
    return designs


def sparsify(paths, responses, config):
    """Observe each path at its sampled indices and bundle with the responses."""
    grid = config.grid
    designs = sample_design(config)
    return LongitudinalDataset(
        times=[grid[d] for d in designs],
        values=[paths[i, d] for i, d in enumerate(designs)],
        response=np.asarray(responses, dtype=float),
        interval=(config.t0, config.t_end),
    )


def simulate_dataset(config, model=None):
    """One synthetic dataset.

    Returns
    -------
    dataset : LongitudinalDataset
    paths : ndarray of shape (n, grid_size)
        The dense trajectories behind the observations.
    """
    paths = simulate_brownian(config)
    y = generate_responses(paths, model, config)
    return sparsify(paths, y, config), paths


def evaluation_paths(n_paths, config):
    """Fresh dense paths for out-of-sample index correlations."""
    cfg = config.replace(n=max(2, int(n_paths)))
    return simulate_brownian(cfg, purpose=EVAL)
