"""Containers for longitudinal observations and functions sampled on a grid."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .exceptions import GridMismatch, OutOfInterval


def trapezoid_weights(grid):
    """Quadrature weights of the trapezoid rule on an ordered grid."""
    grid = np.asarray(grid, dtype=float)
    d = np.diff(grid)
    w = np.zeros_like(grid)
    w[:-1] += d / 2
    w[1:] += d / 2
    return w


def left_riemann_weights(grid):
    """Weights ``t_{j+1} - t_j`` on the first ``p - 1`` points, zero on the last."""
    grid = np.asarray(grid, dtype=float)
    w = np.zeros_like(grid)
    w[:-1] = np.diff(grid)
    return w


def uniform_grid(interval, size):
    a, b = interval
    return np.linspace(a, b, int(size))


def check_grid(grid):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 1:
        raise ValueError("grid must be a nonempty 1-d array")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    return grid


def grid_spacing(grid):
    """Common spacing of an equally spaced grid."""
    d = np.diff(grid)
    if d.size == 0:
        raise ValueError("operator grids need at least two points")
    if not np.allclose(d, d[0], rtol=1e-8, atol=0):
        raise ValueError("operator grids must be equally spaced")
    return float(d[0])


@dataclass(frozen=True)
class FunctionOnGrid:
    """Values of a real function on an ordered evaluation grid.

    Inner products use the trapezoid rule on the grid.
    """

    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        grid = check_grid(self.grid)
        values = np.asarray(self.values, dtype=float)
        if values.shape != grid.shape:
            raise ValueError(
                f"values shape {values.shape} does not match grid shape {grid.shape}"
            )
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    def _check_same_grid(self, other):
        if self.grid.shape != other.grid.shape or not np.array_equal(self.grid, other.grid):
            raise GridMismatch("functions live on different grids")

    def inner(self, other: "FunctionOnGrid") -> float:
        self._check_same_grid(other)
        return float(np.sum(trapezoid_weights(self.grid) * self.values * other.values))

    def norm(self) -> float:
        return float(np.sqrt(self.inner(self)))

    def normalized(self) -> "FunctionOnGrid":
        nrm = self.norm()
        if nrm == 0:
            raise ValueError("cannot normalize the zero function")
        return FunctionOnGrid(self.grid, self.values / nrm)

    def __neg__(self):
        return FunctionOnGrid(self.grid, -self.values)

    def __mul__(self, c):
        return FunctionOnGrid(self.grid, self.values * float(c))

    __rmul__ = __mul__


@dataclass
class LongitudinalDataset:
    """Sparse or dense longitudinal covariate with a scalar response.

    Subject ``i`` is observed at ``times[i]`` with values ``values[i]`` and
    carries the response ``response[i]``.  Times are kept sorted per subject.

    Parameters
    ----------
    times, values : sequence of 1-d arrays
        Per-subject observation times and values, equal lengths, at least one
        observation per subject.
    response : array-like of shape (n,)
    interval : tuple of float
        Closed time domain ``(a, b)``; every observation time must lie in it.
    ids : sequence of str, optional
        Subject identifiers, defaulting to ``"0", "1", ...``.
    """

    times: Sequence[np.ndarray]
    values: Sequence[np.ndarray]
    response: np.ndarray
    interval: tuple = (0.0, 1.0)
    ids: list = field(default=None)

    def __post_init__(self):
        if len(self.times) != len(self.values) or len(self.times) != len(self.response):
            raise ValueError("times, values and response must have one entry per subject")
        a, b = (float(v) for v in self.interval)
        if not a < b:
            raise ValueError("interval must satisfy a < b")
        self.interval = (a, b)
        times, values = [], []
        for i, (t, x) in enumerate(zip(self.times, self.values)):
            t = np.asarray(t, dtype=float).ravel()
            x = np.asarray(x, dtype=float).ravel()
            if t.size == 0 or t.size != x.size:
                raise ValueError(f"subject {i}: need matching, nonempty times and values")
            if np.any(t < a) or np.any(t > b):
                raise OutOfInterval(f"subject {i}: observation time outside [{a}, {b}]")
            order = np.argsort(t, kind="stable")
            times.append(t[order])
            values.append(x[order])
        self.times = times
        self.values = values
        self.response = np.asarray(self.response, dtype=float).ravel()
        if self.ids is None:
            self.ids = [str(i) for i in range(len(times))]
        else:
            self.ids = [str(s) for s in self.ids]
            if len(self.ids) != len(times):
                raise ValueError("ids must have one entry per subject")

    @property
    def n_subjects(self) -> int:
        return len(self.times)

    @property
    def n_obs(self) -> np.ndarray:
        return np.array([t.size for t in self.times])

    def pooled(self):
        """Flatten to ``(subject_index, T, X, Y)`` arrays over all observations."""
        counts = self.n_obs
        subj = np.repeat(np.arange(self.n_subjects), counts)
        T = np.concatenate(self.times)
        X = np.concatenate(self.values)
        return subj, T, X, self.response[subj]

    def scaled(self, c):
        """Copy with every covariate value multiplied by ``c``."""
        return LongitudinalDataset(
            self.times, [c * x for x in self.values], self.response.copy(),
            self.interval, list(self.ids),
        )

    def equals(self, other) -> bool:
        """Exact (bitwise) equality of all fields."""
        return (
            self.interval == other.interval
            and self.ids == other.ids
            and np.array_equal(self.response, other.response)
            and len(self.times) == len(other.times)
            and all(np.array_equal(a, b) for a, b in zip(self.times, other.times))
            and all(np.array_equal(a, b) for a, b in zip(self.values, other.values))
        )
