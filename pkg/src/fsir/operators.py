"""Discretized covariance operators and their regularized inverse square root.

An :class:`OperatorMatrix` stores kernel values ``G(s, t)`` on an equally
spaced grid.  Acting on a function sampled on the grid it is the matrix
``G * dt`` (Riemann weights), so matrix eigenvalues of ``G * dt`` approximate
the operator eigenvalues and eigenvectors rescaled by ``dt ** -0.5`` have
unit L2 norm as functions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import check_grid, grid_spacing
from .exceptions import AllNonpositive
from .kernels import SmootherInfo, cross_product_smoother, local_linear_1d, local_linear_2d

TIE_RTOL = 1e-10


@dataclass(frozen=True)
class OperatorMatrix:
    """Kernel of an integral operator sampled on ``grid x grid``."""

    grid: np.ndarray
    values: np.ndarray
    kind: str = "generic"

    def __post_init__(self):
        grid = check_grid(self.grid)
        values = np.asarray(self.values, dtype=float)
        if values.shape != (grid.size, grid.size):
            raise ValueError("operator values must be p x p for a grid of length p")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", 0.5 * (values + values.T))

    @property
    def spacing(self):
        return grid_spacing(self.grid)

    @property
    def matrix(self):
        """Matrix acting on grid values: ``(G f)(s) ~ sum_t G(s, t) f(t) dt``."""
        return self.values * self.spacing

    @classmethod
    def from_matrix(cls, grid, matrix, kind="generic"):
        grid = check_grid(grid)
        return cls(grid, np.asarray(matrix, dtype=float) / grid_spacing(grid), kind)


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigen-analysis of a covariance operator after FVE truncation.

    ``eigenvalues`` holds the full descending spectrum of the operator;
    ``eigenfunctions`` the leading ``retained_rank`` columns, each with unit
    L2 norm on the grid.
    """

    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray
    fve: float
    retained_rank: int
    spacing: float = 1.0
    fve_curve: np.ndarray = field(default=None, repr=False)

    @property
    def retained_eigenvalues(self):
        return self.eigenvalues[: self.retained_rank]


def _eigh_desc(A):
    w, v = np.linalg.eigh(0.5 * (A + A.T))
    order = np.argsort(w, kind="stable")[::-1]
    return w[order], v[:, order]


def select_rank(eigenvalues, fve_threshold):
    """Smallest number of leading positive eigenvalues reaching ``fve_threshold``.

    Eigenvalues tied with the last retained one are kept as well.

    Returns
    -------
    rank : int
    fve : float
        Fraction of the positive spectrum explained by the retained part.
    curve : ndarray
        Cumulative FVE over the positive eigenvalues.
    """
    if not 0 < fve_threshold <= 1:
        raise ValueError("fve_threshold must lie in (0, 1]")
    pos = eigenvalues[eigenvalues > 0]
    if pos.size == 0:
        raise AllNonpositive("covariance estimate has no positive eigenvalue")
    curve = np.cumsum(pos) / pos.sum()
    # guard the comparison against rounding in the cumulative sum
    rank = int(np.searchsorted(curve, fve_threshold - 1e-12, side="left")) + 1
    rank = min(rank, pos.size)
    last = pos[rank - 1]
    while rank < pos.size and abs(pos[rank] - last) <= TIE_RTOL * abs(last):
        rank += 1
    return rank, float(curve[rank - 1]), curve


def regularized_inv_sqrt(gamma, fve_threshold=0.95):
    """Moore-Penrose inverse square root of a truncated covariance operator.

    Nonpositive eigenvalues are discarded and the leading components that
    explain ``fve_threshold`` of the positive spectrum are kept.

    Parameters
    ----------
    gamma : OperatorMatrix or ndarray
        A bare array is treated as an operator on a unit-spaced grid, i.e.
        as a plain symmetric matrix.
    fve_threshold : float in (0, 1]

    Returns
    -------
    inv_sqrt : OperatorMatrix
        ``sum_{i <= L} xi_i ** -0.5 phi_i phi_i'`` as an operator.
    decomposition : SpectralDecomposition
    """
    if not isinstance(gamma, OperatorMatrix):
        arr = np.asarray(gamma, dtype=float)
        gamma = OperatorMatrix(np.arange(arr.shape[0], dtype=float), arr, "gamma")
    dt = gamma.spacing
    xi, vecs = _eigh_desc(gamma.matrix)
    rank, fve, curve = select_rank(xi, fve_threshold)
    V = vecs[:, :rank]
    M = (V * xi[:rank] ** -0.5) @ V.T
    inv = OperatorMatrix.from_matrix(gamma.grid, M, "inv_sqrt")
    dec = SpectralDecomposition(
        eigenvalues=xi,
        eigenfunctions=V / np.sqrt(dt),
        fve=fve,
        retained_rank=rank,
        spacing=dt,
        fve_curve=curve,
    )
    return inv, dec


def estimate_mean(data, spec, grid, return_info=False):
    """Local linear mean curve from the pooled observations."""
    _, T, X, _ = data.pooled()
    return local_linear_1d(T, X, spec.h_mu, spec.kernel.k_t, grid, return_info=return_info)


def estimate_gamma(data, spec, grid, exclude_diagonal=False, return_info=False):
    """Covariance operator ``phi(s, t) - mu(s) mu(t)`` from smoothed surfaces."""
    grid = check_grid(grid)
    info = SmootherInfo()
    mu, i1 = estimate_mean(data, spec, grid, return_info=True)
    phi, i2 = cross_product_smoother(data, spec, grid, exclude_diagonal, return_info=True)
    info.update(i1)
    info.update(i2)
    gamma = OperatorMatrix(grid, phi - np.outer(mu.values, mu.values), "gamma")
    return (gamma, mu, info) if return_info else gamma


def inverse_regression_curves(data, spec, grid, return_info=False):
    """Fitted curves ``m(t, Y_i)`` on the grid, one row per subject."""
    grid = check_grid(grid)
    _, T, X, Ysub = data.pooled()
    Y = data.response
    ev = np.column_stack([np.repeat(grid, Y.size), np.tile(Y, grid.size)])
    vals, info = local_linear_2d(np.column_stack([T, Ysub]), X, spec, ev, return_info=True)
    curves = vals.reshape(grid.size, Y.size).T
    return (curves, info) if return_info else curves


def estimate_gamma_e(data, spec, grid, return_info=False):
    """Empirical covariance of the inverse-regression curves ``m(., Y_i)``."""
    curves, info = inverse_regression_curves(data, spec, grid, return_info=True)
    centered = curves - curves.mean(axis=0)
    cov = centered.T @ centered / curves.shape[0]
    gamma_e = OperatorMatrix(grid, cov, "gamma_e")
    return (gamma_e, info) if return_info else gamma_e
