"""Estimation of effective dimension reduction directions.

The pipeline smooths the inverse regression surface ``E[X(t) | Y = y]`` and
the covariance of ``X``, whitens with a truncated inverse square root of the
covariance and reads the directions off the leading eigenvectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .data import FunctionOnGrid, LongitudinalDataset, check_grid, trapezoid_weights, uniform_grid
from .exceptions import GridMismatch, RankTooSmall
from .kernels import SmootherSpec, bandwidth_rule
from .operators import (
    OperatorMatrix,
    _eigh_desc,
    estimate_gamma,
    estimate_gamma_e,
    regularized_inv_sqrt,
)


@dataclass(frozen=True)
class EdrFit:
    """Result of a directions fit on a grid.

    Attributes
    ----------
    grid : ndarray of shape (p,)
    eigenvalues : ndarray of shape (k,)
        Leading eigenvalues of the whitened inverse-regression operator.
    eta : ndarray of shape (k, p)
        Standardized directions, orthonormal in L2 on the grid.
    beta : ndarray of shape (k, p)
        Directions, ``beta_j = Gamma^{-1/2} eta_j``.
    retained_rank : int
        Number of covariance components kept by the FVE truncation.
    fve : float
        Fraction of the positive covariance spectrum they explain.
    k : int
    all_eigenvalues : ndarray of shape (p,)
        Full spectrum of the whitened operator, for choosing ``k``.
    """

    grid: np.ndarray
    eigenvalues: np.ndarray
    eta: np.ndarray
    beta: np.ndarray
    retained_rank: int
    fve: float
    k: int
    all_eigenvalues: np.ndarray = field(repr=False)
    gamma: OperatorMatrix | None = field(default=None, repr=False)
    gamma_e: OperatorMatrix | None = field(default=None, repr=False)
    inv_sqrt: OperatorMatrix | None = field(default=None, repr=False)
    mean: FunctionOnGrid | None = field(default=None, repr=False)
    spec: SmootherSpec | None = field(default=None, repr=False)
    diagnostics: dict = field(default_factory=dict, repr=False)

    def beta_function(self, j=0):
        return FunctionOnGrid(self.grid, self.beta[j])

    def eta_function(self, j=0):
        return FunctionOnGrid(self.grid, self.eta[j])

    def normalized_beta(self, j=0):
        """``beta_j`` rescaled to unit L2 norm (trapezoid rule)."""
        return self.beta_function(j).normalized()

    @property
    def index_fve(self):
        """Cumulative share of the whitened operator's positive spectrum."""
        pos = np.clip(self.all_eigenvalues, 0, None)
        return np.cumsum(pos) / pos.sum() if pos.sum() > 0 else np.zeros_like(pos)


def _orient(v):
    # deterministic eigenvector sign: largest-magnitude entry positive
    i = int(np.argmax(np.abs(v)))
    return v if v[i] >= 0 else -v


def directions_from_operators(gamma, gamma_e, fve_threshold=0.95, k=1):
    """Directions from already discretized covariance operators.

    Returns
    -------
    EdrFit
        Without smoothing metadata.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if not np.array_equal(gamma.grid, gamma_e.grid):
        raise GridMismatch("gamma and gamma_e are on different grids")
    inv, dec = regularized_inv_sqrt(gamma, fve_threshold)
    if k > dec.retained_rank:
        raise RankTooSmall(f"k = {k} exceeds retained rank L = {dec.retained_rank}")
    dt = gamma.spacing
    W = inv.matrix
    M = W @ gamma_e.matrix @ W
    lam, vecs = _eigh_desc(M)
    eta = np.array([_orient(vecs[:, j]) for j in range(k)]) / np.sqrt(dt)
    beta = eta @ W.T
    xi = dec.retained_eigenvalues
    diagnostics = {
        "gamma_eigenvalues": dec.eigenvalues.tolist(),
        "gamma_condition_retained": float(xi[0] / xi[-1]),
        "index_eigenvalues": lam.tolist(),
    }
    return EdrFit(
        grid=gamma.grid,
        eigenvalues=lam[:k].copy(),
        eta=eta,
        beta=beta,
        retained_rank=dec.retained_rank,
        fve=dec.fve,
        k=k,
        all_eigenvalues=lam,
        gamma=gamma,
        gamma_e=gamma_e,
        inv_sqrt=inv,
        diagnostics=diagnostics,
    )


def fit_edr(data, spec=None, grid=None, fve_threshold=0.95, k=1, exclude_diagonal=False):
    """Estimate ``k`` e.d.r. directions from longitudinal data.

    Parameters
    ----------
    data : LongitudinalDataset
    spec : SmootherSpec, optional
        Defaults to :func:`fsir.kernels.bandwidth_rule`.
    grid : array-like, optional
        Equally spaced evaluation grid; defaults to 31 points over the
        dataset interval.
    fve_threshold : float
        Fraction of the covariance spectrum kept when inverting.
    k : int
        Number of directions.
    exclude_diagonal : bool
        Drop the ``j == k`` products from the cross-product smoother.

    Returns
    -------
    EdrFit
    """
    if data.n_subjects < 2:
        raise ValueError("need at least two subjects")
    spec = spec or bandwidth_rule(data)
    grid = uniform_grid(data.interval, 31) if grid is None else check_grid(grid)
    a, b = data.interval
    if grid[0] < a - 1e-12 or grid[-1] > b + 1e-12:
        raise ValueError("grid must lie inside the data interval")
    gamma, mean, info_g = estimate_gamma(data, spec, grid, exclude_diagonal, return_info=True)
    gamma_e, info_e = estimate_gamma_e(data, spec, grid, return_info=True)
    fit = directions_from_operators(gamma, gamma_e, fve_threshold, k)
    diagnostics = dict(fit.diagnostics)
    diagnostics["covariance_fallbacks"] = vars(info_g).copy()
    diagnostics["inverse_regression_fallbacks"] = vars(info_e).copy()
    return replace(fit, mean=mean, spec=spec, diagnostics=diagnostics)


def project(fit, trajectory):
    """Indices ``<beta_j, X>`` for one trajectory or a batch on the fit grid.

    Parameters
    ----------
    fit : EdrFit
    trajectory : FunctionOnGrid or ndarray of shape (p,) or (n, p)

    Returns
    -------
    ndarray of shape (k,) or (n, k)
    """
    if isinstance(trajectory, FunctionOnGrid):
        if not np.array_equal(trajectory.grid, fit.grid):
            raise GridMismatch("trajectory grid differs from the fit grid")
        values = trajectory.values
    else:
        values = np.asarray(trajectory, dtype=float)
        if values.shape[-1] != fit.grid.size:
            raise GridMismatch(f"expected {fit.grid.size} grid values, got {values.shape[-1]}")
    w = trapezoid_weights(fit.grid)
    return values @ (fit.beta * w).T


def sign_align(fit, reference, j=0):
    """Flip ``beta_j`` and ``eta_j`` together so that ``<beta_j, reference> >= 0``."""
    ref = reference if isinstance(reference, FunctionOnGrid) else FunctionOnGrid(fit.grid, reference)
    if fit.beta_function(j).inner(ref) >= 0:
        return fit
    beta = fit.beta.copy()
    eta = fit.eta.copy()
    beta[j] = -beta[j]
    eta[j] = -eta[j]
    return replace(fit, beta=beta, eta=eta)


def _as_dataset(X, y, interval):
    if isinstance(X, LongitudinalDataset):
        if y is None:
            return X
        return LongitudinalDataset(X.times, X.values, y, X.interval, X.ids)
    if y is None:
        raise ValueError("y is required unless X is a LongitudinalDataset")
    times = [np.asarray(t) for t, _ in X]
    values = [np.asarray(v) for _, v in X]
    if interval is None:
        allt = np.concatenate(times)
        interval = (float(allt.min()), float(allt.max()))
    return LongitudinalDataset(times, values, y, interval)


class FunctionalSIR(TransformerMixin, BaseEstimator):
    """Inverse regression dimension reduction for sparse longitudinal covariates.

    Parameters
    ----------
    n_directions : int, default=1
        Number of e.d.r. directions ``k``.
    fve : float, default=0.95
        Fraction of the covariance spectrum retained before inverting.
    grid_size : int, default=31
    kernel : str, default="epanechnikov"
    bandwidth_constant : float, default=1.0
        Multiplier ``c`` of the automatic bandwidth rule.
    h_t, h_y, h_mu, h_phi : float, optional
        Explicit bandwidths overriding the rule.
    exclude_diagonal : bool, default=False
    interval : tuple, optional
        Time domain when ``X`` is given as ``(times, values)`` pairs.

    Attributes
    ----------
    fit_ : EdrFit
    grid_ : ndarray
    directions_ : ndarray of shape (n_directions, grid_size)
    eigenvalues_ : ndarray
    spec_ : SmootherSpec
    """

    def __init__(self, n_directions=1, fve=0.95, grid_size=31, kernel="epanechnikov",
                 bandwidth_constant=1.0, h_t=None, h_y=None, h_mu=None, h_phi=None,
                 exclude_diagonal=False, interval=None):
        self.n_directions = n_directions
        self.fve = fve
        self.grid_size = grid_size
        self.kernel = kernel
        self.bandwidth_constant = bandwidth_constant
        self.h_t = h_t
        self.h_y = h_y
        self.h_mu = h_mu
        self.h_phi = h_phi
        self.exclude_diagonal = exclude_diagonal
        self.interval = interval

    def _resolve_spec(self, data):
        spec = bandwidth_rule(data, self.bandwidth_constant, self.kernel)
        overrides = {k: getattr(self, k) for k in ("h_t", "h_y", "h_mu", "h_phi")
                     if getattr(self, k) is not None}
        return replace(spec, **overrides) if overrides else spec

    def fit(self, X, y=None):
        """Fit on a LongitudinalDataset or a sequence of ``(times, values)`` pairs."""
        data = _as_dataset(X, y, self.interval)
        self.spec_ = self._resolve_spec(data)
        self.grid_ = uniform_grid(data.interval, self.grid_size)
        self.fit_ = fit_edr(data, self.spec_, self.grid_, self.fve, self.n_directions,
                            self.exclude_diagonal)
        self.directions_ = self.fit_.beta
        self.eigenvalues_ = self.fit_.eigenvalues
        self.retained_rank_ = self.fit_.retained_rank
        return self

    def transform(self, X):
        """Indices of dense trajectories sampled on ``grid_``, shape (n, n_directions)."""
        check_is_fitted(self, "fit_")
        X = check_array(X)
        return project(self.fit_, X)
