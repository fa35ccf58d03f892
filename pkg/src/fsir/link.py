"""Nonparametric link function on estimated indices.

After the directions are estimated, the response is regressed on the one or
two indices ``<beta_j, X_i>`` with a local linear smoother.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .kernels import Kernel1D, Kernel2D, local_linear_1d_at, local_linear_2d


def default_link_bandwidths(indices):
    """Per-axis rule ``sd(index_j) * n ** (-1/6)``."""
    indices = np.asarray(indices, dtype=float)
    n = indices.shape[0]
    return indices.std(axis=0, ddof=1) * n ** (-1.0 / 6.0)


def _smooth(train, y, bandwidths, points, kernel):
    if train.shape[1] == 1:
        return local_linear_1d_at(train[:, 0], y, bandwidths[0], points[:, 0], kernel)[0]
    return local_linear_2d(train, y, eval_points=points, h=tuple(bandwidths),
                           kernel=Kernel2D(kernel, kernel))


@dataclass(frozen=True)
class LinkFit:
    index_points: np.ndarray
    responses: np.ndarray
    fitted: np.ndarray
    bandwidths: np.ndarray
    fitted_error: float
    kernel: Kernel1D = Kernel1D()

    def in_hull(self, points):
        """Mask of points inside the convex hull of the training indices."""
        points = np.asarray(points, dtype=float).reshape(-1, self.index_points.shape[1])
        if self.index_points.shape[1] == 1:
            lo, hi = self.index_points.min(), self.index_points.max()
            return (points[:, 0] >= lo) & (points[:, 0] <= hi)
        from scipy.spatial import Delaunay

        return Delaunay(self.index_points).find_simplex(points) >= 0


def fit_link(indices, responses, bandwidths=None, kernel=None):
    """Local linear link fit evaluated at the training indices.

    Parameters
    ----------
    indices : array-like of shape (n, k), k in {1, 2}
    responses : array-like of shape (n,)
    bandwidths : array-like of shape (k,), optional
        Defaults to :func:`default_link_bandwidths`.

    Returns
    -------
    LinkFit
        ``fitted_error`` is the mean squared in-sample residual.
    """
    X = np.asarray(indices, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(responses, dtype=float).ravel()
    n, k = X.shape
    if k not in (1, 2):
        raise ValueError("the link smoother supports one or two indices")
    if y.size != n:
        raise ValueError("indices and responses have different lengths")
    if n < 3 * (k + 1):
        raise ValueError(f"need at least {3 * (k + 1)} observations for {k} indices")
    h = default_link_bandwidths(X) if bandwidths is None else np.asarray(bandwidths, dtype=float).ravel()
    kernel = kernel or Kernel1D()
    fitted = _smooth(X, y, h, X, kernel)
    return LinkFit(X, y, fitted, h, float(np.mean((y - fitted) ** 2)), kernel)


def predict_link(fit, new_indices):
    """Evaluate a fitted link at new index points.

    Points outside the convex hull of the training indices are still
    evaluated but trigger a warning.
    """
    k = fit.index_points.shape[1]
    P = np.asarray(new_indices, dtype=float).reshape(-1, k)
    outside = ~fit.in_hull(P)
    if np.any(outside):
        warnings.warn(f"{int(outside.sum())} point(s) extrapolate beyond the training indices",
                      stacklevel=2)
    return _smooth(fit.index_points, fit.responses, fit.bandwidths, P, fit.kernel)


def surface_grid(fit, size=20):
    """Probe grid spanning the training index range, with fitted values.

    Returns an array with columns ``index1[, index2], fitted``.
    """
    X = fit.index_points
    axes = [np.linspace(X[:, j].min(), X[:, j].max(), size) for j in range(X.shape[1])]
    mesh = np.meshgrid(*axes, indexing="ij")
    P = np.column_stack([m.ravel() for m in mesh])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        values = predict_link(fit, P)
    return np.column_stack([P, values])


class LocalLinearRegressor(RegressorMixin, BaseEstimator):
    """Local linear regression on one or two predictors.

    Parameters
    ----------
    bandwidths : array-like, optional
        Per-predictor bandwidths; the ``sd * n ** (-1/6)`` rule when omitted.
    kernel : str, default="epanechnikov"
    """

    def __init__(self, bandwidths=None, kernel="epanechnikov"):
        self.bandwidths = bandwidths
        self.kernel = kernel

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        self.link_ = fit_link(X, y, self.bandwidths, Kernel1D.make(self.kernel))
        self.bandwidths_ = self.link_.bandwidths
        self.fitted_error_ = self.link_.fitted_error
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "link_")
        X = check_array(X)
        return predict_link(self.link_, X)
