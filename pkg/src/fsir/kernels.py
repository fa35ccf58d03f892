"""Kernels and scattered-data local linear smoothers in one and two dimensions.

Every estimator in the package reduces to weighted least squares fits of an
intercept-plus-slope model inside a compact kernel window.  The smoothers here
return the fitted intercept at each evaluation point.

Finite-sample gaps are handled locally: an evaluation point whose window holds
no observation is retried with the bandwidth widened by ``WIDEN_FACTOR`` up to
``MAX_WIDEN`` times, and a rank-deficient local design drops the slope terms
that carry no spread.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import FunctionOnGrid, check_grid
from .exceptions import ConfigInvalid, EmptyWindow

WIDEN_FACTOR = 1.5
MAX_WIDEN = 4
RIDGE = 1e-12
# Smallest weighted variance (in bandwidth units) a slope direction needs.
SPREAD_TOL = 1e-10

_SHAPES = ("epanechnikov", "quartic", "gaussian-truncated")


@dataclass(frozen=True)
class Kernel1D:
    """Symmetric univariate kernel of order (0, 2).

    Parameters
    ----------
    shape : {"epanechnikov", "quartic", "gaussian-truncated"}
    support_radius : float
        Fixed at 1 for the polynomial shapes.  For the truncated Gaussian the
        density is cut at this radius and renormalized to integrate to one.
    """

    shape: str = "epanechnikov"
    support_radius: float = 1.0

    def __post_init__(self):
        if self.shape not in _SHAPES:
            raise ValueError(f"unknown kernel shape {self.shape!r}; expected one of {_SHAPES}")
        if self.shape != "gaussian-truncated" and self.support_radius != 1.0:
            raise ValueError("polynomial kernels have support radius 1")
        if not self.support_radius > 0:
            raise ValueError("support_radius must be positive")

    @classmethod
    def make(cls, shape):
        if shape == "gaussian-truncated":
            return cls(shape, 3.0)
        return cls(shape)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        inside = np.abs(u) <= self.support_radius
        if self.shape == "epanechnikov":
            out = 0.75 * (1.0 - u * u)
        elif self.shape == "quartic":
            out = 0.9375 * (1.0 - u * u) ** 2
        else:
            r = self.support_radius
            mass = math.erf(r / math.sqrt(2.0))
            out = np.exp(-0.5 * u * u) / (math.sqrt(2.0 * math.pi) * mass)
        return np.where(inside, out, 0.0)

    def moment(self, power, squared=False):
        """``∫ u**power K(u) du`` (or with ``K**2``) by Gauss-Legendre quadrature."""
        nodes, weights = np.polynomial.legendre.leggauss(200)
        r = self.support_radius
        u = r * nodes
        k = self(u)
        if squared:
            k = k * k
        return float(r * np.sum(weights * u**power * k))

    @property
    def variance(self):
        return self.moment(2)

    @property
    def roughness(self):
        return self.moment(0, squared=True)


@dataclass(frozen=True)
class Kernel2D:
    """Product kernel ``K2(u, v) = k_t(u) * k_y(v)``."""

    k_t: Kernel1D = field(default_factory=Kernel1D)
    k_y: Kernel1D = field(default_factory=Kernel1D)

    def __call__(self, u, v):
        return self.k_t(u) * self.k_y(v)


@dataclass(frozen=True)
class SmootherSpec:
    """Kernel plus the four bandwidths used by the estimator.

    ``h_t`` and ``h_y`` drive the inverse-regression surface, ``h_mu`` the
    mean curve and ``h_phi`` the cross-product surface.
    """

    h_t: float
    h_y: float
    h_mu: float
    h_phi: float
    kernel: Kernel2D = field(default_factory=Kernel2D)

    def __post_init__(self):
        for name in ("h_t", "h_y", "h_mu", "h_phi"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ConfigInvalid(name, f"bandwidth must be positive, got {v}")

    def check_against(self, data):
        """Reject bandwidths wider than the data range on their axis."""
        _, T, _, Y = data.pooled()
        t_range = float(T.max() - T.min())
        y_range = float(Y.max() - Y.min())
        for name, rng in (("h_t", t_range), ("h_mu", t_range), ("h_phi", t_range), ("h_y", y_range)):
            if getattr(self, name) > rng:
                raise ConfigInvalid(name, f"bandwidth {getattr(self, name)} exceeds data range {rng}")

    def as_dict(self):
        return {
            "h_t": self.h_t,
            "h_y": self.h_y,
            "h_mu": self.h_mu,
            "h_phi": self.h_phi,
            "kernel": self.kernel.k_t.shape,
        }


def bandwidth_rule(data, c=1.0, kernel="epanechnikov"):
    """Default bandwidths scaled to the data.

    With ``N`` the total number of observations and ``P`` the number of
    within-subject pairs ``sum N_i ** 2``, the inverse-regression surface uses
    ``c * range * N ** (-1/6)``, the covariance surface
    ``c * range * P ** (-1/6)`` and the mean curve ``c * range * N ** (-1/5)``.
    """
    _, T, _, Y = data.pooled()
    total = T.size
    pairs = float(np.sum(data.n_obs.astype(float) ** 2))
    t_range = float(T.max() - T.min())
    y_range = float(Y.max() - Y.min())
    h2 = c * total ** (-1.0 / 6.0)
    k1 = Kernel1D.make(kernel)
    return SmootherSpec(
        h_t=h2 * t_range,
        h_y=h2 * y_range,
        h_mu=c * t_range * total ** (-1.0 / 5.0),
        h_phi=c * t_range * pairs ** (-1.0 / 6.0),
        kernel=Kernel2D(k1, k1),
    )


@dataclass
class SmootherInfo:
    """Counts of evaluation points that needed a fallback."""

    widened: int = 0
    degenerate: int = 0

    def update(self, other):
        self.widened += other.widened
        self.degenerate += other.degenerate


def _solve_moments(G, b, info):
    """Intercepts of a batch of local weighted least squares problems.

    ``G`` has shape (e, d+1, d+1) and ``b`` shape (e, d+1) in bandwidth-scaled
    coordinates.  Points whose Gram matrix has zero mass come back as NaN.
    """
    e, q, _ = G.shape
    out = np.full(e, np.nan)
    s0 = G[:, 0, 0]
    ok = s0 > 0
    if not np.any(ok):
        return out
    Gk, bk, s0k = G[ok], b[ok], s0[ok]
    mean = Gk[:, 0, 1:] / s0k[:, None]
    cov = Gk[:, 1:, 1:] / s0k[:, None, None] - mean[:, :, None] * mean[:, None, :]
    spread = np.linalg.eigvalsh(cov)[:, 0] if q > 1 else np.ones(len(s0k))
    good = spread > SPREAD_TOL
    res = np.empty(len(s0k))
    if np.any(good):
        Gg = Gk[good] + (RIDGE * s0k[good])[:, None, None] * np.eye(q)
        res[good] = np.linalg.solve(Gg, bk[good][:, :, None])[:, 0, 0]
    for j in np.flatnonzero(~good):
        res[j] = _reduced_fit(Gk[j], bk[j], np.diag(cov[j]))
    info.degenerate += int(np.sum(~good))
    out[ok] = res
    return out


def _reduced_fit(G, b, var):
    """Lower-order fit keeping only slope directions with spread."""
    keep = [0] + [i + 1 for i, v in enumerate(var) if v > SPREAD_TOL]
    while len(keep) > 1:
        Gs = G[np.ix_(keep, keep)]
        s0 = Gs[0, 0]
        m = Gs[0, 1:] / s0
        cov = Gs[1:, 1:] / s0 - np.outer(m, m)
        if np.linalg.eigvalsh(cov)[0] > SPREAD_TOL:
            Gs = Gs + RIDGE * s0 * np.eye(len(keep))
            return float(np.linalg.solve(Gs, b[keep])[0])
        keep = keep[:-1]
    return float(b[0] / G[0, 0])


def _ll1d_moments(t, x, w, ev, h, kernel):
    U = (t[None, :] - ev[:, None]) / h
    K = kernel(U) * w[None, :]
    KU = K * U
    G = np.empty((len(ev), 2, 2))
    G[:, 0, 0] = K.sum(axis=1)
    G[:, 0, 1] = G[:, 1, 0] = KU.sum(axis=1)
    G[:, 1, 1] = (KU * U).sum(axis=1)
    b = np.stack([K @ x, KU @ x], axis=1)
    return G, b


def _aggregate(keys, x, w):
    """Collapse repeated locations into (unique keys, weighted mean, total weight)."""
    uniq, inv = np.unique(keys, axis=0, return_inverse=True)
    inv = inv.ravel()
    wt = np.bincount(inv, weights=w, minlength=len(uniq))
    sx = np.bincount(inv, weights=w * x, minlength=len(uniq))
    return uniq, sx / wt, wt


def _with_widening(moment_fn, n_eval, h, info):
    """Evaluate, then retry empty-window points with geometrically wider bandwidths."""
    idx = np.arange(n_eval)
    out = moment_fn(idx, h)
    for step in range(1, MAX_WIDEN + 1):
        empty = np.flatnonzero(np.isnan(out))
        if empty.size == 0:
            return out
        if step == 1:
            info.widened += empty.size
        out[empty] = moment_fn(empty, h * WIDEN_FACTOR**step)
    empty = np.flatnonzero(np.isnan(out))
    if empty.size:
        raise EmptyWindow(
            f"{empty.size} evaluation point(s) have no data within "
            f"{WIDEN_FACTOR ** MAX_WIDEN:.3g} x bandwidth (first: index {empty[0]})"
        )
    return out


def local_linear_1d(t, x, h, kernel=None, eval_grid=None, weights=None, return_info=False):
    """Univariate local linear smoother.

    Parameters
    ----------
    t, x : array-like of shape (N,)
        Observation locations and values.
    h : float
        Bandwidth.
    kernel : Kernel1D, optional
        Defaults to Epanechnikov.
    eval_grid : array-like
        Ordered evaluation points.
    weights : array-like of shape (N,), optional
        Nonnegative observation weights.
    return_info : bool
        Also return a :class:`SmootherInfo` with fallback counts.

    Returns
    -------
    FunctionOnGrid
        Fitted intercepts on ``eval_grid``.
    """
    ev = check_grid(eval_grid)
    values, info = local_linear_1d_at(t, x, h, ev, kernel, weights)
    result = FunctionOnGrid(ev, values)
    return (result, info) if return_info else result


def local_linear_1d_at(t, x, h, points, kernel=None, weights=None):
    """Univariate local linear values at arbitrary points.

    Returns
    -------
    values : ndarray
    info : SmootherInfo
    """
    kernel = kernel or Kernel1D()
    t = np.asarray(t, dtype=float).ravel()
    x = np.asarray(x, dtype=float).ravel()
    w = np.ones_like(t) if weights is None else np.asarray(weights, dtype=float).ravel()
    if not (t.size == x.size == w.size):
        raise ValueError("t, x and weights must have equal length")
    if not h > 0:
        raise ValueError("bandwidth must be positive")
    ev = np.asarray(points, dtype=float).ravel()
    ut, xm, wt = _aggregate(t[:, None], x, w)
    ut = ut[:, 0]
    info = SmootherInfo()

    def moments(idx, hh):
        G, b = _ll1d_moments(ut, xm, wt, ev[idx], hh, kernel)
        return _solve_moments(G, b, info)

    return _with_widening(moments, ev.size, float(h), info), info


def _ll2d_grouped(P, x, w, E, h, kernel, info):
    """Two-dimensional local linear fits grouped by shared evaluation t.

    Observations sharing a second coordinate are pooled inside each t-window
    so the kernel sums become small matrix products.
    """
    ht, hy = h
    out = np.empty(len(E))
    et, inv_t = np.unique(E[:, 0], return_inverse=True)
    inv_t = inv_t.ravel()
    rt = kernel.k_t.support_radius * ht
    order = np.argsort(P[:, 0], kind="stable")
    P, x, w = P[order], x[order], w[order]
    for g, tg in enumerate(et):
        rows = np.flatnonzero(inv_t == g)
        lo = np.searchsorted(P[:, 0], tg - rt, side="left")
        hi = np.searchsorted(P[:, 0], tg + rt, side="right")
        sl = slice(lo, hi)
        u = (P[sl, 0] - tg) / ht
        a = kernel.k_t(u) * w[sl]
        nz = a > 0
        if not np.any(nz):
            out[rows] = np.nan
            continue
        u, a, ys, xs = u[nz], a[nz], P[sl, 1][nz], x[sl][nz]
        yu, yinv = np.unique(ys, return_inverse=True)
        yinv = yinv.ravel()
        m = len(yu)
        A = np.bincount(yinv, weights=a, minlength=m)
        B = np.bincount(yinv, weights=a * u, minlength=m)
        C = np.bincount(yinv, weights=a * u * u, minlength=m)
        D = np.bincount(yinv, weights=a * xs, minlength=m)
        F = np.bincount(yinv, weights=a * u * xs, minlength=m)
        V = (yu[None, :] - E[rows, 1][:, None]) / hy
        K = kernel.k_y(V)
        KV = K * V
        KVV = KV * V
        G = np.empty((len(rows), 3, 3))
        G[:, 0, 0] = K @ A
        G[:, 0, 1] = G[:, 1, 0] = K @ B
        G[:, 0, 2] = G[:, 2, 0] = KV @ A
        G[:, 1, 1] = K @ C
        G[:, 1, 2] = G[:, 2, 1] = KV @ B
        G[:, 2, 2] = KVV @ A
        b = np.stack([K @ D, K @ F, KV @ D], axis=1)
        out[rows] = _solve_moments(G, b, info)
    return out


def local_linear_2d(points, x, spec=None, eval_points=None, weights=None, h=None,
                    kernel=None, return_info=False):
    """Bivariate local linear smoother with a product kernel.

    Parameters
    ----------
    points : array-like of shape (N, 2)
        Observation locations ``(t, y)``.
    x : array-like of shape (N,)
        Observed values.
    spec : SmootherSpec, optional
        Supplies ``(h_t, h_y)`` and the kernel when ``h`` is not given.
    eval_points : array-like of shape (E, 2)
    weights : array-like of shape (N,), optional
    h : tuple of float, optional
        Explicit ``(h_t, h_y)`` overriding ``spec``.
    kernel : Kernel2D, optional
    return_info : bool

    Returns
    -------
    ndarray of shape (E,)
        The fitted intercept at each evaluation point.
    """
    P = np.asarray(points, dtype=float).reshape(-1, 2)
    x = np.asarray(x, dtype=float).ravel()
    w = np.ones(len(P)) if weights is None else np.asarray(weights, dtype=float).ravel()
    if not (len(P) == x.size == w.size):
        raise ValueError("points, x and weights must have equal length")
    if h is None:
        if spec is None:
            raise ValueError("give either spec or h")
        h = (spec.h_t, spec.h_y)
    if kernel is None:
        kernel = spec.kernel if spec is not None else Kernel2D()
    h = np.asarray(h, dtype=float)
    if h.shape != (2,) or np.any(h <= 0):
        raise ValueError("bandwidths must be two positive numbers")
    E = np.asarray(eval_points, dtype=float).reshape(-1, 2)
    info = SmootherInfo()

    def moments(idx, hh):
        return _ll2d_grouped(P, x, w, E[idx], hh, kernel, info)

    values = _with_widening(moments, len(E), h, info)
    return (values, info) if return_info else values


def cross_product_smoother(data, spec, grid, exclude_diagonal=False, return_info=False):
    """Smoothed cross-product surface ``E[X(s) X(t)]`` on ``grid x grid``.

    Each subject contributes every ordered pair of its observations; the
    diagonal pairs ``j == k`` are included unless ``exclude_diagonal``.
    The result is symmetrized.
    """
    grid = check_grid(grid)
    ts, ss, prods = [], [], []
    for t, xv in zip(data.times, data.values):
        jj, kk = np.meshgrid(np.arange(t.size), np.arange(t.size), indexing="ij")
        jj, kk = jj.ravel(), kk.ravel()
        if exclude_diagonal:
            off = jj != kk
            jj, kk = jj[off], kk[off]
        ts.append(t[jj])
        ss.append(t[kk])
        prods.append(xv[jj] * xv[kk])
    pairs = np.column_stack([np.concatenate(ts), np.concatenate(ss)])
    if len(pairs) == 0:
        raise EmptyWindow("no observation pairs available")
    loc, xm, wt = _aggregate(pairs, np.concatenate(prods), np.ones(len(pairs)))
    p = grid.size
    # eval point (t = grid[b], s = grid[a]) fills phi[a, b]
    ev = np.column_stack([np.repeat(grid, p), np.tile(grid, p)])
    k1 = spec.kernel.k_t
    vals, info = local_linear_2d(
        loc, xm, eval_points=ev, weights=wt, h=(spec.h_phi, spec.h_phi),
        kernel=Kernel2D(k1, k1), return_info=True,
    )
    phi = vals.reshape(p, p).T
    phi = 0.5 * (phi + phi.T)
    return (phi, info) if return_info else phi


def cv_bandwidth(coords, x, candidates, kernel=None, groups=None, n_folds=5, seed=0):
    """Grid-search K-fold cross-validation for a local linear bandwidth.

    Parameters
    ----------
    coords : array-like of shape (N,) or (N, 2)
    x : array-like of shape (N,)
    candidates : sequence
        Scalars for 1-d data, ``(h_t, h_y)`` pairs for 2-d data.
    groups : array-like of shape (N,), optional
        Fold assignment is done by group (e.g. subject) so that all
        observations of a subject are held out together.

    Returns
    -------
    best : candidate with the smallest held-out mean squared error
    scores : ndarray of per-candidate errors (``inf`` where a fold failed)
    """
    coords = np.asarray(coords, dtype=float)
    x = np.asarray(x, dtype=float).ravel()
    two_d = coords.ndim == 2 and coords.shape[1] == 2
    groups = np.arange(len(x)) if groups is None else np.asarray(groups)
    ug = np.unique(groups)
    rng = np.random.default_rng(seed)
    fold_of = dict(zip(ug, rng.permutation(len(ug)) % n_folds))
    folds = np.array([fold_of[g] for g in groups])
    scores = []
    for cand in candidates:
        sse = 0.0
        try:
            for f in range(n_folds):
                te = folds == f
                if not np.any(te):
                    continue
                tr = ~te
                if two_d:
                    pred = local_linear_2d(coords[tr], x[tr], eval_points=coords[te], h=cand,
                                           kernel=Kernel2D(kernel or Kernel1D(), kernel or Kernel1D()))
                else:
                    pred, _ = local_linear_1d_at(coords[tr], x[tr], cand, coords[te], kernel)
                sse += float(np.sum((x[te] - pred) ** 2))
            scores.append(sse / len(x))
        except EmptyWindow:
            scores.append(np.inf)
    scores = np.asarray(scores)
    return candidates[int(np.argmin(scores))], scores
