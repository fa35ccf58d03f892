"""Monte Carlo accuracy statistics for estimated direction functions.

ISB, IVAR and IMSE are left-Riemann sums over the grid with weights
``t_{j+1} - t_j`` (the last grid point carries no weight).  With these shared
weights ``IMSE == ISB + IVAR`` holds algebraically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import FunctionOnGrid, left_riemann_weights, trapezoid_weights
from .exceptions import DegenerateVariance, EmptyEstimateList, GridMismatch


def _stack(estimates, truth):
    if len(estimates) == 0:
        raise EmptyEstimateList("no estimates given")
    grid = truth.grid
    rows = []
    for est in estimates:
        if isinstance(est, FunctionOnGrid):
            if not np.array_equal(est.grid, grid):
                raise GridMismatch("estimate grid differs from truth grid")
            rows.append(est.values)
        else:
            v = np.asarray(est, dtype=float)
            if v.shape != grid.shape:
                raise GridMismatch(f"estimate has shape {v.shape}, grid has {grid.shape}")
            rows.append(v)
    return np.vstack(rows), left_riemann_weights(grid)


def align_and_normalize(estimate, truth):
    """Unit-L2 copy of ``estimate`` with ``<estimate, truth> >= 0``."""
    if not isinstance(estimate, FunctionOnGrid):
        estimate = FunctionOnGrid(truth.grid, estimate)
    est = estimate.normalized()
    return -est if est.inner(truth) < 0 else est


def compute_isb(estimates, truth):
    """Integrated squared bias of the pointwise mean estimate."""
    B, w = _stack(estimates, truth)
    return float(np.sum((B.mean(axis=0) - truth.values) ** 2 * w))


def compute_ivar(estimates, truth):
    """Integrated pointwise variance of the estimates around their mean."""
    B, w = _stack(estimates, truth)
    # two-pass form: equals E[b^2] - E[b]^2 without the cancellation
    return float(np.sum(((B - B.mean(axis=0)) ** 2).mean(axis=0) * w))


def compute_imse(estimates, truth):
    """Mean over runs of the integrated squared error."""
    B, w = _stack(estimates, truth)
    return float(np.mean(np.sum((B - truth.values) ** 2 * w, axis=1)))


def projection_correlation(fit_beta, true_beta, eval_paths):
    """Absolute Pearson correlation of ``<beta_hat, X>`` and ``<beta, X>``.

    Parameters
    ----------
    fit_beta, true_beta : FunctionOnGrid
    eval_paths : ndarray of shape (m, p)
        Dense trajectories on the common grid.
    """
    if not np.array_equal(fit_beta.grid, true_beta.grid):
        raise GridMismatch("directions live on different grids")
    paths = np.asarray(eval_paths, dtype=float)
    w = trapezoid_weights(true_beta.grid)
    a = paths @ (w * fit_beta.values)
    b = paths @ (w * true_beta.values)
    a = a - a.mean()
    b = b - b.mean()
    sa, sb = np.sqrt(a @ a), np.sqrt(b @ b)
    if sa == 0 or sb == 0:
        raise DegenerateVariance("an index has zero variance on the evaluation paths")
    return float(min(1.0, abs(a @ b) / (sa * sb)))


@dataclass
class MonteCarloSummary:
    """Accuracy of direction estimates over ``n_runs`` replications."""

    n_runs: int
    grid: np.ndarray
    mean_beta: FunctionOnGrid
    isb: float
    ivar: float
    imse: float
    mean_abs_correlation: float = float("nan")
    per_run_correlations: list = field(default_factory=list)

    def as_dict(self):
        return {
            "n_runs": self.n_runs,
            "isb": self.isb,
            "ivar": self.ivar,
            "imse": self.imse,
            "mean_abs_correlation": self.mean_abs_correlation,
            "per_run_correlations": list(self.per_run_correlations),
        }


def summarize(estimates, truth, correlations=None, align=True):
    """Align, normalize and reduce a list of estimates to a summary.

    Each estimate is sign-aligned with ``truth`` and rescaled to unit L2
    norm first unless ``align`` is False.
    """
    if align:
        estimates = [align_and_normalize(e, truth) for e in estimates]
    B, _ = _stack(estimates, truth)
    corrs = [] if correlations is None else [float(c) for c in correlations]
    return MonteCarloSummary(
        n_runs=len(estimates),
        grid=truth.grid,
        mean_beta=FunctionOnGrid(truth.grid, B.mean(axis=0)),
        isb=compute_isb(estimates, truth),
        ivar=compute_ivar(estimates, truth),
        imse=compute_imse(estimates, truth),
        mean_abs_correlation=float(np.mean(corrs)) if corrs else float("nan"),
        per_run_correlations=corrs,
    )


def ivar_rate_ratio(summaries):
    """``sqrt(IVAR(n) / IVAR(n'))`` for consecutive sample sizes.

    Parameters
    ----------
    summaries : sequence of (n, MonteCarloSummary or float)
        Ordered by increasing ``n``; a bare float is taken as the IVAR.
    """
    items = sorted(summaries, key=lambda s: s[0])
    ivars = [s.ivar if isinstance(s, MonteCarloSummary) else float(s) for _, s in items]
    return [float(np.sqrt(a / b)) for a, b in zip(ivars[:-1], ivars[1:])]
