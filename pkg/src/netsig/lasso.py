"""L1-penalized logistic regression and its regularization path.

Objective::

    (1/n) * sum_i log(1 + exp(-y_i * (x_i @ beta + b))) + lam * ||beta||_1

with an unpenalized intercept ``b``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import LambdaGrid, SelectionPath, ValidationError

KKT_TOL = 1e-6
ACTIVE_TOL = 1e-8
MAX_SWEEPS = 10_000


@dataclass(frozen=True, eq=False)
class LassoFit:
    weights: np.ndarray
    intercept: float
    lam: float
    converged: bool
    iterations: int
    objective_history: np.ndarray | None = None

    def active(self, tol: float = ACTIVE_TOL) -> np.ndarray:
        return np.flatnonzero(np.abs(self.weights) > tol)


def _check_xy(X, y):
    X = np.asfortranarray(X, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ValidationError("X must be n x p and y of length n")
    if not np.all(np.isfinite(X)):
        raise ValidationError("non-finite value in X")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValidationError("y must be in {-1, +1}")
    return X, y


def logistic_loss(X, y, beta, intercept) -> float:
    margin = -y * (X @ beta + intercept)
    return float(np.mean(np.logaddexp(0.0, margin)))


def logistic_gradient(X, y, beta, intercept) -> tuple[np.ndarray, float]:
    """Gradient of the mean logistic loss w.r.t. ``beta`` and the intercept."""
    eta = X @ beta + intercept
    w = -y * _sigmoid(-y * eta) / y.size
    return X.T @ w, float(w.sum())


def _sigmoid(t):
    return np.exp(-np.logaddexp(0.0, -t))


def objective(X, y, beta, intercept, lam) -> float:
    return logistic_loss(X, y, beta, intercept) + lam * float(np.abs(beta).sum())


def null_intercept(y) -> float:
    """Intercept of the intercept-only maximum-likelihood model."""
    pos = float(np.sum(y > 0))
    return float(np.log(pos / (y.size - pos)))


def lambda_max(X, y) -> float:
    """Smallest lambda whose solution has all weights at zero."""
    X, y = _check_xy(X, y)
    g, _ = logistic_gradient(X, y, np.zeros(X.shape[1]), null_intercept(y))
    return float(np.max(np.abs(g))) if g.size else 0.0


def kkt_violations(X, y, beta, intercept, lam) -> tuple[np.ndarray, float]:
    """Per-coordinate stationarity residuals and the intercept gradient.

    For ``beta_j != 0`` the residual is ``|grad_j + lam * sign(beta_j)|``; for
    ``beta_j == 0`` it is ``max(0, |grad_j| - lam)``.
    """
    g, g0 = logistic_gradient(X, y, beta, intercept)
    res = np.where(beta != 0, np.abs(g + lam * np.sign(beta)), np.maximum(0.0, np.abs(g) - lam))
    return res, abs(g0)


def fit_l1_logistic(
    X,
    y,
    lam: float,
    warm_start: LassoFit | None = None,
    tol: float = KKT_TOL,
    max_sweeps: int = MAX_SWEEPS,
    record_objective: bool = False,
) -> LassoFit:
    """Fit the L1-penalized logistic model at a single ``lam``.

    Proximal Newton iterations run over a working set that starts from the
    warm start's support plus the current KKT violators and grows until every
    coordinate satisfies the stationarity conditions within ``tol``. A fit
    that runs out of iterations is returned with ``converged=False``.
    """
    X, y = _check_xy(X, y)
    if not lam > 0:
        raise ValidationError("lambda must be positive")
    n, p = X.shape
    if warm_start is not None:
        beta = np.array(warm_start.weights, dtype=float)
        icpt = np.array([warm_start.intercept])
    else:
        beta = np.zeros(p)
        icpt = np.array([null_intercept(y)])
    eta = X @ beta + icpt[0]
    lips = 0.25 * np.einsum("ij,ij->j", X, X) / n
    # zero columns never move; any positive constant avoids dividing by zero
    lips[lips <= 0] = 1.0
    hist = np.full(max_sweeps if record_objective else 0, np.nan)

    in_work = beta != 0
    sweeps = 0
    converged = False
    while True:
        grad = _kernels.gradient(X, y, eta)
        res = np.where(beta != 0, np.abs(grad + lam * np.sign(beta)), np.maximum(0.0, np.abs(grad) - lam))
        g0 = abs(float(np.sum(-y * _sigmoid(-y * eta))) / n)
        if res.max(initial=0.0) <= tol and g0 <= tol:
            converged = True
            break
        if sweeps >= max_sweeps:
            break
        in_work |= res > tol
        work = np.flatnonzero(in_work)
        done, ok = _kernels.newton_lasso(
            X, y, beta, icpt, lam, work, max_sweeps - sweeps, tol, hist[sweeps:]
        )
        sweeps += max(done, 1)
        if not ok and sweeps < max_sweeps:
            # line search stalled: a few majorized sweeps always make progress
            sweeps += _kernels.cd_lasso(
                X, y, beta, X @ beta + icpt[0], icpt, lam, lips, work,
                min(10, max_sweeps - sweeps), 0.25 * tol, hist[sweeps:],
            )
        eta = X @ beta + icpt[0]
    return LassoFit(
        beta, float(icpt[0]), float(lam), converged, sweeps,
        _history(hist, sweeps) if record_objective else None,
    )


def _history(hist, count):
    h = hist[:count]
    return h[~np.isnan(h)].copy()


def default_grid(X, y, count: int = 50, min_ratio: float = 1e-3) -> LambdaGrid:
    return LambdaGrid.geometric(lambda_max(X, y), count, min_ratio)


def lasso_path(X, y, grid: LambdaGrid, tol: float = KKT_TOL, active_tol: float = ACTIVE_TOL) -> SelectionPath:
    """Warm-started fits along ``grid``; groups of the path are single columns."""
    X, y = _check_xy(X, y)
    fit = None
    actives, norms, converged = [], [], []
    for lam in grid.values:
        fit = fit_l1_logistic(X, y, float(lam), warm_start=fit, tol=tol)
        act = fit.active(active_tol)
        actives.append(act.tolist())
        norms.append({int(j): abs(float(fit.weights[j])) for j in act})
        converged.append(fit.converged)
    return SelectionPath.from_fits(grid, actives, norms, converged)
