"""Overlapping group Lasso for logistic regression with network edges as groups.

Every group gets its own latent coefficient block ``v_g`` supported on the
group's columns; the model weights are the fold-back ``beta = sum_g v_g``.
Penalizing ``sum_g ||v_g||_2`` selects unions of groups, and solving it is a
plain (non-overlapping) group Lasso on the expanded design where a column
shared by k groups appears k times.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import GroupStructure, LambdaGrid, SelectionPath, ValidationError
from .lasso import ACTIVE_TOL, KKT_TOL, MAX_SWEEPS, _check_xy, _history, logistic_gradient, logistic_loss, null_intercept

# ridge added to each block's curvature bound; guards all-zero or duplicated columns
BLOCK_RIDGE = 1e-8


@dataclass(frozen=True, eq=False)
class ExpandedDesign:
    """Latent-coordinate layout: block ``g`` spans ``cols[ptr[g]:ptr[g+1]]``."""

    cols: np.ndarray
    ptr: np.ndarray
    n_columns: int

    @property
    def column_map(self) -> list[tuple[int, int]]:
        return [(g, int(c)) for g in range(self.group_count) for c in self.block(g)]

    @property
    def group_count(self) -> int:
        return self.ptr.size - 1

    @property
    def size(self) -> int:
        return self.cols.size

    def block(self, g: int) -> np.ndarray:
        return self.cols[self.ptr[g]:self.ptr[g + 1]]

    def matrix(self, X) -> np.ndarray:
        """Materialize the n x (sum of group sizes) expanded matrix."""
        return np.asarray(X)[:, self.cols]

    def fold_back(self, latent) -> np.ndarray:
        beta = np.zeros(self.n_columns)
        np.add.at(beta, self.cols, latent)
        return beta

    def block_norms(self, latent) -> np.ndarray:
        sq = np.add.reduceat(np.asarray(latent) ** 2, self.ptr[:-1]) if self.size else np.zeros(0)
        return np.sqrt(sq)


def expand_design(X, groups: GroupStructure) -> ExpandedDesign:
    X = np.asarray(X)
    if X.shape[1] != groups.n_columns:
        raise ValidationError(f"groups index {groups.n_columns} columns, X has {X.shape[1]}")
    sizes = [len(g) for g in groups.groups]
    ptr = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    cols = np.array([c for g in groups.groups for c in g], dtype=np.int64)
    return ExpandedDesign(cols, ptr, groups.n_columns)


@dataclass(frozen=True, eq=False)
class GraphLassoFit:
    design: ExpandedDesign
    latent: np.ndarray
    intercept: float
    lam: float
    converged: bool
    iterations: int
    objective_history: np.ndarray | None = None

    @property
    def weights(self) -> np.ndarray:
        return self.design.fold_back(self.latent)

    def latent_blocks(self) -> list[np.ndarray]:
        return [self.latent[self.design.ptr[g]:self.design.ptr[g + 1]] for g in range(self.design.group_count)]

    def group_norms(self) -> np.ndarray:
        return self.design.block_norms(self.latent)

    def selected_groups(self, tol: float = ACTIVE_TOL) -> np.ndarray:
        return np.flatnonzero(self.group_norms() > tol)


def group_penalty(design: ExpandedDesign, latent) -> float:
    return float(design.block_norms(latent).sum())


def objective(X, y, design: ExpandedDesign, latent, intercept, lam) -> float:
    return logistic_loss(X, y, design.fold_back(latent), intercept) + lam * group_penalty(design, latent)


def group_gradients(X, y, design: ExpandedDesign, beta, intercept) -> tuple[np.ndarray, float]:
    """Gradient of the loss w.r.t. every latent coordinate, and w.r.t. the intercept."""
    g, g0 = logistic_gradient(X, y, beta, intercept)
    return g[design.cols], g0


def lambda_max(X, y, groups: GroupStructure) -> float:
    """Largest block gradient norm at the intercept-only model."""
    X, y = _check_xy(X, y)
    design = expand_design(X, groups)
    g, _ = group_gradients(X, y, design, np.zeros(X.shape[1]), null_intercept(y))
    return float(design.block_norms(g).max())


def block_kkt_violations(X, y, design: ExpandedDesign, latent, intercept, lam) -> tuple[np.ndarray, float]:
    """Per-group stationarity residuals and the intercept gradient.

    Active block: ``||grad_g + lam * v_g / ||v_g|| ||``; inactive block:
    ``max(0, ||grad_g|| - lam)``.
    """
    latent = np.asarray(latent, dtype=float)
    g, g0 = group_gradients(X, y, design, design.fold_back(latent), intercept)
    norms = design.block_norms(latent)
    gnorm = design.block_norms(g)
    scale = np.divide(lam, norms, out=np.zeros_like(norms), where=norms > 0)
    shifted = g + np.repeat(scale, np.diff(design.ptr)) * latent
    active_res = design.block_norms(shifted)
    res = np.where(norms > 0, active_res, np.maximum(0.0, gnorm - lam))
    return res, abs(g0)


def prox_group(v, step: float) -> np.ndarray:
    """Proximal operator of ``step * ||.||_2`` (block soft-thresholding)."""
    v = np.asarray(v, dtype=float)
    nrm = np.linalg.norm(v)
    if nrm <= step:
        return np.zeros_like(v)
    return (1.0 - step / nrm) * v


def _block_lipschitz(X, design: ExpandedDesign) -> np.ndarray:
    n = X.shape[0]
    out = np.empty(design.group_count)
    for g in range(design.group_count):
        Xg = X[:, design.block(g)]
        out[g] = 0.25 * np.linalg.eigvalsh(Xg.T @ Xg / n)[-1] + BLOCK_RIDGE
    return out


def fit_graph_lasso(
    X,
    y,
    groups: GroupStructure,
    lam: float,
    warm_start: GraphLassoFit | None = None,
    tol: float = KKT_TOL,
    max_sweeps: int = MAX_SWEEPS,
    record_objective: bool = False,
    design: ExpandedDesign | None = None,
    lips: np.ndarray | None = None,
) -> GraphLassoFit:
    """Fit the latent overlapping group Lasso at a single ``lam``.

    Uses proximal Newton iterations with inner block coordinate descent over
    a growing working set of groups, stopping when every block satisfies its
    stationarity condition within ``tol``.
    """
    X, y = _check_xy(X, y)
    if not lam > 0:
        raise ValidationError("lambda must be positive")
    if design is None:
        design = expand_design(X, groups)
    if warm_start is not None:
        v = np.array(warm_start.latent, dtype=float)
        icpt = np.array([warm_start.intercept])
    else:
        v = np.zeros(design.size)
        icpt = np.array([null_intercept(y)])
    hist = np.full(max_sweeps if record_objective else 0, np.nan)

    in_work = design.block_norms(v) > 0
    sweeps = 0
    converged = False
    while True:
        res, g0 = block_kkt_violations(X, y, design, v, icpt[0], lam)
        if res.max(initial=0.0) <= tol and g0 <= tol:
            converged = True
            break
        if sweeps >= max_sweeps:
            break
        in_work |= res > tol
        work = np.flatnonzero(in_work)
        done, ok = _kernels.newton_group(
            X, y, v, design.cols, design.ptr, icpt, lam, work, max_sweeps - sweeps, tol, hist[sweeps:]
        )
        sweeps += max(done, 1)
        if not ok and sweeps < max_sweeps:
            if lips is None:
                lips = _block_lipschitz(X, design)
            eta = X @ design.fold_back(v) + icpt[0]
            sweeps += _kernels.bcd_group(
                X, y, v, design.cols, design.ptr, eta, icpt, lam, lips, work,
                min(10, max_sweeps - sweeps), 0.25 * tol, hist[sweeps:],
            )
    return GraphLassoFit(
        design, v, float(icpt[0]), float(lam), converged, sweeps,
        _history(hist, sweeps) if record_objective else None,
    )


def default_grid(X, y, groups: GroupStructure, count: int = 50, min_ratio: float = 1e-3) -> LambdaGrid:
    return LambdaGrid.geometric(lambda_max(X, y, groups), count, min_ratio)


def graph_lasso_path(
    X, y, groups: GroupStructure, grid: LambdaGrid, tol: float = KKT_TOL, active_tol: float = ACTIVE_TOL
) -> SelectionPath:
    """Warm-started fits along ``grid``; a group is active when ``||v_g|| > active_tol``."""
    X, y = _check_xy(X, y)
    design = expand_design(X, groups)
    fit = None
    actives, norms, converged = [], [], []
    for lam in grid.values:
        fit = fit_graph_lasso(X, y, groups, float(lam), warm_start=fit, tol=tol, design=design)
        gn = fit.group_norms()
        act = np.flatnonzero(gn > active_tol)
        actives.append(act.tolist())
        norms.append({int(g): float(gn[g]) for g in act})
        converged.append(fit.converged)
    return SelectionPath.from_fits(grid, actives, norms, converged)
