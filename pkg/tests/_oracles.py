"""Independent reference computations used by the tests.

Nothing here imports the package under test.
"""

import itertools
from math import comb

import numpy as np


def logistic_mean_loss(offsets, y):
    # offsets: (..., n) linear predictors
    return np.logaddexp(0.0, -y * offsets).mean(axis=-1)


def _best_intercepts(offsets, y, lo=-30.0, hi=30.0, iters=120):
    # ternary search per row; the loss is convex in the intercept
    lo = np.full(offsets.shape[0], lo)
    hi = np.full(offsets.shape[0], hi)
    for _ in range(iters):
        m1 = lo + (hi - lo) / 3
        m2 = hi - (hi - lo) / 3
        f1 = logistic_mean_loss(offsets + m1[:, None], y)
        f2 = logistic_mean_loss(offsets + m2[:, None], y)
        left = f1 < f2
        hi = np.where(left, m2, hi)
        lo = np.where(left, lo, m1)
    b = (lo + hi) / 2
    return b, logistic_mean_loss(offsets + b[:, None], y)


def l1_profile_objective(X, y, B, lam):
    """Objective at each row of ``B`` with the intercept minimized out."""
    B = np.atleast_2d(B)
    _, loss = _best_intercepts(B @ X.T, y)
    return loss + lam * np.abs(B).sum(axis=1)


def brute_force_l1(X, y, lam, box=3.0, step=0.1, final_step=1e-7):
    """Minimize the L1 logistic objective by grid search plus compass refinement."""
    p = X.shape[1]
    axis = np.arange(-box, box + step / 2, step)
    grid = np.array(list(itertools.product(axis, repeat=p)))
    vals = np.concatenate([l1_profile_objective(X, y, chunk, lam) for chunk in np.array_split(grid, max(1, len(grid) // 20000))])
    best = grid[np.argmin(vals)]
    fbest = vals.min()
    dirs = np.array([d for d in itertools.product((-1, 0, 1), repeat=p) if any(d)], dtype=float)
    h = step
    while h > final_step:
        cand = best + h * dirs
        f = l1_profile_objective(X, y, cand, lam)
        i = np.argmin(f)
        if f[i] < fbest:
            best, fbest = cand[i], f[i]
        else:
            h /= 2
    return best, float(fbest)


def lambda_max_formula(X, y):
    # max_j |(1/n) sum_i x_ij (y01_i - p0)| at the intercept-only model
    y01 = (y + 1) / 2
    return float(np.max(np.abs(X.T @ (y01 - y01.mean())) / len(y)))


def pearson(x, y):
    x = np.asarray(x, float) - np.mean(x)
    y = np.asarray(y, float) - np.mean(y)
    return float(x @ y / np.sqrt((x @ x) * (y @ y)))


def group_lasso_objective(X, y, beta, intercept, lam, partition):
    """Standard non-overlapping group Lasso objective with a mean logistic loss."""
    loss = float(logistic_mean_loss(X @ beta + intercept, y))
    return loss + lam * sum(float(np.linalg.norm(beta[list(g)])) for g in partition)


def sign_test_pvalue(wins, losses):
    """One-sided exact sign test, ties already dropped."""
    n = wins + losses
    if n == 0:
        return 1.0
    return sum(comb(n, k) for k in range(wins, n + 1)) / 2**n


def central_difference(f, x, h=1e-6):
    g = np.zeros_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        g[j] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def ista_group_lasso(X, y, lam, partition, iters=20000):
    """Plain proximal gradient for the non-overlapping group Lasso with an
    unpenalized intercept; slow but simple."""
    n, p = X.shape
    A = np.column_stack([X, np.ones(n)])
    L = 0.25 * np.linalg.norm(A, 2) ** 2 / n
    theta = np.zeros(p + 1)
    for _ in range(iters):
        eta = A @ theta
        w = -y / (1.0 + np.exp(y * eta)) / n
        z = theta - (A.T @ w) / L
        for g in partition:
            idx = list(g)
            nrm = np.linalg.norm(z[idx])
            z[idx] = 0.0 if nrm <= lam / L else (1 - lam / (L * nrm)) * z[idx]
        theta = z
    return theta[:p], theta[p]
