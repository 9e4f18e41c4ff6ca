"""Compiled inner loops for the logistic solvers.

Each coordinate (or block) step is a proximal Newton step using the local
curvature of the logistic loss. If it fails to lower the objective the
curvature estimate is doubled until it does; the global bound of 1/4 on the
logistic curvature makes the last candidate a majorization step, so every
accepted step decreases the objective and the sweep sequence is monotone.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _sigmoid(t):
    if t >= 0:
        return 1.0 / (1.0 + math.exp(-t))
    e = math.exp(t)
    return e / (1.0 + e)


@njit(cache=True, nogil=True)
def _log1pexp(t):
    if t > 0:
        return t + math.log1p(math.exp(-t))
    return math.log1p(math.exp(t))


@njit(cache=True, nogil=True)
def _loss(y, eta):
    s = 0.0
    for i in range(y.size):
        s += _log1pexp(-y[i] * eta[i])
    return s / y.size


@njit(cache=True, nogil=True)
def _weights(y, eta, w, h):
    # w_i = d loss / d eta_i, h_i = d^2 loss / d eta_i^2
    n = y.size
    for i in range(n):
        p = _sigmoid(-y[i] * eta[i])
        w[i] = -y[i] * p / n
        h[i] = p * (1.0 - p) / n


@njit(cache=True, nogil=True)
def _shifted_loss(y, eta, x, d):
    s = 0.0
    for i in range(y.size):
        s += _log1pexp(-y[i] * (eta[i] + d * x[i]))
    return s / y.size


@njit(cache=True, nogil=True)
def _intercept_step(y, eta, icpt, w, h):
    n = y.size
    _weights(y, eta, w, h)
    g0 = 0.0
    h0 = 0.0
    for i in range(n):
        g0 += w[i]
        h0 += h[i]
    if g0 == 0.0:
        return 0.0
    base = _loss(y, eta)
    curv = max(h0, 1e-12)
    ones = np.ones(n)
    while True:
        d = -g0 / curv
        if _shifted_loss(y, eta, ones, d) <= base or curv >= 0.25:
            break
        curv = min(2.0 * curv, 0.25)
    icpt[0] += d
    for i in range(n):
        eta[i] += d
    _weights(y, eta, w, h)
    return abs(g0)


@njit(cache=True, nogil=True)
def _soft(z, t):
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


@njit(cache=True, nogil=True)
def cd_lasso(X, y, beta, eta, icpt, lam, lips, work, max_sweeps, tol, hist):
    """Cyclic coordinate descent on the columns listed in ``work``.

    ``lips[j]`` is the global curvature bound of column j. Returns the number
    of sweeps run; stops once the largest scaled step of a sweep is below
    ``tol``.
    """
    n = X.shape[0]
    w = np.empty(n)
    h = np.empty(n)
    x = np.empty(n)
    for sweep in range(max_sweeps):
        biggest = _intercept_step(y, eta, icpt, w, h)
        for jj in range(work.size):
            j = work[jj]
            g = 0.0
            c = 0.0
            for i in range(n):
                x[i] = X[i, j]
                g += x[i] * w[i]
                c += x[i] * x[i] * h[i]
            L = lips[j]
            b = beta[j]
            if b == 0.0 and abs(g) <= lam:
                continue
            base = _loss(y, eta) + lam * abs(b)
            curv = max(c, 1e-12 * L)
            while True:
                new = _soft(b - g / curv, lam / curv)
                d = new - b
                if curv >= L or _shifted_loss(y, eta, x, d) + lam * abs(new) <= base:
                    break
                curv = min(2.0 * curv, L)
            if d != 0.0:
                beta[j] = new
                for i in range(n):
                    eta[i] += d * x[i]
                _weights(y, eta, w, h)
                if L * abs(d) > biggest:
                    biggest = L * abs(d)
        if hist.size > sweep:
            hist[sweep] = _loss(y, eta) + lam * np.abs(beta).sum()
        if biggest <= tol:
            return sweep + 1
    return max_sweeps


@njit(cache=True, nogil=True)
def _block_loss(y, eta, X, cols, s, e, dv):
    acc = 0.0
    n = y.size
    for i in range(n):
        t = eta[i]
        for k in range(s, e):
            t += dv[k - s] * X[i, cols[k]]
        acc += _log1pexp(-y[i] * t)
    return acc / n


@njit(cache=True, nogil=True)
def _max_eig(A, m):
    # largest eigenvalue of the leading m x m block of a symmetric PSD matrix
    if m == 1:
        return A[0, 0]
    if m == 2:
        tr = A[0, 0] + A[1, 1]
        det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
        disc = max(tr * tr / 4.0 - det, 0.0)
        return tr / 2.0 + math.sqrt(disc)
    return np.linalg.eigvalsh(np.ascontiguousarray(A[:m, :m]))[-1]


@njit(cache=True, nogil=True)
def bcd_group(X, y, v, cols, ptr, eta, icpt, lam, lips, work, max_sweeps, tol, hist):
    """Block coordinate descent over latent group blocks.

    Block ``g`` owns latent entries ``v[ptr[g]:ptr[g+1]]`` attached to the
    original columns ``cols[ptr[g]:ptr[g+1]]``; ``eta`` is kept equal to
    ``X @ fold_back(v) + intercept``. ``lips[g]`` bounds the block curvature.
    """
    n = X.shape[0]
    w = np.empty(n)
    h = np.empty(n)
    maxsize = 0
    for g in range(ptr.size - 1):
        maxsize = max(maxsize, ptr[g + 1] - ptr[g])
    grad = np.empty(maxsize)
    old = np.empty(maxsize)
    z = np.empty(maxsize)
    dv = np.empty(maxsize)
    H = np.empty((maxsize, maxsize))
    for sweep in range(max_sweeps):
        biggest = _intercept_step(y, eta, icpt, w, h)
        for gg in range(work.size):
            g = work[gg]
            s = ptr[g]
            e = ptr[g + 1]
            m = e - s
            vnorm = 0.0
            gnorm = 0.0
            for a in range(m):
                ca = cols[s + a]
                acc = 0.0
                for i in range(n):
                    acc += X[i, ca] * w[i]
                grad[a] = acc
                old[a] = v[s + a]
                vnorm += old[a] * old[a]
                gnorm += acc * acc
            vnorm = math.sqrt(vnorm)
            if vnorm == 0.0 and math.sqrt(gnorm) <= lam:
                continue
            for a in range(m):
                ca = cols[s + a]
                for b in range(a, m):
                    cb = cols[s + b]
                    acc = 0.0
                    for i in range(n):
                        acc += X[i, ca] * X[i, cb] * h[i]
                    H[a, b] = acc
                    H[b, a] = acc
            L = lips[g]
            curv = max(_max_eig(H, m), 1e-12 * L)
            base = _loss(y, eta) + lam * vnorm
            while True:
                zn = 0.0
                for a in range(m):
                    z[a] = old[a] - grad[a] / curv
                    zn += z[a] * z[a]
                zn = math.sqrt(zn)
                scale = 0.0
                if zn > 0.0:
                    scale = max(0.0, 1.0 - lam / (curv * zn))
                newnorm = scale * zn
                for a in range(m):
                    dv[a] = scale * z[a] - old[a]
                if curv >= L or _block_loss(y, eta, X, cols, s, e, dv) + lam * newnorm <= base:
                    break
                curv = min(2.0 * curv, L)
            step = 0.0
            for a in range(m):
                d = dv[a]
                if d != 0.0:
                    v[s + a] = old[a] + d
                    ca = cols[s + a]
                    for i in range(n):
                        eta[i] += d * X[i, ca]
                step += d * d
            if step > 0.0:
                _weights(y, eta, w, h)
            step = L * math.sqrt(step)
            if step > biggest:
                biggest = step
        if hist.size > sweep:
            pen = 0.0
            for g in range(ptr.size - 1):
                sq = 0.0
                for k in range(ptr[g], ptr[g + 1]):
                    sq += v[k] * v[k]
                pen += math.sqrt(sq)
            hist[sweep] = _loss(y, eta) + lam * pen
        if biggest <= tol:
            return sweep + 1
    return max_sweeps


@njit(cache=True, nogil=True)
def gradient(X, y, eta):
    """Gradient of the mean logistic loss w.r.t. the columns of X."""
    n, p = X.shape
    w = np.empty(n)
    h = np.empty(n)
    _weights(y, eta, w, h)
    out = np.zeros(p)
    for j in range(p):
        acc = 0.0
        for i in range(n):
            acc += X[i, j] * w[i]
        out[j] = acc
    return out


@njit(cache=True, nogil=True)
def _design(X, cols, n):
    # working columns plus a trailing all-ones intercept column
    k = cols.size
    A = np.empty((n, k + 1))
    for a in range(k):
        for i in range(n):
            A[i, a] = X[i, cols[a]]
    for i in range(n):
        A[i, k] = 1.0
    return A


@njit(cache=True, nogil=True)
def _gram(A, h):
    n, m = A.shape
    B = np.empty((n, m))
    for i in range(n):
        for a in range(m):
            B[i, a] = A[i, a] * h[i]
    return A.T @ B


@njit(cache=True, nogil=True)
def newton_lasso(X, y, beta, icpt, lam, work, max_iter, tol, hist):
    """Proximal Newton iterations for the L1 logistic problem on ``work``.

    Each iteration minimizes the penalized second-order model of the loss by
    coordinate descent on the working Gram matrix, then backtracks along the
    resulting direction until the objective decreases (sufficient-decrease
    rule). Returns ``(iterations, ok)``; ``ok`` is False if a line search
    failed, in which case the caller falls back to majorized steps.
    """
    n = X.shape[0]
    k = work.size
    A = _design(X, work, n)
    w = np.empty(n)
    h = np.empty(n)
    x = np.empty(k + 1)
    for a in range(k):
        x[a] = beta[work[a]]
    x[k] = icpt[0]
    # columns outside ``work`` are zero, so they do not enter eta
    eta = A @ x
    pen = 0.0
    for a in range(k):
        pen += abs(x[a])
    f = _loss(y, eta) + lam * pen
    for it in range(max_iter):
        _weights(y, eta, w, h)
        r = A.T @ w
        # KKT residual on the working coordinates
        kkt = abs(r[k])
        for a in range(k):
            if x[a] != 0.0:
                res = abs(r[a] + lam * np.sign(x[a]))
            else:
                res = max(0.0, abs(r[a]) - lam)
            if res > kkt:
                kkt = res
        if kkt <= tol:
            return it, True
        G = _gram(A, h)
        for a in range(k + 1):
            G[a, a] += 1e-12
        z = x.copy()
        q = np.zeros(k + 1)
        inner_tol = max(0.1 * tol, 0.01 * kkt)
        for _ in range(1000):
            big = 0.0
            for a in range(k + 1):
                ga = r[a] + q[a]
                if a == k:
                    new = z[a] - ga / G[a, a]
                else:
                    new = _soft(z[a] - ga / G[a, a], lam / G[a, a])
                d = new - z[a]
                if d != 0.0:
                    z[a] = new
                    for b in range(k + 1):
                        q[b] += d * G[a, b]
                    if abs(d) * G[a, a] > big:
                        big = abs(d) * G[a, a]
            if big <= inner_tol:
                break
        dirn = z - x
        pen_new = 0.0
        for a in range(k):
            pen_new += abs(z[a])
        delta = r @ dirn + lam * (pen_new - pen)
        deta = A @ dirn
        t = 1.0
        accepted = False
        for _ in range(40):
            xt = x + t * dirn
            pt = 0.0
            for a in range(k):
                pt += abs(xt[a])
            et = eta + t * deta
            ft = _loss(y, et) + lam * pt
            if ft <= f + 1e-4 * t * delta:
                x = xt
                eta = et
                f = ft
                pen = pt
                accepted = True
                break
            t *= 0.5
        if hist.size > it:
            hist[it] = f
        if not accepted:
            for a in range(k):
                beta[work[a]] = x[a]
            icpt[0] = x[k]
            return it + 1, False
        for a in range(k):
            beta[work[a]] = x[a]
        icpt[0] = x[k]
    return max_iter, True


@njit(cache=True, nogil=True)
def newton_group(X, y, v, cols, ptr, icpt, lam, work, max_iter, tol, hist):
    """Proximal Newton iterations for the latent group problem on the groups
    listed in ``work``.

    The inner solver is block coordinate descent on the second-order model,
    each block step majorizing its diagonal Gram block by its largest
    eigenvalue. Returns ``(iterations, ok)`` like :func:`newton_lasso`.
    """
    n = X.shape[0]
    ng = work.size
    bptr = np.zeros(ng + 1, dtype=np.int64)
    for a in range(ng):
        g = work[a]
        bptr[a + 1] = bptr[a] + ptr[g + 1] - ptr[g]
    K = bptr[ng]
    ecols = np.empty(K, dtype=np.int64)
    x = np.empty(K + 1)
    for a in range(ng):
        g = work[a]
        for t in range(ptr[g + 1] - ptr[g]):
            ecols[bptr[a] + t] = cols[ptr[g] + t]
            x[bptr[a] + t] = v[ptr[g] + t]
    x[K] = icpt[0]
    A = _design(X, ecols, n)
    w = np.empty(n)
    h = np.empty(n)
    eta = A @ x
    bnorm = np.empty(ng)
    pen = 0.0
    for a in range(ng):
        s = 0.0
        for t in range(bptr[a], bptr[a + 1]):
            s += x[t] * x[t]
        pen += math.sqrt(s)
    f = _loss(y, eta) + lam * pen
    maxsize = 0
    for a in range(ng):
        maxsize = max(maxsize, bptr[a + 1] - bptr[a])
    Hb = np.empty((maxsize, maxsize))
    zb = np.empty(maxsize)
    for it in range(max_iter):
        _weights(y, eta, w, h)
        r = A.T @ w
        kkt = abs(r[K])
        for a in range(ng):
            s0 = bptr[a]
            s1 = bptr[a + 1]
            vn = 0.0
            gn = 0.0
            for t in range(s0, s1):
                vn += x[t] * x[t]
                gn += r[t] * r[t]
            vn = math.sqrt(vn)
            if vn > 0.0:
                res = 0.0
                for t in range(s0, s1):
                    e = r[t] + lam * x[t] / vn
                    res += e * e
                res = math.sqrt(res)
            else:
                res = max(0.0, math.sqrt(gn) - lam)
            if res > kkt:
                kkt = res
        if kkt <= tol:
            return it, True
        G = _gram(A, h)
        G[K, K] += 1e-12
        for a in range(ng):
            m = bptr[a + 1] - bptr[a]
            for s in range(m):
                for t in range(m):
                    Hb[s, t] = G[bptr[a] + s, bptr[a] + t]
            bnorm[a] = _max_eig(Hb, m) + 1e-12
        z = x.copy()
        q = np.zeros(K + 1)
        inner_tol = max(0.1 * tol, 0.01 * kkt)
        for _ in range(2000):
            big = 0.0
            # intercept
            d = -(r[K] + q[K]) / G[K, K]
            if d != 0.0:
                z[K] += d
                for b in range(K + 1):
                    q[b] += d * G[K, b]
                big = abs(d) * G[K, K]
            for a in range(ng):
                s0 = bptr[a]
                m = bptr[a + 1] - s0
                L = bnorm[a]
                zn = 0.0
                for t in range(m):
                    zb[t] = z[s0 + t] - (r[s0 + t] + q[s0 + t]) / L
                    zn += zb[t] * zb[t]
                zn = math.sqrt(zn)
                scale = 0.0
                if zn > 0.0:
                    scale = max(0.0, 1.0 - lam / (L * zn))
                step = 0.0
                for t in range(m):
                    d = scale * zb[t] - z[s0 + t]
                    if d != 0.0:
                        z[s0 + t] += d
                        for b in range(K + 1):
                            q[b] += d * G[s0 + t, b]
                        step += d * d
                step = L * math.sqrt(step)
                if step > big:
                    big = step
            if big <= inner_tol:
                break
        dirn = z - x
        pen_new = 0.0
        for a in range(ng):
            s = 0.0
            for t in range(bptr[a], bptr[a + 1]):
                s += z[t] * z[t]
            pen_new += math.sqrt(s)
        delta = r @ dirn + lam * (pen_new - pen)
        deta = A @ dirn
        t = 1.0
        accepted = False
        for _ in range(40):
            xt = x + t * dirn
            pt = 0.0
            for a in range(ng):
                s = 0.0
                for u in range(bptr[a], bptr[a + 1]):
                    s += xt[u] * xt[u]
                pt += math.sqrt(s)
            et = eta + t * deta
            ft = _loss(y, et) + lam * pt
            if ft <= f + 1e-4 * t * delta:
                x = xt
                eta = et
                f = ft
                pen = pt
                accepted = True
                break
            t *= 0.5
        if hist.size > it:
            hist[it] = f
        for a in range(ng):
            g = work[a]
            for u in range(ptr[g + 1] - ptr[g]):
                v[ptr[g] + u] = x[bptr[a] + u]
        icpt[0] = x[K]
        if not accepted:
            return it + 1, False
    return max_iter, True
