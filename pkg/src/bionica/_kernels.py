"""Compiled inner loops for the neural dynamics and streaming updates.

Single-step calls and long streams route through the same jitted
functions, so a run executed one sample at a time produces bit-identical
state to a batched call. Reference implementations in plain numpy live
in the test suite and serve as oracles, not as fallbacks.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def fast_dynamics_kernel(c, M, gamma, adapt_gamma, tol, max_iter, y, ynext):
    """Projected Jacobi iteration y <- [y + g(c - My)]+ until stationary.

    Mutates y in place (the caller chooses warm or cold start by what it
    passes in). Stops when the sup-norm step is below tol AND the
    approximate KKT conditions of min_{y>=0} 0.5 y'My - c'y hold at
    eps = 10 * tol * max|c|. Returns (iterations used, converged flag).
    """
    d = c.shape[0]
    cmax = 0.0
    for i in range(d):
        a = abs(c[i])
        if a > cmax:
            cmax = a
    eps = 10.0 * tol * cmax
    g = gamma
    if adapt_gamma:
        # Gershgorin row-sum bound on the largest eigenvalue of M
        rowmax = 0.0
        for i in range(d):
            s = 0.0
            for j in range(d):
                s += abs(M[i, j])
            if s > rowmax:
                rowmax = s
        if rowmax > 0.0:
            g = 1.8 / rowmax
    for it in range(max_iter):
        delta = 0.0
        for i in range(d):
            acc = 0.0
            for j in range(d):
                acc += M[i, j] * y[j]
            v = y[i] + g * (c[i] - acc)
            if v < 0.0:
                v = 0.0
            dd = abs(v - y[i])
            if dd > delta:
                delta = dd
            ynext[i] = v
        for i in range(d):
            y[i] = ynext[i]
        if delta <= tol:
            ok = True
            for i in range(d):
                acc = 0.0
                for j in range(d):
                    acc += M[i, j] * y[j]
                r = acc - c[i]
                if y[i] > 0.0:
                    if abs(r) > eps:
                        ok = False
                        break
                elif r < -eps:
                    ok = False
                    break
            if ok:
                return it + 1, True
    return max_iter, False


@njit(cache=True)
def online_step_kernel(x, W, M, xbar, cbar, t_prev, gamma, adapt_gamma,
                       eta0, eta_decay, tau, tol, max_iter, warm,
                       c, y, ynext):
    """One streaming update. Mutates W, M, xbar, cbar (and c, y) in place.

    Order per sample: project c = Wx, run the fast dynamics for y,
    advance the counter and both running means, then apply the Hebbian /
    anti-Hebbian weight updates with the current step size. Returns
    (dyn iterations, converged flag, all-finite flag).
    """
    d, k = W.shape
    for i in range(d):
        acc = 0.0
        for j in range(k):
            acc += W[i, j] * x[j]
        c[i] = acc
    if not warm:
        for i in range(d):
            y[i] = 0.0
    iters, conv = fast_dynamics_kernel(c, M, gamma, adapt_gamma, tol,
                                       max_iter, y, ynext)
    t = t_prev + 1
    inv = 1.0 / t
    for j in range(k):
        xbar[j] += (x[j] - xbar[j]) * inv
    for i in range(d):
        cbar[i] += (c[i] - cbar[i]) * inv
    eta = eta0
    if eta_decay > 0.0:
        eta = eta0 / (1.0 + t / eta_decay)
    cap = 0.95 * tau
    if eta > cap:
        eta = cap
    for i in range(d):
        ci = c[i] - cbar[i]
        for j in range(k):
            W[i, j] += 2.0 * eta * (y[i] * x[j] - ci * (x[j] - xbar[j]))
    r = eta / tau
    for i in range(d):
        for j in range(d):
            M[i, j] += r * (y[i] * y[j] - M[i, j])
    for i in range(d):
        for j in range(i + 1, d):
            v = 0.5 * (M[i, j] + M[j, i])
            M[i, j] = v
            M[j, i] = v
    finite = True
    for i in range(d):
        if not np.isfinite(y[i]):
            finite = False
        for j in range(k):
            if not np.isfinite(W[i, j]):
                finite = False
        for j in range(d):
            if not np.isfinite(M[i, j]):
                finite = False
    return iters, conv, finite


@njit(cache=True)
def run_online_kernel(X, W, M, xbar, cbar, t_start, gamma, adapt_gamma,
                      eta0, eta_decay, tau, tol, max_iter, warm, y, Y):
    """Stream all rows of X (one sample per row) through the online update.

    y is the dynamics state vector carried between samples (only read
    when warm is set; always left holding the last output). Writes each
    step's output into the matching row of Y. Returns (abort index,
    nonconverged count): abort index is the first step whose state went
    non-finite, or -1 if the whole stream completed.
    """
    T = X.shape[0]
    d = W.shape[0]
    c = np.empty(d)
    ynext = np.empty(d)
    nonconv = 0
    for s in range(T):
        iters, conv, finite = online_step_kernel(
            X[s], W, M, xbar, cbar, t_start + s, gamma, adapt_gamma,
            eta0, eta_decay, tau, tol, max_iter, warm, c, y, ynext)
        if not conv:
            nonconv += 1
        for i in range(d):
            Y[s, i] = y[i]
        if not finite:
            return s, nonconv
    return -1, nonconv


@njit(cache=True)
def run_nnpca_kernel(H, V, t_start, eta0, eta_decay, Y):
    """Rectified subspace rule streamed over prewhitened rows of H.

    Per sample: y = [V h]+, then V += eta_t y (h - V'y)'. Writes outputs
    to Y. Returns the first step with non-finite V (or -1 if none).
    """
    T, d = H.shape
    Vy = np.empty(d)
    y = np.empty(d)
    for s in range(T):
        h = H[s]
        for i in range(d):
            acc = 0.0
            for j in range(d):
                acc += V[i, j] * h[j]
            y[i] = acc if acc > 0.0 else 0.0
            Y[s, i] = y[i]
        t = t_start + s + 1
        eta = eta0
        if eta_decay > 0.0:
            eta = eta0 / (1.0 + t / eta_decay)
        for j in range(d):
            acc = 0.0
            for i in range(d):
                acc += V[i, j] * y[i]
            Vy[j] = acc
        finite = True
        for i in range(d):
            for j in range(d):
                V[i, j] += eta * y[i] * (h[j] - Vy[j])
                if not np.isfinite(V[i, j]):
                    finite = False
        if not finite:
            return s
    return -1
