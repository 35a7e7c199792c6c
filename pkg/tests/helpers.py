"""Reference implementations used as independent oracles by the tests.

Everything here is written with plain Python loops in the same
left-to-right accumulation order as the compiled kernels, so comparisons
can use very tight tolerances without worrying about summation order.
"""

import numpy as np


def qp_oracle(M, c):
    """Exact minimizer of 0.5 y'My - c'y over y >= 0, for PD M.

    Enumerates all 2^d support sets and returns the unique point that
    satisfies the KKT conditions: My = c on the support, y > 0 there,
    and My - c >= 0 off the support. Independent of any iterative
    solver, so it serves as ground truth for the dynamics.
    """
    c = np.asarray(c, dtype=float)
    M = np.asarray(M, dtype=float)
    d = c.size
    scale = 1.0 + float(np.max(np.abs(c)))
    for mask in range(1 << d):
        sup = [i for i in range(d) if mask >> i & 1]
        y = np.zeros(d)
        if sup:
            try:
                ysup = np.linalg.solve(M[np.ix_(sup, sup)], c[sup])
            except np.linalg.LinAlgError:
                continue
            if np.any(ysup < -1e-10 * scale):
                continue
            y[sup] = np.maximum(ysup, 0.0)
        g = M @ y - c
        ok = True
        for i in range(d):
            if mask >> i & 1:
                if abs(g[i]) > 1e-7 * scale:
                    ok = False
                    break
            elif g[i] < -1e-7 * scale:
                ok = False
                break
        if ok:
            return y
    raise AssertionError("no KKT point found; M is probably not PD")


def reference_fast_dynamics(c, M, gamma, adaptive_gamma, tol, max_iter):
    """Loop-for-loop transcription of the projected Jacobi iteration."""
    d = len(c)
    cmax = 0.0
    for i in range(d):
        if abs(c[i]) > cmax:
            cmax = abs(c[i])
    eps = 10.0 * tol * cmax
    g = gamma
    if adaptive_gamma:
        rowmax = 0.0
        for i in range(d):
            s = 0.0
            for j in range(d):
                s += abs(M[i][j])
            if s > rowmax:
                rowmax = s
        if rowmax > 0.0:
            g = 1.8 / rowmax
    y = [0.0] * d
    for it in range(max_iter):
        ynext = [0.0] * d
        delta = 0.0
        for i in range(d):
            acc = 0.0
            for j in range(d):
                acc += M[i][j] * y[j]
            v = y[i] + g * (c[i] - acc)
            if v < 0.0:
                v = 0.0
            if abs(v - y[i]) > delta:
                delta = abs(v - y[i])
            ynext[i] = v
        y = ynext
        if delta <= tol:
            ok = True
            for i in range(d):
                acc = 0.0
                for j in range(d):
                    acc += M[i][j] * y[j]
                r = acc - c[i]
                if y[i] > 0.0:
                    if abs(r) > eps:
                        ok = False
                        break
                elif r < -eps:
                    ok = False
                    break
            if ok:
                return np.array(y), it + 1, True
    return np.array(y), max_iter, False


def reference_online_step(x, W, M, xbar, cbar, t_prev, p):
    """One cold-start streaming update, mutating the arrays in place.

    Mirrors the documented order: projection, output dynamics, counter
    and running means, feedforward update, lateral update, symmetrize.
    Returns (y, c, new t).
    """
    d, k = W.shape
    c = np.zeros(d)
    for i in range(d):
        acc = 0.0
        for j in range(k):
            acc += W[i, j] * x[j]
        c[i] = acc
    y, _, _ = reference_fast_dynamics(
        list(c), [list(row) for row in M], p.gamma, p.adaptive_gamma,
        p.dyn_tol, p.dyn_max_iter)
    t = t_prev + 1
    inv = 1.0 / t
    for j in range(k):
        xbar[j] += (x[j] - xbar[j]) * inv
    for i in range(d):
        cbar[i] += (c[i] - cbar[i]) * inv
    eta = p.eta0
    if p.eta_decay > 0.0:
        eta = p.eta0 / (1.0 + t / p.eta_decay)
    if eta > 0.95 * p.tau:
        eta = 0.95 * p.tau
    for i in range(d):
        ci = c[i] - cbar[i]
        for j in range(k):
            W[i, j] += 2.0 * eta * (y[i] * x[j] - ci * (x[j] - xbar[j]))
    r = eta / p.tau
    for i in range(d):
        for j in range(d):
            M[i, j] += r * (y[i] * y[j] - M[i, j])
    for i in range(d):
        for j in range(i + 1, d):
            v = 0.5 * (M[i, j] + M[j, i])
            M[i, j] = v
            M[j, i] = v
    return y, c, t


def random_pd_matrix(d, rng, lam_lo=0.3, lam_hi=3.0):
    """Random symmetric PD matrix with eigenvalues in [lam_lo, lam_hi]."""
    Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    lam = rng.uniform(lam_lo, lam_hi, size=d)
    return (Q * lam) @ Q.T
