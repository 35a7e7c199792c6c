"""Permutation-matched recovery error and correlation scores.

The separation quality measure is the running mean-squared error

    Error(t) = (1/(t d)) sum_{t' <= t} ||s_t' - P y_t'||^2

where the permutation P is chosen once, to minimize the error at the
final time point, and then applied retroactively to the whole
trajectory. Outputs and sources are both nonnegative, so there is no
sign ambiguity to resolve.
"""

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment


@dataclass
class ErrorTrajectory:
    """Evaluation times, Error(t) values, and the permutation used."""

    times: np.ndarray
    errors: np.ndarray
    permutation: np.ndarray


def _check_pair(S, Y):
    S = np.asarray(S, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if S.ndim != 2 or Y.ndim != 2 or S.shape != Y.shape:
        raise ValueError("S and Y must be matching d x T matrices, got %r vs %r"
                         % (S.shape, Y.shape))
    return S, Y


def best_permutation(S, Y) -> np.ndarray:
    """Permutation p minimizing sum_t ||s_t - y_{p}||^2 where row i of the
    aligned output is Y[p[i]].

    The total cost separates over rows, so this is a linear assignment
    on C[i, j] = sum_t (S[i, t] - Y[j, t])^2. Solved exhaustively for
    d <= 6 and by the Hungarian method for larger d (both exact).
    """
    S, Y = _check_pair(S, Y)
    d = S.shape[0]
    if d > 12:
        raise ValueError("d=%d too large for permutation matching" % d)
    C = ((S[:, None, :] - Y[None, :, :]) ** 2).sum(axis=2)
    if d <= 6:
        best, best_p = None, None
        for p in itertools.permutations(range(d)):
            cost = C[np.arange(d), p].sum()
            if best is None or cost < best:
                best, best_p = cost, p
        return np.array(best_p)
    rows, cols = linear_sum_assignment(C)
    return cols[np.argsort(rows)]


def error_trajectory(S, Y, perm=None, stride: int = 100) -> ErrorTrajectory:
    """Running Error(t) at times stride, 2*stride, ..., and always T.

    The cumulative sums make each evaluation O(1) after one pass over
    the residuals. perm defaults to best_permutation(S, Y).
    """
    S, Y = _check_pair(S, Y)
    if stride < 1:
        raise ValueError("stride must be >= 1")
    d, T = S.shape
    if perm is None:
        perm = best_permutation(S, Y)
    perm = np.asarray(perm)
    resid = S - Y[perm, :]
    cum = np.cumsum(np.sum(resid * resid, axis=0))
    times = np.arange(stride, T + 1, stride)
    if times.size == 0 or times[-1] != T:
        times = np.append(times, T)
    errors = cum[times - 1] / (times * d)
    return ErrorTrajectory(times=times, errors=errors, permutation=perm)


def final_error(S, Y, perm=None) -> float:
    """Error(T): the full-run mean-squared recovery error."""
    S, Y = _check_pair(S, Y)
    if perm is None:
        perm = best_permutation(S, Y)
    resid = S - Y[np.asarray(perm), :]
    return float(np.mean(resid * resid))


def correlation_match(S, Y, perm=None) -> np.ndarray:
    """Pearson correlation of each source row with its matched output row."""
    S, Y = _check_pair(S, Y)
    if perm is None:
        perm = best_permutation(S, Y)
    Yp = Y[np.asarray(perm), :]
    out = np.empty(S.shape[0])
    for i in range(S.shape[0]):
        a = S[i] - S[i].mean()
        b = Yp[i] - Yp[i].mean()
        na = np.sqrt(np.sum(a * a))
        nb = np.sqrt(np.sum(b * b))
        if na == 0.0 or nb == 0.0:
            raise ValueError("zero-variance row %d in correlation_match" % i)
        out[i] = np.sum(a * b) / (na * nb)
    return out


def write_trajectory_csv(traj: ErrorTrajectory, path):
    """Write the trajectory as CSV with header t,error."""
    with open(path, "w") as fh:
        fh.write("t,error\n")
        for t, e in zip(traj.times, traj.errors):
            fh.write("%d,%.17g\n" % (t, e))


def read_trajectory_csv(path):
    """Read a t,error CSV back into (times, errors) arrays."""
    times, errors = [], []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "t,error":
            raise ValueError("%s: unexpected header %r" % (path, header))
        for ln in fh:
            ln = ln.strip()
            if ln:
                a, b = ln.split(",")
                times.append(int(a))
                errors.append(float(b))
    return np.array(times), np.array(errors)
