"""Core nonnegative-ICA algorithms: fast dynamics, online and offline fits.

The online algorithm is a single-pass, two-timescale gradient
descent-ascent on a similarity-matching saddle objective. Each sample
triggers: a projection c = Wx, a recurrent fixed-point computation for
the nonnegative output y, running-mean updates for x and c, a Hebbian
update of the feedforward weights W, and an anti-Hebbian update of the
lateral weights M. M stays symmetric positive definite as long as the
step size eta stays below the lateral timescale tau.

The offline variant does the same descent-ascent with full-batch
gradients, alternating an inner projected-gradient solve for the whole
output matrix Y with single W and M steps.
"""

import os
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np

from . import _kernels
from .datasets import write_matrix_csv, read_matrix_csv
from .whitening import pseudoinverse


class NumericalAbortError(RuntimeError):
    """Raised when a state entry becomes NaN/Inf; carries the step index."""

    def __init__(self, step):
        super().__init__("non-finite state at step %d" % step)
        self.step = step


@dataclass
class Hyperparams:
    """Step sizes and dynamics controls shared by the online and offline fits.

    gamma        step size of the recurrent output dynamics
    eta0         base learning rate for W (and, scaled by 1/tau, for M)
    eta_decay    timescale t0 of the schedule eta_t = eta0 / (1 + t/t0);
                 0 means a constant rate
    tau          lateral-to-feedforward learning-rate ratio; must exceed
                 eta0 or M can lose positive definiteness
    dyn_tol      sup-norm stopping tolerance of the output dynamics
    dyn_max_iter iteration cap of the output dynamics (non-convergence is
                 flagged, not fatal)
    warm_start   start the dynamics from the previous output instead of 0
    adaptive_gamma  use 1.8 / (Gershgorin bound on lambda_max(M)) instead
                 of the fixed gamma
    """

    gamma: float = 0.1
    eta0: float = 0.01
    eta_decay: float = 3000.0
    tau: float = 0.1
    dyn_tol: float = 1e-6
    dyn_max_iter: int = 500
    warm_start: bool = False
    adaptive_gamma: bool = False

    def validate(self):
        if not (self.gamma > 0.0):
            raise ValueError("gamma must be positive, got %r" % (self.gamma,))
        if not (0.0 < self.eta0 < self.tau):
            raise ValueError(
                "need 0 < eta0 < tau (got eta0=%r, tau=%r); eta >= tau "
                "breaks positive definiteness of M" % (self.eta0, self.tau)
            )
        if self.eta_decay < 0.0:
            raise ValueError("eta_decay must be >= 0, got %r" % (self.eta_decay,))
        if not (self.dyn_tol > 0.0):
            raise ValueError("dyn_tol must be positive, got %r" % (self.dyn_tol,))
        if self.dyn_max_iter < 1:
            raise ValueError("dyn_max_iter must be >= 1, got %r" % (self.dyn_max_iter,))

    def eta_at(self, t: int) -> float:
        """Learning rate used at (1-based) step t, including the cap."""
        eta = self.eta0
        if self.eta_decay > 0.0:
            eta = self.eta0 / (1.0 + t / self.eta_decay)
        return min(eta, 0.95 * self.tau)


@dataclass
class BioNicaState:
    """Mutable network state: weights, running means, sample counter.

    y_prev holds the last output so warm-started dynamics can resume
    from it; it is ephemeral (not checkpointed) and zero on a fresh or
    reloaded state.
    """

    W: np.ndarray
    M: np.ndarray
    xbar: np.ndarray
    cbar: np.ndarray
    t: int = 0
    y_prev: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.y_prev is None:
            self.y_prev = np.zeros(self.W.shape[0])

    @property
    def d(self):
        return self.W.shape[0]

    @property
    def k(self):
        return self.W.shape[1]


@dataclass
class StepOutput:
    """Per-sample result: output y, projection c, dynamics diagnostics."""

    y: np.ndarray
    c: np.ndarray
    dyn_iters: int
    converged: bool


@dataclass
class RunSummary:
    """Aggregate outcome of a streamed run."""

    steps: int
    nonconverged: int


@dataclass
class OfflineResult:
    """Final output matrix and weights of the batch fit, with objective trace."""

    Y: np.ndarray
    W: np.ndarray
    M: np.ndarray
    objective_trace: np.ndarray
    inner_nonconverged: int = 0


def init_state(d: int, k: int, seed) -> BioNicaState:
    """Fresh state: W entries N(0, 1/k), M = I, means and counter at zero."""
    if d < 1 or k < d:
        raise ValueError("need k >= d >= 1, got d=%r k=%r" % (d, k))
    rng = np.random.default_rng(seed)
    W = rng.standard_normal((d, k)) / np.sqrt(k)
    return BioNicaState(
        W=W, M=np.eye(d), xbar=np.zeros(k), cbar=np.zeros(d), t=0
    )


def fast_dynamics(c, M, p: Hyperparams, y0=None) -> StepOutput:
    """Run the recurrent output dynamics y <- [y + gamma(c - My)]+ to rest.

    Solves min_{y >= 0} 0.5 y'My - c'y for symmetric positive definite M.
    The returned flag reports whether both the step-size and the KKT
    stopping conditions were met within the iteration budget; a non-PD M
    typically shows up as divergence and a cleared flag.
    """
    p.validate()
    c = np.asarray(c, dtype=float).ravel()
    M = np.asarray(M, dtype=float)
    if M.shape != (c.size, c.size):
        raise ValueError("M must be %d x %d, got %r" % (c.size, c.size, M.shape))
    if not (np.all(np.isfinite(c)) and np.all(np.isfinite(M))):
        raise ValueError("non-finite entries in fast_dynamics inputs")
    if y0 is None:
        y = np.zeros(c.size)
    else:
        y = np.array(y0, dtype=float).ravel().copy()
        if y.size != c.size or np.any(y < 0.0):
            raise ValueError("y0 must be a nonnegative vector matching c")
    ynext = np.empty_like(y)
    iters, conv = _kernels.fast_dynamics_kernel(
        c, np.ascontiguousarray(M), p.gamma, p.adaptive_gamma,
        p.dyn_tol, p.dyn_max_iter, y, ynext)
    return StepOutput(y=y, c=c.copy(), dyn_iters=int(iters), converged=bool(conv))


def online_step(state: BioNicaState, x, p: Hyperparams) -> StepOutput:
    """Advance the network by one sample. Mutates state in place.

    Per-sample order: (1) c = Wx; (2) y from the fast dynamics;
    (3) counter and running means advance; (4) Hebbian W update with the
    mean-centered rank-1 covariance correction; (5) anti-Hebbian M update
    followed by symmetrization.
    """
    p.validate()
    x = np.asarray(x, dtype=float).ravel()
    if x.size != state.k:
        raise ValueError("sample has length %d, state expects %d" % (x.size, state.k))
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite input sample")
    d = state.d
    c = np.empty(d)
    ynext = np.empty(d)
    iters, conv, finite = _kernels.online_step_kernel(
        x, state.W, state.M, state.xbar, state.cbar, state.t,
        p.gamma, p.adaptive_gamma, p.eta0, p.eta_decay, p.tau,
        p.dyn_tol, p.dyn_max_iter, p.warm_start, c, state.y_prev, ynext)
    state.t += 1
    if not finite:
        raise NumericalAbortError(state.t)
    return StepOutput(y=state.y_prev.copy(), c=c, dyn_iters=int(iters),
                      converged=bool(conv))


def run_online(state: BioNicaState, X, p: Hyperparams, sink=None,
               block_size: int = 65536) -> RunSummary:
    """Stream samples through online_step in order, emitting outputs to sink.

    X is either a k x T matrix (one sample per column) or an iterable of
    k-vectors. The sink, if given, is called as sink(t, y) with the
    1-based global step counter and the output vector; y is only valid
    during the call (copy it to keep it). Uses O(dk) state plus one
    block buffer. Raises NumericalAbortError on NaN/Inf blowup.
    """
    p.validate()
    steps = 0
    nonconverged = 0
    for block in _iter_blocks(X, state.k, block_size):
        nblk = block.shape[0]
        Y = np.empty((nblk, state.d))
        t_start = state.t
        abort, nonconv = _kernels.run_online_kernel(
            block, state.W, state.M, state.xbar, state.cbar, t_start,
            p.gamma, p.adaptive_gamma, p.eta0, p.eta_decay, p.tau,
            p.dyn_tol, p.dyn_max_iter, p.warm_start, state.y_prev, Y)
        done = nblk if abort < 0 else abort + 1
        state.t = t_start + done
        steps += done
        nonconverged += int(nonconv)
        if sink is not None:
            for r in range(done):
                sink(t_start + r + 1, Y[r])
        if abort >= 0:
            raise NumericalAbortError(t_start + abort + 1)
    return RunSummary(steps=steps, nonconverged=nonconverged)


def _iter_blocks(X, k, block_size):
    """Yield C-contiguous (n, k) sample blocks from a matrix or iterable."""
    if isinstance(X, np.ndarray):
        if X.ndim != 2 or X.shape[0] != k:
            raise ValueError("X must be k x T with k=%d, got %r" % (k, X.shape))
        if X.shape[1] == 0:
            raise ValueError("empty stream")
        XT = np.ascontiguousarray(X.T, dtype=float)
        for s in range(0, XT.shape[0], block_size):
            yield XT[s:s + block_size]
        return
    buf = []
    got_any = False
    for x in X:
        x = np.asarray(x, dtype=float).ravel()
        if x.size != k:
            raise ValueError("sample has length %d, expected %d" % (x.size, k))
        buf.append(x)
        got_any = True
        if len(buf) == block_size:
            yield np.ascontiguousarray(np.vstack(buf))
            buf = []
    if buf:
        yield np.ascontiguousarray(np.vstack(buf))
    elif not got_any:
        raise ValueError("empty stream")


def collect_outputs(state: BioNicaState, X, p: Hyperparams):
    """run_online, gathering outputs into a d x T matrix.

    Returns (Y, summary). Convenience wrapper over the sink interface for
    callers that want the whole trajectory in memory.
    """
    cols = []
    summary = run_online(state, X, p, sink=lambda t, y: cols.append(y.copy()))
    Y = np.array(cols).T if cols else np.zeros((state.d, 0))
    return Y, summary


# ---------------------------------------------------------------------------
# offline (full-batch) variant

def offline_fit(X, d: int, p: Hyperparams, outer_iters: int = 500,
                y_inner_tol: float = 1e-6, seed=0) -> OfflineResult:
    """Full-batch gradient descent-ascent fit of the saddle objective.

    Alternates (a) an inner projected-gradient solve of the whole output
    matrix, Y <- [Y + gamma(WX - MY)]+ iterated until the largest entry
    change is at most y_inner_tol, with (b) one W step and (c) one M step
    using full-batch covariances. W starts from row-sign-fixed Gaussian
    entries: any row whose initial projections have more negative than
    positive mass is flipped, which removes the all-dead initializations
    the rectification would otherwise never recover from. Records the
    similarity-matching objective before the first iteration and after
    every outer iteration.
    """
    p.validate()
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be a k x T matrix")
    k, T = X.shape
    if d < 1 or d > k:
        raise ValueError("need 1 <= d <= k, got d=%r k=%r" % (d, k))
    if outer_iters < 1:
        raise ValueError("outer_iters must be >= 1")
    xm = X.mean(axis=1, keepdims=True)
    Xc = X - xm
    Cxx = (Xc @ Xc.T) / T
    Cxx = 0.5 * (Cxx + Cxx.T)
    lam = np.linalg.eigvalsh(Cxx)
    if np.sum(lam > 1e-10 * max(lam[-1], 0.0)) < d:
        raise ValueError("covariance rank below d=%d" % d)
    Cp = pseudoinverse(Cxx)
    K = X @ X.T
    B = Cp @ K
    obj_const = float(np.sum(B * B.T))

    def objective(Y):
        YY = Y @ Y.T
        P = Y @ X.T
        return float(np.sum(YY * YY) - 2.0 * np.sum((P @ Cp) * P) + obj_const)

    rng = np.random.default_rng(seed)
    W = rng.standard_normal((d, k)) / np.sqrt(k)
    C0 = W @ X
    neg_heavy = np.maximum(-C0, 0.0).sum(axis=1) > np.maximum(C0, 0.0).sum(axis=1)
    W[neg_heavy] *= -1.0
    M = np.eye(d)
    Y = np.zeros((d, T))
    eta = p.eta0
    trace = [objective(Y)]
    nonconv = 0
    for _ in range(outer_iters):
        WX = W @ X
        converged = False
        for _ in range(p.dyn_max_iter):
            Ynew = np.maximum(Y + p.gamma * (WX - M @ Y), 0.0)
            dmax = float(np.max(np.abs(Ynew - Y)))
            Y = Ynew
            if dmax <= y_inner_tol:
                converged = True
                break
        if not converged:
            nonconv += 1
        W = W + 2.0 * eta * ((Y @ X.T) / T - W @ Cxx)
        M = M + (eta / p.tau) * ((Y @ Y.T) / T - M)
        M = 0.5 * (M + M.T)
        if not (np.all(np.isfinite(W)) and np.all(np.isfinite(M))):
            raise NumericalAbortError(len(trace))
        trace.append(objective(Y))
    return OfflineResult(Y=Y, W=W, M=M, objective_trace=np.array(trace),
                         inner_nonconverged=nonconv)


# ---------------------------------------------------------------------------
# diagnostics

def lagrangian_value(W, M, Y, X) -> float:
    """Saddle-objective value tr((2/T)Y'MY - (4/T)Y'WX) - tr(M^2 - 2W Cxx W').

    Cxx is the centered sample covariance of X (1/T normalization),
    computed internally. The W-minimum given Y sits at (1/T) Y X' Cxx+
    and the M-maximum at (1/T) Y Y'.
    """
    W = np.asarray(W, float)
    M = np.asarray(M, float)
    Y = np.asarray(Y, float)
    X = np.asarray(X, float)
    d, k = W.shape
    if M.shape != (d, d) or Y.shape[0] != d or X.shape[0] != k \
            or Y.shape[1] != X.shape[1]:
        raise ValueError("inconsistent shapes: W%r M%r Y%r X%r"
                         % (W.shape, M.shape, Y.shape, X.shape))
    T = X.shape[1]
    xm = X.mean(axis=1, keepdims=True)
    Xc = X - xm
    Cxx = (Xc @ Xc.T) / T
    term1 = (2.0 / T) * float(np.sum(Y * (M @ Y)))
    term2 = (4.0 / T) * float(np.sum(Y * (W @ X)))
    term3 = float(np.trace(M @ M))
    term4 = 2.0 * float(np.sum((W @ Cxx) * W))
    return term1 - term2 - term3 + term4


def nsm_objective(Y, X, rank_tol: float = 1e-10) -> float:
    """Similarity-matching objective ||Y'Y - X' Cxx+ X||_F^2.

    Evaluated through the trace expansion (d x d and k x k matrices
    only), so it never materializes the T x T Gram matrices.
    """
    Y = np.asarray(Y, float)
    X = np.asarray(X, float)
    if Y.ndim != 2 or X.ndim != 2 or Y.shape[1] != X.shape[1]:
        raise ValueError("Y and X need matching column counts")
    T = X.shape[1]
    xm = X.mean(axis=1, keepdims=True)
    Xc = X - xm
    Cxx = (Xc @ Xc.T) / T
    Cp = pseudoinverse(0.5 * (Cxx + Cxx.T), rank_tol)
    YY = Y @ Y.T
    P = Y @ X.T
    B = Cp @ (X @ X.T)
    return float(np.sum(YY * YY) - 2.0 * np.sum((P @ Cp) * P) + np.sum(B * B.T))


def saddle_weights(Y, X, rank_tol: float = 1e-10):
    """The stationary (W, M) for a fixed output matrix Y.

    W* = (1/T) Y X' Cxx+ and M* = (1/T) Y Y'. With full-rank covariance
    these zero the Lagrangian's partial derivatives.
    """
    Y = np.asarray(Y, float)
    X = np.asarray(X, float)
    T = X.shape[1]
    xm = X.mean(axis=1, keepdims=True)
    Xc = X - xm
    Cxx = (Xc @ Xc.T) / T
    Cp = pseudoinverse(0.5 * (Cxx + Cxx.T), rank_tol)
    Wstar = (Y @ X.T) @ Cp / T
    Mstar = (Y @ Y.T) / T
    return Wstar, Mstar


# ---------------------------------------------------------------------------
# checkpointing

def save_checkpoint(state: BioNicaState, dirpath, p: Optional[Hyperparams] = None):
    """Write W.csv, M.csv, means.csv, meta.csv into dirpath (created if needed)."""
    os.makedirs(dirpath, exist_ok=True)
    write_matrix_csv(state.W, os.path.join(dirpath, "W.csv"))
    write_matrix_csv(state.M, os.path.join(dirpath, "M.csv"))
    with open(os.path.join(dirpath, "means.csv"), "w") as fh:
        fh.write(",".join("%.17g" % v for v in state.xbar) + "\n")
        fh.write(",".join("%.17g" % v for v in state.cbar) + "\n")
    meta = {"t": state.t, "d": state.d, "k": state.k}
    if p is not None:
        meta.update(asdict(p))
    with open(os.path.join(dirpath, "meta.csv"), "w") as fh:
        for key in sorted(meta):
            fh.write("%s,%s\n" % (key, _fmt_meta(meta[key])))


def _fmt_meta(v):
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return "%.17g" % v
    return str(v)


def load_checkpoint(dirpath):
    """Read a checkpoint directory back into (BioNicaState, meta dict)."""
    W = read_matrix_csv(os.path.join(dirpath, "W.csv"))
    M = read_matrix_csv(os.path.join(dirpath, "M.csv"))
    with open(os.path.join(dirpath, "means.csv")) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if len(lines) != 2:
        raise ValueError("means.csv must hold exactly two lines (xbar; cbar)")
    xbar = np.array([float(v) for v in lines[0].split(",")])
    cbar = np.array([float(v) for v in lines[1].split(",")])
    meta = {}
    with open(os.path.join(dirpath, "meta.csv")) as fh:
        for ln in fh:
            ln = ln.strip()
            if ln:
                key, val = ln.split(",", 1)
                meta[key] = val
    t = int(meta.get("t", "0"))
    d, k = W.shape
    if M.shape != (d, d) or xbar.size != k or cbar.size != d:
        raise ValueError("inconsistent checkpoint shapes")
    state = BioNicaState(W=W, M=M, xbar=xbar, cbar=cbar, t=t)
    return state, meta
