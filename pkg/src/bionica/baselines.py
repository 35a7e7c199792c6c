"""Nonnegative PCA baseline: a rectified subspace rule on prewhitened inputs.

This online rotation search needs inputs that are already white (in the
noncentered sense), so the whitening is fit offline on the full mixture
first. The per-sample rule is the rectified Oja-class update

    y = [V h]+ ,    V += eta_t y (h - V'y)'

whose fixed points with orthogonal V and nonnegative outputs leave V
unchanged.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import NumericalAbortError
from .whitening import fit_whitening, apply_whitening


@dataclass
class NnpcaState:
    """Rotation estimate V, sample counter, and the step-size schedule."""

    V: np.ndarray
    t: int = 0
    eta0: float = 0.02
    eta_decay: float = 10000.0

    def eta_at(self, t):
        if self.eta_decay > 0.0:
            return self.eta0 / (1.0 + t / self.eta_decay)
        return self.eta0


def init_nnpca(d: int, seed, eta0: float = 0.02, eta_decay: float = 10000.0) -> NnpcaState:
    """Random orthogonal V via QR of a Gaussian matrix, sign-normalized."""
    if d < 1:
        raise ValueError("d must be >= 1")
    rng = np.random.default_rng(seed)
    Q, R = np.linalg.qr(rng.standard_normal((d, d)))
    Q = Q * np.sign(np.diag(R))  # deterministic gauge: R diagonal positive
    return NnpcaState(V=Q, t=0, eta0=eta0, eta_decay=eta_decay)


def nnpca_step(state: NnpcaState, h) -> np.ndarray:
    """One rectified-subspace update. Mutates state; returns the output y."""
    h = np.asarray(h, dtype=float).ravel()
    d = state.V.shape[0]
    if h.size != d:
        raise ValueError("input has length %d, state expects %d" % (h.size, d))
    H = np.ascontiguousarray(h[None, :])
    Y = np.empty((1, d))
    bad = _kernels.run_nnpca_kernel(H, state.V, state.t, state.eta0,
                                    state.eta_decay, Y)
    state.t += 1
    if bad >= 0:
        raise NumericalAbortError(state.t)
    return Y[0]


def run_nnpca(X, d: int, eta0: float = 0.02, eta_decay: float = 10000.0,
              seed=0, rank_tol: float = 1e-10):
    """Whiten the full mixture offline, then stream it through the rule.

    Returns (Y, whitening transform, final state); Y is d x T in stream
    order.
    """
    X = np.asarray(X, dtype=float)
    wt = fit_whitening(X, d, rank_tol)
    H = apply_whitening(wt, X)
    state = init_nnpca(d, seed, eta0, eta_decay)
    Ht = np.ascontiguousarray(H.T)
    Y = np.empty((Ht.shape[0], d))
    bad = _kernels.run_nnpca_kernel(Ht, state.V, 0, eta0, eta_decay, Y)
    if bad >= 0:
        raise NumericalAbortError(bad + 1)
    state.t = Ht.shape[0]
    return np.ascontiguousarray(Y.T), wt, state
