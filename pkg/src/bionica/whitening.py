"""Noncentered whitening and symmetric pseudoinverse machinery.

The whitening transform F maps k-dimensional mixtures to d-dimensional
vectors h = F x whose (centered) sample covariance is the identity. No
mean is subtracted from x, so h keeps a nonzero mean; only second-order
structure is equalized. F is built from the top-d eigenpairs of the
sample covariance with the gauge fixed to F = Lambda^(-1/2) U^T, which
makes outputs deterministic. F^T F then equals the Moore-Penrose
pseudoinverse of the covariance restricted to its top-d eigenspace.
"""

from dataclasses import dataclass

import numpy as np


@dataclass
class CovarianceSummary:
    """Sample mean, centered covariance (1/T normalization), and count."""

    mean: np.ndarray
    cov: np.ndarray
    count: int


@dataclass
class EigenStructure:
    """Retained eigenpairs of a PSD matrix, eigenvalues descending."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # k x r, column-orthonormal
    rank_tol: float


@dataclass
class WhiteningTransform:
    """d x k whitening matrix F plus the inputs' mean (diagnostic only)."""

    F: np.ndarray
    mean: np.ndarray
    eigen: EigenStructure


def sample_covariance(X) -> CovarianceSummary:
    """Mean and centered covariance of column-sample data, 1/T weights."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] < 2:
        raise ValueError("need a 2-D matrix with at least 2 columns")
    T = X.shape[1]
    mean = X.mean(axis=1)
    Xc = X - mean[:, None]
    cov = (Xc @ Xc.T) / T
    cov = 0.5 * (cov + cov.T)
    return CovarianceSummary(mean=mean, cov=cov, count=T)


def eigendecompose_psd(C, rank_tol: float = 1e-10) -> EigenStructure:
    """Eigenpairs of a symmetric PSD matrix above a relative rank cutoff.

    Keeps exactly the eigenvalues larger than rank_tol times the largest
    one, sorted descending. Eigenvector signs are fixed so that each
    column's largest-magnitude entry is positive.
    """
    C = np.asarray(C, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ValueError("matrix must be square")
    if np.max(np.abs(C - C.T)) > 1e-10 * max(1.0, np.max(np.abs(C))):
        raise ValueError("matrix is not symmetric")
    lam, U = np.linalg.eigh(0.5 * (C + C.T))
    lam = lam[::-1]
    U = U[:, ::-1]
    if lam[0] <= 0.0:
        raise ValueError("matrix has rank 0 (no positive eigenvalues)")
    keep = lam > rank_tol * lam[0]
    lam = lam[keep]
    U = U[:, keep]
    # deterministic sign: largest-magnitude component of each column positive
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    U = U * signs
    return EigenStructure(eigenvalues=lam, eigenvectors=U, rank_tol=rank_tol)


def pseudoinverse(C, rank_tol: float = 1e-10) -> np.ndarray:
    """Moore-Penrose pseudoinverse of a symmetric PSD matrix."""
    es = eigendecompose_psd(C, rank_tol)
    U = es.eigenvectors
    return (U / es.eigenvalues) @ U.T


def whitening_transform(cov: CovarianceSummary, d: int, rank_tol: float = 1e-10) -> WhiteningTransform:
    """Build F = Lambda^(-1/2) U^T from the top-d eigenpairs of cov."""
    es = eigendecompose_psd(cov.cov, rank_tol)
    if es.eigenvalues.size < d:
        raise ValueError(
            "covariance rank %d is below the requested dimension %d"
            % (es.eigenvalues.size, d)
        )
    lam = es.eigenvalues[:d]
    U = es.eigenvectors[:, :d]
    F = (U / np.sqrt(lam)).T
    top = EigenStructure(eigenvalues=lam, eigenvectors=U, rank_tol=rank_tol)
    return WhiteningTransform(F=F, mean=cov.mean, eigen=top)


def apply_whitening(wt: WhiteningTransform, X) -> np.ndarray:
    """h_t = F x_t for every column. No mean subtraction."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != wt.F.shape[1]:
        raise ValueError(
            "dimension mismatch: F is %r, X is %r" % (wt.F.shape, X.shape)
        )
    return wt.F @ X


def fit_whitening(X, d: int, rank_tol: float = 1e-10) -> WhiteningTransform:
    """Convenience: sample_covariance followed by whitening_transform."""
    return whitening_transform(sample_covariance(X), d, rank_tol)
