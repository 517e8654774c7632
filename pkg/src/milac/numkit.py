"""Dense complex linear-algebra primitives used by every solver.

All routines are pure functions on numpy arrays. SVD and Hermitian
eigendecompositions are delegated to LAPACK through numpy.
"""

import numpy as np

from .errors import ContractViolation, NumericFailure

__all__ = [
    "SvdFactors",
    "svd",
    "spectral_norm",
    "hermitian_sqrt",
    "project_spectral_ball",
    "orthogonal_projector",
    "hermitian_part",
    "max_eig_hermitian",
]


class SvdFactors:
    """Thin SVD ``A = U diag(s) V^H`` with singular values descending."""

    __slots__ = ("left", "singular_values", "right")

    def __init__(self, left, singular_values, right):
        self.left = left
        self.singular_values = singular_values
        self.right = right

    def reconstruct(self):
        return (self.left * self.singular_values) @ self.right.conj().T

    def __iter__(self):
        return iter((self.left, self.singular_values, self.right))


def _as_matrix(A):
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise ContractViolation(f"expected a non-empty matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ContractViolation("matrix has non-finite entries")
    return A


def svd(A):
    """Thin SVD of a finite matrix.

    Returns
    -------
    SvdFactors
        ``left`` is m x r, ``right`` is n x r with r = min(m, n).
    """
    A = _as_matrix(A)
    try:
        U, s, Vh = np.linalg.svd(A, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericFailure(f"SVD did not converge: {exc}") from exc
    return SvdFactors(U, s, Vh.conj().T)


def spectral_norm(A):
    A = np.asarray(A)
    if A.size == 0:
        return 0.0
    return float(np.linalg.norm(A, 2))


def hermitian_part(A):
    return 0.5 * (A + A.conj().T)


def max_eig_hermitian(A):
    """Largest eigenvalue of the Hermitian part of ``A``."""
    return float(np.linalg.eigvalsh(hermitian_part(np.asarray(A)))[-1])


def hermitian_sqrt(A, floor=None, inverse=False):
    """Principal square root (or inverse square root) of a Hermitian PSD matrix.

    Eigenvalues are floored at ``floor`` (default ``1e-12 * ||A||_2``) before
    taking roots, which keeps the inverse bounded for nearly singular Gram
    matrices.
    """
    A = _as_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise ContractViolation(f"expected a square matrix, got shape {A.shape}")
    norm = spectral_norm(A)
    if np.linalg.norm(A - A.conj().T) > 1e-10 * max(norm, 1.0):
        raise ContractViolation("matrix is not Hermitian")
    evals, evecs = np.linalg.eigh(hermitian_part(A))
    if evals[0] < -1e-10 * norm:
        raise ContractViolation(f"matrix is not PSD (min eigenvalue {evals[0]:.3e})")
    if floor is None:
        floor = 1e-12 * norm
    if inverse and floor <= 0.0:
        floor = np.finfo(float).tiny
    evals = np.maximum(evals, floor)
    root = np.sqrt(evals)
    if inverse:
        root = 1.0 / root
    S = (evecs * root) @ evecs.conj().T
    return hermitian_part(S)


def project_spectral_ball(A, radius=1.0):
    """Frobenius-nearest matrix with spectral norm at most ``radius``.

    Singular values above ``radius`` are clipped; a matrix already in the
    ball is returned unchanged (as a copy).
    """
    if radius <= 0:
        raise ContractViolation("radius must be positive")
    A = _as_matrix(A)
    U, s, V = svd(A)
    if s[0] <= radius:
        return A.copy()
    return (U * np.minimum(s, radius)) @ V.conj().T


def orthogonal_projector(H):
    """Projector ``H^H (H H^H)^{-1} H`` onto the row space of a full-row-rank H."""
    H = _as_matrix(H)
    s = np.linalg.svd(H, compute_uv=False)
    if H.shape[0] > H.shape[1] or s[-1] <= 1e-10 * s[0]:
        raise ContractViolation("H must have full row rank")
    P = H.conj().T @ np.linalg.solve(H @ H.conj().T, H)
    return hermitian_part(P)
