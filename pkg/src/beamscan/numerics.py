"""Linear-algebra kernels: thin SVD with a fixed phase convention and least squares."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

# Gram matrices with condition number above this are treated as singular
_SINGULAR_COND = 1e12
_DAMPING = 1e-12


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD ``X = U @ diag(S) @ V.conj().T``."""

    U: np.ndarray
    S: np.ndarray
    V: np.ndarray

    def reconstruct(self, n_components: int | None = None) -> np.ndarray:
        r = len(self.S) if n_components is None else n_components
        return (self.U[:, :r] * self.S[:r]) @ self.V[:, :r].conj().T


def _check_finite(x: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite entries")


def fix_column_phase(m: np.ndarray) -> np.ndarray:
    """Unit-modulus phases that make each column's largest entry real nonnegative.

    Ties resolve to the first index. Multiplying ``m`` by the returned vector
    applies the convention; all-zero columns get phase 1.
    """
    m = np.asarray(m)
    idx = np.argmax(np.abs(m), axis=0)
    pivot = m[idx, np.arange(m.shape[1])]
    mag = np.abs(pivot)
    phase = np.ones(m.shape[1], dtype=np.complex128)
    nz = mag > 0
    phase[nz] = np.conj(pivot[nz]) / mag[nz]
    return phase


def svd(x) -> SvdFactors:
    """Thin SVD of a complex matrix.

    Singular values come back in descending order. Each column of ``U`` is
    rotated so its largest-magnitude entry is real and nonnegative, with the
    matching column of ``V`` rotated identically; this makes the factors
    deterministic for matrices with distinct singular values.
    """
    x = np.asarray(x, dtype=np.complex128)
    if x.ndim != 2:
        raise ValueError(f"svd expects a matrix, got shape {x.shape}")
    _check_finite(x, "svd input")
    try:
        u, s, vh = np.linalg.svd(x, full_matrices=False)
    except np.linalg.LinAlgError:
        # gesdd occasionally fails to converge; gesvd is slower but robust
        u, s, vh = scipy.linalg.svd(x, full_matrices=False, lapack_driver="gesvd")
    v = vh.conj().T
    phase = fix_column_phase(u)
    return SvdFactors(U=u * phase, S=s, V=v * phase)


def lstsq(a, b) -> np.ndarray:
    """Minimum-norm solution of ``min_X ||a @ X - b||_F``."""
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    vector_rhs = b.ndim == 1
    if vector_rhs:
        b = b[:, None]
    if a.ndim != 2 or a.shape[0] != b.shape[0]:
        raise ValueError(f"lstsq shape mismatch: a {a.shape}, b {b.shape}")
    _check_finite(a, "lstsq matrix")
    _check_finite(b, "lstsq right-hand side")
    x = np.linalg.lstsq(a, b, rcond=None)[0]
    return x[:, 0] if vector_rhs else x


def solve_gram(gram: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``X @ gram = rhs`` for a Hermitian positive semidefinite ``gram``.

    This is the normal-equation form of an ALS factor update. When ``gram`` is
    numerically singular (collinear factors) a Tikhonov term
    ``1e-12 * trace(gram) / n`` is added to the diagonal instead of failing.
    """
    gram = np.asarray(gram, dtype=np.complex128)
    rhs = np.asarray(rhs, dtype=np.complex128)
    n = gram.shape[0]
    gram = 0.5 * (gram + gram.conj().T)
    if np.linalg.cond(gram) > _SINGULAR_COND:
        lam = _DAMPING * max(np.trace(gram).real, np.finfo(float).tiny) / n
        gram = gram + lam * np.eye(n)
    # X gram = rhs  <=>  gram^H X^H = rhs^H, and gram is Hermitian
    try:
        cho = scipy.linalg.cho_factor(gram)
        return scipy.linalg.cho_solve(cho, rhs.conj().T).conj().T
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(gram, rhs.conj().T, rcond=None)[0].conj().T
