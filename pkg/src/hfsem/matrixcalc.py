"""Symmetric-matrix calculus primitives.

Half-vectorization uses the column-major lower-triangle convention
throughout: for a p x p symmetric A, vech(A) enumerates
(1,1),(2,1),...,(p,1),(2,2),(3,2),... so that vec(A) = D_p vech(A) with
the standard duplication matrix D_p.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, NotPositiveDefiniteError

# Cholesky pivots below this times the largest diagonal entry count as zero.
PD_PIVOT_RTOL = 1e-12


def symmetrize(a: np.ndarray) -> np.ndarray:
    """Return the exactly symmetric part (a + a.T) / 2."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    return 0.5 * (a + a.T)


def half_dim(p: int) -> int:
    """p-bar = p(p+1)/2, the length of vech of a p x p matrix."""
    return p * (p + 1) // 2


def vech(m: np.ndarray) -> np.ndarray:
    """Stack the lower triangle of a symmetric matrix column by column."""
    m = np.asarray(m, dtype=float)
    p = m.shape[0]
    if m.shape != (p, p):
        raise DimensionError(f"vech needs a square matrix, got shape {m.shape}")
    # triu indices of m.T walk the lower triangle of m in column-major order
    return m.T[np.triu_indices(p)].copy()


def unvech(h: np.ndarray) -> np.ndarray:
    """Inverse of vech: rebuild the symmetric matrix."""
    h = np.asarray(h, dtype=float)
    if h.ndim != 1:
        raise DimensionError("unvech expects a vector")
    p = _infer_dim(h.size)
    m = np.zeros((p, p))
    m.T[np.triu_indices(p)] = h  # fills the lower triangle of m
    return m + np.tril(m, -1).T


def _infer_dim(size: int) -> int:
    p = int((np.sqrt(8 * size + 1) - 1) / 2 + 0.5)
    if p * (p + 1) // 2 != size:
        raise DimensionError(f"length {size} is not p(p+1)/2 for any integer p")
    return p


def vech_index(i: int, j: int, p: int) -> int:
    """Position of entry (i, j) (0-based) in the vech of a p x p matrix."""
    if i < j:
        i, j = j, i
    return j * p - j * (j - 1) // 2 + (i - j)


def duplication(p: int) -> tuple[np.ndarray, np.ndarray]:
    """Duplication matrix D_p and its Moore-Penrose inverse.

    D_p is the p^2 x p(p+1)/2 zero-one matrix with D_p vech(A) = vec(A)
    for symmetric A.  Since D^T D is diagonal (entries 1 on diagonal
    positions, 2 off-diagonal), the pseudoinverse is (D^T D)^{-1} D^T.
    """
    if p < 1:
        raise DimensionError(f"matrix dimension must be >= 1, got {p}")
    pbar = half_dim(p)
    d = np.zeros((p * p, pbar))
    for j in range(p):
        for i in range(p):
            d[j * p + i, vech_index(i, j, p)] = 1.0
    counts = d.sum(axis=0)  # 1 for diagonal pairs, 2 otherwise
    d_plus = d.T / counts[:, None]
    return d, d_plus


def logdet_pd(m: np.ndarray) -> float:
    """log det of a positive definite matrix via Cholesky.

    Raises NotPositiveDefiniteError when the factorization fails or any
    pivot falls below PD_PIVOT_RTOL times the largest diagonal entry.
    """
    m = np.asarray(m, dtype=float)
    try:
        chol = np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError("Cholesky factorization failed") from exc
    piv = np.diag(chol) ** 2
    if piv.min() <= PD_PIVOT_RTOL * max(np.diag(m).max(), 0.0):
        raise NotPositiveDefiniteError("matrix is numerically singular")
    return 2.0 * float(np.sum(np.log(np.diag(chol))))


def is_pd(m: np.ndarray) -> bool:
    try:
        logdet_pd(m)
    except NotPositiveDefiniteError:
        return False
    return True


def asymcov_w(sigma: np.ndarray) -> np.ndarray:
    """Asymptotic covariance 2 D_p^+ (Sigma (x) Sigma) D_p^+T of sqrt(n) vech(Q).

    The entry for vech positions (j1,j2),(j3,j4) equals
    Sigma[j1,j3] Sigma[j2,j4] + Sigma[j1,j4] Sigma[j2,j3].
    """
    sigma = np.asarray(sigma, dtype=float)
    if not is_pd(sigma):
        raise NotPositiveDefiniteError("asymcov_w requires a positive definite matrix")
    _, d_plus = duplication(sigma.shape[0])
    w = 2.0 * d_plus @ np.kron(sigma, sigma) @ d_plus.T
    return symmetrize(w)
