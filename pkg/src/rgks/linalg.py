"""Dense small-matrix kernels for the projected problems.

Everything here operates on plain float64 ndarrays.  Orthogonalization is
classical Gram-Schmidt with one full reorthogonalization pass (CGS2), which
keeps factors deterministic and testably orthonormal.  The sign convention
(diagonal of R nonnegative) fixes Q and R uniquely so that independently
computed factorizations can be compared exactly.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import Breakdown, RankDeficient, SingularSystem

# Relative tolerance below which a column is declared dependent.
RANK_TOL = 1e-12


class QRFactors(NamedTuple):
    """Thin QR factorization: Q (m x k, orthonormal columns), R (k x k, upper triangular)."""

    Q: np.ndarray
    R: np.ndarray

    @property
    def k(self) -> int:
        return self.R.shape[0]


def _cgs2(Q: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Orthogonalize v against the columns of Q with two CGS passes.

    Returns (w, coeffs) with v = Q @ coeffs + w and w ⊥ range(Q).
    """
    c1 = Q.T @ v
    w = v - Q @ c1
    c2 = Q.T @ w
    w = w - Q @ c2
    return w, c1 + c2


def qr_factor(M: np.ndarray) -> QRFactors:
    """Thin QR of M by column-wise CGS2.

    Raises RankDeficient(column) when a diagonal of R falls below
    RANK_TOL * ||M||_F; rank deficiency is reported, never repaired.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise ValueError("expected a 2-D array")
    m, k = M.shape
    scale = np.linalg.norm(M)
    tol = RANK_TOL * scale
    Q = np.zeros((m, 0))
    R = np.zeros((0, 0))
    for j in range(k):
        try:
            Q, R = _append(Q, R, M[:, j], tol)
        except RankDeficient:
            raise RankDeficient(j) from None
    return QRFactors(Q, R)


def _append(Q: np.ndarray, R: np.ndarray, v: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    w, coeffs = _cgs2(Q, v)
    rho = np.linalg.norm(w)
    if rho <= tol:
        raise RankDeficient(Q.shape[1])
    k = Q.shape[1]
    Rn = np.zeros((k + 1, k + 1))
    Rn[:k, :k] = R
    Rn[:k, k] = coeffs
    Rn[k, k] = rho
    return np.column_stack([Q, w / rho]), Rn


def qr_square_factor(M: np.ndarray) -> QRFactors:
    """QR with R padded to square, tolerating rank-deficient or wide-short M.

    Tries the strict CGS2 factorization first; on dependent columns (or when
    M has fewer rows than columns) falls back to a Householder factorization
    with the same sign convention, padding R with zero rows up to k x k.
    The padded rows carry no Q columns, so only R is meaningful for
    projected-problem stacking in that case.
    """
    M = np.asarray(M, dtype=float)
    k = M.shape[1]
    if M.shape[0] >= k:
        try:
            return qr_factor(M)
        except RankDeficient:
            pass
    Q, R = np.linalg.qr(M, mode="reduced")
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    Q = Q * signs
    R = signs[:, None] * R
    if R.shape[0] < k:
        R = np.vstack([R, np.zeros((k - R.shape[0], k))])
    return QRFactors(Q, R)


def qr_append_column(f: QRFactors, m_new: np.ndarray) -> QRFactors:
    """Extend a thin QR factorization by one column (single CGS2 pass).

    Equivalent to refactorizing [M, m_new] from scratch but costs one
    orthogonalization sweep.  Raises RankDeficient when m_new lies in
    range(Q) up to RANK_TOL * ||m_new||.
    """
    m_new = np.asarray(m_new, dtype=float).ravel()
    if m_new.shape[0] != f.Q.shape[0]:
        raise ValueError("column length does not match Q")
    Q, R = _append(f.Q, f.R, m_new, RANK_TOL * np.linalg.norm(m_new))
    return QRFactors(Q, R)


def golub_kahan(op, d: np.ndarray, steps: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Golub-Kahan bidiagonalization of an abstract operator, started at d.

    Returns (V, U, B) with op @ V = U @ B, V of width `steps` spanning the
    Krylov space of (AᵀA, Aᵀd), U of width steps + 1, and B lower bidiagonal
    of shape (steps + 1, steps).  Columns are reorthogonalized with CGS2.

    Raises Breakdown(step) when a recurrence norm vanishes before the
    requested width; the exception carries the partial (V, U, B) so callers
    can truncate.  A vanishing final beta is not a breakdown: the last column
    of U is completed deterministically (A V = U B still holds since the
    trailing row of B is zero).
    """
    d = np.asarray(d, dtype=float).ravel()
    nrm_d = np.linalg.norm(d)
    if nrm_d == 0.0:
        raise ValueError("starting vector is zero")
    m, n = op.m, op.n
    if steps < 1 or steps > min(m, n):
        raise ValueError("invalid number of bidiagonalization steps")

    U = np.zeros((m, steps + 1))
    V = np.zeros((n, steps))
    alphas = np.zeros(steps)
    betas = np.zeros(steps)  # betas[i] couples u_{i+2} to v_{i+1}
    U[:, 0] = d / nrm_d

    tiny = 1e-14 * nrm_d
    for j in range(steps):
        v = op.apply_adjoint(U[:, j])
        if j > 0:
            v = v - betas[j - 1] * V[:, j - 1]
        v, _ = _cgs2(V[:, :j], v)
        alphas[j] = np.linalg.norm(v)
        if alphas[j] <= tiny:
            raise Breakdown(j, partial=_gk_partial(V, U, alphas, betas, j))
        V[:, j] = v / alphas[j]

        u = op.apply(V[:, j]) - alphas[j] * U[:, j]
        u, _ = _cgs2(U[:, : j + 1], u)
        beta = np.linalg.norm(u)
        if beta <= tiny:
            if j == steps - 1:
                # Exact decomposition; pad U with any unit vector outside its range.
                U[:, j + 1] = _complete_column(U[:, : j + 1])
                betas[j] = 0.0
                break
            raise Breakdown(j + 1, partial=_gk_partial(V, U, alphas, betas, j + 1))
        betas[j] = beta
        U[:, j + 1] = u / beta

    B = np.zeros((steps + 1, steps))
    B[np.arange(steps), np.arange(steps)] = alphas
    B[np.arange(1, steps + 1), np.arange(steps)] = betas
    return V, U, B


def _gk_partial(V, U, alphas, betas, width):
    """Truncated (V, U, B) for a breakdown after `width` complete V columns."""
    B = np.zeros((width + 1, width))
    B[np.arange(width), np.arange(width)] = alphas[:width]
    B[np.arange(1, width + 1), np.arange(width)] = betas[:width]
    return V[:, :width], U[:, : width + 1], B


def _complete_column(Q: np.ndarray) -> np.ndarray:
    """A deterministic unit vector orthogonal to the columns of Q."""
    m = Q.shape[0]
    for i in range(m):
        e = np.zeros(m)
        e[i] = 1.0
        w, _ = _cgs2(Q, e)
        rho = np.linalg.norm(w)
        if rho > 0.5:  # canonical vectors cannot all be close to range(Q)
            return w / rho
    raise RuntimeError("could not complete an orthonormal column")


class TruncatedSvd(NamedTuple):
    """Rank-k factors U S Wᵀ; `rank` is the effective width actually returned."""

    U: np.ndarray
    S: np.ndarray
    W: np.ndarray
    rank: int


def truncated_svd(M: np.ndarray, k: int) -> TruncatedSvd:
    """Leading-k singular triplets of M (best rank-k Frobenius approximation).

    k is clipped to the numerical rank; the effective width is returned in
    the result rather than raised as an error.
    """
    M = np.asarray(M, dtype=float)
    if k < 0 or k > min(M.shape):
        raise ValueError("k must satisfy 0 <= k <= min(rows, cols)")
    U, s, Wt = np.linalg.svd(M, full_matrices=False)
    if s.size and s[0] > 0.0:
        numerical_rank = int(np.sum(s > s[0] * max(M.shape) * np.finfo(float).eps))
    else:
        numerical_rank = 0
    r = min(k, numerical_rank)
    return TruncatedSvd(U[:, :r], s[:r], Wt[:r].T, r)


def solve_regularized_ls(R_A: np.ndarray, R_psi: np.ndarray, rhs: np.ndarray, lam: float) -> np.ndarray:
    """Minimize ||R_A z - rhs||^2 + lam * ||R_psi z||^2 for square k x k factors.

    Solved through the stacked least-squares formulation, which is
    numerically preferable to forming the normal equations.  Raises
    SingularSystem when lam == 0 and R_A is rank deficient.
    """
    R_A = np.asarray(R_A, dtype=float)
    R_psi = np.asarray(R_psi, dtype=float)
    rhs = np.asarray(rhs, dtype=float).ravel()
    k = R_A.shape[0]
    if R_A.shape != (k, k) or R_psi.shape != (k, k) or rhs.shape[0] != k:
        raise ValueError("factors must be square k x k and rhs of length k")
    if lam < 0.0:
        raise ValueError("lam must be nonnegative")
    stacked = np.vstack([R_A, np.sqrt(lam) * R_psi])
    if lam == 0.0 and np.linalg.matrix_rank(R_A) < k:
        raise SingularSystem("R_A is rank deficient and lam == 0")
    target = np.concatenate([rhs, np.zeros(k)])
    z, *_ = np.linalg.lstsq(stacked, target, rcond=None)
    return z
