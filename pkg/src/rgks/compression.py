"""Subspace compression: four mixing-matrix strategies plus solution re-injection.

Each strategy maps the projected factors (and, for the solution-oriented
ones, the projected data) to a k_max x (k_min - 1) mixing matrix W with
orthonormal columns; SOC and SEC return columns of the identity so the
compressed basis is a plain column subset.  All strategies accept the same
five inputs and ignore what they do not need, which keeps them swappable
behind one interface.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .linalg import solve_regularized_ls, truncated_svd
from .mm import compute_weights

log = logging.getLogger(__name__)

KINDS = ("tsvd", "rbd", "soc", "sec")

# Smoothing used by the sparsity-enforcing inner solves.
SEC_EPSILON = 1e-4


def stacked_projected(R_A: np.ndarray, R_psi: np.ndarray, lam: float) -> np.ndarray:
    """The 2k x k stack of the triangular factors, [R_A; sqrt(lam) R_psi]."""
    return np.vstack([R_A, np.sqrt(lam) * R_psi])


def chi_tsvd(R_A: np.ndarray, R_psi: np.ndarray, lam: float, k_min: int) -> np.ndarray:
    """Right singular vectors of the stacked factors for the k_min - 1 largest values."""
    H = stacked_projected(R_A, R_psi, lam)
    res = truncated_svd(H, k_min - 1)
    if res.rank < k_min - 1:
        log.warning("tSVD compression rank shortfall: %d < %d columns", res.rank, k_min - 1)
    return res.W


def chi_rbd(R_A: np.ndarray, R_psi: np.ndarray, lam: float, eps_tol: float, max_dim: int) -> np.ndarray:
    """Greedy reduced-basis compression of the transposed stacked factors.

    Repeatedly picks the column of H̄ᵀ with the largest residual after
    projection onto the current basis, orthonormalizes and appends it.  The
    returned width is max_dim unless the worst-column error eps_j drops
    below eps_tol earlier, in which case the largest j with
    eps_j >= eps_tol is kept (at least one column).
    """
    if eps_tol <= 0.0 or max_dim < 1:
        raise ValueError("need eps_tol > 0 and max_dim >= 1")
    G = stacked_projected(R_A, R_psi, lam).T  # k x 2k
    k = G.shape[0]
    max_dim = min(max_dim, k)

    W = np.zeros((k, 0))
    eps_hist = []
    resid = G.copy()
    for _ in range(max_dim):
        norms = np.linalg.norm(resid, axis=0)
        pick = int(np.argmax(norms))
        if norms[pick] <= 1e-14 * max(np.linalg.norm(G), 1.0):
            break  # numerically exact factorization reached
        w = resid[:, pick]
        w = w - W @ (W.T @ w)  # second pass; resid already excludes one projection
        nw = np.linalg.norm(w)
        if nw == 0.0:
            break
        W = np.column_stack([W, w / nw])
        resid = G - W @ (W.T @ G)
        eps_hist.append(float(np.max(np.linalg.norm(resid, axis=0))))

    if W.shape[1] == 0:
        log.warning("RBD compression met a zero stacked matrix; returning one canonical column")
        W = np.zeros((k, 1))
        W[0, 0] = 1.0
        return W

    eps_d = eps_hist[-1] if len(eps_hist) == max_dim else 0.0
    if eps_d < eps_tol:
        above = [j + 1 for j, e in enumerate(eps_hist) if e >= eps_tol]
        width = max(above) if above else 1
    else:
        width = max_dim
    return W[:, :width]


def _soc_indices(z: np.ndarray, tol: float, keep: int, k_min: int) -> list[int]:
    """Index set K: the k_min - 1 largest |z_i| among the top `keep` that clear tol.

    Ordered by decreasing magnitude with ties broken by lower index.  When
    fewer than k_min - 1 indices qualify, the set is extended by the
    next-largest magnitudes regardless of the tolerance (logged).
    """
    az = np.abs(z)
    order = np.argsort(-az, kind="stable")
    wanted = k_min - 1
    K = [int(i) for i in order[:keep] if az[i] > tol][:wanted]
    if len(K) < wanted:
        log.warning(
            "solution-oriented compression found only %d of %d indices above tol=%g; extending by magnitude",
            len(K), wanted, tol,
        )
        taken = set(K)
        for i in order:
            if int(i) not in taken:
                K.append(int(i))
                taken.add(int(i))
            if len(K) == wanted:
                break
    return K


def _identity_columns(k: int, K: list[int]) -> np.ndarray:
    W = np.zeros((k, len(K)))
    for c, i in enumerate(K):
        W[i, c] = 1.0
    return W


def chi_soc(
    R_A: np.ndarray,
    R_psi: np.ndarray,
    Q_A: np.ndarray,
    d: np.ndarray,
    lam: float,
    tol: float,
    keep: int,
    k_min: int,
) -> np.ndarray:
    """Identity columns selected by the magnitudes of the projected Tikhonov solution."""
    z = solve_regularized_ls(R_A, R_psi, Q_A.T @ np.asarray(d, dtype=float).ravel(), lam)
    return _identity_columns(R_A.shape[0], _soc_indices(z, tol, keep, k_min))


def chi_sec(
    R_A: np.ndarray,
    R_psi: np.ndarray,
    Q_A: np.ndarray,
    d: np.ndarray,
    lam: float,
    inner_iters: int,
    tol: float,
    keep: int,
    k_min: int,
) -> np.ndarray:
    """Identity columns selected from a sparsity-promoting projected solution.

    The auxiliary problem min_z ||R_A z - Q_Aᵀd||^2 + lam ||R_psi z||_1 is
    solved by smoothed reweighting sweeps (q = 1 weights on R_psi z); each
    sweep minimizes the exact tangent majorant of the smoothed objective.
    The resulting z feeds the same index rule as chi_soc and is used nowhere
    else.
    """
    rhs = Q_A.T @ np.asarray(d, dtype=float).ravel()
    z = solve_regularized_ls(R_A, R_psi, rhs, lam)
    for _ in range(inner_iters):
        w = compute_weights(R_psi @ z, SEC_EPSILON, 1.0)
        z = solve_regularized_ls(R_A, np.sqrt(w / 2.0)[:, None] * R_psi, rhs, lam)
    return _identity_columns(R_A.shape[0], _soc_indices(z, tol, keep, k_min))


def sec_inner_objective(R_A, R_psi, rhs, z, lam) -> float:
    """Smoothed l1-penalized objective minimized by the chi_sec sweeps."""
    r = R_A @ z - rhs
    t = R_psi @ z
    return float(r @ r) + lam * float(np.sum(np.sqrt(t * t + SEC_EPSILON**2)))


def reinject_solution(V_tilde: np.ndarray, x_curr: np.ndarray) -> np.ndarray:
    """Append the normalized out-of-span part of x_curr as the last basis column.

    Returns V_tilde unchanged (one column short, logged) when x_curr already
    lies in its range to relative tolerance 1e-12.
    """
    x_curr = np.asarray(x_curr, dtype=float).ravel()
    nx = np.linalg.norm(x_curr)
    if nx == 0.0:
        raise ValueError("current solution is zero")
    if V_tilde.size == 0:
        return (x_curr / nx)[:, None]
    p = x_curr - V_tilde @ (V_tilde.T @ x_curr)
    p = p - V_tilde @ (V_tilde.T @ p)
    rho = np.linalg.norm(p)
    if rho <= 1e-12 * nx:
        log.info("current solution already contained in compressed range; keeping %d columns", V_tilde.shape[1])
        return V_tilde
    return np.column_stack([V_tilde, p / rho])


@dataclass(frozen=True)
class CompressionStrategy:
    """A compression routine with its parameters.

    rbd_maxdim defaults to k_min - 1 and soc_maxdim to the full projected
    dimension when left unset.  sec_lambda overrides the outer
    regularization parameter for the sparsity-enforcing inner solves.
    """

    kind: str = "tsvd"
    rbd_tol: float = 1e-5
    rbd_maxdim: int | None = None
    soc_tol: float = 1.0
    soc_maxdim: int | None = None
    sec_lambda: float | None = None
    sec_inner_iters: int = 10

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown compression kind {self.kind!r}; expected one of {KINDS}")

    def mixing_matrix(self, R_A, R_psi, Q_A, d, lam, k_min) -> np.ndarray:
        """Dispatch to the configured strategy (unused inputs are ignored)."""
        k = R_A.shape[0]
        if self.kind == "tsvd":
            return chi_tsvd(R_A, R_psi, lam, k_min)
        if self.kind == "rbd":
            max_dim = self.rbd_maxdim if self.rbd_maxdim is not None else k_min - 1
            return chi_rbd(R_A, R_psi, lam, self.rbd_tol, max_dim)
        keep = self.soc_maxdim if self.soc_maxdim is not None else k
        if self.kind == "soc":
            return chi_soc(R_A, R_psi, Q_A, d, lam, self.soc_tol, keep, k_min)
        lam_sec = self.sec_lambda if self.sec_lambda is not None else lam
        return chi_sec(R_A, R_psi, Q_A, d, lam_sec, self.sec_inner_iters, self.soc_tol, keep, k_min)
