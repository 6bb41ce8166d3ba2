"""Reweighting machinery: smoothed objective, tangent majorant, GCV.

The smoothed penalty on t = Ψx is sum_j (t_j^2 + eps^2)^(q/2).  The solvers
minimize the weighted quadratic ||Ax - d||^2 + lam * ||P Ψ x||^2 with
P^2 = diag(w), w = (t^2 + eps^2)^(q/2 - 1) evaluated at the current iterate.
That quadratic is an exact tangent majorant (equal value and gradient at the
expansion point, dominating everywhere) of

    J(x) = ||Ax - d||^2 + (2 lam / q) * sum_j ((Ψx)_j^2 + eps^2)^(q/2),

so the objective reported here carries the 2/q factor on the penalty; for
q = 2 it reduces to plain Tikhonov.  Monotone descent of J under
minimize-then-reweight iterations follows from concavity of
u -> (u + eps^2)^(q/2) for q <= 2.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .linalg import solve_regularized_ls

log = logging.getLogger(__name__)

DEFAULT_EPSILON = 1e-2
DEFAULT_Q = 1.0
DEFAULT_GRID = (1e-12, 1e2, 60)


def compute_weights(u: np.ndarray, epsilon: float, q: float) -> np.ndarray:
    """Elementwise IRLS weights (u^2 + eps^2)^(q/2 - 1).

    Strictly positive for eps > 0; the all-ones vector when q = 2.
    """
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    if not 0.0 < q <= 2.0:
        raise ValueError("q must lie in (0, 2]")
    u = np.asarray(u, dtype=float)
    return (u * u + epsilon * epsilon) ** (q / 2.0 - 1.0)


def weighting_matrix(w: np.ndarray) -> np.ndarray:
    """Diagonal of P = diag(w)^(1/2), applied matrix-free as row scaling."""
    w = np.asarray(w, dtype=float)
    if np.any(w < 0.0):
        raise ValueError("weights must be nonnegative")
    return np.sqrt(w)


def smoothed_penalty(u: np.ndarray, epsilon: float, q: float) -> float:
    """sum_j (u_j^2 + eps^2)^(q/2)."""
    u = np.asarray(u, dtype=float)
    return float(np.sum((u * u + epsilon * epsilon) ** (q / 2.0)))


def total_objective(misfit: float, penalty: float, lam: float, q: float) -> float:
    return misfit + (2.0 * lam / q) * penalty


@dataclass(frozen=True)
class ObjectiveValue:
    """Decomposed objective: total = misfit + (2 lam / q) * regularizer."""

    misfit: float
    regularizer: float
    lam: float
    q: float
    total: float


def eval_objective(A, psi, d, x, lam: float, epsilon: float, q: float) -> ObjectiveValue:
    """Exact evaluation of the smoothed objective at x."""
    r = A.apply(x) - np.asarray(d, dtype=float).ravel()
    misfit = float(r @ r)
    penalty = smoothed_penalty(psi.apply(x), epsilon, q)
    return ObjectiveValue(misfit, penalty, lam, q, total_objective(misfit, penalty, lam, q))


def eval_majorant(A, psi, d, x, v, lam: float, epsilon: float, q: float) -> float:
    """Quadratic tangent majorant of the objective, expanded at v, evaluated at x.

    The additive constant is fixed so the majorant equals the objective at
    the expansion point; the minimizer does not depend on it.
    """
    w = compute_weights(psi.apply(v), epsilon, q)

    def quad(y):
        r = A.apply(y) - np.asarray(d, dtype=float).ravel()
        t = psi.apply(y)
        return float(r @ r) + lam * float(np.sum(w * t * t))

    c = eval_objective(A, psi, d, v, lam, epsilon, q).total - quad(v)
    return quad(x) + c


class GcvResult(NamedTuple):
    lam: float
    degenerate: bool


def gcv_grid(lo: float = DEFAULT_GRID[0], hi: float = DEFAULT_GRID[1], count: int = DEFAULT_GRID[2]) -> np.ndarray:
    if not (0.0 < lo < hi) or count < 2:
        raise ValueError("grid must satisfy 0 < lo < hi and count >= 2")
    return np.logspace(np.log10(lo), np.log10(hi), int(count))


def select_lambda(R_A: np.ndarray, R_psi: np.ndarray, rhs: np.ndarray, grid: np.ndarray | None = None) -> GcvResult:
    """Regularization parameter by generalized cross validation on the projected problem.

    Minimizes Theta(lam) = k * ||R_A z_lam - rhs||^2 / trace(I - R_A
    (R_AᵀR_A + lam R_psiᵀR_psi)⁻¹ R_Aᵀ)^2 over a fixed logarithmic grid,
    with the smallest grid value winning ties.  The influence trace is
    evaluated through the generalized eigendecomposition of
    (R_AᵀR_A, R_psiᵀR_psi) when the second factor is positive definite, and
    through per-grid-point direct solves otherwise.

    When Theta is flat to machine precision the smallest grid value is
    returned with the degenerate flag set (and a log record emitted).
    """
    R_A = np.asarray(R_A, dtype=float)
    R_psi = np.asarray(R_psi, dtype=float)
    rhs = np.asarray(rhs, dtype=float).ravel()
    k = R_A.shape[0]
    lams = gcv_grid() if grid is None else np.asarray(grid, dtype=float)

    BtB = R_psi.T @ R_psi
    theta = np.full(lams.shape, np.inf)
    try:
        # With X = R_A^{-1} and S = Xᵀ(R_psiᵀR_psi)X (the generalized pencil
        # inverted), the influence matrix is H = (I + lam S)^{-1}, so with
        # f_i = lam s_i / (1 + lam s_i) and h the rhs in the eigenbasis of S
        # both pieces are cancellation-free in lam:
        #   ||R_A z - rhs||^2 = sum f_i^2 h_i^2,   tr(I - H) = sum f_i.
        with np.errstate(divide="raise", invalid="raise", over="raise"):
            X = scipy.linalg.solve_triangular(R_A, np.eye(k), lower=False)
        S = X.T @ BtB @ X
        if not np.all(np.isfinite(S)):
            raise scipy.linalg.LinAlgError("projected factor not invertible")
        s, U = np.linalg.eigh((S + S.T) / 2.0)
        s = np.maximum(s, 0.0)
        h2 = (U.T @ rhs) ** 2
        for i, lam in enumerate(lams):
            f = lam * s / (1.0 + lam * s)
            denom = float(np.sum(f))
            if denom > 0.0:
                theta[i] = k * float(np.sum(f * f * h2)) / denom**2
    except (scipy.linalg.LinAlgError, FloatingPointError):
        for i, lam in enumerate(lams):
            z = solve_regularized_ls(R_A, R_psi, rhs, lam)
            resid = R_A @ z - rhs
            M = R_A.T @ R_A + lam * BtB
            denom = lam * np.trace(np.linalg.solve(M, BtB))
            if denom > 0.0:
                theta[i] = k * float(resid @ resid) / denom**2

    finite = np.isfinite(theta)
    if not np.any(finite):
        log.warning("GCV curve undefined on the whole grid; returning smallest lambda")
        return GcvResult(float(lams[0]), True)
    spread = np.max(theta[finite]) - np.min(theta[finite])
    if spread <= 64.0 * np.finfo(float).eps * max(np.max(np.abs(theta[finite])), 1e-300):
        log.info("GCV curve flat to machine precision; returning smallest lambda")
        return GcvResult(float(lams[0]), True)
    masked = np.where(finite, theta, np.inf)
    return GcvResult(float(lams[int(np.argmin(masked))]), False)
