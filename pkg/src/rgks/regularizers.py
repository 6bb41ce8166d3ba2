"""First-difference regularization operators with Kronecker block structure.

The 2-D operator stacks within-column differences (first image axis, the
fast index) over across-column differences; the dynamic operator appends
per-pixel temporal differences.  Blocks are applied matrix-free through
array reshapes, so a globally constant input maps to exactly zero.
"""

from __future__ import annotations

import numpy as np

from .operators import DENSE_GUARD, LinearOperator


class DiffOperator(LinearOperator):
    """Forward differences x[i+1] - x[i]: an (n-1) x n map with zero row sums."""

    def __init__(self, n: int):
        if n < 2:
            raise ValueError("need n >= 2")
        super().__init__(n - 1, n)

    def _apply(self, x):
        return x[1:] - x[:-1]

    def _apply_adjoint(self, y):
        out = np.zeros(self.n)
        out[1:] += y
        out[:-1] -= y
        return out


def make_diff(n: int) -> DiffOperator:
    return DiffOperator(n)


class Regularizer2D(LinearOperator):
    """Stacked first differences of an n_x x n_y image along both axes."""

    def __init__(self, n_x: int, n_y: int):
        if n_x < 2 or n_y < 2:
            raise ValueError("need n_x, n_y >= 2")
        self.n_x = int(n_x)
        self.n_y = int(n_y)
        self._s1 = n_y * (n_x - 1)
        super().__init__(self._s1 + (n_y - 1) * n_x, n_x * n_y)

    def _apply(self, x):
        img = x.reshape(self.n_y, self.n_x)
        dx = img[:, 1:] - img[:, :-1]
        dy = img[1:, :] - img[:-1, :]
        return np.concatenate([dx.ravel(), dy.ravel()])

    def _apply_adjoint(self, y):
        out = np.zeros((self.n_y, self.n_x))
        dx = y[: self._s1].reshape(self.n_y, self.n_x - 1)
        dy = y[self._s1 :].reshape(self.n_y - 1, self.n_x)
        out[:, 1:] += dx
        out[:, :-1] -= dx
        out[1:, :] += dy
        out[:-1, :] -= dy
        return out.ravel()


class RegularizerDynamic(LinearOperator):
    """Per-frame spatial differences plus per-pixel temporal differences."""

    def __init__(self, n_x: int, n_y: int, n_t: int):
        if n_x < 2 or n_y < 2 or n_t < 2:
            raise ValueError("need n_x, n_y, n_t >= 2")
        self.n_x, self.n_y, self.n_t = int(n_x), int(n_y), int(n_t)
        self._s1 = n_t * n_y * (n_x - 1)
        self._s2 = n_t * (n_y - 1) * n_x
        s3 = (n_t - 1) * n_y * n_x
        super().__init__(self._s1 + self._s2 + s3, n_x * n_y * n_t)

    def _apply(self, x):
        vol = x.reshape(self.n_t, self.n_y, self.n_x)
        dx = vol[:, :, 1:] - vol[:, :, :-1]
        dy = vol[:, 1:, :] - vol[:, :-1, :]
        dt = vol[1:, :, :] - vol[:-1, :, :]
        return np.concatenate([dx.ravel(), dy.ravel(), dt.ravel()])

    def _apply_adjoint(self, y):
        out = np.zeros((self.n_t, self.n_y, self.n_x))
        dx = y[: self._s1].reshape(self.n_t, self.n_y, self.n_x - 1)
        dy = y[self._s1 : self._s1 + self._s2].reshape(self.n_t, self.n_y - 1, self.n_x)
        dt = y[self._s1 + self._s2 :].reshape(self.n_t - 1, self.n_y, self.n_x)
        out[:, :, 1:] += dx
        out[:, :, :-1] -= dx
        out[:, 1:, :] += dy
        out[:, :-1, :] -= dy
        out[1:, :, :] += dt
        out[:-1, :, :] -= dt
        return out.ravel()


def make_psi_2d(n_x: int, n_y: int) -> Regularizer2D:
    return Regularizer2D(n_x, n_y)


def make_psi_dynamic(n_x: int, n_y: int, n_t: int) -> RegularizerDynamic:
    return RegularizerDynamic(n_x, n_y, n_t)


def joint_nullspace_trivial(A: LinearOperator, psi: LinearOperator, w: np.ndarray) -> bool:
    """Check N(AᵀA) ∩ N(Ψᵀ diag(w) Ψ) = {0} by ranking the stacked dense matrix.

    Small-problem diagnostic only: both operators are materialized, so the
    dense guard applies.
    """
    if A.n > DENSE_GUARD:
        raise ValueError("uniqueness check is restricted to small problems")
    Ad = A.to_dense()
    Pd = np.sqrt(np.asarray(w, dtype=float))[:, None] * psi.to_dense()
    stacked = np.vstack([Ad, Pd])
    return int(np.linalg.matrix_rank(stacked)) == A.n
