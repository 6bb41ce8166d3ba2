"""Matrix-free linear operators with forward/adjoint application and counters.

An image of shape (n_x, n_y) is vectorized so that v[i + n_x * j] holds the
pixel at position (i, j): the first index varies fastest.  Equivalently,
``v.reshape(n_y, n_x)`` recovers the image with i along the last axis.  The
same ordering extends to time frames: frame t occupies the contiguous slice
``v[t * n_x * n_y : (t + 1) * n_x * n_y]``.

Every concrete operator counts its own apply / apply_adjoint calls; solver
cost reports are assembled solely from these counters.  Dense
materialization is guarded above 64 x 64 unknowns.
"""

from __future__ import annotations

import numpy as np
import scipy.ndimage
import scipy.sparse

from .errors import BadPsf, DimensionMismatch

# Largest n for which to_dense() is permitted.
DENSE_GUARD = 64 * 64


class MatvecCounter:
    """Counts forward/adjoint applications of one operator."""

    __slots__ = ("forward", "adjoint")

    def __init__(self):
        self.forward = 0
        self.adjoint = 0

    def reset(self):
        self.forward = 0
        self.adjoint = 0

    def snapshot(self) -> tuple[int, int]:
        return (self.forward, self.adjoint)


class LinearOperator:
    """Abstract forward map with adjoint.  Subclasses implement _apply/_apply_adjoint.

    apply/apply_adjoint are reentrant; the counter increments by exactly one
    per call regardless of internal structure.
    """

    def __init__(self, m: int, n: int):
        self.m = int(m)
        self.n = int(n)
        self.counter = MatvecCounter()

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float).ravel()
        if x.shape[0] != self.n:
            raise DimensionMismatch(f"expected input of length {self.n}, got {x.shape[0]}")
        self.counter.forward += 1
        return self._apply(x)

    def apply_adjoint(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float).ravel()
        if y.shape[0] != self.m:
            raise DimensionMismatch(f"expected input of length {self.m}, got {y.shape[0]}")
        self.counter.adjoint += 1
        return self._apply_adjoint(y)

    def apply_block(self, X: np.ndarray) -> np.ndarray:
        """Forward map applied to each column of X (counts one call per column)."""
        return np.column_stack([self.apply(X[:, j]) for j in range(X.shape[1])])

    def to_dense(self) -> np.ndarray:
        """Materialize the operator as a dense matrix (small problems only)."""
        if self.n > DENSE_GUARD:
            raise ValueError(f"dense materialization blocked for n = {self.n} > {DENSE_GUARD}")
        cols = []
        e = np.zeros(self.n)
        for j in range(self.n):
            e[j] = 1.0
            cols.append(self._apply(e.copy()))
            e[j] = 0.0
        return np.column_stack(cols)

    def _apply(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _apply_adjoint(self, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class MatrixOperator(LinearOperator):
    """Wraps an explicit dense or scipy.sparse matrix."""

    def __init__(self, M):
        if scipy.sparse.issparse(M):
            M = M.tocsr()
            self._MT = M.T.tocsr()
        else:
            M = np.asarray(M, dtype=float)
            self._MT = M.T
        self.M = M
        super().__init__(M.shape[0], M.shape[1])

    def _apply(self, x):
        return np.asarray(self.M @ x).ravel()

    def _apply_adjoint(self, y):
        return np.asarray(self._MT @ y).ravel()


class IdentityOperator(LinearOperator):
    def __init__(self, n: int):
        super().__init__(n, n)

    def _apply(self, x):
        return x.copy()

    def _apply_adjoint(self, y):
        return y.copy()


class BlurOperator(LinearOperator):
    """2-D correlation with a normalized PSF and zero boundary.

    The adjoint is correlation with the flipped kernel (= convolution),
    also with zero boundary.
    """

    def __init__(self, psf: np.ndarray, n_x: int, n_y: int):
        psf = np.asarray(psf, dtype=float)
        if psf.ndim != 2 or psf.shape[0] % 2 == 0 or psf.shape[1] % 2 == 0:
            raise BadPsf("PSF must be 2-D with odd dimensions")
        if psf.shape[0] > n_y or psf.shape[1] > n_x:
            raise BadPsf("PSF larger than image")
        total = psf.sum()
        if total == 0.0:
            raise BadPsf("PSF sums to zero")
        self.psf = psf / total
        self.n_x = int(n_x)
        self.n_y = int(n_y)
        super().__init__(n_x * n_y, n_x * n_y)

    def _apply(self, x):
        img = x.reshape(self.n_y, self.n_x)
        out = scipy.ndimage.correlate(img, self.psf, mode="constant", cval=0.0)
        return out.ravel()

    def _apply_adjoint(self, y):
        img = y.reshape(self.n_y, self.n_x)
        out = scipy.ndimage.correlate(img, self.psf[::-1, ::-1], mode="constant", cval=0.0)
        return out.ravel()


def blur_make(psf: np.ndarray, n_x: int, n_y: int) -> BlurOperator:
    """Blur operator for an n_x x n_y image from an odd-sized PSF."""
    return BlurOperator(psf, n_x, n_y)


def default_detector_count(n: int) -> int:
    """Detector elements covering the grid diagonal: ceil(sqrt(2) n) + 1."""
    return int(np.ceil(np.sqrt(2.0) * n)) + 1


class TomoOperator(LinearOperator):
    """Parallel-beam tomography on an n x n unit-pixel grid.

    Rows hold the exact intersection lengths of each ray with each pixel
    (Siddon-style traversal).  Row r = a * n_r + k is the ray of angle
    ``angles[a]`` at detector offset index k.  At angle 0 the rays run along
    the second image axis at fixed first-axis position.
    """

    def __init__(self, n: int, angles, n_r: int | None = None):
        if n < 2:
            raise ValueError("grid must be at least 2 x 2")
        angles = np.asarray(angles, dtype=float).ravel()
        if angles.size == 0 or np.any(angles < 0.0) or np.any(angles >= 180.0):
            raise ValueError("angles must lie in [0, 180)")
        self.n = int(n)
        self.angles = angles
        self.n_r = int(n_r) if n_r is not None else default_detector_count(n)
        self.matrix = self._build_matrix()
        self._MT = self.matrix.T.tocsr()
        super().__init__(self.matrix.shape[0], self.matrix.shape[1])

    def _build_matrix(self) -> scipy.sparse.csr_matrix:
        n, n_r = self.n, self.n_r
        half = n / 2.0
        spacing = n * np.sqrt(2.0) / n_r
        offsets = (np.arange(n_r) + 0.5 - n_r / 2.0) * spacing
        planes = np.arange(n + 1) - half  # grid lines in both axes

        rows, cols, vals = [], [], []
        eps = 1e-12
        for a, theta in enumerate(np.deg2rad(self.angles)):
            c, s = np.cos(theta), np.sin(theta)
            for k, t in enumerate(offsets):
                # Ray: p(s_) = (t*c - s_*s, t*s + s_*c) in (axis1, axis0) coords.
                crossings = []
                if abs(s) > eps:  # crossings with axis1-planes
                    crossings.append((t * c - planes) / s)
                if abs(c) > eps:  # crossings with axis0-planes
                    crossings.append((planes - t * s) / c)
                sv = np.concatenate(crossings)
                # Keep parameters where the point is inside the grid box.
                px = t * c - sv * s
                py = t * s + sv * c
                inside = (px >= -half - eps) & (px <= half + eps) & (py >= -half - eps) & (py <= half + eps)
                sv = np.unique(sv[inside])
                if sv.size < 2:
                    continue
                lengths = np.diff(sv)
                mid = (sv[:-1] + sv[1:]) / 2.0
                mx = t * c - mid * s
                my = t * s + mid * c
                i = np.floor(mx + half).astype(int)
                j = np.floor(my + half).astype(int)
                keep = (lengths > eps) & (i >= 0) & (i < n) & (j >= 0) & (j < n)
                if not np.any(keep):
                    continue
                r = a * n_r + k
                rows.append(np.full(np.count_nonzero(keep), r))
                cols.append(i[keep] + n * j[keep])
                vals.append(lengths[keep])
        if rows:
            rows = np.concatenate(rows)
            cols = np.concatenate(cols)
            vals = np.concatenate(vals)
        m = len(self.angles) * n_r
        return scipy.sparse.csr_matrix(
            (vals, (rows, cols)) if len(rows) else ((), ((), ())), shape=(m, n * n)
        )

    def _apply(self, x):
        return self.matrix @ x

    def _apply_adjoint(self, y):
        return self._MT @ y


def tomo_make(n: int, angles, n_r: int | None = None) -> TomoOperator:
    """Parallel-beam operator for an n x n grid over the given angles (degrees)."""
    return TomoOperator(n, angles, n_r)


class StackedOperator(LinearOperator):
    """Vertical concatenation of operators sharing the input dimension."""

    def __init__(self, blocks):
        blocks = list(blocks)
        if not blocks:
            raise DimensionMismatch("need at least one block")
        n = blocks[0].n
        if any(b.n != n for b in blocks):
            raise DimensionMismatch("stacked blocks must share the input dimension")
        self.blocks = blocks
        self._offsets = np.cumsum([0] + [b.m for b in blocks])
        super().__init__(int(self._offsets[-1]), n)

    def _apply(self, x):
        return np.concatenate([b.apply(x) for b in self.blocks])

    def _apply_adjoint(self, y):
        out = np.zeros(self.n)
        for b, lo, hi in zip(self.blocks, self._offsets[:-1], self._offsets[1:]):
            out += b.apply_adjoint(y[lo:hi])
        return out


class BlockDiagOperator(LinearOperator):
    """Direct sum of operators: no coupling between per-block unknowns."""

    def __init__(self, blocks):
        blocks = list(blocks)
        if not blocks:
            raise DimensionMismatch("need at least one block")
        self.blocks = blocks
        self._row_offsets = np.cumsum([0] + [b.m for b in blocks])
        self._col_offsets = np.cumsum([0] + [b.n for b in blocks])
        super().__init__(int(self._row_offsets[-1]), int(self._col_offsets[-1]))

    def _apply(self, x):
        return np.concatenate(
            [b.apply(x[lo:hi]) for b, lo, hi in zip(self.blocks, self._col_offsets[:-1], self._col_offsets[1:])]
        )

    def _apply_adjoint(self, y):
        return np.concatenate(
            [b.apply_adjoint(y[lo:hi]) for b, lo, hi in zip(self.blocks, self._row_offsets[:-1], self._row_offsets[1:])]
        )


def stack(ops) -> StackedOperator:
    return StackedOperator(ops)


def block_diag(ops) -> BlockDiagOperator:
    return BlockDiagOperator(ops)
