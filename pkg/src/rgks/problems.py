"""Deterministic desk-scale test problems and reconstruction quality metrics.

Images are returned as (n, n) arrays (frames as (n_t, n, n)); flattening
with ravel() gives the vectorization order the operators expect.  All
generators are pure functions of their dimensions and seed; the pinned
pseudo-random generator is numpy's PCG64, whose streams are stable across
platforms and releases for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import operators, regularizers
from .operators import LinearOperator

# Ellipse composite: intensity, semi-axes (a, b), center (x0, y0), rotation (degrees).
# The widely used "modified" variant whose values stay inside [0, 1].
SHEPP_LOGAN_ELLIPSES = (
    (1.00, 0.6900, 0.9200, 0.00, 0.0000, 0.0),
    (-0.80, 0.6624, 0.8740, 0.00, -0.0184, 0.0),
    (-0.20, 0.1100, 0.3100, 0.22, 0.0000, -18.0),
    (-0.20, 0.1600, 0.4100, -0.22, 0.0000, 18.0),
    (0.10, 0.2100, 0.2500, 0.00, 0.3500, 0.0),
    (0.10, 0.0460, 0.0460, 0.00, 0.1000, 0.0),
    (0.10, 0.0460, 0.0460, 0.00, -0.1000, 0.0),
    (0.10, 0.0460, 0.0230, -0.08, -0.6050, 0.0),
    (0.10, 0.0230, 0.0230, 0.00, -0.6060, 0.0),
    (0.10, 0.0230, 0.0460, 0.06, -0.6050, 0.0),
)

# Six moving disks: intensity, radius, base center, orbit radius, turns, phase.
# Intensities sum to 1 so superposition stays within [0, 1].
CIRCLE_TRACKS = (
    (0.30, 0.30, (-0.15, -0.10), 0.20, 1.0, 0.00),
    (0.20, 0.22, (0.35, 0.20), 0.25, -1.0, 0.25),
    (0.15, 0.15, (-0.40, 0.45), 0.15, 1.0, 0.50),
    (0.15, 0.12, (0.10, -0.50), 0.30, -1.0, 0.10),
    (0.12, 0.10, (0.50, -0.35), 0.20, 1.0, 0.70),
    (0.08, 0.08, (-0.55, -0.45), 0.15, -1.0, 0.40),
)


def _pixel_grid(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Pixel-center coordinates in [-1, 1]^2; first axis fastest in the raveled image."""
    coords = (np.arange(n) + 0.5 - n / 2.0) / (n / 2.0)
    # image[j, i]: i is the fast (first) index of the vectorization
    second, first = np.meshgrid(coords, coords, indexing="ij")
    return first, second


def phantom_shepp(n: int) -> np.ndarray:
    """Ellipse-composite head phantom on an n x n grid, values in [0, 1]."""
    if n < 16:
        raise ValueError("phantom needs n >= 16")
    x, y = _pixel_grid(n)
    img = np.zeros((n, n))
    for val, a, b, x0, y0, phi_deg in SHEPP_LOGAN_ELLIPSES:
        phi = np.deg2rad(phi_deg)
        xr = (x - x0) * np.cos(phi) + (y - y0) * np.sin(phi)
        yr = -(x - x0) * np.sin(phi) + (y - y0) * np.cos(phi)
        img[(xr / a) ** 2 + (yr / b) ** 2 <= 1.0] += val
    # sums like 1 - 0.8 - 0.2 leave fp dust just below zero
    return np.clip(img, 0.0, 1.0)


def phantom_circles(n: int, n_t: int, motion: float = 1.0) -> np.ndarray:
    """Superposition of six disks drifting along circular tracks, (n_t, n, n).

    motion = 0 freezes every frame at the base configuration.
    """
    if n < 16 or n_t < 1:
        raise ValueError("need n >= 16 and n_t >= 1")
    x, y = _pixel_grid(n)
    frames = np.zeros((n_t, n, n))
    for t in range(n_t):
        tau = t / (n_t - 1) if n_t > 1 else 0.0
        for val, r, (cx, cy), orbit, turns, phase in CIRCLE_TRACKS:
            ang = 2.0 * np.pi * (turns * tau + phase)
            px = cx + motion * orbit * (np.cos(ang) - np.cos(2.0 * np.pi * phase))
            py = cy + motion * orbit * (np.sin(ang) - np.sin(2.0 * np.pi * phase))
            frames[t][(x - px) ** 2 + (y - py) ** 2 <= r * r] += val
    return frames


def psf_motion(size: int) -> np.ndarray:
    """Diagonal motion-blur kernel (odd size, normalized)."""
    if size < 1 or size % 2 == 0:
        raise ValueError("PSF size must be odd and positive")
    return np.eye(size) / size


def psf_average(size: int) -> np.ndarray:
    if size < 1 or size % 2 == 0:
        raise ValueError("PSF size must be odd and positive")
    return np.full((size, size), 1.0 / (size * size))


def psf_gaussian(size: int, width: float) -> np.ndarray:
    if size < 1 or size % 2 == 0:
        raise ValueError("PSF size must be odd and positive")
    r = np.arange(size) - size // 2
    g = np.exp(-0.5 * (r / width) ** 2)
    k = np.outer(g, g)
    return k / k.sum()


def add_noise(clean: np.ndarray, sigma: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian noise rescaled so ||e|| / ||clean|| equals sigma exactly."""
    if sigma < 0.0:
        raise ValueError("sigma must be nonnegative")
    clean = np.asarray(clean, dtype=float).ravel()
    if sigma == 0.0:
        return clean.copy(), np.zeros_like(clean)
    g = np.random.Generator(np.random.PCG64(seed)).standard_normal(clean.shape[0])
    e = g * (sigma * np.linalg.norm(clean) / np.linalg.norm(g))
    return clean + e, e


def rre(x: np.ndarray, x_true: np.ndarray) -> float:
    """Relative reconstruction error ||x - x_true|| / ||x_true||."""
    x_true = np.asarray(x_true, dtype=float).ravel()
    nrm = np.linalg.norm(x_true)
    if nrm == 0.0:
        raise ValueError("reference solution is zero")
    return float(np.linalg.norm(np.asarray(x, dtype=float).ravel() - x_true) / nrm)


def ssim(x: np.ndarray, x_true: np.ndarray, n_x: int, n_y: int) -> float:
    """Mean structural similarity over sliding 8x8 uniform windows.

    Standard constants K1 = 0.01, K2 = 0.03; the dynamic range is taken from
    the reference image; covariances are unbiased.  Returns a value in
    [-1, 1] with ssim(x, x) = 1.
    """
    a = np.asarray(x, dtype=float).ravel().reshape(n_y, n_x)
    b = np.asarray(x_true, dtype=float).ravel().reshape(n_y, n_x)
    win = min(8, n_x, n_y)
    npix = win * win
    va = np.lib.stride_tricks.sliding_window_view(a, (win, win))
    vb = np.lib.stride_tricks.sliding_window_view(b, (win, win))
    mu_a = va.mean(axis=(2, 3))
    mu_b = vb.mean(axis=(2, 3))
    aa = (va * va).mean(axis=(2, 3)) - mu_a * mu_a
    bb = (vb * vb).mean(axis=(2, 3)) - mu_b * mu_b
    ab = (va * vb).mean(axis=(2, 3)) - mu_a * mu_b
    bias = npix / (npix - 1.0)
    aa, bb, ab = aa * bias, bb * bias, ab * bias
    span = float(b.max() - b.min())
    if span == 0.0:
        span = 1.0
    c1 = (0.01 * span) ** 2
    c2 = (0.03 * span) ** 2
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * ab + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (aa + bb + c2)
    return float(np.mean(num / den))


@dataclass
class TestProblem:
    """A forward operator (or block sequence), ground truth, and noisy data."""

    operator: LinearOperator | None
    psi: LinearOperator
    x_true: np.ndarray
    d: np.ndarray | None
    sigma: float
    seed: int
    n_x: int
    n_y: int
    n_t: int = 1
    blocks: list[tuple[LinearOperator, np.ndarray]] | None = None

    def metrics_for(self, with_ssim: bool = True):
        """Per-iterate (RRE, SSIM) callback for solver logging."""

        def compute(x):
            err = rre(x, self.x_true)
            if not with_ssim:
                return err, float("nan")
            if self.n_t == 1:
                return err, ssim(x, self.x_true, self.n_x, self.n_y)
            npix = self.n_x * self.n_y
            vals = [
                ssim(x[t * npix:(t + 1) * npix], self.x_true[t * npix:(t + 1) * npix], self.n_x, self.n_y)
                for t in range(self.n_t)
            ]
            return err, float(np.mean(vals))

        return compute


def deblur_problem(n: int, psf_kind: str = "motion", psf_size: int = 7,
                   sigma: float = 1e-3, seed: int = 0) -> TestProblem:
    """Shepp-Logan image blurred by the chosen PSF with rescaled Gaussian noise."""
    if psf_kind == "motion":
        psf = psf_motion(psf_size)
    elif psf_kind == "average":
        psf = psf_average(psf_size)
    elif psf_kind == "gaussian":
        psf = psf_gaussian(psf_size, psf_size / 4.0)
    else:
        raise ValueError(f"unknown PSF kind {psf_kind!r}")
    A = operators.blur_make(psf, n, n)
    x_true = phantom_shepp(n).ravel()
    d, _ = add_noise(A.apply(x_true), sigma, seed)
    A.counter.reset()
    return TestProblem(A, regularizers.make_psi_2d(n, n), x_true, d, sigma, seed, n, n)


def tomo_problem(n: int, angles, sigma: float = 1e-3, seed: int = 0,
                 n_r: int | None = None) -> TestProblem:
    A = operators.tomo_make(n, angles, n_r)
    x_true = phantom_shepp(n).ravel()
    d, _ = add_noise(A.apply(x_true), sigma, seed)
    A.counter.reset()
    return TestProblem(A, regularizers.make_psi_2d(n, n), x_true, d, sigma, seed, n, n)


def standard_angle_blocks() -> list[np.ndarray]:
    """Three 45-ray acquisitions: 0-44 and 45-89 at 1 degree, 90-179 at 2 degrees."""
    return [np.arange(0.0, 45.0), np.arange(45.0, 90.0), np.arange(90.0, 180.0, 2.0)]


def streaming_tomo_problem(n: int, sigma: float = 1e-3, seed: int = 0,
                           angle_blocks=None, n_r: int | None = None) -> TestProblem:
    """Angle-partitioned tomography served as sequential (operator, data) blocks.

    Noise is rescaled per block, with per-block seeds derived from the base
    seed.  The stacked operator and stacked data are also attached so the
    all-data problem can be solved for comparison.
    """
    if angle_blocks is None:
        angle_blocks = standard_angle_blocks()
    x_true = phantom_shepp(n).ravel()
    blocks = []
    for j, angles in enumerate(angle_blocks):
        A_j = operators.tomo_make(n, angles, n_r)
        d_j, _ = add_noise(A_j.apply(x_true), sigma, seed + j)
        A_j.counter.reset()
        blocks.append((A_j, d_j))
    stacked = operators.stack([A for A, _ in blocks])
    d_all = np.concatenate([d for _, d in blocks])
    for A_j, _ in blocks:
        A_j.counter.reset()
    stacked.counter.reset()
    return TestProblem(stacked, regularizers.make_psi_2d(n, n), x_true, d_all,
                       sigma, seed, n, n, blocks=blocks)


def dynamic_problem(n: int, n_t: int, angles_per_frame: int = 12, sigma: float = 1e-2,
                    seed: int = 0, motion: float = 1.0) -> TestProblem:
    """Moving-disk frames observed through per-frame tomography, coupled in time.

    Frame t sees a small rotating subset of projection angles, which makes
    the per-frame systems underdetermined and the temporal coupling of the
    regularizer load-bearing.
    """
    frames = phantom_circles(n, n_t, motion)
    x_true = frames.ravel()
    ops = []
    data = []
    for t in range(n_t):
        offset = (t * 180.0 / n_t) % (180.0 / angles_per_frame)
        angles = (offset + np.arange(angles_per_frame) * 180.0 / angles_per_frame) % 180.0
        A_t = operators.tomo_make(n, np.sort(angles))
        clean = A_t.apply(frames[t].ravel())
        d_t, _ = add_noise(clean, sigma, seed + t)
        A_t.counter.reset()
        ops.append(A_t)
        data.append(d_t)
    A = operators.block_diag(ops)
    A.counter.reset()
    return TestProblem(A, regularizers.make_psi_dynamic(n, n, n_t), x_true,
                       np.concatenate(data), sigma, seed, n, n, n_t)


def identity_problem(n: int, sigma: float = 0.0, seed: int = 0) -> TestProblem:
    """Direct observation of the phantom; useful as a smoke test."""
    A = operators.IdentityOperator(n * n)
    x_true = phantom_shepp(n).ravel()
    d, _ = add_noise(x_true, sigma, seed)
    A.counter.reset()
    return TestProblem(A, operators.IdentityOperator(n * n), x_true, d, sigma, seed, n, n)
