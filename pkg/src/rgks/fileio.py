"""Binary file formats: basis checkpoints, raw float images, PGM previews.

All integers and floats are little-endian; writers and readers round-trip
bit-exactly.

Checkpoint ("RGKS"): magic, format version u32, n u64, k u64, then the k
basis columns as n float64 each, the iterate x (n float64), and the current
regularization parameter (one float64).

Raw image ("RIMG"): magic, version u32, n_x u64, n_y u64, n_t u64, then
n_x * n_y * n_t float64 values in vectorization order (first index fastest).
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

CHECKPOINT_MAGIC = b"RGKS"
CHECKPOINT_VERSION = 1
RIMG_MAGIC = b"RIMG"
RIMG_VERSION = 1


def write_checkpoint(path, V: np.ndarray, x: np.ndarray, lam: float) -> None:
    V = np.asarray(V, dtype="<f8")
    x = np.asarray(x, dtype="<f8").ravel()
    n, k = V.shape
    if x.shape[0] != n:
        raise ValueError("iterate length does not match basis rows")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(struct.pack("<QQ", n, k))
        fh.write(np.asfortranarray(V).tobytes(order="F"))  # column by column
        fh.write(x.tobytes())
        fh.write(struct.pack("<d", float(lam)))


def read_checkpoint(path) -> tuple[np.ndarray, np.ndarray, float]:
    raw = Path(path).read_bytes()
    if raw[:4] != CHECKPOINT_MAGIC:
        raise ValueError("not a basis checkpoint file")
    (version,) = struct.unpack_from("<I", raw, 4)
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    n, k = struct.unpack_from("<QQ", raw, 8)
    off = 24
    count = n * k
    V = np.frombuffer(raw, dtype="<f8", count=count, offset=off).reshape((n, k), order="F")
    off += 8 * count
    x = np.frombuffer(raw, dtype="<f8", count=n, offset=off).copy()
    off += 8 * n
    (lam,) = struct.unpack_from("<d", raw, off)
    return V.copy(), x, lam


def write_rimg(path, values: np.ndarray, n_x: int, n_y: int, n_t: int = 1) -> None:
    values = np.asarray(values, dtype="<f8").ravel()
    if values.shape[0] != n_x * n_y * n_t:
        raise ValueError("value count does not match the declared dimensions")
    with open(path, "wb") as fh:
        fh.write(RIMG_MAGIC)
        fh.write(struct.pack("<I", RIMG_VERSION))
        fh.write(struct.pack("<QQQ", n_x, n_y, n_t))
        fh.write(values.tobytes())


def read_rimg(path) -> tuple[np.ndarray, tuple[int, int, int]]:
    raw = Path(path).read_bytes()
    if raw[:4] != RIMG_MAGIC:
        raise ValueError("not a raw image file")
    (version,) = struct.unpack_from("<I", raw, 4)
    if version != RIMG_VERSION:
        raise ValueError(f"unsupported image version {version}")
    n_x, n_y, n_t = struct.unpack_from("<QQQ", raw, 8)
    values = np.frombuffer(raw, dtype="<f8", count=n_x * n_y * n_t, offset=32).copy()
    return values, (n_x, n_y, n_t)


def write_pgm(path, image: np.ndarray) -> None:
    """8-bit binary PGM preview, min/max scaled (flat images map to 0)."""
    image = np.asarray(image, dtype=float)
    if image.ndim != 2:
        raise ValueError("expected a 2-D image")
    lo, hi = float(image.min()), float(image.max())
    if hi > lo:
        scaled = np.round((image - lo) / (hi - lo) * 255.0)
    else:
        scaled = np.zeros_like(image)
    data = scaled.astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{image.shape[1]} {image.shape[0]}\n255\n".encode("ascii"))
        fh.write(data.tobytes())
