"""Randomized Hadamard rotation: R = (1/sqrt(d)) * H * diag(signs).

The forward map multiplies by the random sign diagonal and then applies the
fast Walsh-Hadamard butterfly; the inverse undoes both.  Rotation preserves
the l2 norm exactly (up to float roundoff), which is what every bound built
on top of it relies on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["SignDiagonal", "sample_signs", "rotate", "unrotate", "pad_to_pow2", "fwht"]


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def next_pow2(n: int) -> int:
    return 1 if n <= 1 else 1 << (n - 1).bit_length()


@dataclass(frozen=True)
class SignDiagonal:
    signs: np.ndarray  # entries in {-1.0, +1.0}
    d: int

    def __post_init__(self):
        if not _is_pow2(self.d):
            raise ValueError(f"dimension {self.d} is not a power of two")
        if self.signs.shape != (self.d,):
            raise ValueError("sign vector length does not match d")


def sample_signs(rng: np.random.Generator, d: int) -> SignDiagonal:
    """Draw d iid uniform signs from the stream (shared randomness)."""
    if not _is_pow2(d):
        raise ValueError(f"dimension {d} is not a power of two")
    signs = rng.integers(0, 2, size=d).astype(float) * 2.0 - 1.0
    return SignDiagonal(signs, d)


def sample_signs_batch(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    """(n, d) array of iid signs; row i is the sign diagonal of repetition i."""
    if not _is_pow2(d):
        raise ValueError(f"dimension {d} is not a power of two")
    return rng.integers(0, 2, size=(n, d)).astype(float) * 2.0 - 1.0


def fwht(x: np.ndarray) -> np.ndarray:
    """Iterative Walsh-Hadamard butterfly over the last axis.

    Returns H x (unnormalized) in O(d log d) operations per vector; works on
    any leading batch shape.  Ping-pong buffers keep it to two passes per
    butterfly stage.
    """
    d = x.shape[-1]
    if not _is_pow2(d):
        raise ValueError(f"dimension {d} is not a power of two")
    y = np.array(x, dtype=float, copy=True)
    if d == 1:
        return y
    buf = np.empty_like(y)
    h = 1
    while h < d:
        shape = y.shape[:-1] + (d // (2 * h), 2, h)
        src = y.reshape(shape)
        dst = buf.reshape(shape)
        np.add(src[..., 0, :], src[..., 1, :], out=dst[..., 0, :])
        np.subtract(src[..., 0, :], src[..., 1, :], out=dst[..., 1, :])
        y, buf = buf, y
        h *= 2
    return y


def rotate(y: np.ndarray, signs: SignDiagonal) -> np.ndarray:
    """(1/sqrt(d)) H (signs * y); last axis must have length signs.d."""
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != signs.d:
        raise ValueError(f"vector length {y.shape[-1]} != d {signs.d}")
    return fwht(y * signs.signs) / np.sqrt(signs.d)


def unrotate(z: np.ndarray, signs: SignDiagonal) -> np.ndarray:
    """Exact inverse of rotate: signs * H z / sqrt(d)."""
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != signs.d:
        raise ValueError(f"vector length {z.shape[-1]} != d {signs.d}")
    return signs.signs * (fwht(z) / np.sqrt(signs.d))


def rotate_batch(y: np.ndarray, signs: np.ndarray) -> np.ndarray:
    """Batched rotate with per-row sign diagonals (shapes broadcast on rows)."""
    d = signs.shape[-1]
    return fwht(y * signs) / np.sqrt(d)


def unrotate_batch(z: np.ndarray, signs: np.ndarray) -> np.ndarray:
    d = signs.shape[-1]
    return signs * (fwht(z) / np.sqrt(d))


def pad_to_pow2(y: np.ndarray) -> tuple[np.ndarray, int]:
    """Zero-pad to the next power of two; returns (padded, original_length)."""
    y = np.asarray(y, dtype=float)
    n = y.shape[-1]
    d = next_pow2(n)
    if d == n:
        return y.copy(), n
    pad = [(0, 0)] * (y.ndim - 1) + [(0, d - n)]
    return np.pad(y, pad), n
