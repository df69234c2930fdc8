"""One-dimensional workhorses: the coordinate-wise uniform quantizer (CUQ)
with randomized rounding, and the modulo quantizer (MQ) for decoding with
side information.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import BitReader, BitString

__all__ = [
    "UniformGrid",
    "ModuloParams",
    "OVERFLOW",
    "cuq_encode",
    "cuq_decode",
    "cuq_expected_decode",
    "cuq_conditional_mse",
    "mq_encode",
    "mq_decode",
    "mq_quantize",
]

# Overflow is a symbol, not an error; encoded as value k in a ceil(log2(k+1))-bit field.
OVERFLOW = -1


@dataclass(frozen=True)
class UniformGrid:
    """Uniform level grid: signed mode spans [-M, M], nonnegative mode [0, M].

    Levels: signed  B(l) = -M + l * 2M/(k-1),  l = 0..k-1
            nonneg  B(l) = l * M/(k-1)
    A coordinate outside the range maps to the overflow symbol, decoded as 0.
    """

    M: float
    k: int
    mode: str = "signed"  # "signed" | "nonneg"

    def __post_init__(self):
        if self.k < 2:
            raise ValueError(f"level count k must be >= 2, got {self.k}")
        if self.M <= 0:
            raise ValueError(f"dynamic range M must be positive, got {self.M}")
        if self.mode not in ("signed", "nonneg"):
            raise ValueError(f"unknown mode {self.mode!r}")

    @property
    def lo(self) -> float:
        return -self.M if self.mode == "signed" else 0.0

    @property
    def spacing(self) -> float:
        width = 2 * self.M if self.mode == "signed" else self.M
        return width / (self.k - 1)

    def level(self, symbols: np.ndarray) -> np.ndarray:
        """Level values for symbols; OVERFLOW decodes to 0."""
        sym = np.asarray(symbols)
        vals = self.lo + sym * self.spacing
        return np.where(sym == OVERFLOW, 0.0, vals)

    @property
    def symbol_bits(self) -> int:
        return math.ceil(math.log2(self.k + 1))


def cuq_encode(y: np.ndarray, grid: UniformGrid, rng: np.random.Generator) -> np.ndarray:
    """Randomized-rounding encode; returns symbols in {0..k-1} or OVERFLOW.

    A value equal to a level boundary B(l) belongs to the cell (B(l-1), B(l)]
    and is emitted as l deterministically, so the exact-unbiasedness tests can
    rely on endpoint behavior.
    """
    y = np.asarray(y, dtype=float)
    if grid.mode == "signed":
        over = np.abs(y) > grid.M
    else:
        over = (y > grid.M) | (y < 0.0)
    t = (y - grid.lo) / grid.spacing  # fractional level index in [0, k-1]
    lower = np.ceil(t) - 1  # cell (B(l), B(l+1)] has index floor, endpoints up
    frac = t - lower  # in (0, 1]; probability of rounding up
    u = rng.random(size=y.shape)
    sym = lower + (u < frac)
    sym = np.clip(sym, 0, grid.k - 1)
    return np.where(over, OVERFLOW, sym.astype(np.int64))


def cuq_decode(symbols: np.ndarray, grid: UniformGrid) -> np.ndarray:
    sym = np.asarray(symbols)
    if np.any(sym >= grid.k):
        raise ValueError("malformed stream: symbol out of range")
    return grid.level(sym)


def cuq_expected_decode(y: np.ndarray, grid: UniformGrid) -> np.ndarray:
    """Analytic E[decode(encode(y))]: equals y inside the range, 0 outside."""
    y = np.asarray(y, dtype=float)
    if grid.mode == "signed":
        over = np.abs(y) > grid.M
    else:
        over = (y > grid.M) | (y < 0.0)
    return np.where(over, 0.0, y)


def cuq_conditional_mse(y: np.ndarray, grid: UniformGrid) -> np.ndarray:
    """Exact per-coordinate MSE of the two-branch rounding law (no overflow).

    For y in cell (B(l), B(l+1)]: E(Q-y)^2 = (y - B(l)) (B(l+1) - y).
    """
    y = np.asarray(y, dtype=float)
    t = (y - grid.lo) / grid.spacing
    lower = np.ceil(t) - 1
    lower = np.clip(lower, 0, grid.k - 2)
    lo_val = grid.lo + lower * grid.spacing
    hi_val = lo_val + grid.spacing
    return (y - lo_val) * (hi_val - y)


def write_cuq_symbols(bits: BitString, symbols: np.ndarray, grid: UniformGrid) -> BitString:
    width = grid.symbol_bits
    for s in np.asarray(symbols).ravel():
        bits.write_uint(grid.k if s == OVERFLOW else int(s), width)
    return bits


def read_cuq_symbols(reader: BitReader, n: int, grid: UniformGrid) -> np.ndarray:
    width = grid.symbol_bits
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        v = reader.read_uint(width)
        if v > grid.k:
            raise ValueError("malformed stream: CUQ symbol out of range")
        out[i] = OVERFLOW if v == grid.k else v
    return out


@dataclass(frozen=True)
class ModuloParams:
    """Scalar lattice-modulo parameters.

    Recovery needs k*eps >= 2*(eps + delta); the default eps = 2*delta/(k-2)
    meets it with equality for k >= 4.
    """

    k: int
    delta: float  # known bound on |x - y_side|
    eps: float = field(default=0.0)

    def __post_init__(self):
        if self.eps == 0.0:
            if self.k < 3:
                raise ValueError("default eps rule needs k >= 3")
            object.__setattr__(self, "eps", 2.0 * self.delta / (self.k - 2))
        if self.eps <= 0:
            raise ValueError("lattice spacing eps must be positive")

    @property
    def symbol_bits(self) -> int:
        return math.ceil(math.log2(self.k))


def mq_encode(x: np.ndarray, params: ModuloParams, rng: np.random.Generator) -> np.ndarray:
    """Unbiased dither to the integer lattice, transmitted modulo k."""
    x = np.asarray(x, dtype=float)
    t = x / params.eps
    z_lo = np.floor(t)
    frac = t - z_lo  # P(round up); exactly 0 on lattice points
    u = rng.random(size=x.shape)
    z_tilde = z_lo + (u < frac)
    return np.mod(z_tilde, params.k).astype(np.int64)


def mq_decode(w: np.ndarray, y_side: np.ndarray, params: ModuloParams) -> np.ndarray:
    """Closest point of {(z k + w) eps} to y_side, ties to the smaller value."""
    w = np.asarray(w, dtype=np.int64)
    y = np.asarray(y_side, dtype=float)
    z0 = np.round((y / params.eps - w) / params.k)
    candidates = np.stack([(z0 + dz) * params.k + w for dz in (-1.0, 0.0, 1.0)])
    vals = candidates * params.eps
    dist = np.abs(vals - y)
    # ties broken toward the smaller value: among equal distances pick min val
    order = np.argsort(vals, axis=0)
    dist_sorted = np.take_along_axis(dist, order, axis=0)
    vals_sorted = np.take_along_axis(vals, order, axis=0)
    pick = np.argmin(dist_sorted, axis=0)
    return np.take_along_axis(vals_sorted, pick[None, ...], axis=0)[0]


def mq_quantize(
    x: float, y_side: float, params: ModuloParams, rng: np.random.Generator
) -> tuple[int, float]:
    """One-shot encode+decode; returns (coset symbol, reconstruction)."""
    w = mq_encode(np.asarray([x]), params, rng)
    rec = mq_decode(w, np.asarray([y_side]), params)
    return int(w[0]), float(rec[0])
