"""Full-vector gradient quantizers.

RATQ (rotate, split into subvectors, ATUQ each), its subsampled variant for
fixed low precision, the gain-shape A-RATQ for mean-square-bounded inputs,
SimQ / SimQ+ over l1-ball corner points, and the small/large-coordinate split
quantizer for lq-bounded inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .adaptive import AguqPlus, GeoLadder, TetraLadder, aguq_quantize, log_star
from .core import BitReader, BitString, Quantizer
from .rotation import (
    next_pow2,
    rotate_batch,
    sample_signs,
    sample_signs_batch,
    unrotate_batch,
)
from .scalar import OVERFLOW, UniformGrid, cuq_decode, cuq_encode

__all__ = [
    "RatqConfig",
    "ratq_quantizer",
    "ratq_apply",
    "atuq_vector_apply",
    "ratq_sample",
    "rcs_wrap",
    "rcs_ratq_sample",
    "AratqConfig",
    "aratq_quantizer",
    "simq_encode",
    "simq_decode",
    "simq_quantizer",
    "SimqPlusConfig",
    "simq_plus_quantizer",
    "simq_plus_sample",
    "LpSplitConfig",
    "lp_split_quantizer",
]

_NORM_SLACK = 1.0 + 1e-9


@dataclass(frozen=True)
class RatqConfig:
    """RATQ parameters; `default` is the high-precision setting and
    `for_subsampling` the fixed-precision one (s = 1, constant k)."""

    B: float
    d: int
    s: int
    k: int
    ladder: TetraLadder

    @staticmethod
    def _log_h(d: int) -> int:
        return max(0, math.ceil(math.log2(1 + log_star(max(d, 1) / 3.0))))

    @classmethod
    def default(cls, B: float, d: int) -> "RatqConfig":
        log_h = cls._log_h(d)
        s = max(1, log_h)
        k = (1 << math.ceil(math.log2(2 + math.sqrt(9 + 3 * math.log(s))))) - 1
        ladder = TetraLadder(3 * B * B / d, (2 * B * B / d) * math.log(s), 1 << log_h)
        return cls(B, d, s, k, ladder)

    @classmethod
    def for_subsampling(cls, B: float, d: int) -> "RatqConfig":
        log_h = cls._log_h(d)
        ladder = TetraLadder(3 * B * B / d, 0.0, 1 << log_h)
        return cls(B, d, 1, 7, ladder)  # log(k+1) = 3

    @property
    def d_pad(self) -> int:
        return next_pow2(self.d)

    @property
    def n_subvectors(self) -> int:
        return math.ceil(self.d_pad / self.s)

    @property
    def symbol_bits(self) -> int:
        return math.ceil(math.log2(self.k + 1))

    @property
    def bit_budget(self) -> int:
        return self.n_subvectors * self.ladder.index_bits + self.d_pad * self.symbol_bits


def _subvector_ids(cfg: RatqConfig) -> np.ndarray:
    return np.arange(cfg.d_pad) // cfg.s


def _ratq_encode_rotated(
    yr: np.ndarray, cfg: RatqConfig, rng: np.random.Generator, bits: BitString
) -> None:
    """Write ranges block then symbols block for one rotated vector."""
    ranges = cfg.ladder.ranges
    ids = _subvector_ids(cfg)
    maxabs = np.zeros(cfg.n_subvectors)
    np.maximum.at(maxabs, ids, np.abs(yr))
    j = np.minimum(np.searchsorted(ranges, maxabs, side="left"), cfg.ladder.h - 1)
    if cfg.ladder.index_bits:
        for ji in j:
            bits.write_uint(int(ji), cfg.ladder.index_bits)
    width = cfg.symbol_bits
    m_per_coord = ranges[j][ids]
    finite = np.isfinite(m_per_coord)
    safe_m = np.where(finite, m_per_coord, 1.0)
    t = (yr + safe_m) * (cfg.k - 1) / (2.0 * safe_m)
    lower = np.ceil(t) - 1
    frac = t - lower
    sym = np.clip(lower + (rng.random(cfg.d_pad) < frac), 0, cfg.k - 1).astype(int)
    over = (np.abs(yr) > m_per_coord) | ~finite
    for i in range(cfg.d_pad):
        bits.write_uint(cfg.k if over[i] else int(sym[i]), width)


def _ratq_decode_rotated(reader: BitReader, cfg: RatqConfig) -> np.ndarray:
    ranges = cfg.ladder.ranges
    ids = _subvector_ids(cfg)
    if cfg.ladder.index_bits:
        j = np.array([reader.read_uint(cfg.ladder.index_bits) for _ in range(cfg.n_subvectors)])
        if np.any(j >= cfg.ladder.h):
            raise ValueError("malformed stream: range index out of ladder")
    else:
        j = np.zeros(cfg.n_subvectors, dtype=int)
    width = cfg.symbol_bits
    out = np.empty(cfg.d_pad)
    m_per_coord = ranges[j][ids]
    for i in range(cfg.d_pad):
        v = reader.read_uint(width)
        if v > cfg.k:
            raise ValueError("malformed stream: CUQ symbol out of range")
        if v == cfg.k or not np.isfinite(m_per_coord[i]):
            out[i] = 0.0
        else:
            out[i] = -m_per_coord[i] + v * 2.0 * m_per_coord[i] / (cfg.k - 1)
    return out


def ratq_quantizer(cfg: RatqConfig) -> Quantizer:
    """Unbiased fixed-length quantizer for the l2 ball of radius B."""

    def encode(y: np.ndarray, side, rng: np.random.Generator) -> BitString:
        y = np.asarray(y, dtype=float)
        if np.linalg.norm(y) > cfg.B * _NORM_SLACK:
            raise ValueError(f"input norm {np.linalg.norm(y):.6g} exceeds bound B={cfg.B}")
        signs = sample_signs(rng, cfg.d_pad)
        padded = np.zeros(cfg.d_pad)
        padded[: cfg.d] = y
        yr = rotate_batch(padded, signs.signs)
        bits = BitString()
        _ratq_encode_rotated(yr, cfg, rng, bits)
        return bits

    def decode(bits: BitString, side, rng: np.random.Generator) -> np.ndarray:
        signs = sample_signs(rng, cfg.d_pad)
        yr_hat = _ratq_decode_rotated(BitReader(bits), cfg)
        return unrotate_batch(yr_hat, signs.signs)[: cfg.d]

    return Quantizer(encode, decode, cfg.bit_budget, name=f"ratq(d={cfg.d},B={cfg.B:g})")


def _chunks(n: int, d: int, budget: int = 1 << 18):
    step = max(1, budget // max(d, 1))
    for lo in range(0, n, step):
        yield lo, min(n, lo + step)


def _atuq_batch(
    yr: np.ndarray, cfg: RatqConfig, rng: np.random.Generator, width: int
) -> np.ndarray:
    """ATUQ each row of an already-transformed (m, width) batch."""
    m = yr.shape[0]
    ranges = np.minimum(cfg.ladder.ranges, 1e300)  # inf levels are unreachable
    n_sub = math.ceil(width / cfg.s)
    ids = np.arange(width) // cfg.s
    pad_cols = n_sub * cfg.s - width
    absr = np.abs(yr)
    if pad_cols:
        padded_abs = np.concatenate([absr, np.zeros((m, pad_cols))], axis=1)
    else:
        padded_abs = absr
    maxabs = padded_abs.reshape(m, n_sub, cfg.s).max(axis=2)
    j = np.minimum(np.searchsorted(ranges, maxabs.ravel(), side="left"), cfg.ladder.h - 1)
    m_sub = ranges[j].reshape(m, n_sub)
    m_coord = m_sub[:, ids]
    spacing = m_coord * (2.0 / (cfg.k - 1))
    t = yr / spacing
    t += (cfg.k - 1) / 2.0
    lower = np.ceil(t)
    lower -= 1.0
    t -= lower  # rounding-up probability, in (0, 1]
    lower += rng.random((m, width)) < t
    np.clip(lower, 0, cfg.k - 1, out=lower)
    rec = lower * spacing
    rec -= m_coord
    over = absr > m_coord
    if over.any():
        rec[over] = 0.0
    return rec


def ratq_apply(ys: np.ndarray, cfg: RatqConfig, rng: np.random.Generator) -> np.ndarray:
    """Quantize each row of (n, d) once with independent randomness: (n, d)."""
    from .rotation import fwht  # local import keeps the hot path tight

    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    n = ys.shape[0]
    out = np.empty((n, cfg.d))
    root_scale = 1.0 / math.sqrt(cfg.d_pad)
    for lo, hi in _chunks(n, cfg.d_pad):
        m = hi - lo
        if cfg.d == cfg.d_pad:
            padded = ys[lo:hi]
        else:
            padded = np.zeros((m, cfg.d_pad))
            padded[:, : cfg.d] = ys[lo:hi]
        signs = sample_signs_batch(rng, m, cfg.d_pad)
        scaled = signs * root_scale  # folds the 1/sqrt(d) of both transforms
        yr = fwht(padded * scaled)
        rec = _atuq_batch(yr, cfg, rng, cfg.d_pad)
        out[lo:hi] = (fwht(rec) * scaled)[:, : cfg.d]
    return out


def atuq_vector_apply(ys: np.ndarray, cfg: RatqConfig, rng: np.random.Generator) -> np.ndarray:
    """ATUQ without the rotation step (identity transform), row by row."""
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    out = np.empty_like(ys)
    for lo, hi in _chunks(ys.shape[0], cfg.d):
        out[lo:hi] = _atuq_batch(ys[lo:hi], cfg, rng, ys.shape[1])
    return out


def ratq_sample(
    y: np.ndarray, cfg: RatqConfig, n: int, rng: np.random.Generator
) -> np.ndarray:
    """Vectorized Monte-Carlo draws of the RATQ reconstruction: (n, d)."""
    tiled = np.broadcast_to(np.asarray(y, dtype=float), (n, cfg.d))
    return ratq_apply(tiled, cfg, rng)


def _sample_subset(rng: np.random.Generator, d: int, mu_d: int) -> np.ndarray:
    """Shared uniformly-random subset of [d] of size mu_d, in sorted order."""
    return np.sort(rng.permutation(d)[:mu_d])


def rcs_wrap(cfg: RatqConfig, mu_d: int, mode: str = "zero-fill") -> Quantizer:
    """Random coordinate sampling over a per-coordinate RATQ (s must be 1).

    zero-fill: decoder outputs (1/mu) * decoded(i) on the sampled coordinates
    and 0 elsewhere (before unrotation).  center: unsampled coordinates take
    the rotated side-information value and sampled ones are centered on it;
    with side = 0 the two modes coincide.
    """
    if cfg.s != 1:
        raise ValueError("subsampling needs per-coordinate symbols: set s = 1")
    if not (1 <= mu_d <= cfg.d_pad):
        raise ValueError(f"sample count {mu_d} outside 1..{cfg.d_pad}")
    if mode not in ("zero-fill", "center"):
        raise ValueError(f"unknown RCS mode {mode!r}")
    mu = mu_d / cfg.d_pad
    bits_per_coord = cfg.ladder.index_bits + cfg.symbol_bits
    ranges = np.minimum(cfg.ladder.ranges, 1e300)

    def _shared(rng):
        signs = sample_signs(rng, cfg.d_pad)
        coords = _sample_subset(rng, cfg.d_pad, mu_d)
        return signs, coords

    def encode(y: np.ndarray, side, rng: np.random.Generator) -> BitString:
        y = np.asarray(y, dtype=float)
        if np.linalg.norm(y) > cfg.B * _NORM_SLACK:
            raise ValueError(f"input norm {np.linalg.norm(y):.6g} exceeds bound B={cfg.B}")
        signs, coords = _shared(rng)
        padded = np.zeros(cfg.d_pad)
        padded[: cfg.d] = y
        yr = rotate_batch(padded, signs.signs)[coords]
        j = np.minimum(np.searchsorted(ranges, np.abs(yr), side="left"), cfg.ladder.h - 1)
        bits = BitString()
        if cfg.ladder.index_bits:
            for ji in j:
                bits.write_uint(int(ji), cfg.ladder.index_bits)
        m_sel = ranges[j]
        t = (yr + m_sel) * (cfg.k - 1) / (2.0 * m_sel)
        lower = np.ceil(t) - 1
        sym = np.clip(lower + (rng.random(mu_d) < (t - lower)), 0, cfg.k - 1).astype(int)
        for i in range(mu_d):
            bits.write_uint(int(sym[i]), cfg.symbol_bits)
        return bits

    def decode(bits: BitString, side, rng: np.random.Generator) -> np.ndarray:
        signs, coords = _shared(rng)
        reader = BitReader(bits)
        if cfg.ladder.index_bits:
            j = np.array([reader.read_uint(cfg.ladder.index_bits) for _ in range(mu_d)])
        else:
            j = np.zeros(mu_d, dtype=int)
        m_sel = ranges[np.minimum(j, cfg.ladder.h - 1)]
        vals = np.empty(mu_d)
        for i in range(mu_d):
            v = reader.read_uint(cfg.symbol_bits)
            vals[i] = 0.0 if v == cfg.k else -m_sel[i] + v * 2.0 * m_sel[i] / (cfg.k - 1)
        if mode == "center" and side is not None:
            side_pad = np.zeros(cfg.d_pad)
            side_pad[: cfg.d] = np.asarray(side, dtype=float)
            side_rot = rotate_batch(side_pad, signs.signs)
        else:
            side_rot = np.zeros(cfg.d_pad)
        xr = side_rot.copy()
        xr[coords] += (vals - side_rot[coords]) / mu
        return unrotate_batch(xr, signs.signs)[: cfg.d]

    return Quantizer(
        encode,
        decode,
        mu_d * bits_per_coord,
        name=f"rcs-ratq(d={cfg.d},mu_d={mu_d})",
        uses_side_info=(mode == "center"),
    )


def rcs_ratq_sample(
    y: np.ndarray, cfg: RatqConfig, mu_d: int, n: int, rng: np.random.Generator
) -> np.ndarray:
    """Vectorized draws of the subsampled-RATQ reconstruction (zero-fill)."""
    y = np.asarray(y, dtype=float)
    padded = np.zeros(cfg.d_pad)
    padded[: cfg.d] = y
    mu = mu_d / cfg.d_pad
    ranges = np.minimum(cfg.ladder.ranges, 1e300)
    out = np.empty((n, cfg.d))
    for lo, hi in _chunks(n, cfg.d_pad):
        m = hi - lo
        signs = sample_signs_batch(rng, m, cfg.d_pad)
        yr = rotate_batch(padded[None, :], signs)
        keep = np.zeros((m, cfg.d_pad), dtype=bool)
        cols = np.argsort(rng.random((m, cfg.d_pad)), axis=1)[:, :mu_d]
        np.put_along_axis(keep, cols, True, axis=1)
        j = np.minimum(np.searchsorted(ranges, np.abs(yr).ravel(), side="left"), cfg.ladder.h - 1)
        m_coord = ranges[j].reshape(m, cfg.d_pad)
        t = (yr + m_coord) * (cfg.k - 1) / (2.0 * m_coord)
        lower = np.ceil(t) - 1
        sym = np.clip(lower + (rng.random((m, cfg.d_pad)) < (t - lower)), 0, cfg.k - 1)
        rec = -m_coord + sym * (2.0 * m_coord / (cfg.k - 1))
        rec[np.abs(yr) > m_coord] = 0.0
        rec = np.where(keep, rec / mu, 0.0)
        out[lo:hi] = unrotate_batch(rec, signs)[:, : cfg.d]
    return out


@dataclass(frozen=True)
class AratqConfig:
    """Gain-shape quantizer: AGUQ (or AGUQ+) for the gain, unit-ball RATQ for
    the shape. Gain above the top range decodes to 0."""

    B: float
    d: int
    gain_ladder: GeoLadder
    k_g: int
    shape: RatqConfig
    gain_mode: str = "aguq"  # "aguq" | "aguq_plus"
    T: int = 0  # horizon, only used by aguq_plus

    @classmethod
    def default(cls, B: float, d: int, T: int, gain_mode: str = "aguq") -> "AratqConfig":
        log_hg = math.ceil(math.log2(1 + 0.5 * math.log2(T)))
        k_g = (1 << math.ceil(math.log2(2 + 0.5 * math.sqrt(math.log2(T) + 1)))) - 1
        ladder = GeoLadder(B, 2.0, 1 << log_hg)
        return cls(B, d, ladder, k_g, RatqConfig.default(1.0, d), gain_mode, T)

    @property
    def gain_bits(self) -> int:
        return self.gain_ladder.index_bits + math.ceil(math.log2(self.k_g + 1))

    @property
    def bit_budget(self) -> Optional[int]:
        if self.gain_mode == "aguq_plus":
            return None  # variable-length gain field
        return self.gain_bits + self.shape.bit_budget


def aratq_quantizer(cfg: AratqConfig) -> Quantizer:
    shape_q = ratq_quantizer(cfg.shape)
    plus = AguqPlus(cfg.B, cfg.T) if cfg.gain_mode == "aguq_plus" else None

    def encode(y: np.ndarray, side, rng: np.random.Generator) -> BitString:
        y = np.asarray(y, dtype=float)
        gain = float(np.linalg.norm(y))
        shape = y / gain if gain > 0 else _e1(cfg.d)
        signs = sample_signs(rng, cfg.shape.d_pad)  # shared draw first
        bits = BitString()
        if plus is not None:
            gbits, _ = plus.encode(gain, rng)
            bits.extend(gbits)
        else:
            j, sym, _ = aguq_quantize(gain, cfg.gain_ladder, cfg.k_g, rng)
            if cfg.gain_ladder.index_bits:
                bits.write_uint(j, cfg.gain_ladder.index_bits)
            width = math.ceil(math.log2(cfg.k_g + 1))
            bits.write_uint(cfg.k_g if sym == OVERFLOW else sym, width)
        padded = np.zeros(cfg.shape.d_pad)
        padded[: cfg.d] = shape
        _ratq_encode_rotated(rotate_batch(padded, signs.signs), cfg.shape, rng, bits)
        return bits

    def decode(bits: BitString, side, rng: np.random.Generator) -> np.ndarray:
        signs = sample_signs(rng, cfg.shape.d_pad)
        reader = BitReader(bits)
        if plus is not None:
            gain_hat = plus.decode(reader)
        else:
            j = reader.read_uint(cfg.gain_ladder.index_bits) if cfg.gain_ladder.index_bits else 0
            width = math.ceil(math.log2(cfg.k_g + 1))
            v = reader.read_uint(width)
            if v == cfg.k_g:
                gain_hat = 0.0
            else:
                M = cfg.gain_ladder.ranges[j]
                gain_hat = v * M / (cfg.k_g - 1)
        shape_rot = _ratq_decode_rotated(reader, cfg.shape)
        shape_hat = unrotate_batch(shape_rot, signs.signs)[: cfg.d]
        return gain_hat * shape_hat

    return Quantizer(
        encode, decode, cfg.bit_budget, name=f"aratq(d={cfg.d},B={cfg.B:g},{cfg.gain_mode})"
    )


def _e1(d: int) -> np.ndarray:
    e = np.zeros(d)
    e[0] = 1.0
    return e


# ---------------------------------------------------------------------------
# SimQ / SimQ+


def simq_encode(y: np.ndarray, B: float, rng: np.random.Generator) -> int:
    """Sample a signed corner index: +-i with prob |y(i)|/B, 0 otherwise."""
    y = np.asarray(y, dtype=float)
    l1 = float(np.abs(y).sum())
    if l1 > B * _NORM_SLACK:
        raise ValueError(f"l1 norm {l1:.6g} exceeds bound B={B}")
    u = rng.random() * B
    csum = np.cumsum(np.abs(y))
    idx = int(np.searchsorted(csum, u, side="right"))
    if idx >= y.size:
        return 0
    return (idx + 1) * (1 if y[idx] >= 0 else -1)


def simq_decode(symbol: int, B: float, d: int) -> np.ndarray:
    if symbol == 0:
        return np.zeros(d)
    i = abs(symbol) - 1
    out = np.zeros(d)
    out[i] = B * (1 if symbol > 0 else -1)
    return out


def simq_quantizer(B: float, d: int) -> Quantizer:
    width = math.ceil(math.log2(2 * d + 1))

    def encode(y, side, rng):
        s = simq_encode(y, B, rng)
        code = 0 if s == 0 else (s if s > 0 else d + (-s))
        return BitString().write_uint(code, width)

    def decode(bits, side, rng):
        code = BitReader(bits).read_uint(width)
        if code == 0:
            return np.zeros(d)
        s = code if code <= d else -(code - d)
        return simq_decode(s, B, d)

    return Quantizer(encode, decode, width, name=f"simq(d={d},B={B:g})")


def _bar_positions(counts: np.ndarray) -> list[int]:
    # stars-and-bars: composition of k into m parts <-> increasing bar slots
    pos, acc = [], 0
    for i, c in enumerate(counts[:-1]):
        acc += int(c)
        pos.append(acc + i)
    return pos


def _rank_composition(counts: np.ndarray) -> int:
    """Combinadic rank of the stars-and-bars set; big-int safe."""
    rank = 0
    for j, p in enumerate(_bar_positions(counts)):
        rank += math.comb(p, j + 1)
    return rank


def _unrank_composition(rank: int, k: int, parts: int) -> np.ndarray:
    n_slots = k + parts - 1
    n_bars = parts - 1
    pos = [0] * n_bars
    for j in range(n_bars - 1, -1, -1):
        # largest p with comb(p, j+1) <= rank
        p = j
        while math.comb(p + 1, j + 1) <= rank:
            p += 1
        pos[j] = p
        rank -= math.comb(p, j + 1)
    counts = np.empty(parts, dtype=np.int64)
    prev = -1
    for j in range(n_bars):
        counts[j] = pos[j] - prev - 1
        prev = pos[j]
    counts[-1] = n_slots - 1 - prev
    return counts


@dataclass(frozen=True)
class SimqPlusConfig:
    """k averaged SimQ draws at scale B d^(1/p); the message carries the type
    (multiset of drawn indices) plus one sign bit per distinct nonzero index."""

    B: float
    d: int
    p: float
    k: int = 0

    def __post_init__(self):
        if self.p < 2:
            raise ValueError("SimQ+ covers p in [2, inf]")
        if self.k == 0:
            object.__setattr__(self, "k", max(1, round(self.d ** (2.0 / self.p))))

    @property
    def scale(self) -> float:
        return self.B * self.d ** (1.0 / self.p)

    @property
    def q(self) -> float:
        return self.p / (self.p - 1.0) if self.p != math.inf else 1.0

    @property
    def type_bits(self) -> int:
        return max(1, math.ceil(math.log2(math.comb(self.d + self.k, self.k))))

    @property
    def bit_budget(self) -> int:
        return self.type_bits + self.k

    def analytic_budget(self) -> float:
        """Closed-form budget k log2(e) + k log2(d/k + 1) + k; the exact
        combinadic accounting in bit_budget never exceeds it."""
        return self.k * math.log2(math.e) + self.k * math.log2(self.d / self.k + 1) + self.k


def simq_plus_quantizer(cfg: SimqPlusConfig) -> Quantizer:
    def encode(y, side, rng):
        y = np.asarray(y, dtype=float)
        counts = np.zeros(cfg.d + 1, dtype=np.int64)
        for _ in range(cfg.k):
            s = simq_encode(y, cfg.scale, rng)
            counts[abs(s)] += 1
        bits = BitString().write_uint(_rank_composition(counts), cfg.type_bits)
        for i in np.nonzero(counts[1:])[0]:
            bits.write_uint(1 if y[i] >= 0 else 0, 1)
        return bits

    def decode(bits, side, rng):
        reader = BitReader(bits)
        counts = _unrank_composition(reader.read_uint(cfg.type_bits), cfg.k, cfg.d + 1)
        out = np.zeros(cfg.d)
        for i in np.nonzero(counts[1:])[0]:
            sign = 1.0 if reader.read_uint(1) else -1.0
            out[i] = sign * counts[i + 1]
        return out * (cfg.scale / cfg.k)

    return Quantizer(encode, decode, cfg.bit_budget, name=f"simq+(d={cfg.d},k={cfg.k})")


def simq_plus_sample(
    y: np.ndarray, cfg: SimqPlusConfig, n: int, rng: np.random.Generator
) -> np.ndarray:
    """Vectorized reconstructions: multinomial type draws, (n, d)."""
    y = np.asarray(y, dtype=float)
    probs = np.empty(cfg.d + 1)
    probs[1:] = np.abs(y) / cfg.scale
    probs[0] = max(0.0, 1.0 - probs[1:].sum())
    probs /= probs.sum()
    counts = rng.multinomial(cfg.k, probs, size=n)
    return counts[:, 1:] * np.sign(y)[None, :] * (cfg.scale / cfg.k)


# ---------------------------------------------------------------------------
# Split quantizer for lq-bounded inputs, p in [1, 2]


@dataclass(frozen=True)
class LpSplitConfig:
    """Threshold split: small coordinates go to a fixed-range CUQ, the at most
    d/D1 large ones are flagged by a d-bit mask and quantized by RATQ on a
    fixed-dimension restriction (zero-filled, so the message length is fixed).
    """

    B: float
    d: int
    p: float

    def __post_init__(self):
        if not (1.0 <= self.p <= 2.0):
            raise ValueError("split quantizer covers p in [1, 2]")

    @property
    def q(self) -> float:
        return math.inf if self.p == 1.0 else self.p / (self.p - 1.0)

    @property
    def delta2(self) -> int:
        return math.ceil(math.log2(1 + log_star(self.d / 3.0)))

    @property
    def delta1(self) -> int:
        exp = 0.5 - (0.0 if self.q == math.inf else 1.0 / self.q)
        return math.ceil(
            math.log2(2 + math.sqrt(18 + 6 * math.log(self.delta2)) * self.d**exp)
        )

    @property
    def threshold(self) -> float:
        if self.q == math.inf:
            return self.B
        return self.B * (self.delta1 / self.d) ** (1.0 / self.q)

    @property
    def cuq_grid(self) -> UniformGrid:
        inv_q = 0.0 if self.q == math.inf else 1.0 / self.q
        k = (1 << math.ceil(math.log2(2 * math.sqrt(2) * self.delta1**inv_q + 2))) - 1
        return UniformGrid(self.threshold, k, "signed")

    @property
    def d_large(self) -> int:
        return max(1, self.d // self.delta1)

    @property
    def ratq_cfg(self) -> RatqConfig:
        inv_q = 0.0 if self.q == math.inf else 1.0 / self.q
        B2 = self.B * self.d ** (0.5 - inv_q)
        d2 = self.d_large
        log_h = math.ceil(math.log2(1 + log_star(d2 / 3.0))) if d2 >= 1 else 0
        s = max(1, log_h)
        k = (1 << self.delta1) - 1
        ladder = TetraLadder(3 * B2 * B2 / d2, (2 * B2 * B2 / d2) * math.log(s), 1 << log_h)
        return RatqConfig(B2, d2, s, k, ladder)

    @property
    def bit_budget(self) -> int:
        return self.d * self.cuq_grid.symbol_bits + self.d + self.ratq_cfg.bit_budget

    def analytic_budget(self) -> int:
        """Closed-form budget without the power-of-two framing overhead."""
        inv_q = 0.0 if self.q == math.inf else 1.0 / self.q
        return self.d * (math.ceil(math.log2(2 * math.sqrt(2) * self.delta1**inv_q + 2)) + 3) + self.delta2


def lp_split_quantizer(cfg: LpSplitConfig) -> Quantizer:
    grid = cfg.cuq_grid
    ratq_cfg = cfg.ratq_cfg

    def encode(y, side, rng):
        y = np.asarray(y, dtype=float)
        q = cfg.q
        norm = np.max(np.abs(y)) if q == math.inf else np.sum(np.abs(y) ** q) ** (1 / q)
        if norm > cfg.B * _NORM_SLACK:
            raise ValueError(f"lq norm {norm:.6g} exceeds bound B={cfg.B}")
        signs = sample_signs(rng, ratq_cfg.d_pad)  # shared draw before any private one
        large = np.abs(y) > grid.M
        y1 = np.where(large, 0.0, y)
        bits = BitString()
        sym = cuq_encode(y1, grid, rng)
        for s in sym:
            bits.write_uint(grid.k if s == OVERFLOW else int(s), grid.symbol_bits)
        for b in large:
            bits.write_uint(int(b), 1)
        restriction = np.zeros(ratq_cfg.d)
        vals = y[large]
        if vals.size > ratq_cfg.d:
            raise AssertionError("more large coordinates than the lq bound allows")
        restriction[: vals.size] = vals
        padded = np.zeros(ratq_cfg.d_pad)
        padded[: ratq_cfg.d] = restriction
        _ratq_encode_rotated(rotate_batch(padded, signs.signs), ratq_cfg, rng, bits)
        return bits

    def decode(bits, side, rng):
        signs = sample_signs(rng, ratq_cfg.d_pad)  # same shared draw as the encoder
        reader = BitReader(bits)
        sym = np.empty(cfg.d, dtype=np.int64)
        for i in range(cfg.d):
            v = reader.read_uint(grid.symbol_bits)
            sym[i] = OVERFLOW if v == grid.k else v
        y1_hat = cuq_decode(sym, grid)
        mask = np.array([reader.read_uint(1) for _ in range(cfg.d)], dtype=bool)
        rot = _ratq_decode_rotated(reader, ratq_cfg)
        restriction_hat = unrotate_batch(rot, signs.signs)[: ratq_cfg.d]
        out = y1_hat.copy()
        out[mask] += restriction_hat[: int(mask.sum())]
        return out

    return Quantizer(encode, decode, cfg.bit_budget, name=f"lp-split(d={cfg.d},p={cfg.p:g})")
