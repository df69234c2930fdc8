"""Bit-level I/O, reproducible seed derivation, and the common quantizer contract.

Conventions used by every encoder/decoder pair in this package:

* Bit fields are MSB-first and packed back to back with no alignment padding,
  so every bit-budget assertion is exact.
* Encoder and decoder are driven by streams derived from the same SeedPath.
  Shared randomness (rotation signs, sampled subsets, dither uniforms that the
  decoder must regenerate) is always drawn *first* and in the same order on
  both sides; encoder-private randomness (randomized rounding) is drawn after
  all shared values, so the decoder never needs it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

__all__ = [
    "BitString",
    "BitReader",
    "SeedPath",
    "Quantizer",
    "TruncatedStreamError",
]

_MASK64 = (1 << 64) - 1


class TruncatedStreamError(Exception):
    """Raised when a read runs past the end of a BitString."""


class BitString:
    """Append-only bit sequence with exact length accounting."""

    __slots__ = ("_words", "_len")

    def __init__(self) -> None:
        self._words: list[int] = []  # 32-bit chunks, MSB-first within a chunk
        self._len = 0

    @property
    def nbits(self) -> int:
        return self._len

    def __len__(self) -> int:
        return self._len

    def write_uint(self, value: int, width: int) -> "BitString":
        """Append `value` as a `width`-bit MSB-first field."""
        if width < 1:
            raise ValueError(f"width must be >= 1, got {width}")
        value = int(value)
        if value < 0 or value >> width:
            raise ValueError(f"value {value} does not fit in {width} bits")
        used = self._len & 31
        if used and self._words:
            room = 32 - used
            take = min(room, width)
            hi = value >> (width - take)
            self._words[-1] = (self._words[-1] << take) | hi
            width -= take
            value &= (1 << width) - 1 if width else 0
            self._len += take
        while width >= 32:
            self._words.append(value >> (width - 32))
            width -= 32
            value &= (1 << width) - 1 if width else 0
            self._len += 32
        if width:
            self._words.append(value)
            self._len += width
        return self

    def write_bit(self, bit: int) -> "BitString":
        return self.write_uint(bit, 1)

    def write_bits(self, bits: Sequence[int]) -> "BitString":
        for b in bits:
            self.write_uint(int(b), 1)
        return self

    def _get_bit(self, pos: int) -> int:
        word_idx, scanned = 0, 0
        # Words are variable-width only at the tail; all but the last are 32 bits.
        full = pos // 32
        if full < len(self._words) - 1 or (self._len & 31) == 0:
            word_idx, offset = full, pos & 31
            word_width = 32
        else:
            word_idx = len(self._words) - 1
            offset = pos - 32 * word_idx
            word_width = self._len - 32 * word_idx
        return (self._words[word_idx] >> (word_width - 1 - offset)) & 1

    def to01(self) -> str:
        return "".join(str(self._get_bit(i)) for i in range(self._len))

    @classmethod
    def from01(cls, s: str) -> "BitString":
        bs = cls()
        for ch in s:
            bs.write_uint(int(ch), 1)
        return bs

    def extend(self, other: "BitString") -> "BitString":
        for w_idx in range(len(other._words)):
            if w_idx < len(other._words) - 1 or (other._len & 31) == 0:
                self.write_uint(other._words[w_idx], 32)
            else:
                tail = other._len - 32 * w_idx
                self.write_uint(other._words[w_idx], tail)
        return self

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, BitString)
            and self._len == other._len
            and self._words == other._words
        )

    def __repr__(self) -> str:
        head = self.to01() if self._len <= 64 else self.to01()[:64] + "..."
        return f"BitString({head!r}, nbits={self._len})"


class BitReader:
    """Cursor over a BitString; reads advance the cursor."""

    def __init__(self, bs: BitString, cursor: int = 0) -> None:
        self._bs = bs
        self.cursor = cursor

    def read_uint(self, width: int) -> int:
        if width < 1:
            raise ValueError(f"width must be >= 1, got {width}")
        if self.cursor + width > self._bs.nbits:
            raise TruncatedStreamError(
                f"read of {width} bits at {self.cursor} overruns length {self._bs.nbits}"
            )
        value = 0
        for i in range(width):
            value = (value << 1) | self._bs._get_bit(self.cursor + i)
        self.cursor += width
        return value

    def read_bit(self) -> int:
        return self.read_uint(1)

    @property
    def remaining(self) -> int:
        return self._bs.nbits - self.cursor


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def _fnv64(s: str) -> int:
    h = 0xCBF29CE484222325
    for byte in s.encode("utf8"):
        h = ((h ^ byte) * 0x100000001B3) & _MASK64
    return h


Label = Tuple[str, int]


@dataclass(frozen=True)
class SeedPath:
    """Deterministic derivation path for shared randomness.

    The same (root_seed, labels) always yields the same stream on every
    platform; distinct label lists yield streams that are independent for all
    practical purposes (64-bit keyed mixing, no cryptographic claim).
    """

    root_seed: int
    labels: Tuple[Label, ...] = ()

    def child(self, role: str, index: int = 0) -> "SeedPath":
        return SeedPath(self.root_seed, self.labels + ((role, int(index)),))

    def mixed(self) -> int:
        h = _splitmix64(self.root_seed & _MASK64)
        for role, index in self.labels:
            h = _splitmix64(h ^ _fnv64(role))
            h = _splitmix64(h ^ (index & _MASK64))
        return h

    def stream(self) -> np.random.Generator:
        """Derive the random stream for this path (uniform 64-bit words; reals
        are 53-bit mantissa draws in [0, 1))."""
        return np.random.Generator(np.random.PCG64(self.mixed()))


EncodeFn = Callable[[np.ndarray, Optional[np.ndarray], np.random.Generator], BitString]
DecodeFn = Callable[[BitString, Optional[np.ndarray], np.random.Generator], np.ndarray]


@dataclass
class Quantizer:
    """Encoder/decoder pair with a declared worst-case bit budget.

    ``bit_budget`` is the worst-case message length in bits; ``None`` marks a
    variable-length scheme whose guarantee is on expected length only.
    """

    encode: EncodeFn
    decode: DecodeFn
    bit_budget: Optional[int]
    name: str = "quantizer"
    uses_side_info: bool = False

    def roundtrip(
        self,
        x: np.ndarray,
        side: Optional[np.ndarray],
        path: SeedPath,
        check_budget: bool = True,
    ) -> Tuple[BitString, np.ndarray]:
        """Encode then decode with identically derived streams.

        Returns (message, reconstruction) and asserts the fixed-length budget.
        """
        msg = self.encode(np.asarray(x, dtype=float), side, path.stream())
        if check_budget and self.bit_budget is not None and msg.nbits > self.bit_budget:
            raise AssertionError(
                f"{self.name}: emitted {msg.nbits} bits > budget {self.bit_budget}"
            )
        xhat = self.decode(msg, side, path.stream())
        return msg, xhat
