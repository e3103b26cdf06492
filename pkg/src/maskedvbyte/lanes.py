"""Portable emulation of a 128-bit vector register.

A :class:`LaneBlock` is 16 bytes held as one Python integer (byte 0 in the
least significant position), so the same block can be read as 16x8, 8x16,
4x32 or 2x64-bit lanes. Methods mirror the handful of SSE instructions the
masked decoder needs; lane-wise shifts and adds are done SWAR-style on the
whole integer.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from operator import itemgetter

__all__ = ["LaneBlock"]

_FULL = (1 << 128) - 1


@functools.lru_cache(maxsize=None)
def _splat(pattern: int, width: int) -> int:
    """``pattern`` repeated in every ``width``-bit lane."""
    out = 0
    for i in range(0, 128, width):
        out |= pattern << i
    return out


@functools.lru_cache(maxsize=4096)
def _gather(control: bytes):
    # Index 16 of the source buffer is a zero byte; sentinels point there.
    return itemgetter(*[16 if c & 0x80 else c & 0x0F for c in control])


@dataclass(frozen=True, slots=True)
class LaneBlock:
    bits: int

    @classmethod
    def from_bytes(cls, data) -> LaneBlock:
        if len(data) != 16:
            raise ValueError(f"a lane block is 16 bytes, got {len(data)}")
        return cls(int.from_bytes(bytes(data), "little"))

    @classmethod
    def from_lanes(cls, values, width: int) -> LaneBlock:
        lane = (1 << width) - 1
        bits = 0
        for i, v in enumerate(values):
            bits |= (v & lane) << (i * width)
        return cls(bits & _FULL)

    def to_bytes(self) -> bytes:
        return self.bits.to_bytes(16, "little")

    def lanes(self, width: int) -> list[int]:
        lane = (1 << width) - 1
        return [(self.bits >> i) & lane for i in range(0, 128, width)]

    def __and__(self, other: LaneBlock) -> LaneBlock:
        return LaneBlock(self.bits & other.bits)

    def __or__(self, other: LaneBlock) -> LaneBlock:
        return LaneBlock(self.bits | other.bits)

    def srl(self, width: int, n: int) -> LaneBlock:
        """Logical right shift of every ``width``-bit lane (psrlw/psrld/psrlq)."""
        keep = _splat(((1 << width) - 1) >> n, width)
        return LaneBlock((self.bits >> n) & keep)

    def sll(self, width: int, n: int) -> LaneBlock:
        """Left shift of every ``width``-bit lane (psllq and friends)."""
        keep = _splat(((1 << width) - 1) << n & ((1 << width) - 1), width)
        return LaneBlock((self.bits << n) & keep)

    def byte_srl(self, n: int) -> LaneBlock:
        """Shift the whole register right by ``n`` bytes (psrldq)."""
        return LaneBlock(self.bits >> (8 * n))

    def byte_sll(self, n: int) -> LaneBlock:
        """Shift the whole register left by ``n`` bytes (pslldq)."""
        return LaneBlock((self.bits << (8 * n)) & _FULL)

    def shuffle_bytes(self, control: bytes) -> LaneBlock:
        """Byte permutation; control bytes with the high bit set give zero (pshufb)."""
        src = self.bits.to_bytes(16, "little") + b"\0"
        return LaneBlock(int.from_bytes(bytes(_gather(bytes(control))(src)), "little"))

    def shuffle32(self, order) -> LaneBlock:
        """Permute 32-bit lanes (pshufd)."""
        lanes = self.lanes(32)
        return LaneBlock.from_lanes([lanes[i] for i in order], 32)

    def add32(self, other: LaneBlock) -> LaneBlock:
        """Lane-wise addition of four 32-bit integers, wrapping (paddd)."""
        high = _splat(0x80000000, 32)
        low = _FULL ^ high
        a, b = self.bits, other.bits
        return LaneBlock(((a & low) + (b & low)) ^ ((a ^ b) & high))

    def mullo16(self, factors) -> LaneBlock:
        """Low 16 bits of lane-wise products with eight 16-bit factors (pmullw)."""
        return LaneBlock.from_lanes(
            [(v * f) & 0xFFFF for v, f in zip(self.lanes(16), factors)], 16)

    def widen(self, width: int) -> LaneBlock:
        """Zero-extend the first four ``width``-bit lanes to 32 bits (pmovzx*)."""
        return LaneBlock.from_lanes(self.lanes(width)[:4], 32)

    def movemask(self) -> int:
        """High bit of each byte gathered into a 16-bit integer (pmovmskb)."""
        x = (self.bits >> 7) & _splat(1, 8)
        lo = ((x & 0xFFFFFFFFFFFFFFFF) * 0x0102040810204080 >> 56) & 0xFF
        hi = (((x >> 64) * 0x0102040810204080) >> 56) & 0xFF
        return lo | (hi << 8)

    @classmethod
    def splat(cls, value: int, width: int) -> LaneBlock:
        return cls(_splat(value & ((1 << width) - 1), width))
