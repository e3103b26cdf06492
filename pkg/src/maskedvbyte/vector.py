"""Masked vectorized VByte decoding.

The stream is cut into 12-byte windows. The continuation bits of a window
select an entry in the 4096-entry table (bytes consumed, control index); the
control index picks a byte shuffle and one of four lane kernels. Masks are
gathered 16 bytes at a time into 48-bit batches, with a second batch kept
ahead when enough input remains, and the last few bytes go through the
conventional scalar decoder. When the next 16 continuation bits are all clear, a whole
register of single-byte integers is unpacked without a table lookup.

Two interchangeable execution paths exist:

``portable``
    Pure Python, built on :class:`~maskedvbyte.lanes.LaneBlock`. This is the
    readable reference for the kernels.
``vector``
    The same algorithm compiled with numba (see :mod:`maskedvbyte._native`).

``auto`` picks ``vector`` when numba imports. The ``MASKEDVBYTE_PATH``
environment variable overrides the default.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from .format import EncodedBuffer, MalformedStreamError, scalar_decode_from
from .lanes import LaneBlock
from .tables import (
    ALL_SINGLE_INDEX,
    BLOCK,
    FOUR_3B_BASE,
    INVALID_INDEX,
    KERNEL_CONSTANTS,
    TWO_5B_BASE,
    WINDOW,
    CaseKind,
    EntryTable,
    ShuffleTable,
    entry_table,
    shuffle_table,
)

__all__ = [
    "PATH_ENV",
    "PATHS",
    "native_available",
    "resolve_path",
    "PrefixState",
    "decode_window",
    "kernel_all_single",
    "kernel_sixteen_single",
    "kernel_six2b",
    "kernel_four3b",
    "kernel_two5b",
    "prefix_sum4",
    "prefix_sum2",
    "decode_stream",
    "decode_delta_stream",
    "decode_from",
    "decode",
]

PATH_ENV = "MASKEDVBYTE_PATH"
PATHS = ("auto", "portable", "vector")

BATCH = 48
# Handoff threshold: the vector path runs while at least this many input
# bytes remain. Never below one register width.
DEFAULT_HANDOFF = BLOCK

_MASK32 = 0xFFFFFFFF


def _produced(index: int) -> int:
    if index == ALL_SINGLE_INDEX:
        return 12
    if index < FOUR_3B_BASE:
        return 6
    if index < TWO_5B_BASE:
        return 4
    return 2


def native_available() -> bool:
    try:
        from . import _native  # noqa: F401
    except ImportError:
        return False
    return True


def resolve_path(path: str | None = None) -> str:
    """Turn ``None``/``'auto'`` into a concrete path name."""
    if path is None:
        path = os.environ.get(PATH_ENV, "auto").strip().lower() or "auto"
    if path not in PATHS:
        raise ValueError(f"unknown decoder path {path!r}; choose from {PATHS}")
    if path == "auto":
        return "vector" if native_available() else "portable"
    if path == "vector" and not native_available():
        raise RuntimeError("vector path requested but numba is not importable")
    return path


# Kernel constants as lane blocks.
_SIX_LOW, _SIX_HIGH = (LaneBlock.from_bytes(m) for m in KERNEL_CONSTANTS[CaseKind.SIX_2B].masks)
_FOUR_LOW, _FOUR_MID, _FOUR_HIGH = (
    LaneBlock.from_bytes(m) for m in KERNEL_CONSTANTS[CaseKind.FOUR_3B].masks)
_TWO_CLEAR = LaneBlock.from_bytes(KERNEL_CONSTANTS[CaseKind.TWO_5B].masks[0])
_TWO_MUL = KERNEL_CONSTANTS[CaseKind.TWO_5B].multiplier
# Pick bytes 0, 2, 4, 6 of each 64-bit half as one 32-bit integer.
_TWO_PACK = bytes([0, 2, 4, 6, 8, 10, 12, 14] + [0x80] * 8)


def kernel_all_single(block: LaneBlock) -> list[int]:
    """Twelve 1-byte integers, unpacked four at a time."""
    out = block.widen(8).lanes(32)
    out += block.byte_srl(4).widen(8).lanes(32)
    out += block.byte_srl(8).widen(8).lanes(32)
    return out


def kernel_sixteen_single(block: LaneBlock) -> list[int]:
    """Sixteen 1-byte integers: the whole register, no table lookup."""
    return kernel_all_single(block) + block.byte_srl(12).widen(8).lanes(32)


def kernel_six2b(permuted: LaneBlock) -> list[int]:
    """Six integers laid out as (low, high) byte pairs."""
    low = permuted & _SIX_LOW
    high = (permuted & _SIX_HIGH).srl(16, 1)
    words = low | high
    return words.widen(16).lanes(32) + words.byte_srl(8).widen(16).lanes(32)[:2]


def kernel_four3b(permuted: LaneBlock) -> list[int]:
    """Four integers laid out as (low, middle, high, 0) byte quads."""
    low = permuted & _FOUR_LOW
    mid = (permuted & _FOUR_MID).srl(32, 1)
    high = (permuted & _FOUR_HIGH).srl(32, 2)
    return (low | mid | high).lanes(32)


def kernel_two5b(permuted: LaneBlock) -> list[int]:
    """Two integers, one per 64-bit half, each laid out as (b, c, d, e + a*256)_16."""
    y = permuted & _TWO_CLEAR
    a = y.srl(64, 56)
    x = y.mullo16(_TWO_MUL)
    # x is byte-wise (b<<7, b>>1, c<<6, c>>2, d<<5, d>>3, e<<4, *); shifted one
    # byte up it lines each high part under the next low part.
    combined = a | x | x.sll(64, 8)
    return combined.shuffle_bytes(_TWO_PACK).lanes(32)[:2]


def decode_window(window, mask12: int | None = None, entries: EntryTable | None = None,
                  controls: ShuffleTable | None = None) -> tuple[list[int], int]:
    """Decode one window of at least 16 readable bytes.

    Returns the decoded integers and the number of bytes consumed. ``mask12``
    defaults to the continuation bits of the first 12 bytes.
    """
    if len(window) < BLOCK:
        raise ValueError(f"a window needs {BLOCK} readable bytes, got {len(window)}")
    block = LaneBlock.from_bytes(bytes(window[:BLOCK]))
    if mask12 is None:
        mask12 = block.movemask() & 0xFFF
    entries = entries or entry_table()
    controls = controls or shuffle_table()
    consumed, index = entries[mask12]
    if index == INVALID_INDEX:
        raise MalformedStreamError(f"window mask {mask12:012b} has an integer over 5 bytes")
    return _apply(block, index, controls), consumed


def _apply(block: LaneBlock, index: int, controls: ShuffleTable) -> list[int]:
    if index == ALL_SINGLE_INDEX:
        return kernel_all_single(block)
    permuted = block.shuffle_bytes(controls[index])
    if index < FOUR_3B_BASE:
        return kernel_six2b(permuted)
    if index < TWO_5B_BASE:
        return kernel_four3b(permuted)
    return kernel_two5b(permuted)


@dataclass(frozen=True)
class PrefixState:
    """Running-sum register; the last 32-bit lane holds the last value written."""

    p: LaneBlock = field(default_factory=lambda: LaneBlock(0))

    @classmethod
    def start(cls, prev: int = 0) -> PrefixState:
        return cls(LaneBlock.splat(prev, 32))

    @property
    def last(self) -> int:
        return self.p.bits >> 96


def prefix_sum4(state: PrefixState, gaps) -> tuple[list[int], PrefixState]:
    """Add four gaps onto the running value with two shift-and-add steps."""
    p = state.p.shuffle32((3, 3, 3, 3))
    c = LaneBlock.from_lanes(gaps, 32)
    c = c.add32(c.byte_sll(4))
    c = c.add32(c.byte_sll(8))
    p = p.add32(c)
    return p.lanes(32), PrefixState(p)


def prefix_sum2(state: PrefixState, gaps) -> tuple[list[int], PrefixState]:
    """Two-gap variant: one shift-and-add, then copy lane 1 into lanes 2 and 3."""
    p = state.p.shuffle32((3, 3, 3, 3))
    c = LaneBlock.from_lanes(gaps[:2], 32)
    c = c.add32(c.byte_sll(4)).shuffle32((0, 1, 1, 1))
    p = p.add32(c)
    return p.lanes(32)[:2], PrefixState(p)


def _commit_delta(values: list[int], state: PrefixState) -> tuple[list[int], PrefixState]:
    out: list[int] = []
    i = 0
    n = len(values)
    while n - i >= 4:
        group, state = prefix_sum4(state, values[i:i + 4])
        out += group
        i += 4
    if n - i == 2:
        group, state = prefix_sum2(state, values[i:i + 2])
        out += group
    elif n - i == 1:
        # only reached from the permissive one-integer fallback
        last = (state.last + values[i]) & _MASK32
        out.append(last)
        state = PrefixState.start(last)
    return out, state


class _MaskQueue:
    """Continuation bits of the bytes ahead of the cursor, LSB = next byte.

    ``current`` is what windows read from; ``ahead`` is a second 48-bit batch
    gathered in advance when at least two batches of input remain.
    """

    __slots__ = ("data", "n", "gathered", "bits", "valid", "ahead", "ahead_valid")

    def __init__(self, data, pos: int):
        self.data = data
        self.n = len(data)
        self.gathered = pos
        self.bits = 0
        self.valid = 0
        self.ahead = 0
        self.ahead_valid = 0

    def _gather(self, nbytes: int) -> int:
        start = self.gathered
        chunk = self.data[start:start + nbytes]
        x = int.from_bytes(chunk, "little")
        m = 0
        for k in range(0, nbytes, BLOCK):
            m |= LaneBlock((x >> (8 * k)) & ((1 << 128) - 1)).movemask() << k
        self.gathered += nbytes
        return m

    def refill(self) -> None:
        if self.ahead_valid:
            self.bits |= self.ahead << self.valid
            self.valid += self.ahead_valid
            self.ahead = self.ahead_valid = 0
        if self.valid < WINDOW and self.n - self.gathered >= BATCH:
            self.bits |= self._gather(BATCH) << self.valid
            self.valid += BATCH
            if self.n - self.gathered >= BATCH:
                self.ahead = self._gather(BATCH)
                self.ahead_valid = BATCH
        while self.valid < WINDOW and self.n - self.gathered >= BLOCK:
            self.bits |= self._gather(BLOCK) << self.valid
            self.valid += BLOCK

    def retire(self, nbytes: int) -> None:
        self.bits >>= nbytes
        self.valid -= nbytes


def _decode_portable(data, pos, count, out, out_pos, delta, prev, handoff, strict):
    entries = entry_table()
    controls = shuffle_table()
    e_consumed, e_index = entries.consumed, entries.index
    n = len(data)
    floor = max(handoff, BLOCK)
    end = out_pos + count
    state = PrefixState.start(prev) if delta else None
    masks = _MaskQueue(data, pos)

    while out_pos < end:
        if masks.valid < WINDOW:
            masks.refill()
        if masks.valid < WINDOW or n - pos < floor:
            break
        if masks.valid >= BLOCK and not masks.bits & 0xFFFF and end - out_pos >= BLOCK:
            # a full register of single-byte integers skips the table
            values = kernel_sixteen_single(LaneBlock.from_bytes(data[pos:pos + BLOCK]))
            if delta:
                values, state = _commit_delta(values, state)
            out[out_pos:out_pos + BLOCK] = values
            out_pos += BLOCK
            pos += BLOCK
            masks.retire(BLOCK)
            continue
        mask12 = masks.bits & 0xFFF
        index = e_index[mask12]
        if index == INVALID_INDEX or (
                TWO_5B_BASE <= index < ALL_SINGLE_INDEX and not _fifth_bytes_ok(data, pos, index, controls)):
            if strict:
                raise MalformedStreamError(
                    f"integer at offset {pos} is not a canonical 32-bit encoding")
            values, new_pos = scalar_decode_from(data, pos, 1, strict=False)
            consumed = new_pos - pos
        else:
            if _produced(index) > end - out_pos:
                break
            consumed = e_consumed[mask12]
            values = _apply(LaneBlock.from_bytes(data[pos:pos + BLOCK]), index, controls)
        if delta:
            values, state = _commit_delta(values, state)
        out[out_pos:out_pos + len(values)] = values
        out_pos += len(values)
        pos += consumed
        masks.retire(consumed)

    if out_pos < end:
        values, pos = scalar_decode_from(data, pos, end - out_pos, strict=strict)
        if delta:
            acc = state.last
            for i, g in enumerate(values):
                acc = (acc + g) & _MASK32
                values[i] = acc
        out[out_pos:end] = values
    return pos, int(out[end - 1])


def _fifth_bytes_ok(data, pos: int, index: int, controls: ShuffleTable) -> bool:
    # Slot 6 of each half holds the fifth byte; it must stay below 16.
    ctrl = controls[index]
    for slot in (6, 14):
        src = ctrl[slot]
        if not src & 0x80 and data[pos + src] >= 16:
            return False
    return True


def _as_bytes(buf):
    if isinstance(buf, EncodedBuffer):
        return buf.data
    if isinstance(buf, np.ndarray):
        return buf.tobytes()
    if isinstance(buf, (bytes, bytearray)):
        return buf
    return bytes(buf)


def _handoff_bytes(handoff) -> float:
    if handoff is None:
        return DEFAULT_HANDOFF
    if handoff == math.inf:
        return math.inf
    return int(handoff)


def decode_from(buf, pos: int, count: int, out, out_pos: int = 0, *, delta: bool = False,
                prev: int = 0, path: str | None = None, handoff=None,
                strict: bool = True) -> tuple[int, int]:
    """Decode ``count`` integers starting at input byte ``pos`` into ``out[out_pos:]``.

    This is the resumable form: it returns the input position after the last
    byte consumed and the last value written (the running sum in delta mode),
    so a long list can be decoded in pieces.
    """
    if count < 0:
        raise ValueError("count must be non-negative")
    if count == 0:
        return pos, prev
    if len(out) - out_pos < count:
        raise ValueError(f"output has room for {len(out) - out_pos} integers, need {count}")
    handoff = _handoff_bytes(handoff)
    if resolve_path(path) == "vector":
        from . import _native
        return _native.decode_into(buf, pos, count, out, out_pos, delta=delta, prev=prev,
                                   handoff=handoff, strict=strict)
    data = _as_bytes(buf)
    pos, last = _decode_portable(data, pos, count, out, out_pos, delta, prev & _MASK32,
                                 handoff, strict)
    return pos, last


def decode_stream(buf, count: int | None = None, out=None, *, path: str | None = None,
                  handoff=None, strict: bool = True) -> int:
    """Decode ``count`` integers from the start of ``buf`` into ``out``.

    Returns the number of integers written. ``out`` needs slice assignment
    (a numpy ``uint32`` array is the natural choice; the vector path requires
    one).
    """
    if count is None:
        count = buf.count if isinstance(buf, EncodedBuffer) else None
    if count is None:
        raise ValueError("count is required for raw byte input")
    if out is None:
        raise ValueError("an output buffer is required")
    decode_from(buf, 0, count, out, 0, path=path, handoff=handoff, strict=strict)
    return count


def decode_delta_stream(buf, count: int | None = None, prev: int = 0, out=None, *,
                        path: str | None = None, handoff=None, strict: bool = True) -> int:
    """Decode gaps and write their running sums, starting from ``prev``."""
    if count is None:
        count = buf.count if isinstance(buf, EncodedBuffer) else None
    if count is None:
        raise ValueError("count is required for raw byte input")
    if out is None:
        raise ValueError("an output buffer is required")
    decode_from(buf, 0, count, out, 0, delta=True, prev=prev, path=path, handoff=handoff,
                strict=strict)
    return count


def decode(buf, count: int | None = None, *, delta: bool | None = None, prev: int = 0,
           path: str | None = None, handoff=None, strict: bool = True) -> np.ndarray:
    """Convenience wrapper returning a fresh ``uint32`` array.

    For an :class:`EncodedBuffer`, ``count`` and ``delta`` default to the
    buffer's own.
    """
    if isinstance(buf, EncodedBuffer):
        count = buf.count if count is None else count
        delta = buf.delta if delta is None else delta
    if count is None:
        raise ValueError("count is required for raw byte input")
    out = np.zeros(count, dtype=np.uint32)
    decode_from(buf, 0, count, out, 0, delta=bool(delta), prev=prev, path=path,
                handoff=handoff, strict=strict)
    return out
