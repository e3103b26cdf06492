"""Mask classification and the lookup tables that drive the masked decoder.

A window is 12 input bytes; its mask has bit k set when byte k carries a
continuation flag. Every mask is sorted into one of five cases:

    ALL_SINGLE  mask == 0, twelve 1-byte integers
    SIX_2B      the next 6 integers are each 1 or 2 bytes    (64 shapes)
    FOUR_3B     the next 4 integers are each 1 to 3 bytes    (81 shapes)
    TWO_5B      the next 2 integers are each 1 to 5 bytes    (25 shapes)
    INVALID     an integer longer than 5 bytes

Cases are tried in that order; the first that fits wins. The 170 shapes are
numbered with a little-endian mixed radix: SIX_2B in [0, 64), FOUR_3B in
[64, 145), TWO_5B in [145, 170).
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass

__all__ = [
    "WINDOW",
    "BLOCK",
    "ZERO",
    "ALL_SINGLE_INDEX",
    "INVALID_INDEX",
    "NUM_CONTROLS",
    "CaseKind",
    "DecodeCase",
    "EntryTable",
    "KernelConstants",
    "ShuffleTable",
    "extract_mask",
    "classify_mask",
    "case_index",
    "case_from_index",
    "kind_of_index",
    "build_entry_table",
    "build_shuffle_table",
    "shuffle_control",
    "entry_table",
    "shuffle_table",
    "dump_entry_table",
    "dump_shuffle_table",
]

WINDOW = 12
BLOCK = 16
NUM_CONTROLS = 170

# pshufb convention: a control byte with the high bit set yields a zero byte.
ZERO = 0x80

ALL_SINGLE_INDEX = 0xFE
INVALID_INDEX = 0xFF

SIX_2B_BASE = 0
FOUR_3B_BASE = 64
TWO_5B_BASE = 145


class CaseKind(enum.Enum):
    ALL_SINGLE = "all_single"
    SIX_2B = "six_2b"
    FOUR_3B = "four_3b"
    TWO_5B = "two_5b"
    INVALID = "invalid"


# kind -> (integers produced, max bytes per integer)
_SHAPES = {
    CaseKind.SIX_2B: (6, 2),
    CaseKind.FOUR_3B: (4, 3),
    CaseKind.TWO_5B: (2, 5),
}
_GREEDY_ORDER = (CaseKind.SIX_2B, CaseKind.FOUR_3B, CaseKind.TWO_5B)


@dataclass(frozen=True)
class DecodeCase:
    kind: CaseKind
    lengths: tuple[int, ...]
    index: int | None = None

    @property
    def consumed(self) -> int:
        return sum(self.lengths)

    @property
    def produced(self) -> int:
        return len(self.lengths)


def extract_mask(block) -> int:
    """Gather the high bit of each of 16 bytes into a 16-bit integer (pmovmskb).

    Bit k of the result is the high bit of ``block[k]``.
    """
    if len(block) != BLOCK:
        raise ValueError(f"expected {BLOCK} bytes, got {len(block)}")
    x = int.from_bytes(bytes(block), "little")
    return _movemask64(x & 0xFFFFFFFFFFFFFFFF) | (_movemask64(x >> 64) << 8)


def _movemask64(x: int) -> int:
    # Move each byte's top bit to bit 0 of the byte, then let one multiply
    # stack the eight bits into the top byte.
    x = (x >> 7) & 0x0101010101010101
    return ((x * 0x0102040810204080) >> 56) & 0xFF


def _lengths(mask: int, n: int, limit: int) -> tuple[int, ...] | None:
    """Byte lengths of the first ``n`` integers, or None if one exceeds ``limit``."""
    out = []
    bit = 0
    for _ in range(n):
        length = 1
        while (mask >> bit) & 1:
            length += 1
            bit += 1
            if length > limit:
                return None
        bit += 1
        out.append(length)
    return tuple(out)


def classify_mask(mask: int) -> DecodeCase:
    """Decide how the 12-byte window described by ``mask`` is decoded."""
    if not 0 <= mask < 1 << WINDOW:
        raise ValueError(f"window mask must be 12 bits, got {mask:#x}")
    if mask == 0:
        return DecodeCase(CaseKind.ALL_SINGLE, (1,) * WINDOW)
    for kind in _GREEDY_ORDER:
        n, limit = _SHAPES[kind]
        lengths = _lengths(mask, n, limit)
        if lengths is not None:
            return DecodeCase(kind, lengths, case_index(kind, lengths))
    return DecodeCase(CaseKind.INVALID, ())


def case_index(kind: CaseKind, lengths) -> int:
    """Control index of a (kind, lengths) shape."""
    if kind not in _SHAPES:
        raise ValueError(f"{kind} has no shuffle control")
    n, limit = _SHAPES[kind]
    lengths = tuple(lengths)
    if len(lengths) != n or any(not 1 <= l <= limit for l in lengths):
        raise ValueError(f"lengths {lengths} do not fit {kind.value}")
    base = {CaseKind.SIX_2B: SIX_2B_BASE, CaseKind.FOUR_3B: FOUR_3B_BASE,
            CaseKind.TWO_5B: TWO_5B_BASE}[kind]
    index = 0
    for l in reversed(lengths):
        index = index * limit + (l - 1)
    return base + index


def kind_of_index(index: int) -> CaseKind:
    if index == ALL_SINGLE_INDEX:
        return CaseKind.ALL_SINGLE
    if index < FOUR_3B_BASE:
        return CaseKind.SIX_2B
    if index < TWO_5B_BASE:
        return CaseKind.FOUR_3B
    if index < NUM_CONTROLS:
        return CaseKind.TWO_5B
    return CaseKind.INVALID


def case_from_index(index: int) -> DecodeCase:
    """Inverse of :func:`case_index`."""
    if not 0 <= index < NUM_CONTROLS:
        raise ValueError(f"control index {index} out of range")
    kind = kind_of_index(index)
    n, limit = _SHAPES[kind]
    rest = index - {CaseKind.SIX_2B: SIX_2B_BASE, CaseKind.FOUR_3B: FOUR_3B_BASE,
                    CaseKind.TWO_5B: TWO_5B_BASE}[kind]
    lengths = []
    for _ in range(n):
        rest, digit = divmod(rest, limit)
        lengths.append(digit + 1)
    return DecodeCase(kind, tuple(lengths), index)


@dataclass(frozen=True)
class EntryTable:
    """4096 (consumed, index) byte pairs keyed by window mask."""

    consumed: bytes
    index: bytes

    def __len__(self) -> int:
        return len(self.index)

    def __getitem__(self, mask: int) -> tuple[int, int]:
        return self.consumed[mask], self.index[mask]


def build_entry_table() -> EntryTable:
    consumed = bytearray(1 << WINDOW)
    index = bytearray(1 << WINDOW)
    for mask in range(1 << WINDOW):
        case = classify_mask(mask)
        consumed[mask] = case.consumed
        if case.kind is CaseKind.ALL_SINGLE:
            index[mask] = ALL_SINGLE_INDEX
        elif case.kind is CaseKind.INVALID:
            index[mask] = INVALID_INDEX
        else:
            index[mask] = case.index
    return EntryTable(bytes(consumed), bytes(index))


@dataclass(frozen=True)
class KernelConstants:
    """Lane constants a case kernel applies after the byte shuffle.

    ``masks`` are 16-byte AND patterns, ``shifts`` the matching right shifts
    in ``lane_bits``-wide lanes, ``multiplier`` the per-16-bit-lane factors
    (TWO_5B only).
    """

    lane_bits: int
    masks: tuple[bytes, ...]
    shifts: tuple[int, ...]
    multiplier: tuple[int, ...] | None = None


KERNEL_CONSTANTS = {
    CaseKind.SIX_2B: KernelConstants(
        16, (bytes([0x7F, 0x00] * 8), bytes([0x00, 0xFF] * 8)), (0, 1)),
    CaseKind.FOUR_3B: KernelConstants(
        32,
        (bytes([0x7F, 0, 0, 0] * 4), bytes([0, 0x7F, 0, 0] * 4), bytes([0, 0, 0xFF, 0] * 4)),
        (0, 1, 2)),
    CaseKind.TWO_5B: KernelConstants(
        64, (bytes([0x7F] * 16),), (56,), (1 << 7, 1 << 6, 1 << 5, 1 << 4) * 2),
}


@dataclass(frozen=True)
class ShuffleTable:
    controls: tuple[bytes, ...]
    constants: dict

    def __len__(self) -> int:
        return len(self.controls)

    def __getitem__(self, index: int) -> bytes:
        return self.controls[index]


def _starts(lengths) -> list[int]:
    starts = []
    offset = 0
    for l in lengths:
        starts.append(offset)
        offset += l
    return starts


def shuffle_control(index: int) -> bytes:
    """The 16-byte permutation for control ``index``.

    SIX_2B: integer j lands in bytes 2j (low) and 2j+1 (high).
    FOUR_3B: integer j lands in bytes 4j..4j+2 (low, middle, high), 4j+3 zero.
    TWO_5B: integer j fills half j as (b, 0, c, 0, d, 0, e, a), where a..e are
    its 7-bit groups from least significant up, so that as 16-bit lanes the
    half reads (b, c, d, e + a*256).
    """
    case = case_from_index(index)
    ctrl = [ZERO] * BLOCK
    starts = _starts(case.lengths)
    if case.kind is CaseKind.SIX_2B:
        for j, (s, l) in enumerate(zip(starts, case.lengths)):
            for k in range(l):
                ctrl[2 * j + k] = s + k
    elif case.kind is CaseKind.FOUR_3B:
        for j, (s, l) in enumerate(zip(starts, case.lengths)):
            for k in range(l):
                ctrl[4 * j + k] = s + k
    else:
        # digit k -> slot within the half
        slots = (7, 0, 2, 4, 6)
        for j, (s, l) in enumerate(zip(starts, case.lengths)):
            for k in range(l):
                ctrl[8 * j + slots[k]] = s + k
    return bytes(ctrl)


def build_shuffle_table() -> ShuffleTable:
    controls = tuple(shuffle_control(i) for i in range(NUM_CONTROLS))
    return ShuffleTable(controls, dict(KERNEL_CONSTANTS))


@functools.lru_cache(maxsize=None)
def entry_table() -> EntryTable:
    """Shared, lazily built entry table."""
    return build_entry_table()


@functools.lru_cache(maxsize=None)
def shuffle_table() -> ShuffleTable:
    """Shared, lazily built shuffle table."""
    return build_shuffle_table()


def dump_entry_table(table: EntryTable | None = None) -> str:
    """Text listing of every entry, one line per mask, for golden-file diffs."""
    table = table or entry_table()
    lines = ["mask         kind        lengths                 consumed index"]
    for mask in range(len(table)):
        case = classify_mask(mask)
        consumed, index = table[mask]
        lengths = ",".join(map(str, case.lengths)) or "-"
        lines.append(f"{mask:012b} {case.kind.value:<11} {lengths:<23} {consumed:>8} {index:>5}")
    return "\n".join(lines) + "\n"


def dump_shuffle_table(table: ShuffleTable | None = None) -> str:
    """Text listing of the shuffle controls, one line per control index."""
    table = table or shuffle_table()
    lines = ["index kind        control (source byte per slot, -- = zero)"]
    for index in range(len(table)):
        slots = " ".join("--" if b & ZERO else f"{b:2d}" for b in table[index])
        lines.append(f"{index:>5} {kind_of_index(index).value:<11} {slots}")
    return "\n".join(lines) + "\n"
