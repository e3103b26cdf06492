"""VByte wire format: encoder, conventional scalar decoder, differential coding.

Each unsigned 32-bit integer is written least significant 7 bits first, one
group per byte. The high bit of every byte is a continuation flag: set on all
bytes of an integer except the last. A 32-bit value therefore takes 1 to 5
bytes, and the fifth byte (when present) only carries 4 payload bits.

>>> encode_one(128).hex()
'8001'
>>> decode_scalar(bytes.fromhex('800182031020'), 4)
[128, 386, 16, 32]
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "MAX_VALUE",
    "MAX_BYTES",
    "VByteError",
    "TruncatedStreamError",
    "MalformedStreamError",
    "EncodedBuffer",
    "encode_one",
    "encoded_length",
    "encode_sequence",
    "decode_scalar",
    "scalar_decode_from",
    "is_canonical",
    "delta_encode",
    "prefix_sum_scalar",
]

MAX_VALUE = 0xFFFFFFFF
MAX_BYTES = 5
_MASK32 = 0xFFFFFFFF

# Thresholds at which the encoded length grows by one byte.
_LENGTH_STEPS = (1 << 7, 1 << 14, 1 << 21, 1 << 28)


class VByteError(ValueError):
    """Base class for malformed or truncated VByte input."""


class TruncatedStreamError(VByteError):
    """Input ran out before the requested number of integers was decoded."""


class MalformedStreamError(VByteError):
    """Input is not a canonical 32-bit VByte stream."""


@dataclass(frozen=True)
class EncodedBuffer:
    """A VByte byte stream holding ``count`` integers.

    ``delta`` records whether the integers are gaps of a sorted list rather
    than the values themselves.
    """

    data: bytes
    count: int
    delta: bool = False

    def __post_init__(self):
        if self.count < 0:
            raise ValueError("count must be non-negative")
        if not isinstance(self.data, bytes):
            object.__setattr__(self, "data", bytes(self.data))

    def __len__(self) -> int:
        return len(self.data)

    @property
    def bits_per_int(self) -> float:
        return 8.0 * len(self.data) / self.count if self.count else 0.0


def _check_value(x: int) -> None:
    if not 0 <= x <= MAX_VALUE:
        raise ValueError(f"value {x} is outside the unsigned 32-bit range")


def encoded_length(x: int) -> int:
    """Number of bytes ``encode_one(x)`` produces."""
    _check_value(x)
    n = 1
    for step in _LENGTH_STEPS:
        if x < step:
            break
        n += 1
    return n


def encode_one(x: int) -> bytes:
    """Canonical minimal-length encoding of a single unsigned 32-bit integer."""
    _check_value(x)
    out = bytearray()
    while x >= 0x80:
        out.append((x & 0x7F) | 0x80)
        x >>= 7
    out.append(x)
    return bytes(out)


def _as_uint32_array(values: Iterable[int]) -> np.ndarray:
    if isinstance(values, np.ndarray):
        arr = values
    else:
        arr = np.fromiter((int(v) for v in values), dtype=np.int64)
    if arr.size == 0:
        return np.zeros(0, dtype=np.uint64)
    if arr.dtype.kind not in "iu":
        raise TypeError(f"expected integers, got dtype {arr.dtype}")
    if arr.dtype.kind == "i" and arr.min() < 0:
        raise ValueError("negative value cannot be VByte-encoded")
    arr = arr.astype(np.uint64, copy=False)
    if arr.max() > MAX_VALUE:
        raise ValueError("value outside the unsigned 32-bit range")
    return arr


def encode_sequence(values: Iterable[int], *, delta: bool = False) -> EncodedBuffer:
    """Encode integers back to back.

    With ``delta=True`` the values must be non-decreasing; their gaps are
    encoded instead and the buffer is flagged accordingly.
    """
    if delta:
        values = delta_encode(values)
    arr = _as_uint32_array(values)
    n = arr.size
    if n == 0:
        return EncodedBuffer(b"", 0, delta)

    lengths = np.ones(n, dtype=np.int64)
    for step in _LENGTH_STEPS:
        lengths += arr >= step
    ends = np.cumsum(lengths)
    starts = ends - lengths
    out = np.empty(int(ends[-1]), dtype=np.uint8)
    for k in range(MAX_BYTES):
        sel = lengths > k
        digit = (arr[sel] >> np.uint64(7 * k)) & np.uint64(0x7F)
        more = (lengths[sel] > k + 1).astype(np.uint64) << np.uint64(7)
        out[starts[sel] + k] = (digit | more).astype(np.uint8)
    return EncodedBuffer(out.tobytes(), n, delta)


def scalar_decode_from(
    data, pos: int, count: int, *, strict: bool = True
) -> tuple[list[int], int]:
    """Decode ``count`` integers starting at byte ``pos``.

    Returns the values and the position just past the last byte consumed.
    Byte-at-a-time with an early exit per byte, as in the textbook decoder.
    In permissive mode an integer always stops after its fifth byte and the
    value is reduced modulo 2**32.
    """
    out: list[int] = []
    append = out.append
    n = len(data)
    for _ in range(count):
        if pos >= n:
            raise TruncatedStreamError(f"stream ended after {len(out)} of {count} integers")
        b = data[pos]
        pos += 1
        if b < 128:
            append(b)
            continue
        c = b & 0x7F
        shift = 7
        while True:
            if pos >= n:
                raise TruncatedStreamError(f"stream ended inside integer {len(out)}")
            b = data[pos]
            pos += 1
            if shift == 28:
                if strict and b >= 16:
                    raise MalformedStreamError(
                        f"fifth byte 0x{b:02x} at offset {pos - 1} overflows 32 bits"
                    )
                append((c + (b << 28)) & _MASK32)
                break
            if b < 128:
                append(c + (b << shift))
                break
            c += (b & 0x7F) << shift
            shift += 7
    return out, pos


def decode_scalar(buf, count: int | None = None, *, offset: int = 0,
                  strict: bool = True) -> list[int]:
    """Decode ``count`` integers with the conventional byte-at-a-time loop.

    ``buf`` may be an :class:`EncodedBuffer` (``count`` defaults to its count)
    or any bytes-like object (``count`` defaults to decoding every byte).
    """
    if isinstance(buf, EncodedBuffer):
        if count is None:
            count = buf.count
        buf = buf.data
    if count is None:
        out: list[int] = []
        pos = offset
        while pos < len(buf):
            values, pos = scalar_decode_from(buf, pos, 1, strict=strict)
            out.extend(values)
        return out
    return scalar_decode_from(buf, offset, count, strict=strict)[0]


def is_canonical(data, count: int) -> bool:
    """True if ``data`` holds exactly ``count`` minimal-length 32-bit encodings."""
    pos = 0
    n = len(data)
    for _ in range(count):
        start = pos
        while pos < n and data[pos] >= 0x80:
            pos += 1
        if pos >= n:
            return False
        length = pos - start + 1
        pos += 1
        if length > MAX_BYTES:
            return False
        if length > 1 and data[pos - 1] == 0:
            return False
        if length == MAX_BYTES and data[pos - 1] >= 16:
            return False
    return pos == n


def delta_encode(values: Iterable[int]):
    """Successive differences, the first taken against zero.

    Returns a list, or a ``uint32`` array when given a numpy array.
    """
    if isinstance(values, np.ndarray):
        arr = _as_uint32_array(values).astype(np.int64)
        gaps = np.diff(arr, prepend=0)
        if gaps.size and gaps.min() < 0:
            raise ValueError("sequence decreases; gaps would be negative")
        return gaps.astype(np.uint32)
    gaps = []
    prev = 0
    for x in values:
        x = int(x)
        _check_value(x)
        if x < prev:
            raise ValueError(f"sequence decreases ({prev} -> {x}); gaps would be negative")
        gaps.append(x - prev)
        prev = x
    return gaps


def prefix_sum_scalar(gaps: Sequence[int], prev: int = 0) -> list[int]:
    """Running sums of ``gaps`` starting from ``prev``, modulo 2**32."""
    out = []
    acc = prev & _MASK32
    for g in gaps:
        acc = (acc + int(g)) & _MASK32
        out.append(acc)
    return out
