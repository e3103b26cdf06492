"""On-disk container for one encoded integer list.

Layout, all header fields little-endian::

    offset  size  field
    0       4     magic b"MVB1"
    4       4     flags (bit 0: payload holds gaps)
    8       4     count of encoded integers
    12      4     payload length in bytes
    16      n     VByte payload
"""

from __future__ import annotations

import os
import struct

import numpy as np

from .format import EncodedBuffer, is_canonical

__all__ = ["MAGIC", "HEADER", "FLAG_DELTA", "ListFileError", "write_list", "read_list",
           "pack_list", "unpack_list"]

MAGIC = b"MVB1"
HEADER = struct.Struct("<4sIII")
FLAG_DELTA = 1


class ListFileError(ValueError):
    pass


def pack_list(buf: EncodedBuffer) -> bytes:
    flags = FLAG_DELTA if buf.delta else 0
    return HEADER.pack(MAGIC, flags, buf.count, len(buf.data)) + buf.data


def unpack_list(raw: bytes, *, validate: bool = False) -> EncodedBuffer:
    if len(raw) < HEADER.size:
        raise ListFileError(f"header needs {HEADER.size} bytes, got {len(raw)}")
    magic, flags, count, payload_len = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ListFileError(f"bad magic {magic!r}")
    payload = raw[HEADER.size:]
    if len(payload) < payload_len:
        raise ListFileError(f"payload truncated: {len(payload)} of {payload_len} bytes")
    if len(payload) > payload_len:
        raise ListFileError(f"{len(payload) - payload_len} trailing bytes after payload")
    # Every integer ends in exactly one byte below 0x80.
    arr = np.frombuffer(payload, dtype=np.uint8)
    ends = int(np.count_nonzero(arr < 0x80))
    if ends != count or (payload_len and arr[-1] >= 0x80):
        raise ListFileError(f"header says {count} integers, payload holds {ends}")
    if validate and not is_canonical(payload, count):
        raise ListFileError("payload is not canonical 32-bit VByte")
    return EncodedBuffer(bytes(payload), count, bool(flags & FLAG_DELTA))


def write_list(sink, buf: EncodedBuffer) -> int:
    """Write ``buf`` to a path or binary file object; returns bytes written."""
    raw = pack_list(buf)
    if isinstance(sink, (str, os.PathLike)):
        with open(sink, "wb") as f:
            f.write(raw)
    else:
        sink.write(raw)
    return len(raw)


def read_list(source, *, validate: bool = False) -> EncodedBuffer:
    """Read a list written by :func:`write_list` from a path or binary file object."""
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as f:
            raw = f.read()
    else:
        raw = source.read()
    return unpack_list(raw, validate=validate)
