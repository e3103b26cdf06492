"""Compiled SIMD twin of the masked decoder, plus a compiled scalar decoder.

The decoder loop is numba-compiled. The register-level steps are LLVM vector
intrinsics emitted through ``numba.extending.intrinsic``: unaligned 128-bit
loads, ``pshufb``, ``pmovmskb``, ``pmullw``, zero-extending unpacks, lane
adds for the prefix sums and 128-bit stores. A register travels between
them as a pair of int64 words (low half first), which LLVM folds away.

Importing this module raises ImportError when numba is missing or the host
is not x86-64 with SSSE3; that is the capability check behind ``auto``.
"""

from __future__ import annotations

import math
import platform

import numba
import numpy as np
from llvmlite import binding as _llvm
from llvmlite import ir
from numba.core import cgutils, types
from numba.extending import intrinsic

from .format import MalformedStreamError, TruncatedStreamError
from .tables import entry_table, shuffle_table


def _host_supported() -> bool:
    if platform.machine().lower() not in ("x86_64", "amd64"):
        return False
    return bool(_llvm.get_host_cpu_features().get("ssse3", False))


if not _host_supported():
    raise ImportError("SIMD decode path needs an x86-64 CPU with SSSE3")

__all__ = [
    "tables",
    "decode_into",
    "scalar_into",
    "window",
    "decode_lists",
]

OK = 0
TRUNCATED = 1
MALFORMED = 2

_M32 = 0xFFFFFFFF
_NO_HANDOFF = 1 << 62

_jit = numba.njit(cache=True, nogil=True)
_inline = numba.njit(cache=True, nogil=True, inline="always")

# ---------------------------------------------------------------------------
# register intrinsics

_Reg = types.UniTuple(types.int64, 2)
_i8, _i16, _i32, _i64 = (ir.IntType(w) for w in (8, 16, 32, 64))
_v16x8 = ir.VectorType(_i8, 16)
_v8x16 = ir.VectorType(_i16, 8)
_v4x32 = ir.VectorType(_i32, 4)
_v2x64 = ir.VectorType(_i64, 2)


def _lanes(*idx):
    return ir.Constant(ir.VectorType(_i32, len(idx)), list(idx))


def _unpack(builder, reg, vty):
    vec = ir.Constant(_v2x64, ir.Undefined)
    vec = builder.insert_element(vec, builder.extract_value(reg, 0), ir.Constant(_i32, 0))
    vec = builder.insert_element(vec, builder.extract_value(reg, 1), ir.Constant(_i32, 1))
    return builder.bitcast(vec, vty)


def _pack(context, builder, vec):
    vec = builder.bitcast(vec, _v2x64)
    lo = builder.extract_element(vec, ir.Constant(_i32, 0))
    hi = builder.extract_element(vec, ir.Constant(_i32, 1))
    return context.make_tuple(builder, _Reg, [lo, hi])


def _element_ptr(context, builder, arrty, arr, index):
    ary = context.make_array(arrty)(context, builder, arr)
    return builder.gep(ary.data, [index])


def _load16(context, builder, arrty, arr, index):
    ptr = builder.bitcast(_element_ptr(context, builder, arrty, arr, index),
                          _v16x8.as_pointer())
    return builder.load(ptr, align=1)


def _x86(builder, name, ret, args):
    fnty = ir.FunctionType(ret, [a.type for a in args])
    fn = cgutils.get_or_insert_function(builder.module, fnty, name)
    return builder.call(fn, args)


@intrinsic
def _vload(typingctx, arr, pos):
    """16 bytes of a uint8 array starting at ``pos``."""
    def codegen(context, builder, sig, args):
        return _pack(context, builder, _load16(context, builder, arr, args[0], args[1]))
    return _Reg(arr, pos), codegen


@intrinsic
def _vmovemask(typingctx, arr, pos):
    """High bits of the 16 bytes at ``pos`` (pmovmskb)."""
    def codegen(context, builder, sig, args):
        vec = _load16(context, builder, arr, args[0], args[1])
        m = _x86(builder, "llvm.x86.sse2.pmovmskb.128", _i32, [vec])
        return builder.zext(m, _i64)
    return types.int64(arr, pos), codegen


@intrinsic
def _vshuffle(typingctx, arr, pos, ctrl, row):
    """Load 16 bytes at ``pos`` and permute them with control row ``row`` (pshufb)."""
    def codegen(context, builder, sig, args):
        data = _load16(context, builder, arr, args[0], args[1])
        offset = builder.mul(args[3], ir.Constant(_i64, 16))
        control = _load16(context, builder, ctrl, args[2], offset)
        out = _x86(builder, "llvm.x86.ssse3.pshuf.b.128", _v16x8, [data, control])
        return _pack(context, builder, out)
    return _Reg(arr, pos, ctrl, row), codegen


@intrinsic
def _vmullo16(typingctx, a, b):
    """Low halves of eight 16-bit products (pmullw)."""
    def codegen(context, builder, sig, args):
        x = _unpack(builder, args[0], _v8x16)
        y = _unpack(builder, args[1], _v8x16)
        return _pack(context, builder, builder.mul(x, y))
    return _Reg(a, b), codegen


def _widen(src_vty):
    @intrinsic
    def widen(typingctx, reg, part):
        """Zero-extend lanes 4*part .. 4*part+3 to 32 bits (pmovzx)."""
        if not isinstance(part, types.IntegerLiteral):
            return None
        k = part.literal_value

        def codegen(context, builder, sig, args):
            vec = _unpack(builder, args[0], src_vty)
            four = builder.shuffle_vector(vec, ir.Constant(src_vty, ir.Undefined),
                                          _lanes(*range(4 * k, 4 * k + 4)))
            return _pack(context, builder, builder.zext(four, _v4x32))
        return _Reg(reg, part), codegen
    return widen


_vwiden8 = _widen(_v16x8)
_vwiden16 = _widen(_v8x16)


@intrinsic
def _vpsum4(typingctx, reg, last):
    """Prefix sum of four 32-bit lanes on top of ``last``.

    Two shift-and-add steps (by one lane, then two), then the broadcast
    previous value is added. Returns the sums and the new last value.
    """
    def codegen(context, builder, sig, args):
        c = _unpack(builder, args[0], _v4x32)
        zero = ir.Constant(_v4x32, None)
        c = builder.add(c, builder.shuffle_vector(c, zero, _lanes(4, 0, 1, 2)))
        c = builder.add(c, builder.shuffle_vector(c, zero, _lanes(4, 5, 0, 1)))
        undef = ir.Constant(_v4x32, ir.Undefined)
        p = builder.insert_element(undef, builder.trunc(args[1], _i32), ir.Constant(_i32, 0))
        p = builder.shuffle_vector(p, undef, _lanes(0, 0, 0, 0))
        out = builder.add(c, p)
        new_last = builder.zext(builder.extract_element(out, ir.Constant(_i32, 3)), _i64)
        return context.make_tuple(builder, sig.return_type,
                                  [_pack(context, builder, out), new_last])
    return types.Tuple((_Reg, types.int64))(reg, last), codegen


@intrinsic
def _vstore(typingctx, out, pos, reg):
    """Store four 32-bit lanes at ``out[pos:pos+4]``."""
    def codegen(context, builder, sig, args):
        ptr = _element_ptr(context, builder, out, args[0], args[1])
        ptr = builder.bitcast(ptr, _v4x32.as_pointer())
        builder.store(_unpack(builder, args[2], _v4x32), ptr, align=4)
        return context.get_dummy_value()
    return types.void(out, pos, reg), codegen


# ---------------------------------------------------------------------------
# compiled decoders


@_jit
def _scalar(data, pos, count, out, out_pos, delta, prev, strict):
    """Conventional decoder. Returns (pos, last, status, written)."""
    n = data.shape[0]
    last = prev
    for i in range(count):
        if pos >= n:
            return pos, last, TRUNCATED, i
        b = np.int64(data[pos])
        pos += 1
        if b < 128:
            v = b
        else:
            v = b & 0x7F
            shift = 7
            while True:
                if pos >= n:
                    return pos, last, TRUNCATED, i
                b = np.int64(data[pos])
                pos += 1
                if shift == 28:
                    if strict and b >= 16:
                        return pos - 1, last, MALFORMED, i
                    v = (v + (b << 28)) & _M32
                    break
                if b < 128:
                    v += b << shift
                    break
                v += (b & 0x7F) << shift
                shift += 7
        if delta:
            last = (last + v) & _M32
        else:
            last = v
        out[out_pos + i] = last
    return pos, last, OK, count


@_inline
def _produced(index):
    if index == 254:
        return 12
    if index < 64:
        return 6
    if index < 145:
        return 4
    return 2


# The kernels mask terminating bytes with 0x7F as well: the window mask
# guarantees their high bit is clear.

@_inline
def _six2b(reg):
    # each 16-bit lane: low & 0x7F | (high & 0x7F) << 7
    lo, hi = reg
    return ((lo & 0x007F007F007F007F) | ((lo & 0x7F007F007F007F00) >> 1),
            (hi & 0x007F007F007F007F) | ((hi & 0x7F007F007F007F00) >> 1))


@_inline
def _four3b_word(w):
    return ((w & 0x0000007F0000007F) | ((w & 0x00007F0000007F00) >> 1)
            | ((w & 0x007F0000007F0000) >> 2))


@_inline
def _four3b(reg):
    return _four3b_word(reg[0]), _four3b_word(reg[1])


_TWO_MUL = (np.int64(0x0010002000400080), np.int64(0x0010002000400080))


@_inline
def _even_bytes(c):
    return ((c & 0xFF) | (((c >> 16) & 0xFF) << 8) | (((c >> 32) & 0xFF) << 16)
            | (((c >> 48) & 0xFF) << 24))


@_inline
def _two5b(reg):
    y0 = reg[0] & 0x7F7F7F7F7F7F7F7F
    y1 = reg[1] & 0x7F7F7F7F7F7F7F7F
    x0, x1 = _vmullo16((y0, y1), _TWO_MUL)
    c0 = (y0 >> 56) | x0 | (x0 << 8)
    c1 = (y1 >> 56) | x1 | (x1 << 8)
    return _even_bytes(c0), _even_bytes(c1)


# Helpers below take and return only registers and scalars. Passing an
# array into an inlined helper makes numba refcount it once per window.

@_inline
def _sum4(reg, delta, last):
    if delta:
        return _vpsum4(reg, last)
    return reg, (reg[1] >> 32) & _M32


@_inline
def _sum2(v0, v1, delta, last):
    if delta:
        v0 = (last + v0) & _M32
        v1 = (v0 + v1) & _M32
    return v0, v1


@_inline
def _one(data, pos):
    """One integer, permissive: (value, next pos, status)."""
    n = data.shape[0]
    v = np.int64(0)
    for k in range(5):
        if pos >= n:
            return v, pos, TRUNCATED
        b = np.int64(data[pos])
        pos += 1
        if k == 4:
            return (v + (b << 28)) & _M32, pos, OK
        v += (b & 0x7F) << (7 * k)
        if b < 128:
            break
    return v, pos, OK


@intrinsic
def _vmovemask48(typingctx, arr, pos):
    """High bits of the 48 bytes at ``pos``: three pmovmskb results."""
    def codegen(context, builder, sig, args):
        total = ir.Constant(_i64, 0)
        for k in range(3):
            at = builder.add(args[1], ir.Constant(_i64, 16 * k))
            vec = _load16(context, builder, arr, args[0], at)
            m = builder.zext(_x86(builder, "llvm.x86.sse2.pmovmskb.128", _i32, [vec]), _i64)
            total = builder.or_(total, builder.shl(m, ir.Constant(_i64, 16 * k)))
        return total
    return types.int64(arr, pos), codegen


@_jit
def _masked(data, pos, count, out, out_pos, delta, prev, floor, strict,
            e_consumed, e_index, ctrl):
    """Masked decoder. Returns (pos, last, status, written)."""
    n = data.shape[0]
    end = out_pos + count
    start_out = out_pos
    last = prev
    bits = np.int64(0)
    valid = 0
    ahead = np.int64(0)
    ahead_valid = 0
    gathered = pos

    while out_pos < end:
        if valid < 12:
            if ahead_valid:
                bits |= ahead << valid
                valid += ahead_valid
                ahead_valid = 0
            if valid < 12 and n - gathered >= 48:
                bits |= _vmovemask48(data, gathered) << valid
                valid += 48
                gathered += 48
                if n - gathered >= 48:
                    ahead = _vmovemask48(data, gathered)
                    ahead_valid = 48
                    gathered += 48
            while valid < 12 and n - gathered >= 16:
                bits |= _vmovemask(data, gathered) << valid
                valid += 16
                gathered += 16
        if valid < 12 or n - pos < floor:
            break
        if valid >= 16 and (bits & 0xFFFF) == 0 and end - out_pos >= 16:
            # sixteen single-byte integers: widen without a table lookup
            reg = _vload(data, pos)
            r, last = _sum4(_vwiden8(reg, 0), delta, last)
            _vstore(out, out_pos, r)
            r, last = _sum4(_vwiden8(reg, 1), delta, last)
            _vstore(out, out_pos + 4, r)
            r, last = _sum4(_vwiden8(reg, 2), delta, last)
            _vstore(out, out_pos + 8, r)
            r, last = _sum4(_vwiden8(reg, 3), delta, last)
            _vstore(out, out_pos + 12, r)
            out_pos += 16
            pos += 16
            bits >>= 16
            valid -= 16
            continue
        mask12 = bits & 0xFFF
        index = np.int64(e_index[mask12])
        consumed = np.int64(e_consumed[mask12])

        bad = index == 255
        if 145 <= index < 170:
            # fifth bytes sit in slots 6 and 14
            c = ctrl[index, 6]
            if c < 0x80 and data[pos + c] >= 16:
                bad = True
            c = ctrl[index, 14]
            if c < 0x80 and data[pos + c] >= 16:
                bad = True
        if bad:
            if strict:
                return pos, last, MALFORMED, out_pos - start_out
            v, new_pos, status = _one(data, pos)
            if status != OK:
                return new_pos, last, status, out_pos - start_out
            last = (last + v) & _M32 if delta else v
            out[out_pos] = last
            out_pos += 1
            consumed = new_pos - pos
        else:
            produced = _produced(index)
            if produced > end - out_pos:
                break
            if index == 254:
                reg = _vload(data, pos)
                r, last = _sum4(_vwiden8(reg, 0), delta, last)
                _vstore(out, out_pos, r)
                r, last = _sum4(_vwiden8(reg, 1), delta, last)
                _vstore(out, out_pos + 4, r)
                r, last = _sum4(_vwiden8(reg, 2), delta, last)
                _vstore(out, out_pos + 8, r)
            elif index < 64:
                words = _six2b(_vshuffle(data, pos, ctrl, index))
                r, last = _sum4(_vwiden16(words, 0), delta, last)
                _vstore(out, out_pos, r)
                w = words[1]
                v0, last = _sum2(w & 0xFFFF, (w >> 16) & 0xFFFF, delta, last)
                out[out_pos + 4] = v0
                out[out_pos + 5] = last
            elif index < 145:
                r, last = _sum4(_four3b(_vshuffle(data, pos, ctrl, index)), delta, last)
                _vstore(out, out_pos, r)
            else:
                v0, v1 = _two5b(_vshuffle(data, pos, ctrl, index))
                v0, last = _sum2(v0, v1, delta, last)
                out[out_pos] = v0
                out[out_pos + 1] = last
            out_pos += produced
        pos += consumed
        bits >>= consumed
        valid -= consumed

    if out_pos < end:
        pos, last, status, written = _scalar(data, pos, end - out_pos, out, out_pos, delta,
                                             last, strict)
        return pos, last, status, out_pos - start_out + written
    return pos, last, OK, count


@_jit
def _decode_lists(data, starts, counts, out, chunk, masked, floor,
                  e_consumed, e_index, ctrl):
    """Delta-decode many lists back to back.

    ``chunk > 0`` reuses ``out[:chunk]`` as the output buffer; otherwise list
    i lands at its running offset in ``out``. Returns the number of integers
    decoded, or -1 on a decode error.
    """
    total = 0
    for i in range(starts.shape[0]):
        pos = starts[i]
        remaining = counts[i]
        last = np.int64(0)
        while remaining > 0:
            if chunk > 0:
                k = min(chunk, remaining)
                out_pos = 0
            else:
                k = remaining
                out_pos = total
            if masked:
                pos, last, status, w = _masked(data, pos, k, out, out_pos, True, last, floor,
                                               True, e_consumed, e_index, ctrl)
            else:
                pos, last, status, w = _scalar(data, pos, k, out, out_pos, True, last, True)
            if status != OK:
                return -1
            remaining -= k
            total += k
    return total


# ---------------------------------------------------------------------------
# Python-facing wrappers

_TABLES = None


def tables():
    """(consumed, index, controls) as numpy arrays, built once."""
    global _TABLES
    if _TABLES is None:
        e = entry_table()
        s = shuffle_table()
        _TABLES = (
            np.frombuffer(e.consumed, dtype=np.uint8).copy(),
            np.frombuffer(e.index, dtype=np.uint8).copy(),
            np.frombuffer(b"".join(s.controls), dtype=np.uint8).reshape(len(s), 16).copy(),
        )
    return _TABLES


def _as_uint8(buf) -> np.ndarray:
    data = getattr(buf, "data", buf) if not isinstance(buf, np.ndarray) else buf
    if isinstance(data, np.ndarray):
        return np.ascontiguousarray(data, dtype=np.uint8)
    return np.frombuffer(data, dtype=np.uint8)


def _floor(handoff) -> int:
    if handoff == math.inf:
        return _NO_HANDOFF
    return max(int(handoff), 16)


def _raise(status, pos, written, count):
    if status == TRUNCATED:
        raise TruncatedStreamError(f"stream ended after {written} of {count} integers")
    if status == MALFORMED:
        raise MalformedStreamError(f"integer at offset {pos} is not a canonical 32-bit encoding")


def _target(out, out_pos, count):
    if (isinstance(out, np.ndarray) and out.dtype == np.uint32 and out.ndim == 1
            and out.flags.c_contiguous and out.flags.writeable):
        return out, out_pos
    return np.zeros(count, dtype=np.uint32), 0


def _finish(target, out, out_pos, count, status, new_pos, written, last):
    if target is not out:
        # keep what was decoded before an error, like the portable path
        done = count if status == OK else written
        out[out_pos:out_pos + done] = target[:done].tolist()
    _raise(status, new_pos, written, count)
    return int(new_pos), int(last)


def decode_into(buf, pos, count, out, out_pos=0, *, delta=False, prev=0, handoff=16,
                strict=True):
    """Masked decode of ``count`` integers; returns (next input pos, last value)."""
    data = _as_uint8(buf)
    if out_pos + count > len(out):
        raise ValueError(f"output holds {len(out) - out_pos} slots, need {count}")
    target, t_pos = _target(out, out_pos, count)
    consumed, index, controls = tables()
    new_pos, last, status, written = _masked(
        data, pos, count, target, t_pos, delta, prev & _M32, _floor(handoff), strict,
        consumed, index, controls)
    return _finish(target, out, out_pos, count, status, new_pos, written, last)


def scalar_into(buf, pos, count, out, out_pos=0, *, delta=False, prev=0, strict=True):
    """Compiled conventional decoder; same contract as :func:`decode_into`."""
    data = _as_uint8(buf)
    if out_pos + count > len(out):
        raise ValueError(f"output holds {len(out) - out_pos} slots, need {count}")
    target, t_pos = _target(out, out_pos, count)
    new_pos, last, status, written = _scalar(data, pos, count, target, t_pos, delta,
                                             prev & _M32, strict)
    return _finish(target, out, out_pos, count, status, new_pos, written, last)


def window(block):
    """Compiled single-window decode: (values, consumed).

    Runs the stream loop over exactly one 16-byte block, asking for as many
    integers as the window's table entry produces.
    """
    data = _as_uint8(bytes(block))
    if data.shape[0] < 16:
        raise ValueError(f"a window needs 16 readable bytes, got {data.shape[0]}")
    data = data[:16].copy()
    consumed, index, controls = tables()
    mask12 = int(sum((int(data[k]) >> 7) << k for k in range(12)))
    entry = int(index[mask12])
    if entry == 255:
        raise MalformedStreamError(f"window mask {mask12:012b} has an integer over 5 bytes")
    produced = 12 if entry == 254 else 6 if entry < 64 else 4 if entry < 145 else 2
    out = np.zeros(produced, dtype=np.uint32)
    pos, _ = decode_into(data, 0, produced, out, 0)
    return [int(v) for v in out], int(pos)


def decode_lists(data, starts, counts, out, *, chunk=0, masked=True, handoff=16):
    """Delta-decode concatenated lists into ``out``; see :func:`_decode_lists`."""
    consumed, index, controls = tables()
    total = _decode_lists(_as_uint8(data), np.asarray(starts, dtype=np.int64),
                          np.asarray(counts, dtype=np.int64), out, int(chunk), bool(masked),
                          _floor(handoff), consumed, index, controls)
    if total < 0:
        raise MalformedStreamError("decode failed")
    return int(total)
