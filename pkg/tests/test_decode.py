import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from maskedvbyte.format import (
    EncodedBuffer,
    MalformedStreamError,
    TruncatedStreamError,
    encode_sequence,
)
from maskedvbyte.vector import (
    PATH_ENV,
    decode,
    decode_delta_stream,
    decode_from,
    decode_stream,
    native_available,
    resolve_path,
)
from oracles import digits_encode, mixed_values, split_decode, values_with_lengths

PATHS = ["portable", pytest.param("vector", marks=pytest.mark.skipif(
    not native_available(), reason="compiled path unavailable"))]
HANDOFFS = [16, 48, 96, math.inf]

u32 = st.integers(0, 2**32 - 1)
# values biased towards short encodings so that many window shapes show up
short_biased = st.one_of(st.integers(0, 127), st.integers(128, 2**14 - 1),
                         st.integers(2**14, 2**21 - 1), u32)


def raw(values):
    return b"".join(digits_encode(int(v)) for v in values)


@pytest.mark.parametrize("path", PATHS)
def test_four_integer_stream(path):
    data = bytes([0x80, 0x01, 0x82, 0x03, 0x10, 0x20])
    assert decode(data, 4, path=path).tolist() == [128, 386, 16, 32]
    assert decode(data, 4, delta=True, path=path).tolist() == [128, 514, 530, 562]


@pytest.mark.parametrize("path", PATHS)
def test_empty_and_tiny(path):
    assert decode(b"", 0, path=path).tolist() == []
    assert decode(encode_sequence([]), path=path).tolist() == []
    assert decode(b"\x05", 1, path=path).tolist() == [5]
    assert decode(b"\x00", 1, delta=True, prev=9, path=path).tolist() == [9]


@pytest.mark.parametrize("path", PATHS)
def test_every_short_length(path):
    rng = np.random.default_rng(3)
    for n in range(0, 80):
        values = mixed_values(rng, n)
        assert decode(raw(values), n, path=path).tolist() == values.tolist(), n


@pytest.mark.parametrize("path", PATHS)
@pytest.mark.parametrize("nbytes", [1, 2, 3, 4, 5])
def test_uniform_lengths(path, nbytes):
    rng = np.random.default_rng(nbytes)
    values = values_with_lengths(rng, np.full(3000, nbytes))
    assert decode(encode_sequence(values), path=path).tolist() == values.tolist()


@pytest.mark.parametrize("path", PATHS)
def test_large_mixed_stream(path):
    rng = np.random.default_rng(11)
    n = 100_000 if path == "vector" else 20_000
    values = mixed_values(rng, n)
    buf = encode_sequence(values)
    assert decode(buf, path=path).tolist() == values.tolist()
    assert split_decode(buf.data) == values.tolist()


@settings(max_examples=60, deadline=None)
@given(st.lists(short_biased, max_size=120))
def test_paths_agree_with_oracle(values):
    data = raw(values)
    for path in ("portable", "vector") if native_available() else ("portable",):
        for handoff in HANDOFFS:
            got = decode(data, len(values), path=path, handoff=handoff).tolist()
            assert got == values, (path, handoff)


@pytest.mark.parametrize("path", PATHS)
def test_handoff_invariance(path):
    rng = np.random.default_rng(21)
    for n in (0, 1, 7, 33, 250, 2000):
        values = mixed_values(rng, n)
        data = raw(values)
        results = {h: decode(data, n, path=path, handoff=h).tolist() for h in HANDOFFS}
        for h, got in results.items():
            assert got == values.tolist(), (n, h)
        ends = {decode_from(data, 0, n, np.zeros(n, np.uint32), handoff=h)[0] for h in HANDOFFS}
        assert ends == {len(data)}


@pytest.mark.parametrize("path", PATHS)
def test_delta_decode(path):
    rng = np.random.default_rng(4)
    ids = np.sort(rng.choice(2**31, 5000, replace=False)).astype(np.uint64)
    buf = encode_sequence(ids, delta=True)
    assert decode(buf, path=path).tolist() == ids.tolist()
    out = np.zeros(len(ids), np.uint32)
    assert decode_delta_stream(buf, out=out, path=path) == len(ids)
    assert out.tolist() == ids.tolist()


@pytest.mark.parametrize("path", PATHS)
def test_delta_zero_gaps_and_wrap(path):
    assert decode(bytes(20), 20, delta=True, prev=42, path=path).tolist() == [42] * 20
    data = raw([1] * 19)
    got = decode(data, 19, delta=True, prev=2**32 - 5, path=path).tolist()
    assert got == [(2**32 - 5 + k) % 2**32 for k in range(1, 20)]


@pytest.mark.parametrize("path", PATHS)
def test_resumable_chunks(path):
    rng = np.random.default_rng(8)
    values = mixed_values(rng, 3000)
    ids = np.cumsum(values % 1000).astype(np.uint64)
    data = encode_sequence(ids, delta=True).data
    out = np.zeros(len(ids), np.uint32)
    pos, last, done = 0, 0, 0
    for size in (1, 2, 3, 17, 100, 500, 2377):
        pos, last = decode_from(data, pos, size, out, done, delta=True, prev=last, path=path)
        done += size
    assert done == len(ids) and pos == len(data)
    assert out.tolist() == ids.tolist()
    assert last == ids[-1]


@pytest.mark.parametrize("path", PATHS)
def test_decode_from_offset(path):
    data = b"\xff" + raw([300, 5, 70000])
    out = np.zeros(5, np.uint32)
    pos, last = decode_from(data, 1, 3, out, 2, path=path)
    assert out.tolist() == [0, 0, 300, 5, 70000]
    assert (pos, last) == (len(data), 70000)


@pytest.mark.parametrize("path", PATHS)
def test_truncated(path):
    with pytest.raises(TruncatedStreamError):
        decode(raw(range(40)), 41, path=path)
    with pytest.raises(TruncatedStreamError):
        decode(raw(range(40)) + b"\x80\x80", 41, path=path)


@pytest.mark.parametrize("path", PATHS)
@pytest.mark.parametrize("where", [0, 5, 40])
def test_overlong_strict_and_permissive(path, where):
    bad = bytes([0xFF, 0xFF, 0xFF, 0xFF, 0x7F])
    head = list(range(where))
    data = raw(head) + bad + raw(range(60))
    n = where + 1 + 60
    with pytest.raises(MalformedStreamError):
        decode(data, n, path=path)
    got = decode(data, n, path=path, strict=False).tolist()
    assert got == head + [(0x0FFFFFFF + (0x7F << 28)) % 2**32] + list(range(60))


def test_permissive_paths_agree():
    if not native_available():
        pytest.skip("compiled path unavailable")
    rng = np.random.default_rng(12)
    data = rng.integers(0, 256, 4000, dtype=np.uint8).tobytes() + bytes(400)
    for n in (100, 1000, 2000):
        a = decode(data, n, path="portable", strict=False)
        b = decode(data, n, path="vector", strict=False)
        assert a.tolist() == b.tolist()


@pytest.mark.parametrize("path", PATHS)
def test_malformed_in_window_leaves_prefix(path):
    data = raw(range(100)) + bytes([0x80] * 6) + bytes(40)
    out = np.zeros(200, np.uint32)
    with pytest.raises(MalformedStreamError):
        decode_from(data, 0, 150, out, path=path)
    # anything written before the error is correct; the rest stays zero
    assert all(v in (0, i) for i, v in enumerate(out[:100].tolist()))
    assert not out[100:].any()


@pytest.mark.parametrize("path", PATHS)
def test_output_buffer_checks(path):
    data = raw(range(10))
    with pytest.raises(ValueError):
        decode_from(data, 0, 10, np.zeros(5, np.uint32), path=path)
    with pytest.raises(ValueError):
        decode_from(data, 0, -1, np.zeros(5, np.uint32), path=path)
    with pytest.raises(ValueError):
        decode_stream(data, 10, path=path)
    with pytest.raises(ValueError):
        decode_stream(data, None, np.zeros(10, np.uint32), path=path)
    with pytest.raises(ValueError):
        decode(data, path=path)


@pytest.mark.parametrize("path", PATHS)
def test_decode_stream_into_other_targets(path):
    values = list(range(0, 3000, 7))
    buf = encode_sequence(values)
    out = np.zeros(len(values), np.uint32)
    assert decode_stream(buf, out=out, path=path) == len(values)
    assert out.tolist() == values
    # non-contiguous numpy view still gets the right values
    wide = np.zeros(2 * len(values), np.uint32)
    decode_stream(buf, out=wide[::2], path=path)
    assert wide[::2].tolist() == values


def test_bytearray_and_numpy_inputs():
    values = [1, 200, 40000, 2**30]
    data = raw(values)
    for src in (data, bytearray(data), memoryview(data), np.frombuffer(data, np.uint8)):
        assert decode(src, 4, path="portable").tolist() == values
        if native_available():
            assert decode(src, 4, path="vector").tolist() == values


def test_resolve_path(monkeypatch):
    monkeypatch.delenv(PATH_ENV, raising=False)
    auto = resolve_path()
    assert auto == ("vector" if native_available() else "portable")
    assert resolve_path("portable") == "portable"
    monkeypatch.setenv(PATH_ENV, "portable")
    assert resolve_path() == "portable"
    assert resolve_path(None) == "portable"
    monkeypatch.setenv(PATH_ENV, "bogus")
    with pytest.raises(ValueError):
        resolve_path()
    with pytest.raises(ValueError):
        resolve_path("simd")


def test_encoded_buffer_defaults():
    buf = EncodedBuffer(raw([3, 4]), 2, delta=True)
    assert decode(buf, path="portable").tolist() == [3, 7]
    assert decode(buf, delta=False, path="portable").tolist() == [3, 4]
