"""Decode-throughput benchmark on synthetic posting lists.

Lists are grouped by length: group K holds lists of 2**K to 2**(K+1) - 1
sorted distinct document ids drawn uniformly from ``[0, universe)``. Longer
lists have smaller gaps, so bits per integer falls as K grows. Every list is
delta-coded; decoding includes the prefix sum.

Throughput is reported in mis (millions of 32-bit integers per second), the
median of several wall-clock repetitions, each at least ``min_time`` long.
"""

from __future__ import annotations

import csv
import io
import math
import statistics
import time
import zlib
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .format import EncodedBuffer, encode_sequence, scalar_decode_from
from .vector import decode_from, resolve_path

__all__ = [
    "SCHEMES",
    "BUFFER_MODES",
    "WorkloadSpec",
    "Group",
    "BenchResult",
    "ChecksumMismatch",
    "generate_group",
    "build_group",
    "run_benchmark",
    "report",
    "parse_report",
]

SCHEMES = ("scalar", "masked")
BUFFER_MODES = ("buffered", "full")
L1_INTEGERS = 4096
CSV_COLUMNS = ("K", "bits_per_int", "scheme", "mis", "ratio_vs_scalar", "buffer_mode")


@dataclass(frozen=True)
class WorkloadSpec:
    seed: int = 0
    universe: int = 1 << 25
    k_min: int = 4
    k_max: int = 20
    lists_per_group: int = 4

    def __post_init__(self):
        if self.k_min < 0 or self.k_max < self.k_min:
            raise ValueError(f"bad K range {self.k_min}..{self.k_max}")
        if self.lists_per_group < 1:
            raise ValueError("lists_per_group must be positive")
        if self.universe > 1 << 32:
            raise ValueError("universe must fit in 32 bits")
        self.check(self.k_max)

    def check(self, k: int) -> None:
        if 1 << (k + 1) > self.universe:
            raise ValueError(
                f"universe {self.universe} too small for lists of up to 2**{k + 1} distinct ids")

    @property
    def groups(self) -> range:
        return range(self.k_min, self.k_max + 1)


def generate_group(spec: WorkloadSpec, k: int) -> list[np.ndarray]:
    """Sorted distinct uniform ids; lengths uniform in [2**k, 2**(k+1))."""
    spec.check(k)
    rng = np.random.default_rng([spec.seed, k])
    lists = []
    for _ in range(spec.lists_per_group):
        length = int(rng.integers(1 << k, 1 << (k + 1)))
        ids = rng.choice(spec.universe, size=length, replace=False)
        ids.sort()
        lists.append(ids.astype(np.uint32))
    return lists


@dataclass
class Group:
    """One length group, delta-coded and concatenated for decoding."""

    k: int
    buffers: list[EncodedBuffer]

    def __post_init__(self):
        self.data = np.frombuffer(b"".join(b.data for b in self.buffers), dtype=np.uint8)
        self.counts = np.array([b.count for b in self.buffers], dtype=np.int64)
        sizes = np.array([len(b.data) for b in self.buffers], dtype=np.int64)
        self.starts = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def bits_per_int(self) -> float:
        return 8.0 * self.data.size / self.total


def build_group(k: int, lists: Sequence[np.ndarray]) -> Group:
    return Group(k, [encode_sequence(np.asarray(ids), delta=True) for ids in lists])


@dataclass(frozen=True)
class BenchResult:
    k: int
    bits_per_int: float
    scheme: str
    mis: float
    repetitions: int
    buffer_mode: str
    checksum: int


class ChecksumMismatch(RuntimeError):
    pass


def _portable_scalar(data: bytes, pos: int, count: int, out, out_pos: int, prev: int):
    values, pos = scalar_decode_from(data, pos, count)
    acc = prev
    for i, g in enumerate(values):
        acc = (acc + g) & 0xFFFFFFFF
        values[i] = acc
    out[out_pos:out_pos + count] = values
    return pos, acc


def _decoder(scheme: str, path: str, group: Group, buffer_mode: str, buffer_size: int,
             handoff) -> Callable[[], None]:
    """A closure that decodes the whole group once."""
    masked = scheme == "masked"
    chunk = buffer_size if buffer_mode == "buffered" else 0
    out = np.zeros(chunk or group.total, dtype=np.uint32)
    if path == "vector":
        from . import _native

        def run():
            _native.decode_lists(group.data, group.starts, group.counts, out, chunk=chunk,
                                 masked=masked, handoff=handoff or 16)
        return run

    data = group.data.tobytes()
    starts = group.starts.tolist()
    counts = group.counts.tolist()

    def run():
        offset = 0
        for pos, remaining in zip(starts, counts):
            prev = 0
            while remaining:
                k = min(chunk, remaining) if chunk else remaining
                out_pos = 0 if chunk else offset
                if masked:
                    pos, prev = decode_from(data, pos, k, out, out_pos, delta=True, prev=prev,
                                            path="portable", handoff=handoff)
                else:
                    pos, prev = _portable_scalar(data, pos, k, out, out_pos, prev)
                remaining -= k
                offset += k
    return run


def _checksum(scheme: str, path: str, group: Group, buffer_mode: str, buffer_size: int,
              handoff) -> int:
    """CRC32 of every integer the decoder writes, chunk by chunk."""
    crc = 0
    chunk = buffer_size if buffer_mode == "buffered" else 0
    data = group.data.tobytes()
    for pos, remaining in zip(group.starts.tolist(), group.counts.tolist()):
        prev = 0
        while remaining:
            k = min(chunk, remaining) if chunk else remaining
            out = np.zeros(k, dtype=np.uint32)
            if scheme == "masked":
                pos, prev = decode_from(data, pos, k, out, 0, delta=True, prev=prev, path=path,
                                        handoff=handoff)
            elif path == "vector":
                from . import _native
                pos, prev = _native.scalar_into(group.data, pos, k, out, 0, delta=True,
                                                prev=prev)
            else:
                pos, prev = _portable_scalar(data, pos, k, out, 0, prev)
            crc = zlib.crc32(out.astype("<u4").tobytes(), crc)
            remaining -= k
    return crc


def _measure(run: Callable[[], None], repetitions: int, min_time: float) -> tuple[float, int]:
    """Median seconds per call of ``run``."""
    run()  # warmup
    loops = 1
    while True:
        t0 = time.perf_counter()
        for _ in range(loops):
            run()
        elapsed = time.perf_counter() - t0
        if elapsed >= min_time:
            break
        if elapsed <= 0:
            loops *= 10
        else:
            loops = max(2 * loops, math.ceil(1.2 * loops * min_time / elapsed))
    samples = [elapsed / loops]
    for _ in range(repetitions - 1):
        t0 = time.perf_counter()
        for _ in range(loops):
            run()
        samples.append((time.perf_counter() - t0) / loops)
    return statistics.median(samples), loops


def run_benchmark(spec: WorkloadSpec | None = None, schemes: Sequence[str] = SCHEMES,
                  buffer_modes: Sequence[str] = ("buffered",), *, buffer_size: int = L1_INTEGERS,
                  repetitions: int = 3, min_time: float = 0.1, path: str | None = None,
                  handoff=None, groups: Sequence[Group] | None = None,
                  log: Callable[[str], None] | None = None) -> list[BenchResult]:
    """Time every scheme on every group in every buffer mode.

    Groups come from ``groups`` when given, otherwise they are generated
    from ``spec``.

    Raises :class:`ChecksumMismatch` if the decoders disagree on any group.
    """
    for s in schemes:
        if s not in SCHEMES:
            raise ValueError(f"unknown scheme {s!r}")
    for m in buffer_modes:
        if m not in BUFFER_MODES:
            raise ValueError(f"unknown buffer mode {m!r}")
    if repetitions < 3:
        raise ValueError("need at least 3 repetitions")
    path = resolve_path(path)
    if groups is None:
        spec = spec or WorkloadSpec()
        groups = [build_group(k, generate_group(spec, k)) for k in spec.groups]

    results = []
    for group in groups:
        sums = {}
        for mode in buffer_modes:
            for scheme in schemes:
                sums[scheme, mode] = _checksum(scheme, path, group, mode, buffer_size, handoff)
        if len(set(sums.values())) != 1:
            raise ChecksumMismatch(f"decoders disagree on group K={group.k}: {sums}")
        for mode in buffer_modes:
            for scheme in schemes:
                run = _decoder(scheme, path, group, mode, buffer_size, handoff)
                seconds, _ = _measure(run, repetitions, min_time)
                r = BenchResult(group.k, group.bits_per_int, scheme,
                                group.total / seconds / 1e6, repetitions, mode,
                                sums[scheme, mode])
                results.append(r)
                if log:
                    log(f"K={r.k:2d} {r.bits_per_int:6.2f} bits/int {scheme:>6} {mode:>8} "
                        f"{r.mis:10.2f} mis")
    return results


def _rows(results: Sequence[BenchResult]) -> list[dict]:
    scalar = {(r.k, r.buffer_mode): r.mis for r in results if r.scheme == "scalar"}
    rows = []
    for r in results:
        base = scalar.get((r.k, r.buffer_mode))
        rows.append({
            "K": r.k,
            "bits_per_int": round(r.bits_per_int, 4),
            "scheme": r.scheme,
            "mis": round(r.mis, 3),
            "ratio_vs_scalar": round(r.mis / base, 4) if base else "",
            "buffer_mode": r.buffer_mode,
        })
    return rows


def report(results, fmt: str = "csv") -> str:
    """Render results (BenchResults or parsed rows) as CSV or an aligned table."""
    if not results:
        raise ValueError("no results to report")
    rows = _rows(results) if isinstance(results[0], BenchResult) else list(results)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
        return buf.getvalue()
    if fmt != "table":
        raise ValueError(f"unknown format {fmt!r}")
    cells = [list(CSV_COLUMNS)] + [[str(row[c]) for c in CSV_COLUMNS] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(CSV_COLUMNS))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def parse_report(text: str) -> list[dict]:
    """Read CSV written by :func:`report` back into typed rows."""
    rows = []
    for row in csv.DictReader(io.StringIO(text)):
        rows.append({
            "K": int(row["K"]),
            "bits_per_int": float(row["bits_per_int"]),
            "scheme": row["scheme"],
            "mis": float(row["mis"]),
            "ratio_vs_scalar": float(row["ratio_vs_scalar"]) if row["ratio_vs_scalar"] else "",
            "buffer_mode": row["buffer_mode"],
        })
    return rows
