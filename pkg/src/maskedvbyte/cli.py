"""Command-line entry point: ``maskedvbyte {generate,bench,report,tables}``.

Exit status is 0 on success, 1 when decoders disagree or input fails
validation, and 2 for usage errors.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from pathlib import Path

from . import bench
from .format import VByteError
from .storage import ListFileError, read_list, write_list
from .tables import dump_entry_table, dump_shuffle_table
from .vector import PATH_ENV, PATHS

_GROUP_DIR = re.compile(r"^K(\d+)$")


def _workload(args) -> bench.WorkloadSpec:
    return bench.WorkloadSpec(seed=args.seed, universe=args.universe, k_min=args.k_min,
                              k_max=args.k_max, lists_per_group=args.lists_per_group)


def _add_workload_flags(p: argparse.ArgumentParser) -> None:
    d = bench.WorkloadSpec()
    p.add_argument("--seed", type=int, default=d.seed, help="RNG seed (default %(default)s)")
    p.add_argument("--universe", type=int, default=d.universe,
                   help="document ids are drawn from [0, UNIVERSE) (default %(default)s)")
    p.add_argument("--k-min", type=int, default=d.k_min,
                   help="smallest length group: lists of 2**K to 2**(K+1)-1 ids")
    p.add_argument("--k-max", type=int, default=d.k_max, help="largest length group")
    p.add_argument("--lists-per-group", type=int, default=d.lists_per_group)


def _cmd_generate(args) -> int:
    spec = _workload(args)
    root = Path(args.out)
    total = 0
    for k in spec.groups:
        group_dir = root / f"K{k:02d}"
        group_dir.mkdir(parents=True, exist_ok=True)
        group = bench.build_group(k, bench.generate_group(spec, k))
        for i, buf in enumerate(group.buffers):
            total += write_list(group_dir / f"list{i:04d}.mvb", buf)
        print(f"K={k:2d}: {len(group.buffers)} lists, {group.total} integers, "
              f"{group.bits_per_int:.2f} bits/int")
    meta = {"seed": spec.seed, "universe": spec.universe, "k_min": spec.k_min,
            "k_max": spec.k_max, "lists_per_group": spec.lists_per_group}
    (root / "workload.json").write_text(json.dumps(meta, indent=2) + "\n")
    print(f"wrote {total} bytes under {root}")
    return 0


def _load_groups(root: Path, validate: bool) -> list[bench.Group]:
    groups = []
    for entry in sorted(root.iterdir()):
        m = _GROUP_DIR.match(entry.name)
        if not (entry.is_dir() and m):
            continue
        buffers = [read_list(f, validate=validate) for f in sorted(entry.glob("*.mvb"))]
        if not buffers:
            continue
        if not all(b.delta for b in buffers):
            raise ListFileError(f"{entry}: benchmark lists must hold gaps (delta flag)")
        groups.append(bench.Group(int(m.group(1)), buffers))
    if not groups:
        raise ListFileError(f"no K* group directories with .mvb files under {root}")
    return groups


def _cmd_bench(args) -> int:
    modes = bench.BUFFER_MODES if args.buffer_mode == "both" else (args.buffer_mode,)
    groups = None
    if args.input:
        groups = _load_groups(Path(args.input), args.validate)
        spec = None
    else:
        spec = _workload(args)
    log = None if args.quiet else (lambda line: print(line, file=sys.stderr))
    results = bench.run_benchmark(spec, args.schemes, modes, buffer_size=args.buffer_size,
                                  repetitions=args.repetitions, min_time=args.min_time,
                                  path=args.path, groups=groups, log=log)
    text = bench.report(results, "csv")
    if args.out:
        Path(args.out).write_text(text)
    if args.table or not args.out:
        sys.stdout.write(bench.report(results, "table") if args.table else text)
    return 0


def _cmd_report(args) -> int:
    rows = bench.parse_report(Path(args.csv).read_text())
    sys.stdout.write(bench.report(rows, args.format))
    return 0


def _cmd_tables(args) -> int:
    text = dump_shuffle_table() if args.controls else dump_entry_table()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="maskedvbyte",
        description="VByte posting-list workloads and masked vs scalar decode benchmarks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write synthetic delta-coded lists, one dir per K")
    _add_workload_flags(p)
    p.add_argument("--out", "-o", required=True, help="output directory")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("bench", help="time scalar and masked decoding per length group")
    _add_workload_flags(p)
    p.add_argument("--input", "-i", help="read lists written by 'generate' instead of "
                   "generating in memory")
    p.add_argument("--validate", action="store_true",
                   help="check that input lists are canonical before timing")
    p.add_argument("--schemes", nargs="+", choices=bench.SCHEMES, default=list(bench.SCHEMES))
    p.add_argument("--buffer-mode", choices=bench.BUFFER_MODES + ("both",), default="buffered",
                   help="'buffered' reuses a small output buffer, 'full' writes whole lists")
    p.add_argument("--buffer-size", type=int, default=bench.L1_INTEGERS,
                   help="integers per output buffer in buffered mode (default %(default)s)")
    p.add_argument("--repetitions", type=int, default=3)
    p.add_argument("--min-time", type=float, default=0.1,
                   help="seconds per timed measurement (default %(default)s)")
    p.add_argument("--path", choices=PATHS, default=None,
                   help=f"decoder implementation (default: ${PATH_ENV} or auto)")
    p.add_argument("--out", "-o", help="write CSV here")
    p.add_argument("--table", action="store_true", help="print an aligned table to stdout")
    p.add_argument("--quiet", "-q", action="store_true", help="no progress lines on stderr")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("report", help="render a bench CSV")
    p.add_argument("csv")
    p.add_argument("--format", choices=("table", "csv"), default="table")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("tables", help="dump the mask entry table or the shuffle controls")
    p.add_argument("--controls", action="store_true", help="dump shuffle controls instead")
    p.add_argument("--out", "-o")
    p.set_defaults(func=_cmd_tables)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except bench.ChecksumMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ListFileError, VByteError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
