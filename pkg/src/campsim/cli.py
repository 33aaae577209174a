"""Command-line entry point: run simulations, generate traces, summarize
them, pack/unpack page images, and score transfer decisions.

Exit codes: 0 success, 1 usage error, 2 data/config error.
"""

from __future__ import annotations

import argparse
import json
import sys
from collections import Counter

from campsim import lcp as lcp_mod
from campsim.compression import compress_line
from campsim.sim import (
    ConfigError,
    SimConfig,
    run_simulation,
    toggle_analysis,
    write_toggle_csv,
)
from campsim.trace import (
    SYNTHETIC_KINDS,
    TraceFormatError,
    gen_synthetic,
    parse_trace,
    write_trace,
)

USAGE_ERROR = 1
DATA_ERROR = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)


def _build_parser() -> _Parser:
    parser = _Parser(prog="campsim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate a trace")
    run.add_argument("--config", help="JSON config file")
    run.add_argument("--trace", required=True)
    run.add_argument("--format", choices=("text", "binary"), default="text")
    run.add_argument("--policy", help="override the config's policy")
    run.add_argument("--json", dest="json_out", help="write the report as JSON")
    run.add_argument("--csv", dest="csv_out", help="write the report as CSV")

    gen = sub.add_parser("gen", help="generate a synthetic trace")
    gen.add_argument("--kind", choices=SYNTHETIC_KINDS, required=True)
    gen.add_argument("--params", default="{}", help="JSON generator parameters")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    gen.add_argument("--format", choices=("text", "binary"), default="text")

    stats = sub.add_parser("stats", help="summarize a trace's compressibility")
    stats.add_argument("--trace", required=True)
    stats.add_argument("--format", choices=("text", "binary"), default="text")

    lcp = sub.add_parser("lcp", help="compress or inspect a page image")
    lcp.add_argument("--input", required=True)
    lcp.add_argument("--output", help="write the packed page image here")
    lcp.add_argument("--decompress", action="store_true",
                     help="input is a packed image; write raw bytes")
    lcp.add_argument("--z-bits", action="store_true")

    tog = sub.add_parser("toggles", help="per-line transfer decisions")
    tog.add_argument("--trace", required=True)
    tog.add_argument("--format", choices=("text", "binary"), default="text")
    tog.add_argument("--flit-bytes", type=int, default=32)
    tog.add_argument("--metric", choices=("ed", "ed2"), default="ed")
    tog.add_argument("--bu", type=float, default=0.0)
    tog.add_argument("--channel", choices=("onchip", "dram"), default="onchip")
    tog.add_argument("--out", help="CSV output path (default stdout)")
    return parser


def _cmd_run(args) -> int:
    raw = {}
    if args.config:
        with open(args.config) as fh:
            raw = json.load(fh)
    if args.policy:
        raw["policy"] = args.policy
    config = SimConfig.from_dict(raw)
    trace = parse_trace(args.trace, args.format,
                        config.geometry["line_size"])
    report = run_simulation(config, trace)
    if args.json_out:
        with open(args.json_out, "w") as fh:
            fh.write(report.to_json())
    if args.csv_out:
        with open(args.csv_out, "w") as fh:
            fh.write(report.to_csv())
    print(f"policy={report.policy} accesses={report.accesses} "
          f"misses={report.misses} mpki={report.mpki:.3f} "
          f"ratio={report.effective_compression_ratio:.3f} "
          f"bpki={report.bpki:.1f}")
    return 0


def _cmd_gen(args) -> int:
    try:
        params = json.loads(args.params)
    except json.JSONDecodeError as exc:
        print(f"campsim gen: bad --params JSON: {exc}", file=sys.stderr)
        return USAGE_ERROR
    records = gen_synthetic(args.kind, params, args.seed)
    count = write_trace(args.out, records, args.format)
    print(f"wrote {count} records to {args.out}")
    return 0


def _cmd_stats(args) -> int:
    trace = parse_trace(args.trace, args.format)
    sizes = Counter()
    encodings = Counter()
    for record in trace:
        block = compress_line(record.data)
        sizes[block.size_bytes] += 1
        encodings[block.encoding.value] += 1
    lines = len({r.addr for r in trace})
    print(f"records={len(trace)} distinct_lines={lines}")
    for enc, count in encodings.most_common():
        print(f"  {enc:>12}: {count}")
    if trace:
        mean = sum(s * c for s, c in sizes.items()) / len(trace)
        print(f"mean compressed size: {mean:.1f} bytes")
    return 0


def _cmd_lcp(args) -> int:
    with open(args.input, "rb") as fh:
        blob = fh.read()
    geometry = lcp_mod.LcpGeometry(z_bits=args.z_bits)
    codec = lcp_mod.BdiLcpCodec()
    if args.decompress:
        page = lcp_mod.read_page_image(blob, geometry, codec)
        raw = b"".join(page.lines())
        if args.output:
            with open(args.output, "wb") as fh:
                fh.write(raw)
        print(f"kind={page.kind.value} c_type={page.c_type} "
              f"c_star={page.c_star} physical={page.physical_size}")
        return 0
    if len(blob) != geometry.virtual_page_size:
        print(f"campsim lcp: input must be exactly "
              f"{geometry.virtual_page_size} bytes", file=sys.stderr)
        return DATA_ERROR
    lines = [blob[i: i + geometry.line_size]
             for i in range(0, len(blob), geometry.line_size)]
    page = lcp_mod.compress_page(lines, codec, geometry)
    image = lcp_mod.write_page_image(page)
    if args.output:
        with open(args.output, "wb") as fh:
            fh.write(image)
    exceptions = page.metadata.exceptions_in_use() if page.metadata else 0
    print(f"kind={page.kind.value} c_type={page.c_type} c_star={page.c_star} "
          f"physical={page.physical_size} exceptions={exceptions} "
          f"image_bytes={len(image)}")
    return 0


def _cmd_toggles(args) -> int:
    trace = parse_trace(args.trace, args.format)
    rows = toggle_analysis(trace, args.flit_bytes, args.metric, args.bu,
                           channel=args.channel)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            write_toggle_csv(rows, fh)
    else:
        write_toggle_csv(rows, sys.stdout)
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else USAGE_ERROR
    handler = {
        "run": _cmd_run,
        "gen": _cmd_gen,
        "stats": _cmd_stats,
        "lcp": _cmd_lcp,
        "toggles": _cmd_toggles,
    }[args.command]
    try:
        return handler(args)
    except (TraceFormatError, ConfigError, lcp_mod.LcpError, ValueError) as exc:
        print(f"campsim: {exc}", file=sys.stderr)
        return DATA_ERROR
    except FileNotFoundError as exc:
        print(f"campsim: {exc}", file=sys.stderr)
        return DATA_ERROR


if __name__ == "__main__":
    sys.exit(main())
