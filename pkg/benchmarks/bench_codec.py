#!/usr/bin/env python3
"""Benchmark the codec kernels: compiled extension vs pure-Python fallback.

Usage: python benchmarks/bench_codec.py [--lines N] [--line-size 64]
"""

import argparse
import random
import struct
import time

from campsim.compression import kernels_py

try:
    from campsim.compression import _kernels as compiled
except ImportError:
    compiled = None


def make_workload(rng, line_size, count):
    lines = []
    n8 = line_size // 8
    for i in range(count):
        kind = i % 5
        if kind == 0:
            lines.append(bytes(line_size))
        elif kind == 1:
            lines.append(bytes([rng.getrandbits(8)]) * line_size)
        elif kind == 2:
            base = rng.getrandbits(64)
            lines.append(struct.pack("<%dQ" % n8, *(((base + rng.randrange(-100, 100)) % (1 << 64)) for _ in range(n8))))
        elif kind == 3:
            lines.append(struct.pack("<%dI" % (line_size // 4), *(rng.randrange(256) for _ in range(line_size // 4))))
        else:
            lines.append(bytes(rng.getrandbits(8) for _ in range(line_size)))
    return lines


def bench(name, mod, lines, line_size):
    compress = mod.compress_line_raw
    decompress = mod.decompress_raw
    t0 = time.perf_counter()
    blocks = [compress(line) for line in lines]
    t1 = time.perf_counter()
    for (code, base, mask, deltas), line in zip(blocks, lines):
        if code != 0b1111:
            decompress(code, base, mask, deltas, line_size)
    t2 = time.perf_counter()
    n = len(lines)
    print(f"{name:>9}: compress {n / (t1 - t0) / 1e6:7.3f} Mlines/s   "
          f"decompress {n / (t2 - t1) / 1e6:7.3f} Mlines/s")
    return t1 - t0


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--lines", type=int, default=200_000)
    parser.add_argument("--line-size", type=int, default=64, choices=(32, 64))
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    lines = make_workload(random.Random(args.seed), args.line_size, args.lines)
    print(f"{args.lines} lines of {args.line_size}B")

    t_py = bench("python", kernels_py, lines, args.line_size)
    if compiled is not None:
        t_c = bench("compiled", compiled, lines, args.line_size)
        print(f"  speedup: {t_py / t_c:.1f}x (compress)")
    else:
        print("compiled kernels not built; only the fallback was measured")


if __name__ == "__main__":
    main()
