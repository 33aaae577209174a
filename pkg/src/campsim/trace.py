"""Memory access traces: record type, text/binary file formats, and
deterministic synthetic workload generators."""

from __future__ import annotations

import random
import struct
from dataclasses import dataclass
from typing import Dict, Iterable, List

BINARY_MAGIC = b"CMS1"
_REC_HEAD = struct.Struct("<QBQ")


class TraceFormatError(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class TraceRecord:
    icount: int
    op: str          # "R" or "W"
    addr: int
    data: bytes

    def line_addr(self, line_size: int) -> int:
        return self.addr & ~(line_size - 1)


def parse_trace(path, format: str = "text", line_size: int = 64) -> List[TraceRecord]:
    if format == "text":
        return _parse_text(path)
    if format == "binary":
        return _parse_binary(path, line_size)
    raise TraceFormatError(f"unknown trace format {format!r}")


def _parse_text(path) -> List[TraceRecord]:
    records = []
    last_icount = 0
    with open(path, encoding="ascii") as fh:
        for lineno, row in enumerate(fh, 1):
            row = row.strip()
            if not row:
                continue
            parts = row.split()
            if len(parts) != 5 or parts[0] != "ACC":
                raise TraceFormatError(f"{path}:{lineno}: expected "
                                       f"'ACC <icount> <R|W> 0x<addr> <hex data>'")
            try:
                icount = int(parts[1])
                op = parts[2]
                if op not in ("R", "W"):
                    raise ValueError(f"bad op {op!r}")
                if not parts[3].startswith("0x"):
                    raise ValueError("address must be 0x-prefixed")
                addr = int(parts[3], 16)
                data = bytes.fromhex(parts[4])
            except ValueError as exc:
                raise TraceFormatError(f"{path}:{lineno}: {exc}") from exc
            if icount < last_icount:
                raise TraceFormatError(f"{path}:{lineno}: icount went backwards")
            last_icount = icount
            records.append(TraceRecord(icount, op, addr, data))
    return records


def _parse_binary(path, line_size: int) -> List[TraceRecord]:
    records = []
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != BINARY_MAGIC:
            raise TraceFormatError(f"{path}: bad magic {magic!r}")
        rec_size = _REC_HEAD.size + line_size
        index = 0
        last_icount = 0
        while True:
            chunk = fh.read(rec_size)
            if not chunk:
                break
            if len(chunk) != rec_size:
                raise TraceFormatError(f"{path}: truncated record {index}")
            icount, op_code, addr = _REC_HEAD.unpack_from(chunk)
            if op_code not in (0, 1):
                raise TraceFormatError(f"{path}: record {index}: bad op {op_code}")
            if icount < last_icount:
                raise TraceFormatError(f"{path}: record {index}: icount went backwards")
            last_icount = icount
            records.append(TraceRecord(icount, "RW"[op_code], addr,
                                       chunk[_REC_HEAD.size:]))
            index += 1
    return records


def write_trace(path, records: Iterable[TraceRecord], format: str = "text") -> int:
    count = 0
    if format == "text":
        with open(path, "w", encoding="ascii") as fh:
            for r in records:
                fh.write(f"ACC {r.icount} {r.op} 0x{r.addr:x} {r.data.hex()}\n")
                count += 1
    elif format == "binary":
        with open(path, "wb") as fh:
            fh.write(BINARY_MAGIC)
            for r in records:
                fh.write(_REC_HEAD.pack(r.icount, 0 if r.op == "R" else 1, r.addr))
                fh.write(r.data)
                count += 1
    else:
        raise TraceFormatError(f"unknown trace format {format!r}")
    return count


# ------------------------------------------------------- synthetic workloads

SYNTHETIC_KINDS = ("zero", "narrow", "pointer", "mixed_struct",
                   "size_reuse_correlated")

# size bins realizable with the line codec on 64-byte lines
_BIN_MAKERS = {}


def _register(bin_id):
    def deco(fn):
        _BIN_MAKERS[bin_id] = fn
        return fn
    return deco


@_register(1)
def _bin1(rng):
    if rng.random() < 0.5:
        return bytes(64)
    return bytes([rng.randrange(1, 256)]) * 64


@_register(2)
def _bin2(rng):
    return struct.pack("<8Q", *(rng.randrange(256) for _ in range(8)))


@_register(3)
def _bin3(rng):
    base = rng.randrange(1 << 10, 1 << 31)
    return struct.pack("<16I", *((base + rng.randrange(-100, 100)) & 0xFFFFFFFF
                                 for _ in range(16)))


@_register(5)
def _bin5(rng):
    base = rng.randrange(1 << 9, 1 << 15)
    return struct.pack("<32H", *((base + rng.randrange(-100, 100)) & 0xFFFF
                                 for _ in range(32)))


@_register(8)
def _bin8(rng):
    return bytes(rng.getrandbits(8) for _ in range(64))


def gen_synthetic(kind: str, params: dict, seed: int,
                  line_size: int = 64) -> List[TraceRecord]:
    """Deterministic synthetic traces; same (kind, params, seed) gives a
    byte-identical trace."""
    if kind not in SYNTHETIC_KINDS:
        raise ValueError(f"unknown synthetic kind {kind!r}")
    if line_size != 64:
        raise ValueError("synthetic generators emit 64-byte lines")
    rng = random.Random(seed)
    params = dict(params)
    accesses = int(params.pop("accesses", 10_000))
    if kind == "size_reuse_correlated":
        streams = params.pop("streams", None)
        if params or not streams:
            raise ValueError(f"bad params for {kind}: {params or 'streams required'}")
        return _gen_size_reuse(streams, accesses, rng, line_size)

    lines = int(params.pop("lines", 256))
    if params:
        raise ValueError(f"unknown params for {kind}: {sorted(params)}")
    payload_maker = {
        "zero": lambda: bytes(64),
        "narrow": lambda: _bin2(rng),
        "pointer": lambda: struct.pack(
            "<8Q", *(0x09A4_0000 + rng.randrange(0, 1 << 16) for _ in range(8))),
        "mixed_struct": lambda: struct.pack(
            "<8Q", *(0x09A4_0000 + rng.randrange(1 << 12) if i % 2
                     else rng.randrange(128) for i in range(8))),
    }[kind]
    payloads: Dict[int, bytes] = {}
    records = []
    for i in range(accesses):
        line = i % lines
        if line not in payloads:
            payloads[line] = payload_maker()
        records.append(TraceRecord(i + 1, "R", line * line_size, payloads[line]))
    return records


def _gen_size_reuse(streams, accesses, rng, line_size) -> List[TraceRecord]:
    """Interleaved streams where a chosen size bin has a chosen reuse
    distance (distinct lines between consecutive touches of one line)."""
    pools = []
    weights = []
    for s, spec in enumerate(streams):
        spec = dict(spec)
        bin_id = int(spec.pop("bin"))
        distance = int(spec.pop("reuse_distance"))
        weight = float(spec.pop("weight", 1.0))
        if spec:
            raise ValueError(f"unknown stream params: {sorted(spec)}")
        maker = _BIN_MAKERS.get(bin_id)
        if maker is None:
            raise ValueError(f"size bin {bin_id} is not realizable "
                             f"(choose from {sorted(_BIN_MAKERS)})")
        base = (s + 1) << 40
        working_set = distance + 1
        payloads = {}
        pools.append({"base": base, "size": working_set, "maker": maker,
                      "payloads": payloads, "cursor": 0})
        weights.append(weight)
    records = []
    for i in range(accesses):
        pool = rng.choices(pools, weights=weights)[0]
        line = pool["cursor"] % pool["size"]
        pool["cursor"] += 1
        if line not in pool["payloads"]:
            pool["payloads"][line] = pool["maker"](rng)
        addr = pool["base"] + line * line_size
        records.append(TraceRecord(i + 1, "R", addr, pool["payloads"][line]))
    return records
