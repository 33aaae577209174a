"""Simulation driver: config parsing, the single-pass run loop with
statistics, and report serialization."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence

from campsim import lcp as lcp_mod
from campsim.cache import (
    CacheGeometry,
    CompressedCache,
    LruPolicy,
    RripConfig,
    RripPolicy,
)
from campsim.camp import CampPolicy, MvePolicy, SipConfig, SipPolicy, size_bin
from campsim.compression import CompressedBlock, Encoding, compress_line
from campsim.toggles import (
    EcInputs,
    ec_decide,
    mc_transform,
    transfer_toggles,
)
from campsim.trace import TraceRecord
from campsim.vway import VwayCache, VwayGeometry

REPORT_VERSION = 1

LOCAL_POLICIES = ("lru", "rrip", "mve", "sip", "camp")
GLOBAL_POLICIES = ("vway", "gmve", "gsip", "gcamp")


class ConfigError(ValueError):
    pass


def _take(section: dict, defaults: dict, name: str) -> dict:
    unknown = set(section) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown keys in {name}: {sorted(unknown)}")
    merged = dict(defaults)
    merged.update(section)
    return merged


@dataclass(frozen=True)
class SimConfig:
    geometry: dict
    policy: str = "lru"
    codec: str = "bdi"
    sip: dict = field(default_factory=dict)
    vway: dict = field(default_factory=dict)
    lcp: dict = field(default_factory=dict)
    toggles: dict = field(default_factory=dict)
    seed: int = 0

    GEOMETRY_DEFAULTS = {"capacity_bytes": 2 * 1024 * 1024, "line_size": 64,
                         "assoc": 16, "tag_factor": 2, "segment_bytes": 8,
                         "rrpv_bits": 3}
    SIP_DEFAULTS = {"n_bins": 8, "m_sets_per_bin": 32, "train_fraction": 0.10,
                    "train_period_accesses": 10_000_000, "ctr_width_bits": 16}
    VWAY_DEFAULTS = {"num_regions": 8, "rptrs_per_data_entry": 2}
    LCP_DEFAULTS = {"enabled": False, "z_bits": False, "md_cache_entries": 512}
    TOGGLES_DEFAULTS = {"enabled": False, "flit_bytes": 32, "metric": "ed",
                        "bu": 0.0, "bu_threshold": 0.5, "channel": "onchip",
                        "bus_granule": 8}

    @classmethod
    def from_dict(cls, raw: dict) -> "SimConfig":
        known = {"geometry", "policy", "codec", "sip", "vway", "lcp",
                 "toggles", "seed"}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        policy = raw.get("policy", "lru")
        if policy not in LOCAL_POLICIES + GLOBAL_POLICIES:
            raise ConfigError(f"unknown policy {policy!r}")
        codec = raw.get("codec", "bdi")
        if codec not in ("bdi", "none"):
            raise ConfigError(f"unknown codec {codec!r}")
        return cls(
            geometry=_take(raw.get("geometry", {}), cls.GEOMETRY_DEFAULTS, "geometry"),
            policy=policy,
            codec=codec,
            sip=_take(raw.get("sip", {}), cls.SIP_DEFAULTS, "sip"),
            vway=_take(raw.get("vway", {}), cls.VWAY_DEFAULTS, "vway"),
            lcp=_take(raw.get("lcp", {}), cls.LCP_DEFAULTS, "lcp"),
            toggles=_take(raw.get("toggles", {}), cls.TOGGLES_DEFAULTS, "toggles"),
            seed=int(raw.get("seed", 0)),
        )


def _nocompr_codec(data: bytes) -> CompressedBlock:
    return CompressedBlock(Encoding.NO_COMPR, len(data), raw=bytes(data))


def build_model(cfg: SimConfig):
    codec = compress_line if cfg.codec == "bdi" else _nocompr_codec
    rrip = RripConfig(cfg.geometry["rrpv_bits"])
    sip_cfg = SipConfig(**cfg.sip)
    if cfg.policy in LOCAL_POLICIES:
        geo = CacheGeometry(capacity_bytes=cfg.geometry["capacity_bytes"],
                            line_size=cfg.geometry["line_size"],
                            assoc=cfg.geometry["assoc"],
                            tag_factor=cfg.geometry["tag_factor"],
                            segment_bytes=cfg.geometry["segment_bytes"])
        policy = {
            "lru": lambda: LruPolicy(rrip),
            "rrip": lambda: RripPolicy(rrip),
            "mve": lambda: MvePolicy(rrip),
            "sip": lambda: SipPolicy(rrip, sip_cfg),
            "camp": lambda: CampPolicy(rrip, sip_cfg),
        }[cfg.policy]()
        return CompressedCache(geo, policy, codec=codec)
    geo = VwayGeometry(capacity_bytes=cfg.geometry["capacity_bytes"],
                       line_size=cfg.geometry["line_size"],
                       assoc=cfg.geometry["assoc"],
                       tag_factor=cfg.geometry["tag_factor"],
                       segment_bytes=cfg.geometry["segment_bytes"],
                       num_regions=cfg.vway["num_regions"],
                       rptrs_per_data_entry=cfg.vway["rptrs_per_data_entry"])
    return VwayCache(geo, policy=cfg.policy, codec=codec, sip_cfg=sip_cfg)


# ----------------------------------------------------------- reuse tracking

class _Fenwick:
    def __init__(self, n: int):
        self.n = n
        self.tree = [0] * (n + 1)

    def add(self, i: int, v: int) -> None:
        i += 1
        while i <= self.n:
            self.tree[i] += v
            i += i & (-i)

    def prefix(self, i: int) -> int:
        total = 0
        i += 1
        while i > 0:
            total += self.tree[i]
            i -= i & (-i)
        return total


class ReuseTracker:
    """Request distance (accesses between touches) and stack distance
    (distinct lines between touches) per access."""

    def __init__(self, length: int):
        self.fenwick = _Fenwick(length)
        self.last_pos: Dict[int, int] = {}

    def observe(self, key: int, pos: int):
        prev = self.last_pos.get(key)
        result = None
        if prev is not None:
            request = pos - prev - 1
            stack = self.fenwick.prefix(pos - 1) - self.fenwick.prefix(prev)
            result = (request, stack)
            self.fenwick.add(prev, -1)
        self.fenwick.add(pos, 1)
        self.last_pos[key] = pos
        return result


# ------------------------------------------------------------------ report

@dataclass
class RunReport:
    version: int
    policy: str
    seed: int
    accesses: int = 0
    instructions: int = 0
    hits: int = 0
    misses: int = 0
    mpki: float = 0.0
    bpki: float = 0.0
    effective_compression_ratio: float = 0.0
    avg_used_segments: float = 0.0
    size_histogram: Dict[str, int] = field(default_factory=dict)
    reuse_by_size: Dict[str, dict] = field(default_factory=dict)
    toggles: Dict[str, float] = field(default_factory=dict)
    lcp: Dict[str, float] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2)

    CSV_COLUMNS = ["version", "policy", "seed", "accesses", "instructions",
                   "hits", "misses", "mpki", "bpki",
                   "effective_compression_ratio", "avg_used_segments"]

    def to_csv(self) -> str:
        buf = io.StringIO()
        hist_cols = sorted(self.size_histogram)
        writer = csv.writer(buf)
        writer.writerow(self.CSV_COLUMNS + [f"hist_{h}" for h in hist_cols])
        writer.writerow([getattr(self, c) for c in self.CSV_COLUMNS]
                        + [self.size_histogram[h] for h in hist_cols])
        return buf.getvalue()


def histogram_bin_name(size_bytes: int, line_size: int = 64) -> str:
    """8-byte bins plus the dedicated uncompressed bin."""
    if size_bytes == line_size:
        return str(line_size)
    b = size_bin(size_bytes, line_size)
    lo = (b - 1) * 8 + (1 if b > 1 else 0)
    hi = min(b * 8, line_size - 1)
    return f"{lo}-{hi}"


def empty_histogram(line_size: int = 64) -> Dict[str, int]:
    names = [histogram_bin_name(s, line_size)
             for s in list(range(0, line_size)) + [line_size]]
    return {name: 0 for name in dict.fromkeys(names)}


def effective_compression_ratio(report: RunReport) -> float:
    return report.effective_compression_ratio


# --------------------------------------------------------------------- run

class _LcpBackend:
    """Main-memory model behind the cache: compressed pages, metadata cache,
    read accounting, and writeback transitions."""

    def __init__(self, cfg: SimConfig, first_data: Dict[int, bytes], line_size: int):
        self.geometry = lcp_mod.LcpGeometry(z_bits=cfg.lcp["z_bits"],
                                            line_size=line_size)
        self.codec = lcp_mod.BdiLcpCodec(line_size)
        self.md_cache = lcp_mod.MetadataCache(cfg.lcp["md_cache_entries"])
        self.first_data = first_data
        self.line_size = line_size
        self.pages: Dict[int, lcp_mod.LcpPage] = {}
        self.memory_accesses = 0
        self.type1_overflows = 0
        self.type2_overflows = 0
        self.penalty_cycles = 0
        self.zero_page_reads = 0
        self.extra_lines_fetched = 0

    def _page(self, page_id: int) -> lcp_mod.LcpPage:
        page = self.pages.get(page_id)
        if page is None:
            n = self.geometry.lines_per_page
            base = page_id * self.geometry.virtual_page_size
            lines = [self.first_data.get(base + i * self.line_size,
                                         bytes(self.line_size))
                     for i in range(n)]
            page = lcp_mod.compress_page(lines, self.codec, self.geometry)
            self.pages[page_id] = page
        return page

    def read(self, addr: int) -> None:
        page_id = addr // self.geometry.virtual_page_size
        index = (addr % self.geometry.virtual_page_size) // self.line_size
        page = self._page(page_id)
        md_hit = self.md_cache.access(page_id)
        accesses = lcp_mod.read_accesses(page, index, md_hit)
        self.memory_accesses += accesses
        if page.kind is lcp_mod.PageKind.ZERO:
            self.zero_page_reads += 1
        elif page.kind is lcp_mod.PageKind.COMPRESSED:
            fetched = lcp_mod.batched_fetch(page, index)
            self.extra_lines_fetched += sum(1 for f in fetched
                                            if f.valid and f.index != index)

    def writeback(self, addr: int, data: bytes) -> None:
        page_id = addr // self.geometry.virtual_page_size
        index = (addr % self.geometry.virtual_page_size) // self.line_size
        page = self._page(page_id)
        outcome, new_page = lcp_mod.writeback_transition(page, index, data,
                                                         self.codec)
        self.pages[page_id] = new_page
        self.memory_accesses += 1
        if outcome is lcp_mod.WritebackOutcome.TYPE1_OVERFLOW:
            self.type1_overflows += 1
            self.penalty_cycles += lcp_mod.TYPE1_PENALTY_CYCLES
        elif outcome is lcp_mod.WritebackOutcome.TYPE2_OVERFLOW:
            self.type2_overflows += 1

    def stats(self) -> Dict[str, float]:
        size_dist: Dict[str, int] = {}
        for page in self.pages.values():
            key = (page.kind.value if page.kind is not lcp_mod.PageKind.COMPRESSED
                   else str(page.physical_size))
            size_dist[key] = size_dist.get(key, 0) + 1
        return {
            "pages": len(self.pages),
            "memory_accesses": self.memory_accesses,
            "md_cache_hit_rate": round(self.md_cache.hit_rate, 6),
            "type1_overflows": self.type1_overflows,
            "type2_overflows": self.type2_overflows,
            "penalty_cycles": self.penalty_cycles,
            "zero_page_reads": self.zero_page_reads,
            "extra_lines_fetched": self.extra_lines_fetched,
            "page_size_distribution": size_dist,
        }


def run_simulation(config: SimConfig, trace: Sequence[TraceRecord]) -> RunReport:
    """One pass of the trace through the configured model; deterministic."""
    line_size = config.geometry["line_size"]
    for r in trace:
        if len(r.data) != line_size:
            raise ConfigError(
                f"trace record carries {len(r.data)} bytes but the geometry "
                f"uses {line_size}-byte lines")

    cache = build_model(config)
    is_local = config.policy in LOCAL_POLICIES
    report = RunReport(REPORT_VERSION, config.policy, config.seed,
                       size_histogram=empty_histogram(line_size))

    lcp_backend = None
    if config.lcp["enabled"]:
        first_data: Dict[int, bytes] = {}
        for r in trace:
            first_data.setdefault(r.line_addr(line_size), r.data)
        lcp_backend = _LcpBackend(config, first_data, line_size)

    tgl = config.toggles
    toggles_on = tgl["enabled"]
    t_stats = {"transfers": 0, "t0_total": 0, "t1_total": 0,
               "sent_compressed": 0, "toggles_sent": 0}

    reuse = ReuseTracker(len(trace))
    reuse_acc: Dict[int, List[float]] = {}
    written: Dict[int, bytes] = {}
    num_sets = cache.geometry.num_sets
    ratio_sum = 0.0
    ratio_samples = 0
    seg_sum = 0.0
    bus_bytes = 0
    tag_factor = config.geometry["tag_factor"]

    def transfer(data: bytes, dirty_writeback: bool, size_bytes: int) -> None:
        nonlocal bus_bytes
        if not toggles_on:
            bus_bytes += line_size
            return
        payload = mc_transform(cache.compress(data))
        t0 = transfer_toggles(data, tgl["flit_bytes"] * 8, channel=tgl["channel"])
        t1 = transfer_toggles(payload, tgl["flit_bytes"] * 8, channel=tgl["channel"])
        cr = line_size / max(1, len(payload))
        decision = ec_decide(EcInputs(t0, t1, max(1.0, cr), tgl["bu"]),
                             tgl["metric"], tgl["bu_threshold"])
        t_stats["transfers"] += 1
        t_stats["t0_total"] += t0
        t_stats["t1_total"] += t1
        granule = tgl["bus_granule"]
        if decision.value == "compressed":
            t_stats["sent_compressed"] += 1
            t_stats["toggles_sent"] += t1
            bus_bytes += -(-len(payload) // granule) * granule
        else:
            t_stats["toggles_sent"] += t0
            bus_bytes += line_size

    for pos, record in enumerate(trace):
        addr = record.line_addr(line_size)
        if record.op == "W":
            written[addr] = record.data
        result = cache.access(record.op, addr, record.data)
        if is_local:
            hit, evicted, size_bytes = result.hit, result.evicted, result.size_bytes
        else:
            hit, evicted = result
            loc = cache.lookup_addr(addr)
            size_bytes = cache.tag_sets[loc[0]][loc[1]].size_bytes

        report.accesses += 1
        if hit:
            report.hits += 1
        else:
            report.misses += 1
            report.size_histogram[histogram_bin_name(size_bytes, line_size)] += 1
            if lcp_backend:
                lcp_backend.read(addr)
            transfer(record.data, False, size_bytes)

        distances = reuse.observe(addr, pos)
        if distances is not None:
            acc = reuse_acc.setdefault(size_bin(size_bytes, line_size),
                                       [0.0, 0.0, 0])
            acc[0] += distances[0]
            acc[1] += distances[1]
            acc[2] += 1

        for e in evicted:
            if e.dirty:
                evicted_addr = (e.tag * num_sets + e.set_idx) * line_size
                data = written.get(evicted_addr,
                                   record.data if evicted_addr == addr else None)
                if data is None:
                    data = bytes(line_size)
                if lcp_backend:
                    lcp_backend.writeback(evicted_addr, data)
                transfer(data, True, e.size_bytes)

        if cache.resident_lines:
            uncompressed = cache.resident_lines * line_size
            compressed = cache.resident_segments * config.geometry["segment_bytes"]
            ratio_sum += min(float(tag_factor), uncompressed / compressed)
            ratio_samples += 1
        seg_sum += cache.resident_segments / num_sets

    report.instructions = trace[-1].icount if trace else 0
    if report.instructions:
        report.mpki = report.misses * 1000.0 / report.instructions
        report.bpki = bus_bytes * 1000.0 / report.instructions
    report.effective_compression_ratio = (
        ratio_sum / ratio_samples if ratio_samples else 0.0)
    report.avg_used_segments = seg_sum / len(trace) if trace else 0.0
    report.reuse_by_size = {
        str(b): {"request_mean": acc[0] / acc[2], "stack_mean": acc[1] / acc[2],
                 "count": acc[2]}
        for b, acc in sorted(reuse_acc.items())
    }
    if toggles_on:
        report.toggles = dict(t_stats)
    if lcp_backend:
        report.lcp = lcp_backend.stats()
    return report


def toggle_analysis(trace: Sequence[TraceRecord], flit_bytes: int = 32,
                    metric: str = "ed", bu: float = 0.0,
                    bu_threshold: float = 0.5, channel: str = "onchip") -> List[dict]:
    """Per-line transfer decisions: {line#, T0, T1, CR, decision}."""
    rows = []
    for i, record in enumerate(trace):
        block = compress_line(record.data)
        payload = mc_transform(block)
        t0 = transfer_toggles(record.data, flit_bytes * 8, channel=channel)
        t1 = transfer_toggles(payload, flit_bytes * 8, channel=channel)
        cr = max(1.0, len(record.data) / max(1, len(payload)))
        decision = ec_decide(EcInputs(t0, t1, cr, bu), metric, bu_threshold)
        rows.append({"line": i, "T0": t0, "T1": t1, "CR": round(cr, 4),
                     "decision": decision.value})
    return rows


def write_toggle_csv(rows: List[dict], fh) -> None:
    writer = csv.DictWriter(fh, fieldnames=["line", "T0", "T1", "CR", "decision"])
    writer.writeheader()
    writer.writerows(rows)
