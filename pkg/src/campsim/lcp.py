"""Linearly compressed page layout: one target size per page, exceptions
stored separately, address arithmetic, metadata, overflow handling, a
metadata cache, and batched-fetch accounting."""

from __future__ import annotations

import enum
import struct
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

from campsim.compression import compress_unit
from campsim.compression.encodings import UNIT_PARAMS

TYPE1_PENALTY_CYCLES = 20_000


class LcpError(ValueError):
    pass


@dataclass(frozen=True)
class LcpGeometry:
    virtual_page_size: int = 4096
    line_size: int = 64
    min_page_size: int = 512
    page_sizes: Tuple[int, ...] = (512, 1024, 2048, 4096)
    z_bits: bool = False

    def __post_init__(self):
        if self.lines_per_page & (self.lines_per_page - 1):
            raise LcpError("lines per page must be a power of two")
        if tuple(sorted(self.page_sizes)) != self.page_sizes:
            raise LcpError("page sizes must be sorted ascending")
        if self.page_sizes[0] != self.min_page_size:
            raise LcpError("the minimum page size must be the smallest pool size")

    @property
    def lines_per_page(self) -> int:
        return self.virtual_page_size // self.line_size

    @property
    def index_bits(self) -> int:
        return (self.lines_per_page - 1).bit_length()

    @property
    def metadata_bits(self) -> int:
        n = self.lines_per_page
        bits = n * (1 + self.index_bits) + n
        if self.z_bits:
            bits += n
        return bits

    @property
    def metadata_bytes(self) -> int:
        return -(-self.metadata_bits // 8)


@dataclass(frozen=True)
class PteExtension:
    p_base: int
    c_bit: bool = False
    c_type: int = 0
    c_size: int = 0   # index into the geometry's page-size pool
    c_base: int = 0

    def __post_init__(self):
        if not 0 <= self.c_type < 8:
            raise LcpError("c_type is a 3-bit field")
        if not 0 <= self.c_size < 4:
            raise LcpError("c_size is a 2-bit field")
        if not 0 <= self.c_base < 8:
            raise LcpError("c_base is a 3-bit field")


def line_slot_address(pte: PteExtension, i: int, c_star: int,
                      geometry: LcpGeometry) -> int:
    """Byte address of compressed slot i: linear in the line index."""
    if not 0 <= i < geometry.lines_per_page:
        raise LcpError(f"line index {i} out of range")
    return pte.p_base + geometry.min_page_size * pte.c_base + i * c_star


def exception_address(pte: PteExtension, e_index: int, c_star: int,
                      geometry: LcpGeometry) -> int:
    """Byte address of exception slot e_index, past the slots and metadata."""
    n = geometry.lines_per_page
    return (pte.p_base + geometry.min_page_size * pte.c_base
            + n * c_star + geometry.metadata_bytes + e_index * geometry.line_size)


def n_avail(physical_size: int, c_star: int, geometry: LcpGeometry) -> int:
    """Exception slots that fit: floor((P - (n*C* + M)) / C), never negative."""
    interior = physical_size - (geometry.lines_per_page * c_star
                                + geometry.metadata_bytes)
    if interior < 0:
        return 0
    return interior // geometry.line_size


# --------------------------------------------------------------- the codec

class LcpCodec:
    """Per-page compression scheme family.

    candidates maps each c_type value (1..7) to a fixed target slot size;
    try_compress returns a payload of exactly that many bytes or None.
    """

    name = "abstract"
    line_size = 64
    candidates: Tuple[Tuple[int, int], ...] = ()   # (c_type, c_star)

    def try_compress(self, line: bytes, c_type: int) -> Optional[bytes]:
        raise NotImplementedError

    def decompress(self, payload: bytes, c_type: int) -> bytes:
        raise NotImplementedError


class BdiLcpCodec(LcpCodec):
    """Delta-encoded slots: each page picks one repeated-value or single-base
    unit; slots hold base-plus-deltas packed to exactly the unit size.

    Slot payloads carry no per-element base-selector, so the single-base
    form of each unit is used; lines needing the implicit zero base fall
    into the exception region instead.
    """

    name = "bdi"

    # c_type 0 is the zero page; 1 is an 8-byte repeated value; 2..7 are the
    # (base width, delta width) units in table order.
    UNITS = {
        2: (8, 1), 3: (8, 2), 4: (8, 4), 5: (4, 1), 6: (4, 2), 7: (2, 1),
    }

    def __init__(self, line_size: int = 64):
        self.line_size = line_size
        cands = [(1, 8)]
        for c_type, (k, d) in self.UNITS.items():
            cands.append((c_type, k + (line_size // k) * d))
        self.candidates = tuple(cands)

    def try_compress(self, line, c_type):
        if c_type == 1:
            rep = line[:8]
            return bytes(rep) if line == rep * (len(line) // 8) else None
        k, d = self.UNITS[c_type]
        block = compress_unit(line, k, d, implicit_zero_first_pass=False)
        if block is None:
            return None
        out = bytearray(block.base.to_bytes(k, "little"))
        half = 1 << (8 * d - 1)
        for delta in block.deltas:
            out += (delta & (2 * half - 1)).to_bytes(d, "little")
        return bytes(out)

    def decompress(self, payload, c_type):
        if c_type == 1:
            return payload * (self.line_size // 8)
        k, d = self.UNITS[c_type]
        n = self.line_size // k
        base = int.from_bytes(payload[:k], "little")
        half = 1 << (8 * d - 1)
        kmod = 1 << (8 * k)
        values = []
        for i in range(n):
            raw = int.from_bytes(payload[k + i * d : k + (i + 1) * d], "little")
            delta = raw - 2 * half if raw >= half else raw
            values.append((base + delta) % kmod)
        fmt = "<%d%s" % (n, {2: "H", 4: "I", 8: "Q"}[k])
        return struct.pack(fmt, *values)


# -------------------------------------------------------------------- page

class PageKind(enum.Enum):
    ZERO = "zero"
    COMPRESSED = "compressed"
    UNCOMPRESSED = "uncompressed"


@dataclass
class LcpMetadata:
    e_bit: List[bool]
    e_index: List[int]
    v_bit: List[bool]
    z_bit: List[bool]

    @classmethod
    def empty(cls, geometry: LcpGeometry) -> "LcpMetadata":
        n = geometry.lines_per_page
        return cls([False] * n, [0] * n, [False] * n, [False] * n)

    def exceptions_in_use(self) -> int:
        return sum(self.v_bit)


@dataclass
class LcpPage:
    geometry: LcpGeometry
    kind: PageKind
    c_type: int = 0
    c_star: int = 0
    physical_size: int = 0
    slots: List[Optional[bytes]] = field(default_factory=list)
    metadata: Optional[LcpMetadata] = None
    exceptions: List[Optional[bytes]] = field(default_factory=list)
    raw_lines: List[bytes] = field(default_factory=list)   # uncompressed only
    do_not_compress: bool = False
    codec: Optional[LcpCodec] = None

    @property
    def n_avail(self) -> int:
        return len(self.exceptions)

    def read_line(self, i: int) -> bytes:
        geo = self.geometry
        if self.kind is PageKind.ZERO:
            return bytes(geo.line_size)
        if self.kind is PageKind.UNCOMPRESSED:
            return self.raw_lines[i]
        if self.metadata.e_bit[i]:
            return self.exceptions[self.metadata.e_index[i]]
        return self.codec.decompress(self.slots[i], self.c_type)

    def lines(self) -> List[bytes]:
        return [self.read_line(i) for i in range(self.geometry.lines_per_page)]


def _layout_size(geometry: LcpGeometry, c_star: int, exceptions: int) -> int:
    return (geometry.lines_per_page * c_star + geometry.metadata_bytes
            + exceptions * geometry.line_size)


def compress_page(lines: Sequence[bytes], codec: LcpCodec,
                  geometry: LcpGeometry = LcpGeometry(),
                  do_not_compress: bool = False) -> LcpPage:
    """Pick the (c_type, page size) pair of minimal physical size; smaller
    target size wins ties. All-zero pages occupy no storage at all."""
    n = geometry.lines_per_page
    if len(lines) != n:
        raise LcpError(f"expected {n} lines")
    zero_line = bytes(geometry.line_size)
    if not do_not_compress and all(line == zero_line for line in lines):
        return LcpPage(geometry, PageKind.ZERO)

    best = None   # (physical_size, c_star, c_type, payloads)
    if not do_not_compress:
        for c_type, c_star in codec.candidates:
            payloads = [codec.try_compress(line, c_type) for line in lines]
            exc = sum(p is None for p in payloads)
            required = _layout_size(geometry, c_star, exc)
            size = next((p for p in geometry.page_sizes if p >= required), None)
            if size is None or size >= geometry.virtual_page_size:
                continue
            if best is None or (size, c_star) < (best[0], best[1]):
                best = (size, c_star, c_type, payloads)

    if best is None:
        return LcpPage(geometry, PageKind.UNCOMPRESSED,
                       physical_size=geometry.virtual_page_size,
                       raw_lines=[bytes(l) for l in lines],
                       do_not_compress=do_not_compress)

    size, c_star, c_type, payloads = best
    meta = LcpMetadata.empty(geometry)
    exceptions: List[Optional[bytes]] = [None] * n_avail(size, c_star, geometry)
    slots: List[Optional[bytes]] = [None] * n
    next_slot = 0
    for i, payload in enumerate(payloads):
        if payload is None:
            meta.e_bit[i] = True
            meta.e_index[i] = next_slot
            meta.v_bit[next_slot] = True
            exceptions[next_slot] = bytes(lines[i])
            next_slot += 1
        else:
            slots[i] = payload
            if geometry.z_bits and lines[i] == zero_line:
                meta.z_bit[i] = True
    return LcpPage(geometry, PageKind.COMPRESSED, c_type=c_type, c_star=c_star,
                   physical_size=size, slots=slots, metadata=meta,
                   exceptions=exceptions, codec=codec)


# --------------------------------------------------------------- writeback

class WritebackOutcome(enum.Enum):
    IN_PLACE = "in_place"
    EXCEPTION_ALLOC = "exception_alloc"
    EXCEPTION_FREE = "exception_free"
    TYPE1_OVERFLOW = "type1_overflow"
    TYPE2_OVERFLOW = "type2_overflow"


def writeback_transition(page: LcpPage, i: int, new_line: bytes,
                         codec: LcpCodec) -> Tuple[WritebackOutcome, LcpPage]:
    """Apply one dirty-line writeback; returns the outcome and the page to
    use afterwards (a new object on overflow migrations)."""
    geo = page.geometry
    if page.kind is not PageKind.COMPRESSED:
        if page.kind is PageKind.ZERO and new_line != bytes(geo.line_size):
            new_page = compress_page(_lines_with(page, i, new_line), codec, geo,
                                     page.do_not_compress)
            return WritebackOutcome.TYPE1_OVERFLOW, new_page
        if page.kind is PageKind.UNCOMPRESSED:
            page.raw_lines[i] = bytes(new_line)
        return WritebackOutcome.IN_PLACE, page

    meta = page.metadata
    payload = codec.try_compress(new_line, page.c_type)
    was_exception = meta.e_bit[i]

    if payload is not None:
        if geo.z_bits:
            meta.z_bit[i] = new_line == bytes(geo.line_size)
        if was_exception:
            slot = meta.e_index[i]
            meta.v_bit[slot] = False
            meta.e_bit[i] = False
            page.exceptions[slot] = None
            page.slots[i] = payload
            return WritebackOutcome.EXCEPTION_FREE, page
        page.slots[i] = payload
        return WritebackOutcome.IN_PLACE, page

    if was_exception:
        page.exceptions[meta.e_index[i]] = bytes(new_line)
        return WritebackOutcome.IN_PLACE, page

    free = next((s for s, used in enumerate(meta.v_bit) if not used
                 and s < page.n_avail), None)
    if free is not None:
        meta.e_bit[i] = True
        meta.e_index[i] = free
        meta.v_bit[free] = True
        meta.z_bit[i] = False
        page.exceptions[free] = bytes(new_line)
        page.slots[i] = None
        return WritebackOutcome.EXCEPTION_ALLOC, page

    # page overflow: no free exception slot. If the grown layout still fits
    # one of the pool sizes, migrate as-is (no recompression); otherwise the
    # page is recompressed with the other schemes or stored uncompressed.
    required = _layout_size(geo, page.c_star, page.metadata.exceptions_in_use() + 1)
    bigger = next((p for p in geo.page_sizes if p >= required), None)
    if bigger is not None:
        return WritebackOutcome.TYPE1_OVERFLOW, _migrate(page, bigger, i, new_line)
    new_page = compress_page(_lines_with(page, i, new_line), codec, geo)
    return WritebackOutcome.TYPE2_OVERFLOW, new_page


def _migrate(page: LcpPage, new_size: int, i: int, new_line: bytes) -> LcpPage:
    geo = page.geometry
    meta = page.metadata
    exceptions = list(page.exceptions)
    exceptions.extend([None] * (n_avail(new_size, page.c_star, geo) - len(exceptions)))
    slot = next(s for s, ex in enumerate(exceptions) if ex is None)
    meta.e_bit[i] = True
    meta.e_index[i] = slot
    meta.v_bit[slot] = True
    meta.z_bit[i] = False
    exceptions[slot] = bytes(new_line)
    slots = list(page.slots)
    slots[i] = None
    return LcpPage(geo, PageKind.COMPRESSED, c_type=page.c_type,
                   c_star=page.c_star, physical_size=new_size, slots=slots,
                   metadata=meta, exceptions=exceptions, codec=page.codec)


def _lines_with(page: LcpPage, i: int, new_line: bytes) -> List[bytes]:
    lines = page.lines()
    lines[i] = bytes(new_line)
    return lines


# ---------------------------------------------------------------- md cache

class MetadataCache:
    """LRU cache of per-page metadata, keyed by page id."""

    def __init__(self, entries: int = 512):
        self.entries = entries
        self._lru: OrderedDict = OrderedDict()
        self.hits = 0
        self.misses = 0

    def access(self, page_id: int) -> bool:
        if page_id in self._lru:
            self._lru.move_to_end(page_id)
            self.hits += 1
            return True
        self.misses += 1
        self._lru[page_id] = True
        if len(self._lru) > self.entries:
            self._lru.popitem(last=False)
        return False

    @property
    def hit_rate(self) -> float:
        total = self.hits + self.misses
        return self.hits / total if total else 0.0


def read_accesses(page: LcpPage, i: int, md_hit: bool) -> int:
    """Main-memory accesses to read line i.

    Zero pages, and zero lines whose z-bit is known from cached metadata,
    cost nothing. A metadata miss reads the slot speculatively; only a
    misspeculation (the line was an exception) costs a second access.
    """
    if page.kind is PageKind.ZERO:
        return 0
    if page.kind is PageKind.UNCOMPRESSED:
        return 1
    meta = page.metadata
    if page.geometry.z_bits and meta.z_bit[i] and md_hit:
        return 0
    if meta.e_bit[i] and not md_hit:
        return 2
    return 1


# ------------------------------------------------------------ batched fetch

@dataclass(frozen=True)
class FetchedLine:
    index: int
    valid: bool
    installed: bool


def batched_fetch(page: LcpPage, i: int, fetch_width: Optional[int] = None,
                  install_hints: Optional[set] = None) -> List[FetchedLine]:
    """Lines returned by one uncompressed-width fetch around line i.

    Slots holding exceptions come back invalid; install_hints, when given,
    restricts which extra valid lines are worth installing.
    """
    geo = page.geometry
    if page.kind is not PageKind.COMPRESSED:
        return [FetchedLine(i, True, True)]
    width = fetch_width or geo.line_size
    per_fetch = max(1, width // page.c_star)
    start = (i // per_fetch) * per_fetch
    out = []
    for j in range(start, min(start + per_fetch, geo.lines_per_page)):
        valid = not page.metadata.e_bit[j]
        installed = valid and (install_hints is None or j == i or j in install_hints)
        out.append(FetchedLine(j, valid, installed))
    return out


# ------------------------------------------------------------- page images

PAGE_MAGIC = b"LCP1"
_HEADER = struct.Struct("<4sBBBxHH4x")
UNCOMPRESSED_C_TYPE = 0xFF


def _pack_metadata(page: LcpPage) -> bytes:
    geo = page.geometry
    meta = page.metadata
    bits = []
    for i in range(geo.lines_per_page):
        bits.append(1 if meta.e_bit[i] else 0)
        for b in range(geo.index_bits):
            bits.append((meta.e_index[i] >> b) & 1)
    bits.extend(1 if v else 0 for v in meta.v_bit)
    if geo.z_bits:
        bits.extend(1 if z else 0 for z in meta.z_bit)
    out = bytearray(geo.metadata_bytes)
    for pos, bit in enumerate(bits):
        if bit:
            out[pos // 8] |= 1 << (pos % 8)
    return bytes(out)


def _unpack_metadata(blob: bytes, geometry: LcpGeometry) -> LcpMetadata:
    def bit(pos):
        return (blob[pos // 8] >> (pos % 8)) & 1
    meta = LcpMetadata.empty(geometry)
    pos = 0
    for i in range(geometry.lines_per_page):
        meta.e_bit[i] = bool(bit(pos))
        pos += 1
        idx = 0
        for b in range(geometry.index_bits):
            idx |= bit(pos) << b
            pos += 1
        meta.e_index[i] = idx
    for v in range(geometry.lines_per_page):
        meta.v_bit[v] = bool(bit(pos))
        pos += 1
    if geometry.z_bits:
        for z in range(geometry.lines_per_page):
            meta.z_bit[z] = bool(bit(pos))
            pos += 1
    return meta


def write_page_image(page: LcpPage, c_base: int = 0) -> bytes:
    """16-byte header {magic, c_type, c_size, c_base, n, C*} + raw P bytes."""
    geo = page.geometry
    if page.kind is PageKind.ZERO:
        header = _HEADER.pack(PAGE_MAGIC, 0, 0, c_base, geo.lines_per_page, 0)
        return header
    if page.kind is PageKind.UNCOMPRESSED:
        header = _HEADER.pack(PAGE_MAGIC, UNCOMPRESSED_C_TYPE,
                              geo.page_sizes.index(geo.virtual_page_size),
                              c_base, geo.lines_per_page, geo.line_size)
        return header + b"".join(page.raw_lines)
    body = bytearray(page.physical_size)
    pos = 0
    for slot in page.slots:
        body[pos : pos + page.c_star] = slot or bytes(page.c_star)
        pos += page.c_star
    body[pos : pos + geo.metadata_bytes] = _pack_metadata(page)
    pos += geo.metadata_bytes
    for ex in page.exceptions:
        body[pos : pos + geo.line_size] = ex or bytes(geo.line_size)
        pos += geo.line_size
    header = _HEADER.pack(PAGE_MAGIC, page.c_type,
                          geo.page_sizes.index(page.physical_size),
                          c_base, geo.lines_per_page, page.c_star)
    return header + bytes(body)


def read_page_image(blob: bytes, geometry: LcpGeometry = LcpGeometry(),
                    codec: Optional[LcpCodec] = None) -> LcpPage:
    magic, c_type, c_size, _c_base, n, c_star = _HEADER.unpack_from(blob)
    if magic != PAGE_MAGIC:
        raise LcpError("bad page image magic")
    if n != geometry.lines_per_page:
        raise LcpError("geometry mismatch in page image")
    body = blob[_HEADER.size:]
    if c_type == 0:
        return LcpPage(geometry, PageKind.ZERO)
    if c_type == UNCOMPRESSED_C_TYPE:
        lines = [body[i * geometry.line_size : (i + 1) * geometry.line_size]
                 for i in range(n)]
        return LcpPage(geometry, PageKind.UNCOMPRESSED,
                       physical_size=geometry.virtual_page_size, raw_lines=lines)
    physical = geometry.page_sizes[c_size]
    slots = [bytes(body[i * c_star : (i + 1) * c_star]) for i in range(n)]
    pos = n * c_star
    meta = _unpack_metadata(body[pos : pos + geometry.metadata_bytes], geometry)
    pos += geometry.metadata_bytes
    slots_avail = n_avail(physical, c_star, geometry)
    exceptions: List[Optional[bytes]] = []
    for s in range(slots_avail):
        chunk = bytes(body[pos : pos + geometry.line_size])
        exceptions.append(chunk if meta.v_bit[s] else None)
        pos += geometry.line_size
    for i in range(n):
        if meta.e_bit[i]:
            slots[i] = None
    return LcpPage(geometry, PageKind.COMPRESSED, c_type=c_type, c_star=c_star,
                   physical_size=physical, slots=slots, metadata=meta,
                   exceptions=exceptions, codec=codec or BdiLcpCodec(geometry.line_size))
