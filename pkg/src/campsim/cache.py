"""Compressed set-associative cache: doubled tag store, segmented data store,
LRU/RRIP replacement, multi-block eviction."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

from campsim.compression import CompressedBlock, Encoding, compress_line


class CacheConfigError(ValueError):
    pass


@dataclass(frozen=True)
class CacheGeometry:
    capacity_bytes: int
    line_size: int = 64
    assoc: int = 16
    tag_factor: int = 2
    segment_bytes: int = 8

    def __post_init__(self):
        if self.capacity_bytes % (self.line_size * self.assoc):
            raise CacheConfigError("capacity must be divisible by line_size * assoc")
        if self.tag_factor < 1:
            raise CacheConfigError("tag_factor must be >= 1")
        if self.line_size % self.segment_bytes:
            raise CacheConfigError("line_size must be divisible by segment_bytes")

    @property
    def num_sets(self) -> int:
        return self.capacity_bytes // (self.line_size * self.assoc)

    @property
    def tags_per_set(self) -> int:
        return self.tag_factor * self.assoc

    @property
    def budget_segments(self) -> int:
        return self.assoc * self.line_size // self.segment_bytes

    def set_index(self, addr: int) -> int:
        return (addr // self.line_size) % self.num_sets

    def tag_of(self, addr: int) -> int:
        return addr // (self.line_size * self.num_sets)


@dataclass(frozen=True)
class RripConfig:
    rrpv_bits: int = 3

    def __post_init__(self):
        if not 1 <= self.rrpv_bits <= 8:
            raise CacheConfigError("rrpv width must be in [1, 8]")

    @property
    def rrpv_max(self) -> int:
        return (1 << self.rrpv_bits) - 1


class TagEntry:
    __slots__ = ("valid", "tag", "encoding", "size_bytes", "size_segments",
                 "rrpv", "lru_stamp", "dirty", "set_idx")

    def __init__(self):
        self.valid = False
        self.tag = 0
        self.encoding = Encoding.NO_COMPR.code
        self.size_bytes = 0
        self.size_segments = 0
        self.rrpv = 0
        self.lru_stamp = 0
        self.dirty = False
        self.set_idx = -1

    def fill(self, tag: int, block: CompressedBlock, segment_bytes: int,
             rrpv: int, stamp: int, dirty: bool) -> None:
        self.valid = True
        self.tag = tag
        self.encoding = block.encoding.code
        self.size_bytes = block.size_bytes
        self.size_segments = block.segments(segment_bytes)
        self.rrpv = rrpv
        self.lru_stamp = stamp
        self.dirty = dirty


class SetState:
    __slots__ = ("tags", "used_segments", "budget_segments")

    def __init__(self, tags_per_set: int, budget_segments: int):
        self.tags = [TagEntry() for _ in range(tags_per_set)]
        self.used_segments = 0
        self.budget_segments = budget_segments

    def valid_indices(self) -> List[int]:
        return [i for i, t in enumerate(self.tags) if t.valid]

    def free_tag_index(self) -> Optional[int]:
        for i, t in enumerate(self.tags):
            if not t.valid:
                return i
        return None

    def fits(self, needed_segments: int) -> bool:
        return self.used_segments + needed_segments <= self.budget_segments

    def evict(self, idx: int) -> TagEntry:
        entry = self.tags[idx]
        assert entry.valid
        evicted = TagEntry()
        for name in TagEntry.__slots__:
            setattr(evicted, name, getattr(entry, name))
        entry.valid = False
        self.used_segments -= entry.size_segments
        entry.size_segments = 0
        entry.size_bytes = 0
        return evicted


def lookup(set_state: SetState, tag: int) -> Optional[int]:
    """Index of the matching valid tag, or None."""
    for i, entry in enumerate(set_state.tags):
        if entry.valid and entry.tag == tag:
            return i
    return None


def rrip_on_hit(entry: TagEntry) -> None:
    entry.rrpv = 0


def rrip_insert_value(cfg: RripConfig, high_priority: bool = False) -> int:
    return 0 if high_priority else (1 << cfg.rrpv_bits) - 2


def rrip_age_until_saturated(set_state: SetState, cfg: RripConfig) -> None:
    """Increment every valid RRPV until one reaches the maximum."""
    rrpv_max = cfg.rrpv_max
    valid = [set_state.tags[i] for i in set_state.valid_indices()]
    while not any(t.rrpv == rrpv_max for t in valid):
        for t in valid:
            t.rrpv += 1


def rrip_select_victim(set_state: SetState, cfg: RripConfig) -> int:
    """Lowest-index block at max RRPV, aging the whole set as needed."""
    rrip_age_until_saturated(set_state, cfg)
    rrpv_max = cfg.rrpv_max
    for i in set_state.valid_indices():
        if set_state.tags[i].rrpv == rrpv_max:
            return i
    raise AssertionError("unreachable: aging guarantees a saturated entry")


def lru_select_victim(set_state: SetState, exclude: int = -1) -> int:
    best = None
    for i in set_state.valid_indices():
        if i == exclude:
            continue
        if best is None or set_state.tags[i].lru_stamp < set_state.tags[best].lru_stamp:
            best = i
    assert best is not None
    return best


class ReplacementPolicy:
    """Per-cache policy object; subclasses pick victims and insertion state."""

    name = "base"

    def __init__(self, cfg: RripConfig = RripConfig()):
        self.cfg = cfg

    def attach(self, cache: "CompressedCache") -> None:
        self.cache = cache

    def observe(self, set_idx: int, tag: int, size_bytes: int) -> None:
        """Called once per access, before the main directory is updated."""

    def on_hit(self, set_state: SetState, idx: int) -> None:
        rrip_on_hit(set_state.tags[idx])

    def on_miss(self, set_idx: int) -> None:
        """Called when the main directory misses."""

    def insertion_rrpv(self, size_bytes: int) -> int:
        return rrip_insert_value(self.cfg)

    def make_room(self, set_state: SetState, needed_segments: int,
                  exclude: int = -1, need_tag: bool = True) -> List[TagEntry]:
        """Evict until the new block fits (and a tag slot is free, unless
        the caller already owns one)."""
        raise NotImplementedError


class LruPolicy(ReplacementPolicy):
    name = "lru"

    def on_hit(self, set_state: SetState, idx: int) -> None:
        set_state.tags[idx].rrpv = 0

    def make_room(self, set_state, needed_segments, exclude=-1, need_tag=True):
        evicted = []
        while not ((not need_tag or set_state.free_tag_index() is not None)
                   and set_state.fits(needed_segments)):
            evicted.append(set_state.evict(lru_select_victim(set_state, exclude)))
        return evicted


class RripPolicy(ReplacementPolicy):
    name = "rrip"

    def make_room(self, set_state, needed_segments, exclude=-1, need_tag=True):
        evicted = []
        while not ((not need_tag or set_state.free_tag_index() is not None)
                   and set_state.fits(needed_segments)):
            idx = rrip_select_victim(set_state, self.cfg)
            if idx == exclude:
                # the entry being rewritten cannot evict itself; take the
                # next saturated or aged candidate
                candidates = [i for i in set_state.valid_indices()
                              if i != exclude and set_state.tags[i].rrpv == self.cfg.rrpv_max]
                if not candidates:
                    for i in set_state.valid_indices():
                        if i != exclude:
                            set_state.tags[i].rrpv = self.cfg.rrpv_max
                            candidates = [i]
                            break
                idx = candidates[0]
            evicted.append(set_state.evict(idx))
        return evicted


class AccessResult:
    __slots__ = ("hit", "evicted", "size_bytes", "writeback_blocks")

    def __init__(self, hit: bool, evicted: List[TagEntry], size_bytes: int):
        self.hit = hit
        self.evicted = evicted
        self.size_bytes = size_bytes


class CompressedCache:
    """Single-level compressed cache driven one access at a time."""

    def __init__(self, geometry: CacheGeometry, policy: ReplacementPolicy,
                 codec=compress_line):
        self.geometry = geometry
        self.policy = policy
        self.codec = codec
        self.sets = [SetState(geometry.tags_per_set, geometry.budget_segments)
                     for _ in range(geometry.num_sets)]
        self.stamp = 0
        self.resident_lines = 0
        self.resident_segments = 0
        policy.attach(self)

    def _next_stamp(self) -> int:
        self.stamp += 1
        return self.stamp

    def compress(self, data: bytes) -> CompressedBlock:
        return self.codec(data)

    def lookup_addr(self, addr: int) -> Optional[int]:
        return lookup(self.sets[self.geometry.set_index(addr)],
                      self.geometry.tag_of(addr))

    def access(self, op: str, addr: int, data: bytes) -> AccessResult:
        geo = self.geometry
        set_idx = geo.set_index(addr)
        tag = geo.tag_of(addr)
        s = self.sets[set_idx]
        idx = lookup(s, tag)
        write = op == "W"

        if idx is not None and not write:
            entry = s.tags[idx]
            self.policy.observe(set_idx, tag, entry.size_bytes)
            self.policy.on_hit(s, idx)
            entry.lru_stamp = self._next_stamp()
            return AccessResult(True, [], entry.size_bytes)

        block = self.compress(data)
        if idx is not None:
            self.policy.observe(set_idx, tag, block.size_bytes)
            evicted = self.write_update(set_idx, idx, block)
            return AccessResult(True, evicted, block.size_bytes)

        self.policy.observe(set_idx, tag, block.size_bytes)
        self.policy.on_miss(set_idx)
        evicted = self.insert(set_idx, tag, block, dirty=write)
        return AccessResult(False, evicted, block.size_bytes)

    def insert(self, set_idx: int, tag: int, block: CompressedBlock,
               dirty: bool = False) -> List[TagEntry]:
        s = self.sets[set_idx]
        needed = block.segments(self.geometry.segment_bytes)
        if needed > s.budget_segments:
            raise CacheConfigError("block larger than the per-set data budget")
        evicted = self.policy.make_room(s, needed)
        slot = s.free_tag_index()
        s.tags[slot].fill(tag, block, self.geometry.segment_bytes,
                          self.policy.insertion_rrpv(block.size_bytes),
                          self._next_stamp(), dirty)
        s.tags[slot].set_idx = set_idx
        s.used_segments += needed
        for e in evicted:
            e.set_idx = set_idx
        self.resident_lines += 1 - len(evicted)
        self.resident_segments += needed - sum(e.size_segments for e in evicted)
        return evicted

    def write_update(self, set_idx: int, idx: int, block: CompressedBlock) -> List[TagEntry]:
        """Rewrite a resident line; a grown block may evict others."""
        s = self.sets[set_idx]
        entry = s.tags[idx]
        needed = block.segments(self.geometry.segment_bytes)
        self.resident_segments += needed - entry.size_segments
        s.used_segments -= entry.size_segments
        entry.size_segments = 0
        evicted = []
        if not s.fits(needed):
            evicted = self.policy.make_room(s, needed, exclude=idx, need_tag=False)
            for e in evicted:
                e.set_idx = set_idx
            self.resident_lines -= len(evicted)
            self.resident_segments -= sum(e.size_segments for e in evicted)
        entry.encoding = block.encoding.code
        entry.size_bytes = block.size_bytes
        entry.size_segments = needed
        entry.dirty = True
        entry.rrpv = 0
        entry.lru_stamp = self._next_stamp()
        s.used_segments += needed
        return evicted

    def check_invariants(self) -> None:
        lines = 0
        segments = 0
        for s in self.sets:
            used = sum(s.tags[i].size_segments for i in s.valid_indices())
            assert used == s.used_segments <= s.budget_segments
            assert len(s.valid_indices()) <= self.geometry.tags_per_set
            lines += len(s.valid_indices())
            segments += used
        assert lines == self.resident_lines
        assert segments == self.resident_segments

    def resident_bytes(self) -> tuple[int, int]:
        """(uncompressed bytes, compressed segment bytes) currently resident."""
        uncompressed = 0
        segments = 0
        for s in self.sets:
            for i in s.valid_indices():
                uncompressed += self.geometry.line_size
                segments += s.tags[i].size_segments
        return uncompressed, segments * self.geometry.segment_bytes

    def snapshot(self) -> list:
        """JSON-friendly per-set dump for debugging and golden tests."""
        out = []
        for s in self.sets:
            out.append([
                {"tag": t.tag, "encoding": t.encoding,
                 "size_bytes": t.size_bytes, "rrpv": t.rrpv}
                for t in s.tags if t.valid
            ])
        return out
