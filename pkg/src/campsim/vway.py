"""Cache with decoupled tag and data stores and global replacement:
compression-aware data packing, reuse-counter replacement, globalized
value-based eviction, region dueling for size priorities, and the combined
policy with its enable/disable duel."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Set, Tuple

from campsim.camp import N_SIZE_BINS, SipConfig, saturating_add, size_bin
from campsim.compression import CompressedBlock, compress_line, size_bucket

RCT_MAX = 3  # 2-bit saturating reuse counters
GMVE_WINDOW = 64


class VwayConfigError(ValueError):
    pass


@dataclass(frozen=True)
class VwayGeometry:
    capacity_bytes: int
    line_size: int = 64
    assoc: int = 16          # data ways per set; tag ways are doubled
    tag_factor: int = 2
    num_regions: int = 8
    segment_bytes: int = 8
    rptrs_per_data_entry: int = 2

    def __post_init__(self):
        if self.capacity_bytes % (self.line_size * self.assoc):
            raise VwayConfigError("capacity must be divisible by line_size * assoc")
        if self.num_data_entries % self.num_regions:
            raise VwayConfigError("data entries must divide evenly into regions")

    @property
    def num_data_entries(self) -> int:
        return self.capacity_bytes // self.line_size

    @property
    def num_tag_entries(self) -> int:
        return self.tag_factor * self.num_data_entries

    @property
    def num_sets(self) -> int:
        return self.num_data_entries // self.assoc

    @property
    def tag_ways(self) -> int:
        return self.tag_factor * self.assoc

    @property
    def segments_per_entry(self) -> int:
        return self.line_size // self.segment_bytes

    @property
    def entries_per_region(self) -> int:
        return self.num_data_entries // self.num_regions

    def set_index(self, addr: int) -> int:
        return (addr // self.line_size) % self.num_sets

    def tag_of(self, addr: int) -> int:
        return addr // (self.line_size * self.num_sets)

    def region_of_set(self, set_idx: int) -> int:
        return set_idx % self.num_regions


class VwayTagEntry:
    __slots__ = ("valid", "tag", "entry", "slot", "encoding", "size_bytes",
                 "size_segments", "dirty", "set_idx")

    def __init__(self):
        self.valid = False
        self.tag = 0
        self.entry = -1          # forward pointer: data entry id
        self.slot = -1           # which reverse-pointer slot within the entry
        self.encoding = 0
        self.size_bytes = 0
        self.size_segments = 0
        self.dirty = False
        self.set_idx = -1


class DataEntry:
    """One data-store entry: up to rptrs blocks sharing the line's segments
    and one reuse counter."""

    __slots__ = ("rptr", "vsize", "reuse_ctr")

    def __init__(self, rptrs: int):
        self.rptr: List[Optional[Tuple[int, int]]] = [None] * rptrs  # (set, way)
        self.vsize = [0] * rptrs   # size in segments; 0 = slot invalid
        self.reuse_ctr = 0

    def used_segments(self) -> int:
        return sum(self.vsize)

    def occupied(self) -> bool:
        return any(self.vsize)

    def free_slot(self) -> Optional[int]:
        for i, size in enumerate(self.vsize):
            if size == 0:
                return i
        return None

    def can_host(self, segments: int, capacity: int) -> bool:
        return self.free_slot() is not None and self.used_segments() + segments <= capacity


ROLE_BASELINE = "baseline"
ROLE_CONTROL = "reuse-replacement-control"


class RegionState:
    __slots__ = ("region_id", "ptr", "role", "ctr", "first_entry", "num_entries")

    def __init__(self, region_id: int, first_entry: int, num_entries: int):
        self.region_id = region_id
        self.ptr = first_entry
        self.role = None          # size bin (int), ROLE_BASELINE, or ROLE_CONTROL
        self.ctr = 0
        self.first_entry = first_entry
        self.num_entries = num_entries

    def entry_ids(self) -> range:
        return range(self.first_entry, self.first_entry + self.num_entries)

    def advance(self, entry_id: int) -> int:
        nxt = entry_id + 1
        if nxt >= self.first_entry + self.num_entries:
            nxt = self.first_entry
        return nxt


def gsip_decide(bin_ctrs: Dict[int, int], baseline_ctr: int) -> Set[int]:
    """Bins whose region saw strictly fewer misses than the baseline region
    are inserted with higher priority everywhere."""
    return {b for b, c in bin_ctrs.items() if c < baseline_ctr}


def gcamp_duel(control_ctr: int, baseline_ctr: int) -> bool:
    """Whether value-based eviction stays enabled: disabled only when the
    plain reuse-replacement control region incurred strictly fewer misses."""
    return not control_ctr < baseline_ctr


def reuse_replacement_victim(region: RegionState, entries: List[DataEntry]) -> int:
    """First occupied entry with a zero counter scanning from the region
    pointer; non-zero counters passed on the way are decremented."""
    if not any(entries[e].occupied() for e in region.entry_ids()):
        raise VwayConfigError("victim scan on an empty region")
    pos = region.ptr
    while True:
        entry = entries[pos]
        if entry.occupied():
            if entry.reuse_ctr == 0:
                region.ptr = region.advance(pos)
                return pos
            entry.reuse_ctr -= 1
        pos = region.advance(pos)


class VwayCache:
    """Decoupled tag/data cache driven one access at a time.

    policy is one of: "vway" (reuse replacement), "gmve", "gsip", "gcamp".
    """

    def __init__(self, geometry: VwayGeometry, policy: str = "vway",
                 codec=compress_line, sip_cfg: SipConfig = SipConfig()):
        if policy not in ("vway", "gmve", "gsip", "gcamp"):
            raise VwayConfigError(f"unknown policy {policy!r}")
        self.geometry = geometry
        self.policy = policy
        self.codec = codec
        self.sip_cfg = sip_cfg
        self.tag_sets: List[List[VwayTagEntry]] = [
            [VwayTagEntry() for _ in range(geometry.tag_ways)]
            for _ in range(geometry.num_sets)
        ]
        self.entries: List[DataEntry] = [
            DataEntry(geometry.rptrs_per_data_entry)
            for _ in range(geometry.num_data_entries)
        ]
        per_region = geometry.entries_per_region
        self.regions = [RegionState(r, r * per_region, per_region)
                        for r in range(geometry.num_regions)]
        # blocks' true compressed byte sizes, keyed by (entry, slot)
        self.block_bytes: Dict[Tuple[int, int], int] = {}
        self.accesses = 0
        self.training = False
        self.prioritized: Set[int] = set()
        self.gmve_enabled = policy in ("gmve", "gcamp")
        self.decision_log: List[dict] = []
        self.near_tie_evictions = 0
        self.resident_lines = 0
        self.resident_segments = 0
        self._uses_training = policy in ("gsip", "gcamp")
        if self._uses_training:
            self._assign_roles()

    # ------------------------------------------------------------ training

    def _assign_roles(self) -> None:
        """Bins 1..7 (and the duel's control region under the combined
        policy) plus one baseline region."""
        duel = self.policy == "gcamp"
        bins = list(range(1, N_SIZE_BINS))       # bins 1..7
        for region in self.regions:
            region.role = None
            region.ctr = 0
        self.regions[-1].role = ROLE_BASELINE
        rest = self.regions[:-1]
        if duel:
            rest[-1].role = ROLE_CONTROL
            rest = rest[:-1]
        for region, b in zip(rest, bins):
            region.role = b

    def _tick(self) -> None:
        if not self._uses_training:
            return
        pos = self.accesses % self.sip_cfg.train_period_accesses
        if pos == 0:
            self._assign_roles()
            self.training = True
        elif self.training and pos == self.sip_cfg.train_len:
            self._decide()
            self.training = False
        self.accesses += 1

    def _decide(self) -> None:
        base_ctr = next(r.ctr for r in self.regions if r.role == ROLE_BASELINE)
        bin_ctrs = {r.role: r.ctr for r in self.regions if isinstance(r.role, int)}
        self.prioritized = gsip_decide(bin_ctrs, base_ctr)
        record = {"access": self.accesses,
                  "ctrs": {str(r.role): r.ctr for r in self.regions},
                  "prioritized": sorted(self.prioritized)}
        if self.policy == "gcamp":
            control_ctr = next(r.ctr for r in self.regions if r.role == ROLE_CONTROL)
            self.gmve_enabled = gcamp_duel(control_ctr, base_ctr)
            record["gmve_enabled"] = self.gmve_enabled
        self.decision_log.append(record)

    def _insert_reuse_ctr(self, region: RegionState, size_bytes: int) -> int:
        high = False
        if self.training and isinstance(region.role, int):
            high = size_bin(size_bytes, self.geometry.line_size) == region.role
        elif not self.training and self.prioritized:
            high = size_bin(size_bytes, self.geometry.line_size) in self.prioritized
        return RCT_MAX if high else 0

    def _region_uses_gmve(self, region: RegionState) -> bool:
        if self.policy in ("vway", "gsip"):
            return False
        if self.policy == "gmve":
            return True
        # combined policy: the control region runs plain reuse replacement
        # during training; the duel outcome governs steady state
        if self.training:
            return region.role != ROLE_CONTROL
        return self.gmve_enabled

    # ------------------------------------------------------------- lookup

    def lookup_addr(self, addr: int) -> Optional[Tuple[int, int]]:
        set_idx = self.geometry.set_index(addr)
        tag = self.geometry.tag_of(addr)
        for way, t in enumerate(self.tag_sets[set_idx]):
            if t.valid and t.tag == tag:
                return set_idx, way
        return None

    # ------------------------------------------------------------- access

    def access(self, op: str, addr: int, data: bytes):
        self._tick()
        geo = self.geometry
        set_idx = geo.set_index(addr)
        tag = geo.tag_of(addr)
        region = self.regions[geo.region_of_set(set_idx)]
        hit_way = None
        for way, t in enumerate(self.tag_sets[set_idx]):
            if t.valid and t.tag == tag:
                hit_way = way
                break

        if hit_way is not None and op != "W":
            t = self.tag_sets[set_idx][hit_way]
            entry = self.entries[t.entry]
            entry.reuse_ctr = min(RCT_MAX, entry.reuse_ctr + 1)
            return True, []

        block = self.codec(data)
        if hit_way is not None:
            evicted = self._write_update(set_idx, hit_way, block, region)
            return True, evicted

        if self.training and region.role is not None:
            region.ctr = saturating_add(region.ctr, 1, self.sip_cfg.ctr_limit)
        evicted = self._insert(set_idx, tag, block, region, dirty=op == "W")
        return False, evicted

    # ---------------------------------------------------------- insertion

    def _placeable(self, region: RegionState, segments: int) -> Optional[int]:
        cap = self.geometry.segments_per_entry
        for e in region.entry_ids():
            if self.entries[e].can_host(segments, cap):
                return e
        return None

    def _evict_block(self, entry_id: int, slot: int) -> VwayTagEntry:
        entry = self.entries[entry_id]
        set_idx, way = entry.rptr[slot]
        t = self.tag_sets[set_idx][way]
        assert t.valid and t.entry == entry_id and t.slot == slot
        copy = VwayTagEntry()
        for name in VwayTagEntry.__slots__:
            setattr(copy, name, getattr(t, name))
        copy.set_idx = set_idx
        t.valid = False
        entry.rptr[slot] = None
        entry.vsize[slot] = 0
        self.block_bytes.pop((entry_id, slot), None)
        self.resident_lines -= 1
        self.resident_segments -= copy.size_segments
        return copy

    def _evict_entry(self, entry_id: int) -> List[VwayTagEntry]:
        entry = self.entries[entry_id]
        return [self._evict_block(entry_id, slot)
                for slot, size in enumerate(entry.vsize) if size]

    def _gmve_make_room(self, region: RegionState, segments: int) -> List[VwayTagEntry]:
        """Ascending-value eviction from a bounded window of the region."""
        entries = self.entries
        scanned: List[int] = []
        candidates = []
        pos = region.ptr
        steps = 0
        while len(scanned) < GMVE_WINDOW and steps < region.num_entries:
            entry = entries[pos]
            if entry.occupied():
                scanned.append(pos)
                p = entry.reuse_ctr + 1
                for slot, size_seg in enumerate(entry.vsize):
                    if size_seg:
                        size_bytes = self.block_bytes[(pos, slot)]
                        candidates.append(
                            (Fraction(p, size_bucket(size_bytes, self.geometry.line_size)),
                             -size_seg, pos, slot))
            pos = region.advance(pos)
            steps += 1
        candidates.sort()
        if len(candidates) >= 2 and candidates[0][0] == candidates[1][0]:
            self.near_tie_evictions += 1
        evicted = []
        for _value, _nseg, entry_id, slot in candidates:
            if self._placeable(region, segments) is not None:
                break
            if entries[entry_id].vsize[slot]:
                evicted.append(self._evict_block(entry_id, slot))
        for e in scanned:
            if entries[e].reuse_ctr:
                entries[e].reuse_ctr -= 1
        region.ptr = pos
        return evicted

    def _reuse_make_room(self, region: RegionState, segments: int) -> List[VwayTagEntry]:
        evicted = []
        while self._placeable(region, segments) is None:
            victim = reuse_replacement_victim(region, self.entries)
            evicted.extend(self._evict_entry(victim))
        return evicted

    def _tag_victim(self, set_idx: int) -> int:
        """All tag ways valid: evict the way whose block has minimal value."""
        def key(way):
            t = self.tag_sets[set_idx][way]
            p = self.entries[t.entry].reuse_ctr + 1
            return (Fraction(p, size_bucket(t.size_bytes, self.geometry.line_size)),
                    -t.size_segments, way)
        return min(range(self.geometry.tag_ways), key=key)

    def _insert(self, set_idx: int, tag: int, block: CompressedBlock,
                region: RegionState, dirty: bool) -> List[VwayTagEntry]:
        geo = self.geometry
        segments = block.segments(geo.segment_bytes)
        if segments > region.num_entries * geo.segments_per_entry:
            raise VwayConfigError("block larger than the region's data budget")
        evicted = []

        tag_set = self.tag_sets[set_idx]
        way = next((w for w, t in enumerate(tag_set) if not t.valid), None)
        if way is None:
            way = self._tag_victim(set_idx)
            victim = tag_set[way]
            evicted.append(self._evict_block(victim.entry, victim.slot))

        if self._placeable(region, segments) is None:
            if self._region_uses_gmve(region):
                evicted.extend(self._gmve_make_room(region, segments))
            else:
                evicted.extend(self._reuse_make_room(region, segments))

        entry_id = self._placeable(region, segments)
        assert entry_id is not None
        entry = self.entries[entry_id]
        slot = entry.free_slot()
        entry.rptr[slot] = (set_idx, way)
        entry.vsize[slot] = segments
        entry.reuse_ctr = self._insert_reuse_ctr(region, block.size_bytes)
        self.block_bytes[(entry_id, slot)] = block.size_bytes
        self.resident_lines += 1
        self.resident_segments += segments

        t = tag_set[way]
        t.valid = True
        t.tag = tag
        t.entry = entry_id
        t.slot = slot
        t.encoding = block.encoding.code
        t.size_bytes = block.size_bytes
        t.size_segments = segments
        t.dirty = dirty
        return evicted

    def _write_update(self, set_idx: int, way: int, block: CompressedBlock,
                      region: RegionState) -> List[VwayTagEntry]:
        geo = self.geometry
        t = self.tag_sets[set_idx][way]
        entry = self.entries[t.entry]
        segments = block.segments(geo.segment_bytes)
        old_entry_id, old_slot = t.entry, t.slot
        cap = geo.segments_per_entry

        if entry.used_segments() - t.size_segments + segments <= cap:
            self.resident_segments += segments - t.size_segments
            entry.vsize[old_slot] = segments
            self.block_bytes[(old_entry_id, old_slot)] = block.size_bytes
            entry.reuse_ctr = min(RCT_MAX, entry.reuse_ctr + 1)
            t.encoding = block.encoding.code
            t.size_bytes = block.size_bytes
            t.size_segments = segments
            t.dirty = True
            return []

        # grew past its entry: relocate within the region
        entry.rptr[old_slot] = None
        entry.vsize[old_slot] = 0
        self.block_bytes.pop((old_entry_id, old_slot), None)
        self.resident_lines -= 1
        self.resident_segments -= t.size_segments
        evicted = []
        if self._placeable(region, segments) is None:
            if self._region_uses_gmve(region):
                evicted.extend(self._gmve_make_room(region, segments))
            else:
                evicted.extend(self._reuse_make_room(region, segments))
        entry_id = self._placeable(region, segments)
        new_entry = self.entries[entry_id]
        slot = new_entry.free_slot()
        new_entry.rptr[slot] = (set_idx, way)
        new_entry.vsize[slot] = segments
        new_entry.reuse_ctr = min(RCT_MAX, new_entry.reuse_ctr + 1)
        self.block_bytes[(entry_id, slot)] = block.size_bytes
        self.resident_lines += 1
        self.resident_segments += segments
        t.entry = entry_id
        t.slot = slot
        t.encoding = block.encoding.code
        t.size_bytes = block.size_bytes
        t.size_segments = segments
        t.dirty = True
        return evicted

    # ---------------------------------------------------------- integrity

    def check_invariants(self) -> None:
        geo = self.geometry
        live_from_tags = {}
        for set_idx, tag_set in enumerate(self.tag_sets):
            for way, t in enumerate(tag_set):
                if t.valid:
                    assert self.entries[t.entry].rptr[t.slot] == (set_idx, way)
                    assert self.entries[t.entry].vsize[t.slot] == t.size_segments
                    live_from_tags[(t.entry, t.slot)] = (set_idx, way)
        total = 0
        for entry_id, entry in enumerate(self.entries):
            assert entry.used_segments() <= geo.segments_per_entry
            for slot, size in enumerate(entry.vsize):
                if size:
                    set_idx, way = entry.rptr[slot]
                    t = self.tag_sets[set_idx][way]
                    assert t.valid and t.entry == entry_id and t.slot == slot
                    total += size
        assert set(live_from_tags) == set(self.block_bytes)
        region_total = sum(self.entries[e].used_segments()
                           for r in self.regions for e in r.entry_ids())
        assert region_total == total
        assert len(live_from_tags) == self.resident_lines
        assert total == self.resident_segments

    def resident_bytes(self) -> Tuple[int, int]:
        uncompressed = 0
        segments = 0
        for entry in self.entries:
            for size in entry.vsize:
                if size:
                    uncompressed += self.geometry.line_size
                    segments += size
        return uncompressed, segments * self.geometry.segment_bytes

    def snapshot(self) -> list:
        out = []
        for tag_set in self.tag_sets:
            out.append([
                {"tag": t.tag, "encoding": t.encoding,
                 "size_bytes": t.size_bytes, "entry": t.entry, "slot": t.slot}
                for t in tag_set if t.valid
            ])
        return out
