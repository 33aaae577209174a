"""Compression-aware management for the local cache: Minimal-Value Eviction,
Size-based Insertion Policy, and their combination."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Set

from campsim.cache import (
    ReplacementPolicy,
    RripConfig,
    RripPolicy,
    SetState,
    rrip_age_until_saturated,
    rrip_insert_value,
    rrip_select_victim,
)
from campsim.compression import size_bucket

N_SIZE_BINS = 8


def size_bin(size_bytes: int, line_size: int = 64) -> int:
    """8-byte size bins: bin 1 covers 0-8B, bin 2 covers 9-16B, ... bin 8
    covers 57-64B. Boundary sizes belong to the lower bin."""
    if not 0 <= size_bytes <= line_size:
        raise ValueError(f"size {size_bytes} outside [0, {line_size}]")
    return max(1, -(-size_bytes * N_SIZE_BINS // line_size))


def mve_value(rrpv: int, size_bytes: int, cfg: RripConfig) -> Fraction:
    """Block value p/s: re-reference likelihood over bucketed size, exact."""
    if rrpv > cfg.rrpv_max:
        raise ValueError(f"rrpv {rrpv} exceeds max {cfg.rrpv_max}")
    return Fraction((1 << cfg.rrpv_bits) - rrpv, size_bucket(size_bytes))


def mve_select_victims(set_state: SetState, needed_segments: int,
                       cfg: RripConfig, exclude: int = -1) -> List[int]:
    """Ordered victim list to admit a block of needed_segments.

    No pressure -> empty; tag pressure only -> the plain RRIP victim;
    segment pressure -> one RRIP aging pass, then blocks in ascending value
    (ties: larger block first, then lower index) until the block fits.
    """
    free_tag = set_state.free_tag_index() is not None
    if set_state.fits(needed_segments):
        if free_tag:
            return []
        return [rrip_select_victim(set_state, cfg)]
    rrip_age_until_saturated(set_state, cfg)
    order = sorted(
        (i for i in set_state.valid_indices() if i != exclude),
        key=lambda i: (
            mve_value(set_state.tags[i].rrpv, set_state.tags[i].size_bytes, cfg),
            -set_state.tags[i].size_segments,
            i,
        ),
    )
    victims = []
    freed = 0
    for i in order:
        if set_state.used_segments - freed + needed_segments <= set_state.budget_segments:
            break
        victims.append(i)
        freed += set_state.tags[i].size_segments
    return victims


@dataclass(frozen=True)
class SipConfig:
    n_bins: int = N_SIZE_BINS
    m_sets_per_bin: int = 32
    train_fraction: float = 0.10
    train_period_accesses: int = 10_000_000
    ctr_width_bits: int = 16

    @property
    def ctr_limit(self) -> int:
        return (1 << (self.ctr_width_bits - 1)) - 1

    @property
    def train_len(self) -> int:
        return max(1, round(self.train_fraction * self.train_period_accesses))


def saturating_add(value: int, delta: int, limit: int) -> int:
    return max(-limit, min(limit, value + delta))


def sip_decide(ctrs: Dict[int, int]) -> Set[int]:
    """Bins whose counter ended positive get insertion priority."""
    return {b for b, c in ctrs.items() if c > 0}


class AtdEntry:
    __slots__ = ("valid", "tag", "rrpv")

    def __init__(self):
        self.valid = False
        self.tag = 0
        self.rrpv = 0


class AtdSet:
    """Auxiliary tag-directory set: tag-only shadow of one leader set that
    prioritizes insertions of its assigned size bin."""

    def __init__(self, ways: int, assigned_bin: int, cfg: RripConfig):
        self.entries = [AtdEntry() for _ in range(ways)]
        self.assigned_bin = assigned_bin
        self.cfg = cfg

    def access(self, tag: int, size_bytes: int) -> bool:
        """Returns True on ATD hit; inserts on miss."""
        for e in self.entries:
            if e.valid and e.tag == tag:
                e.rrpv = 0
                return True
        slot = None
        for e in self.entries:
            if not e.valid:
                slot = e
                break
        if slot is None:
            rrpv_max = self.cfg.rrpv_max
            while slot is None:
                for e in self.entries:
                    if e.rrpv == rrpv_max:
                        slot = e
                        break
                else:
                    for e in self.entries:
                        e.rrpv += 1
        slot.valid = True
        slot.tag = tag
        high = size_bin(size_bytes) == self.assigned_bin
        slot.rrpv = rrip_insert_value(self.cfg, high_priority=high)
        return False


class SipState:
    """Dynamic set sampling: leader sets, shadow ATD sets, per-bin counters,
    and the training/steady-state schedule."""

    def __init__(self, sip_cfg: SipConfig, rrip_cfg: RripConfig,
                 num_sets: int, ways: int, apply_decisions: bool = True):
        self.cfg = sip_cfg
        self.rrip_cfg = rrip_cfg
        self.apply_decisions = apply_decisions
        m = min(sip_cfg.m_sets_per_bin, max(1, num_sets // sip_cfg.n_bins))
        stride = num_sets // m
        if stride < sip_cfg.n_bins:
            raise ValueError("not enough sets for disjoint leader sets")
        self.leader_bin: Dict[int, int] = {}
        self.atd: Dict[int, AtdSet] = {}
        for b in range(1, sip_cfg.n_bins + 1):
            for j in range(m):
                set_idx = j * stride + (b - 1)
                self.leader_bin[set_idx] = b
                self.atd[set_idx] = AtdSet(ways, b, rrip_cfg)
        self.ctrs: Dict[int, int] = {b: 0 for b in range(1, sip_cfg.n_bins + 1)}
        self.prioritized: Set[int] = set()
        self.accesses = 0
        self.training = True
        self.decision_log: List[dict] = []

    def tick(self) -> None:
        pos = self.accesses % self.cfg.train_period_accesses
        if pos == 0:
            self.ctrs = {b: 0 for b in self.ctrs}
            self.training = True
        elif pos == self.cfg.train_len and self.training:
            self.prioritized = sip_decide(self.ctrs)
            self.decision_log.append(
                {"access": self.accesses, "ctrs": dict(self.ctrs),
                 "prioritized": sorted(self.prioritized)})
            self.training = False
        self.accesses += 1

    def observe(self, set_idx: int, tag: int, size_bytes: int) -> None:
        self.tick()
        if not self.training:
            return
        atd_set = self.atd.get(set_idx)
        if atd_set is None:
            return
        if not atd_set.access(tag, size_bytes):
            b = atd_set.assigned_bin
            self.ctrs[b] = saturating_add(self.ctrs[b], -1, self.cfg.ctr_limit)

    def record_mtd_miss(self, set_idx: int) -> None:
        if not self.training:
            return
        b = self.leader_bin.get(set_idx)
        if b is not None:
            self.ctrs[b] = saturating_add(self.ctrs[b], +1, self.cfg.ctr_limit)

    def insertion_rrpv(self, size_bytes: int) -> int:
        high = (self.apply_decisions and not self.training
                and size_bin(size_bytes) in self.prioritized)
        return rrip_insert_value(self.rrip_cfg, high_priority=high)


class MvePolicy(ReplacementPolicy):
    name = "mve"

    def make_room(self, set_state, needed_segments, exclude=-1, need_tag=True):
        evicted = []
        while not ((not need_tag or set_state.free_tag_index() is not None)
                   and set_state.fits(needed_segments)):
            victims = mve_select_victims(set_state, needed_segments, self.cfg, exclude)
            if not victims:
                break
            for idx in victims:
                evicted.append(set_state.evict(idx))
        return evicted


class SipPolicy(RripPolicy):
    name = "sip"

    def __init__(self, cfg: RripConfig = RripConfig(),
                 sip_cfg: SipConfig = SipConfig(), apply_decisions: bool = True):
        super().__init__(cfg)
        self.sip_cfg = sip_cfg
        self.apply_decisions = apply_decisions
        self.sip: Optional[SipState] = None

    def attach(self, cache):
        super().attach(cache)
        self.sip = SipState(self.sip_cfg, self.cfg, cache.geometry.num_sets,
                            cache.geometry.tags_per_set, self.apply_decisions)

    def observe(self, set_idx, tag, size_bytes):
        self.sip.observe(set_idx, tag, size_bytes)

    def on_miss(self, set_idx):
        self.sip.record_mtd_miss(set_idx)

    def insertion_rrpv(self, size_bytes):
        return self.sip.insertion_rrpv(size_bytes)


class CampPolicy(SipPolicy):
    """Size-aware insertion (SIP) combined with minimal-value eviction."""

    name = "camp"

    def __init__(self, cfg: RripConfig = RripConfig(),
                 sip_cfg: SipConfig = SipConfig(), apply_decisions: bool = True,
                 mve_enabled: bool = True):
        super().__init__(cfg, sip_cfg, apply_decisions)
        self.mve_enabled = mve_enabled

    def make_room(self, set_state, needed_segments, exclude=-1, need_tag=True):
        if not self.mve_enabled:
            return RripPolicy.make_room(self, set_state, needed_segments,
                                        exclude, need_tag)
        return MvePolicy.make_room(self, set_state, needed_segments,
                                   exclude, need_tag)
