"""Offline eviction oracles: the classic furthest-future-use policy and a
size-aware variant that can beat it on variable-size blocks."""

from __future__ import annotations

from itertools import combinations
from typing import Dict, List, Optional, Sequence, Tuple

INFINITE = float("inf")


def next_use_indices(accesses: Sequence) -> List[float]:
    """For each position, the index of the next access to the same key."""
    nxt = [INFINITE] * len(accesses)
    last: Dict = {}
    for i in range(len(accesses) - 1, -1, -1):
        nxt[i] = last.get(accesses[i], INFINITE)
        last[accesses[i]] = i
    return nxt


def belady_victim(future: Sequence, residents: Sequence):
    """The resident whose next use lies furthest ahead (never-used first).

    future is the upcoming access sequence; ties go to the resident that
    appears first in `residents`.
    """
    first_use: Dict = {}
    for i, key in enumerate(future):
        first_use.setdefault(key, i)
    best = None
    best_use = -1
    for key in residents:
        use = first_use.get(key, INFINITE)
        if use == INFINITE:
            return key
        if use > best_use:
            best_use = use
            best = key
    return best


class OfflineCache:
    """Fully-associative cache with per-block sizes and a pluggable offline
    eviction rule; counts hits and misses."""

    def __init__(self, capacity_bytes: int, sizes: Dict, policy: str = "belady"):
        self.capacity = capacity_bytes
        self.sizes = sizes
        self.policy = policy
        self.contents: List = []
        self.hits = 0
        self.misses = 0

    def used(self) -> int:
        return sum(self.sizes[k] for k in self.contents)

    def warm(self, keys: Sequence) -> None:
        for k in keys:
            self.contents.append(k)
        assert self.used() <= self.capacity

    def _evict_for(self, key, future: Sequence) -> None:
        needed = self.sizes[key]
        if self.policy == "belady":
            while self.used() + needed > self.capacity:
                victim = belady_victim(future, self.contents)
                self.contents.remove(victim)
        else:
            free = self.capacity - self.used()
            victims = size_aware_victims(future, self.contents, self.sizes,
                                         needed - free)
            for v in victims:
                self.contents.remove(v)

    def access(self, key, future: Sequence) -> bool:
        if key in self.contents:
            self.hits += 1
            return True
        self.misses += 1
        self._evict_for(key, future)
        self.contents.append(key)
        return False

    def run(self, accesses: Sequence) -> Tuple[int, int]:
        for i, key in enumerate(accesses):
            self.access(key, accesses[i + 1:])
        return self.hits, self.misses


def size_aware_victims(future: Sequence, residents: Sequence, sizes: Dict,
                       needed_bytes: int) -> List:
    """Smallest-loss eviction subset: frees at least needed_bytes while
    minimizing the future accesses lost to the evicted blocks (ties: fewer
    bytes evicted, then earliest insertion order)."""
    if needed_bytes <= 0:
        return []
    future_counts: Dict = {}
    for key in future:
        future_counts[key] = future_counts.get(key, 0) + 1
    best = None
    order = {k: i for i, k in enumerate(residents)}
    for r in range(1, len(residents) + 1):
        for combo in combinations(residents, r):
            freed = sum(sizes[k] for k in combo)
            if freed < needed_bytes:
                continue
            lost = sum(future_counts.get(k, 0) for k in combo)
            key = (lost, freed, tuple(sorted(order[k] for k in combo)))
            if best is None or key < best[0]:
                best = (key, list(combo))
    assert best is not None, "eviction cannot free enough space"
    return best[1]


def belady_counterexample(capacity: int = 160) -> dict:
    """The scripted scenario where size-aware eviction beats the classic
    oracle: 32B blocks A/B/C, 64B blocks X/Y, warm state {A,B,C,Y}, then
    accesses X A Y B C (the window scored) followed by B Y A."""
    sizes = {"A": 32, "B": 32, "C": 32, "X": 64, "Y": 64}
    warm = ["A", "B", "C", "Y"]
    accesses = ["X", "A", "Y", "B", "C", "B", "Y", "A"]
    window = slice(1, 5)   # the four accesses after X

    results = {}
    for policy in ("belady", "size_aware"):
        cache = OfflineCache(capacity, sizes, policy)
        cache.warm(warm)
        outcomes = []
        for i, key in enumerate(accesses):
            outcomes.append(cache.access(key, accesses[i + 1:]))
        scored = outcomes[window]
        results[policy] = {
            "hits": sum(scored),
            "misses": len(scored) - sum(scored),
            "all_outcomes": outcomes,
            "final_contents": sorted(cache.contents),
        }
    return results
