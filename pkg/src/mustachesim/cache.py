"""Fixed-capacity page cache with pluggable victim-selection policies."""

from __future__ import annotations

import math
import random
from collections import OrderedDict
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .trace import MemoryAccess, Op

DEFAULT_ADDRESS_BITS = 32


class PolicyContractError(RuntimeError):
    """A policy broke its contract (e.g. returned a non-resident victim)."""


@dataclass(frozen=True)
class CacheConfig:
    num_frames: int
    page_size: int = 4096
    address_bits: int = DEFAULT_ADDRESS_BITS

    def __post_init__(self):
        if self.num_frames < 1:
            raise ValueError(f"need at least 1 frame, got {self.num_frames}")
        if self.page_size < 1 or self.page_size & (self.page_size - 1):
            raise ValueError(f"page_size must be a power of two, got {self.page_size}")

    @property
    def num_pages(self) -> int:
        """Size of the page universe L = 2^address_bits / page_size."""
        return (1 << self.address_bits) // self.page_size

    @property
    def cache_bytes(self) -> int:
        return self.num_frames * self.page_size

    @classmethod
    def from_cache_kib(
        cls, cache_kib: int, page_size: int = 4096, address_bits: int = DEFAULT_ADDRESS_BITS
    ) -> "CacheConfig":
        frames = cache_kib * 1024 // page_size
        if frames < 1:
            raise ValueError(f"{cache_kib}KiB holds no {page_size}-byte frame")
        return cls(frames, page_size, address_bits)


class OutcomeKind(Enum):
    HIT = "hit"
    COLD_MISS = "cold_miss"
    EVICT_MISS = "evict_miss"


class AccessOutcome:
    __slots__ = ("kind", "victim", "victim_was_dirty")

    def __init__(self, kind, victim=None, victim_was_dirty=False):
        self.kind = kind
        self.victim = victim
        self.victim_was_dirty = victim_was_dirty

    def __repr__(self):
        return f"AccessOutcome({self.kind.value}, victim={self.victim}, dirty={self.victim_was_dirty})"

    def __eq__(self, other):
        return (
            isinstance(other, AccessOutcome)
            and self.kind == other.kind
            and self.victim == other.victim
            and self.victim_was_dirty == other.victim_was_dirty
        )


@dataclass
class EvictionContext:
    """What a policy may look at when choosing a victim."""

    time: int
    history: Sequence[MemoryAccess]
    current: MemoryAccess


class VictimPolicy:
    """Victim-selection interface; hooks keep per-policy metadata in step.

    choose_victim is only called on a full cache and must return a resident
    page; `among`, when given, restricts the choice to that subset (only
    policies usable as a forecast fallback support it).
    """

    name = "base"
    supports_restrict = False

    def on_hit(self, page: int, ctx: EvictionContext) -> None:
        pass

    def on_insert(self, page: int, ctx: EvictionContext) -> None:
        pass

    def on_evict(self, page: int, ctx: EvictionContext) -> None:
        pass

    def choose_victim(self, cache: "Cache", ctx: EvictionContext, among=None) -> int:
        raise NotImplementedError


class Cache:
    """Resident page set + dirty bits; policy metadata lives in the policy."""

    def __init__(self, config: CacheConfig):
        self.config = config
        self.resident: set[int] = set()
        self.dirty: set[int] = set()

    def access(self, request: MemoryAccess, policy: VictimPolicy, ctx: EvictionContext) -> AccessOutcome:
        page = request.page
        is_write = request.op is Op.WRITE
        if page in self.resident:
            policy.on_hit(page, ctx)
            if is_write:
                self.dirty.add(page)
            return AccessOutcome(OutcomeKind.HIT)
        if len(self.resident) < self.config.num_frames:
            self.resident.add(page)
            if is_write:
                self.dirty.add(page)
            policy.on_insert(page, ctx)
            return AccessOutcome(OutcomeKind.COLD_MISS)
        victim = policy.choose_victim(self, ctx)
        if victim not in self.resident:
            raise PolicyContractError(
                f"{policy.name} chose non-resident victim {victim}"
            )
        victim_was_dirty = victim in self.dirty
        self.resident.discard(victim)
        self.dirty.discard(victim)
        policy.on_evict(victim, ctx)
        self.resident.add(page)
        if is_write:
            self.dirty.add(page)
        policy.on_insert(page, ctx)
        return AccessOutcome(OutcomeKind.EVICT_MISS, victim, victim_was_dirty)


def _restricted(order, among):
    for page in order:
        if page in among:
            return page
    raise PolicyContractError("restriction excludes every tracked page")


class RandomPolicy(VictimPolicy):
    """Uniform choice among resident pages, from a seeded generator."""

    name = "random"
    supports_restrict = True

    def __init__(self, seed: int | None = None):
        self._rng = random.Random(seed)

    def choose_victim(self, cache, ctx, among=None):
        pool = cache.resident if among is None else among
        return self._rng.choice(sorted(pool))


class FifoPolicy(VictimPolicy):
    """Evict in insertion order; hits never reorder."""

    name = "fifo"
    supports_restrict = True

    def __init__(self):
        self._queue: OrderedDict[int, None] = OrderedDict()

    def on_insert(self, page, ctx):
        self._queue[page] = None

    def on_evict(self, page, ctx):
        self._queue.pop(page, None)

    def choose_victim(self, cache, ctx, among=None):
        if among is None:
            return next(iter(self._queue))
        return _restricted(self._queue, among)


class LruPolicy(VictimPolicy):
    """Evict the least recently referenced page."""

    name = "lru"
    supports_restrict = True

    def __init__(self):
        self._order: OrderedDict[int, None] = OrderedDict()

    def on_hit(self, page, ctx):
        self._order.move_to_end(page)

    def on_insert(self, page, ctx):
        self._order[page] = None

    def on_evict(self, page, ctx):
        self._order.pop(page, None)

    def choose_victim(self, cache, ctx, among=None):
        if among is None:
            return next(iter(self._order))
        return _restricted(self._order, among)


class ClockPolicy(VictimPolicy):
    """Second-chance FIFO: a set reference bit buys one sweep of survival.

    Bits are set on load and on every hit; the hand starts at frame 0 and
    advances past each chosen victim.
    """

    name = "clock"

    def __init__(self):
        self._frames: list[int] = []
        self._ref: dict[int, bool] = {}
        self._hand = 0
        self._free_slot: int | None = None

    def on_hit(self, page, ctx):
        self._ref[page] = True

    def on_insert(self, page, ctx):
        if self._free_slot is None:
            self._frames.append(page)
        else:
            self._frames[self._free_slot] = page
            self._free_slot = None
        self._ref[page] = True

    def on_evict(self, page, ctx):
        self._ref.pop(page, None)

    def choose_victim(self, cache, ctx, among=None):
        if among is not None:
            raise PolicyContractError("clock does not support restricted choice")
        while True:
            page = self._frames[self._hand]
            if self._ref.get(page, False):
                self._ref[page] = False
                self._hand = (self._hand + 1) % len(self._frames)
            else:
                self._free_slot = self._hand
                self._hand = (self._hand + 1) % len(self._frames)
                return page


class ArcPolicy(VictimPolicy):
    """Adaptive replacement: a recency list T1 and a frequency list T2 plus
    ghost histories B1/B2 steering the target size p of T1.

    Ghost hits grow or shrink p by max(1, |B2|/|B1|) or max(1, |B1|/|B2|),
    clamped to [0, K]. Replacement takes the LRU of T1 when
    |T1| >= max(1, p) (or on a B2 ghost hit with |T1| == p), else the LRU
    of T2. Directory size is bounded by 2K.
    """

    name = "arc"

    def __init__(self, num_frames: int):
        self.capacity = num_frames
        self.t1: OrderedDict[int, None] = OrderedDict()
        self.t2: OrderedDict[int, None] = OrderedDict()
        self.b1: OrderedDict[int, None] = OrderedDict()
        self.b2: OrderedDict[int, None] = OrderedDict()
        self.p = 0.0
        # Set by choose_victim, consumed by the on_evict/on_insert hooks.
        self._victim_ghost: OrderedDict[int, None] | None = None
        self._promote_to_t2 = False

    def on_hit(self, page, ctx):
        if page in self.t1:
            del self.t1[page]
            self.t2[page] = None
        else:
            self.t2.move_to_end(page)

    def on_insert(self, page, ctx):
        if self._promote_to_t2 or page in self.b1 or page in self.b2:
            self.b1.pop(page, None)
            self.b2.pop(page, None)
            self.t2[page] = None
        else:
            self.t1[page] = None
        self._promote_to_t2 = False

    def on_evict(self, page, ctx):
        if page in self.t1:
            del self.t1[page]
        else:
            self.t2.pop(page, None)
        if self._victim_ghost is not None:
            self._victim_ghost[page] = None
            self._victim_ghost = None

    def _replace(self, requested_in_b2: bool) -> int:
        t1_len = len(self.t1)
        if t1_len >= 1 and (
            t1_len >= max(1.0, self.p) or (requested_in_b2 and t1_len == self.p)
        ):
            self._victim_ghost = self.b1
            return next(iter(self.t1))
        self._victim_ghost = self.b2
        return next(iter(self.t2))

    def choose_victim(self, cache, ctx, among=None):
        if among is not None:
            raise PolicyContractError("arc does not support restricted choice")
        x = ctx.current.page
        cap = self.capacity
        if x in self.b1:
            self.p = min(float(cap), self.p + max(1.0, len(self.b2) / len(self.b1)))
            self._promote_to_t2 = True
            return self._replace(False)
        if x in self.b2:
            self.p = max(0.0, self.p - max(1.0, len(self.b1) / len(self.b2)))
            self._promote_to_t2 = True
            return self._replace(True)
        # Brand-new page: trim the directory before replacing.
        l1 = len(self.t1) + len(self.b1)
        if l1 == cap:
            if len(self.t1) < cap:
                self.b1.popitem(last=False)
                return self._replace(False)
            # B1 empty, T1 fills the cache: the victim leaves no ghost.
            self._victim_ghost = None
            return next(iter(self.t1))
        if l1 + len(self.t2) + len(self.b2) >= 2 * cap:
            self.b2.popitem(last=False)
        return self._replace(False)


class OptPolicy(VictimPolicy):
    """Clairvoyant eviction: victim is the resident page whose next use lies
    farthest in the future (never-used-again beats everything; those ties
    break toward the smallest page id).
    """

    name = "opt"

    def __init__(self, next_use: Sequence[float]):
        self._next_use = next_use
        self._resident_next: dict[int, float] = {}

    def _touch(self, page, ctx):
        self._resident_next[page] = self._next_use[ctx.time]

    on_hit = _touch
    on_insert = _touch

    def on_evict(self, page, ctx):
        self._resident_next.pop(page, None)

    def choose_victim(self, cache, ctx, among=None):
        if among is not None:
            raise PolicyContractError("opt does not support restricted choice")
        nxt = self._resident_next
        return max(nxt, key=lambda p: (nxt[p], -p))


def precompute_next_use(accesses: Sequence[MemoryAccess]) -> list[float]:
    """table[t] = first index t' > t referencing the same page, else inf."""
    table = [math.inf] * len(accesses)
    last_seen: dict[int, int] = {}
    for t in range(len(accesses) - 1, -1, -1):
        page = accesses[t].page
        if page in last_seen:
            table[t] = last_seen[page]
        last_seen[page] = t
    return table
