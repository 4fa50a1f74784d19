"""Hierarchical memory: a bounded LRU fast pool backed by an unbounded deep store.

New records land in the fast pool. When the pool overflows its capacity C,
the ``C // 2`` least recently accessed records (ties: smaller id first) are
migrated to the deep store in one batch. Retrieval scans the fast pool with
a similarity threshold, falls back to the deep store for any shortfall, and
promotes deep hits back into the fast pool.

The class is not thread-safe. ``retrieve`` mutates recency and may promote,
so every operation counts as a write; serialize access externally.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

from ehc.embedding import DEFAULT_DIM, EmbeddingVector, cosine_sim
from ehc.errors import ConfigError, NotFoundError, UsageError

log = logging.getLogger(__name__)

KINDS = ("success", "failure", "seed")
FAST = "fast"
DEEP = "deep"

_ID_MAX = (1 << 64) - 1


@dataclass
class MemoryRecord:
    """One stored trajectory or exemplar.

    ``embedding`` is the embedding of the task content that produced the
    record, while ``content`` is the trajectory text shown in prompts.
    ``created_at`` and ``last_access`` are assigned by the memory on store.
    """

    id: int
    category: str
    kind: str
    content: str
    embedding: EmbeddingVector
    reflections: Optional[str] = None
    created_at: int = 0
    last_access: int = 0
    task_id: Optional[str] = None

    def __post_init__(self) -> None:
        if not isinstance(self.id, int) or not 0 <= self.id <= _ID_MAX:
            raise UsageError(f"record id must be an unsigned 64-bit integer, got {self.id!r}")
        if self.kind not in KINDS:
            raise UsageError(f"record kind must be one of {KINDS}, got {self.kind!r}")
        has_reflections = bool(self.reflections)
        if (self.kind == "failure") != has_reflections:
            raise UsageError(
                f"record {self.id}: failure records need non-empty reflections "
                "and only failure records may carry them"
            )
        if self.reflections == "":
            self.reflections = None
        self.embedding = tuple(float(x) for x in self.embedding)
        if self.last_access < self.created_at:
            raise UsageError(f"record {self.id}: last_access precedes created_at")


@dataclass(frozen=True)
class StoreReceipt:
    tier_placed: str
    evicted_ids: list[int]


@dataclass(frozen=True)
class RetrievedEntry:
    record: MemoryRecord
    similarity: float
    tier: str


@dataclass
class RetrievalResult:
    entries: list[RetrievedEntry]
    query_embedding: EmbeddingVector

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[RetrievedEntry]:
        return iter(self.entries)

    @property
    def records(self) -> list[MemoryRecord]:
        return [e.record for e in self.entries]

    def summary(self) -> list[tuple[int, float, str]]:
        """(id, similarity, tier) triples; handy for equality checks."""
        return [(e.record.id, e.similarity, e.tier) for e in self.entries]


@dataclass
class PoolStats:
    fast_count: int = 0
    deep_count: int = 0
    evictions_total: int = 0
    promotions_total: int = 0
    fast_hits: int = 0
    deep_hits: int = 0

    def as_dict(self) -> dict[str, int]:
        return {
            "fast_count": self.fast_count,
            "deep_count": self.deep_count,
            "evictions_total": self.evictions_total,
            "promotions_total": self.promotions_total,
            "fast_hits": self.fast_hits,
            "deep_hits": self.deep_hits,
        }


def _rank_key(item: tuple[float, MemoryRecord]) -> tuple[float, int]:
    return (-item[0], item[1].id)


@dataclass
class HierarchicalMemory:
    capacity: int = 16
    dim: int = DEFAULT_DIM
    deep_theta_gate: bool = False
    clock: int = 0
    _fast: dict[int, MemoryRecord] = field(default_factory=dict, init=False, repr=False)
    _deep: dict[int, MemoryRecord] = field(default_factory=dict, init=False, repr=False)
    _counters: PoolStats = field(default_factory=PoolStats, init=False, repr=False)

    def __post_init__(self) -> None:
        if not isinstance(self.capacity, int) or self.capacity < 2:
            raise ConfigError(f"fast-pool capacity must be an integer >= 2, got {self.capacity!r}")
        if self.dim < 1:
            raise ConfigError(f"embedding dim must be positive, got {self.dim}")

    # -- inspection -------------------------------------------------------

    def __len__(self) -> int:
        return len(self._fast) + len(self._deep)

    def __contains__(self, record_id: int) -> bool:
        return record_id in self._fast or record_id in self._deep

    def tier_of(self, record_id: int) -> str:
        if record_id in self._fast:
            return FAST
        if record_id in self._deep:
            return DEEP
        raise NotFoundError(f"no record with id {record_id}")

    def get(self, record_id: int) -> MemoryRecord:
        rec = self._fast.get(record_id) or self._deep.get(record_id)
        if rec is None:
            raise NotFoundError(f"no record with id {record_id}")
        return rec

    def fast_ids(self) -> set[int]:
        return set(self._fast)

    def deep_ids(self) -> set[int]:
        return set(self._deep)

    def records(self, category: Optional[str] = None) -> list[MemoryRecord]:
        """All records across both tiers, ordered by id. Does not touch recency."""
        recs = [*self._fast.values(), *self._deep.values()]
        if category is not None:
            recs = [r for r in recs if r.category == category]
        return sorted(recs, key=lambda r: r.id)

    def next_id(self) -> int:
        ids = [*self._fast, *self._deep]
        return max(ids) + 1 if ids else 1

    def stats(self) -> PoolStats:
        c = self._counters
        return PoolStats(
            fast_count=len(self._fast),
            deep_count=len(self._deep),
            evictions_total=c.evictions_total,
            promotions_total=c.promotions_total,
            fast_hits=c.fast_hits,
            deep_hits=c.deep_hits,
        )

    # -- mutation ---------------------------------------------------------

    def store(self, record: MemoryRecord) -> StoreReceipt:
        if record.id in self:
            raise UsageError(f"duplicate record id {record.id}")
        if len(record.embedding) != self.dim:
            raise UsageError(
                f"record {record.id} embedding has dim {len(record.embedding)}, memory expects {self.dim}"
            )
        self.clock += 1
        record.created_at = self.clock
        record.last_access = self.clock
        self._fast[record.id] = record
        evicted = self._enforce_capacity(newcomer=record.id)
        return StoreReceipt(tier_placed=FAST, evicted_ids=evicted)

    def promote(self, record_id: int) -> list[int]:
        """Move a deep record into the fast pool. Returns ids demoted by the move."""
        if record_id not in self._deep:
            raise NotFoundError(f"record {record_id} is not in the deep store")
        self.clock += 1
        return self._promote(record_id)

    def _promote(self, record_id: int) -> list[int]:
        rec = self._deep.pop(record_id)
        rec.last_access = self.clock
        self._fast[record_id] = rec
        self._counters.promotions_total += 1
        return self._enforce_capacity(newcomer=record_id)

    def _enforce_capacity(self, newcomer: int) -> list[int]:
        # insert-then-evict: the record just inserted is never its own victim
        if len(self._fast) <= self.capacity:
            return []
        candidates = sorted(
            (r for r in self._fast.values() if r.id != newcomer),
            key=lambda r: (r.last_access, r.id),
        )
        victims = candidates[: self.capacity // 2]
        for rec in victims:
            del self._fast[rec.id]
            self._deep[rec.id] = rec
        self._counters.evictions_total += len(victims)
        if victims:
            log.debug("migrated %d records to deep store: %s", len(victims), [r.id for r in victims])
        return [r.id for r in victims]

    # -- retrieval --------------------------------------------------------

    def search(
        self,
        query: Sequence[float],
        category: Optional[str] = None,
        k: int = 1,
        theta: float = 0.7,
    ) -> RetrievalResult:
        """Two-step retrieval without side effects (no recency refresh, no promotion)."""
        if k < 1:
            raise UsageError(f"k must be >= 1, got {k}")
        if not -1.0 <= theta <= 1.0:
            raise UsageError(f"theta must lie in [-1, 1], got {theta}")
        query = tuple(float(x) for x in query)

        def scored(pool: dict[int, MemoryRecord]) -> list[tuple[float, MemoryRecord]]:
            return [
                (cosine_sim(query, r.embedding), r)
                for r in pool.values()
                if category is None or r.category == category
            ]

        fast = sorted((s for s in scored(self._fast) if s[0] > theta), key=_rank_key)[:k]
        entries = [RetrievedEntry(r, s, FAST) for s, r in fast]
        shortfall = k - len(entries)
        if shortfall > 0:
            deep = scored(self._deep)
            if self.deep_theta_gate:
                deep = [s for s in deep if s[0] > theta]
            deep.sort(key=_rank_key)
            entries += [RetrievedEntry(r, s, DEEP) for s, r in deep[:shortfall]]
        entries.sort(key=lambda e: (-e.similarity, e.record.id))
        return RetrievalResult(entries=entries, query_embedding=query)

    def retrieve(
        self,
        query: Sequence[float],
        category: Optional[str] = None,
        k: int = 1,
        theta: float = 0.7,
    ) -> RetrievalResult:
        result = self.search(query, category, k, theta)
        self.clock += 1
        for entry in result.entries:
            if entry.tier == FAST:
                entry.record.last_access = self.clock
                self._counters.fast_hits += 1
        for entry in result.entries:
            if entry.tier == DEEP:
                self._counters.deep_hits += 1
                self._promote(entry.record.id)
        return result

    # -- persistence ------------------------------------------------------

    def persist(self, path, insights=None) -> None:
        from ehc.store import save_store

        save_store(path, self, insights)

    @classmethod
    def load(cls, path) -> "HierarchicalMemory":
        from ehc.store import load_store

        return load_store(path)[0]
