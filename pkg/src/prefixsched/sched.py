"""Scheduling policies: FCFS, LPM and k-LPM.

A policy only ever sees the queries that have already arrived (the
``PendingQueue``) and the prompt held in the prefix cache.  k-LPM cycles
through one oldest-first pick followed by ``k - 1`` longest-prefix picks;
the cycle position counts processed queries, so it survives idle gaps.
"""

from __future__ import annotations

import heapq
import math
import random
from dataclasses import dataclass
from typing import Optional, Sequence

from .core import Query
from .prefix import RadixIndex

INF = math.inf


class PendingQueue:
    """Arrived-but-unprocessed queries, indexed both by age and by prefix."""

    def __init__(self, queries: Sequence[Query] = ()):
        self._queries: dict[int, Query] = {}
        self._heap: list[tuple] = []
        self.index = RadixIndex()
        for q in queries:
            self.add(q)

    def __len__(self) -> int:
        return len(self._queries)

    def __contains__(self, qid: int) -> bool:
        return qid in self._queries

    def __iter__(self):
        return iter(self._queries.values())

    def add(self, q: Query) -> None:
        if q.id in self._queries:
            raise KeyError(f"query {q.id} is already pending")
        self._queries[q.id] = q
        heapq.heappush(self._heap, (q.arrival, q.id))
        self.index.insert(q.id, q.prompt)

    def take(self, qid: int) -> Query:
        q = self._queries.pop(qid)
        self.index.remove(qid)
        return q

    def oldest(self) -> int:
        heap = self._heap
        while heap and heap[0][1] not in self._queries:
            heapq.heappop(heap)
        if not heap:
            raise LookupError("no pending queries")
        return heap[0][1]


def fcfs_next(pending: PendingQueue, clock=None) -> int:
    """Oldest pending query; equal arrivals go to the lower id."""
    return pending.oldest()


def lpm_next(pending: PendingQueue, cache: Optional[Sequence[int]], rng: random.Random) -> int:
    if not len(pending):
        raise LookupError("no pending queries")
    qid, _ = pending.index.best_match(cache or (), rng)
    return qid


def klpm_next(pending: PendingQueue, cache, phase: int, k, rng: random.Random) -> int:
    if k != INF and phase % k == 0:
        return fcfs_next(pending)
    return lpm_next(pending, cache, rng)


@dataclass(frozen=True)
class Policy:
    """Immutable policy description; ``scheduler(seed)`` makes a runnable instance."""

    kind: str  # "fcfs" | "lpm" | "klpm"
    k: float = 1

    def __post_init__(self):
        if self.kind not in ("fcfs", "lpm", "klpm"):
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if self.kind == "klpm":
            if self.k != INF and (not isinstance(self.k, int) or self.k < 1):
                raise ValueError(f"k must be a positive integer or inf, got {self.k!r}")

    @property
    def name(self) -> str:
        if self.kind != "klpm":
            return self.kind
        return f"klpm:{'inf' if self.k == INF else self.k}"

    def scheduler(self, seed: int = 0) -> "Scheduler":
        return Scheduler(self, random.Random(seed))


FCFS = Policy("fcfs")
LPM = Policy("lpm")


def klpm(k) -> Policy:
    return Policy("klpm", k)


def parse_policy(text: str) -> Policy:
    """``fcfs``, ``lpm``, ``klpm:<k>`` or ``klpm:inf``."""
    text = text.strip().lower()
    if text in ("fcfs", "lpm"):
        return Policy(text)
    if text.startswith("klpm:"):
        arg = text[5:]
        if arg in ("inf", "infinity", "∞"):
            return klpm(INF)
        try:
            return klpm(int(arg))
        except ValueError:
            pass
    raise ValueError(f"unknown policy {text!r}; expected fcfs, lpm, klpm:<k> or klpm:inf")


class Scheduler:
    """Single-run policy state: the tie-break generator and the k-LPM phase."""

    def __init__(self, policy: Policy, rng: random.Random):
        self.policy = policy
        self.rng = rng
        self.phase = 0

    def select(self, pending: PendingQueue, cache, clock) -> int:
        kind = self.policy.kind
        if kind == "fcfs":
            qid = fcfs_next(pending, clock)
        elif kind == "lpm":
            qid = lpm_next(pending, cache, self.rng)
        else:
            qid = klpm_next(pending, cache, self.phase, self.policy.k, self.rng)
        self.phase += 1
        return qid
