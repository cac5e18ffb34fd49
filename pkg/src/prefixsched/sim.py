"""Single-instance prefill simulator with a one-prompt prefix cache.

A query's cost is ``(1 + c_attn*|x|) * (|x| - overlap(x, prev))`` where
``prev`` is the prompt processed immediately before it (the cache holds
nothing else, and keeps it across idle gaps).  A query starts at the later
of the previous completion, its own arrival, and the global start time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .core import (
    CostModel,
    QueryRecord,
    QueryStream,
    Schedule,
    SimResult,
    Time,
    as_time,
)
from .prefix import overlap
from .sched import PendingQueue, Policy


@dataclass(frozen=True)
class SimConfig:
    """``start_at=None`` starts immediately; a time T holds every query until T."""

    cost: CostModel = CostModel()
    start_at: Optional[Time] = None
    batch_bin: Optional[int] = None

    def __post_init__(self):
        if self.start_at is not None:
            T = as_time(self.start_at)
            if T < 0:
                raise ValueError(f"delayed start must be non-negative, got {T}")
            object.__setattr__(self, "start_at", T)
        if self.batch_bin is not None and self.batch_bin < 1:
            raise ValueError(f"batch bin size must be positive, got {self.batch_bin}")

    @property
    def clock0(self) -> Time:
        return 0 if self.start_at is None else self.start_at


def parse_start(text: str) -> Optional[Time]:
    """``immediate`` -> None, ``delayed:T`` -> T."""
    text = text.strip().lower()
    if text == "immediate":
        return None
    if text.startswith("delayed:"):
        return as_time(text[8:])
    raise ValueError(f"start mode must be 'immediate' or 'delayed:<T>', got {text!r}")


def cost_of(prev: Optional[Sequence[int]], cur: Sequence[int], cost: CostModel = CostModel()) -> Time:
    if not cur:
        raise ValueError("empty prompt")
    n = len(cur)
    fresh = n - (overlap(cur, prev) if prev else 0)
    c = cost.c_attn
    if not c:
        return fresh
    return as_time((1 + c * n) * fresh)


def run_fixed(stream: QueryStream, schedule: Schedule | Sequence[int], cfg: SimConfig = SimConfig()) -> SimResult:
    if not isinstance(schedule, Schedule):
        schedule = Schedule(tuple(schedule))
    schedule.check_against(stream)
    queries = stream.by_id()
    clock = cfg.clock0
    prev = None
    records = []
    for qid in schedule.order:
        q = queries[qid]
        start = clock if clock >= q.arrival else q.arrival
        clock = start + cost_of(prev, q.prompt, cfg.cost)
        records.append(QueryRecord(qid, q.arrival, start, clock))
        prev = q.prompt
    result = SimResult(tuple(records))
    if cfg.batch_bin:
        result = batchify(result, cfg.batch_bin)
    return result


def run_policy(stream: QueryStream, policy: Policy, cfg: SimConfig = SimConfig(), seed: int = 0) -> tuple[Schedule, SimResult]:
    """Online execution: the policy sees only queries that have arrived."""
    sched = policy.scheduler(seed)
    queries = stream.queries
    pending = PendingQueue()
    clock = cfg.clock0
    prev = None
    records = []
    nxt = 0
    n = len(queries)
    while len(records) < n:
        while nxt < n and queries[nxt].arrival <= clock:
            pending.add(queries[nxt])
            nxt += 1
        if not len(pending):
            clock = queries[nxt].arrival
            continue
        qid = sched.select(pending, prev, clock)
        if qid not in pending:
            raise RuntimeError(f"policy {policy.name} selected id {qid}, which is not pending")
        q = pending.take(qid)
        start = clock
        clock = start + cost_of(prev, q.prompt, cfg.cost)
        records.append(QueryRecord(qid, q.arrival, start, clock))
        prev = q.prompt
    result = SimResult(tuple(records))
    if cfg.batch_bin:
        result = batchify(result, cfg.batch_bin)
    return Schedule(result.order), result


def batchify(result: SimResult, B: int, schedule: Schedule | None = None) -> SimResult:
    """Bin consecutive processed queries in groups of ``B``.

    Every query in a bin completes when the bin's last query completes; the
    final partial bin ends with the last query overall.  Starts are kept.
    """
    if B < 1:
        raise ValueError(f"bin size must be positive, got {B}")
    recs = result.records
    if schedule is not None and tuple(schedule.order) != result.order:
        raise ValueError("schedule does not match the result's processing order")
    n = len(recs)
    out = []
    for i, r in enumerate(recs, 1):
        last = min(math.ceil(i / B) * B, n)
        out.append(QueryRecord(r.id, r.arrival, r.start, recs[last - 1].completion))
    return SimResult(tuple(out))
