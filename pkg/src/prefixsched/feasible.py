"""TTFT feasibility: an exact search and a percentile-constraint algorithm.

``brute_force`` decides whether some processing order gives every query a
TTFT of at most ``T``.  ``percentile_schedule`` either returns an order in
which at least a ``1 - p`` fraction of queries meet ``T`` or certifies that
no order meets ``T`` for all queries.  It splits the stream into blocks of
``ceil(2T/p)`` consecutive arrivals, drops the ``2T`` latest arrivals of
every block but the last, and chains per-block orderings through the only
state that crosses a block boundary: the last prompt processed (and, since
we simulate the chain exactly, the time the block finished).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Hashable, Mapping, Optional, Sequence, Union

from .core import Query, QueryStream, Schedule, Time, as_time
from .prefix import overlap
from .sim import SimConfig, cost_of, run_fixed

EMPTY = None  # cache-initialization vertex for the first block
DEFAULT_LIMIT = 10


class InstanceTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class Feasible:
    schedule: Schedule
    satisfied_count: int

    feasible = True


@dataclass(frozen=True)
class Infeasible:
    certificate: str

    feasible = False


FeasibilityOutcome = Union[Feasible, Infeasible]


# --- exact search -------------------------------------------------------------

def _cost_matrix(queries: Sequence[Query], cfg: SimConfig) -> list[list[Time]]:
    """``m[j][i]``: cost of query i right after query j; row ``n`` is the empty cache."""
    n = len(queries)
    rows = [[cost_of(queries[j].prompt, q.prompt, cfg.cost) for q in queries] for j in range(n)]
    rows.append([cost_of(None, q.prompt, cfg.cost) for q in queries])
    return rows


def brute_force(
    stream: QueryStream,
    T,
    cfg: SimConfig = SimConfig(),
    *,
    limit: int = DEFAULT_LIMIT,
    prune: bool = True,
) -> FeasibilityOutcome:
    """Exact decision: is there an order with every TTFT <= T?

    With ``prune`` the search is depth-first in deadline order and cuts a
    branch when (a) some unprocessed query cannot finish by its deadline
    even with its cheapest possible predecessor, or (b) the same set of
    processed queries with the same last query was already reached no later.
    Without it every permutation is simulated.
    """
    T = as_time(T)
    qs = stream.queries
    n = len(qs)
    if n > limit:
        raise InstanceTooLarge(f"instance too large for exact search ({n} > {limit} queries)")
    if n == 0:
        return Feasible(Schedule(()), 0)
    if not prune:
        return _enumerate_all(stream, T, cfg)

    cost = _cost_matrix(qs, cfg)
    arrival = [q.arrival for q in qs]
    deadline = [a + T for a in arrival]
    cheapest = [min(cost[j][i] for j in range(n + 1) if j != i) for i in range(n)]
    full = (1 << n) - 1
    seen: dict[tuple[int, int], Time] = {}
    path: list[int] = []
    visited = 0

    def dfs(mask: int, last: int, clock: Time) -> bool:
        nonlocal visited
        if mask == full:
            return True
        key = (mask, last)
        prev = seen.get(key)
        if prev is not None and prev <= clock:
            return False
        seen[key] = clock
        visited += 1
        for i in range(n):
            if not mask >> i & 1 and max(clock, arrival[i]) + cheapest[i] > deadline[i]:
                return False
        row = cost[last]
        for i in range(n):
            if mask >> i & 1:
                continue
            done = max(clock, arrival[i]) + row[i]
            if done > deadline[i]:
                continue
            path.append(i)
            if dfs(mask | 1 << i, i, done):
                return True
            path.pop()
        return False

    if dfs(0, n, cfg.clock0):
        return Feasible(Schedule(tuple(qs[i].id for i in path)), n)
    return Infeasible(
        f"exhaustive search over {n} queries: no order meets TTFT <= {T} "
        f"({visited} search states expanded)"
    )


def _enumerate_all(stream: QueryStream, T: Time, cfg: SimConfig) -> FeasibilityOutcome:
    count = 0
    for order in itertools.permutations(stream.ids):
        count += 1
        if run_fixed(stream, order, cfg).max_ttft <= T:
            return Feasible(Schedule(order), len(order))
    return Infeasible(f"all {count} orders exceed TTFT {T}")


# --- block decomposition ------------------------------------------------------

@dataclass(frozen=True)
class BlockDecomposition:
    n0: int
    blocks: tuple[tuple[Query, ...], ...]
    removal: tuple[int, ...]

    @property
    def d(self) -> int:
        return len(self.blocks)

    @property
    def reduced(self) -> tuple[tuple[Query, ...], ...]:
        return tuple(b[: len(b) - r] for b, r in zip(self.blocks, self.removal))

    @property
    def removed(self) -> tuple[Query, ...]:
        return tuple(q for b, r in zip(self.blocks, self.removal) for q in b[len(b) - r:])


def _check_prefix_free(stream: QueryStream) -> None:
    prompts = sorted(q.prompt for q in stream)
    for a, b in zip(prompts, prompts[1:]):
        if overlap(a, b) == len(a):
            raise ValueError("some prompt is an exact prefix of another (or a duplicate)")


def _check_integer_T(T) -> int:
    T = as_time(T)
    if not isinstance(T, int) or T < 1:
        raise ValueError(f"T must be a positive integer number of token-time units, got {T}")
    return T


def decompose(stream: QueryStream, T, p, *, max_len: Optional[int] = None) -> BlockDecomposition:
    T = _check_integer_T(T)
    p = Fraction(as_time(p))
    if not 0 < p < 1:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    if max_len is not None and any(len(q) > max_len for q in stream):
        raise ValueError(f"a prompt is longer than the configured maximum {max_len}")
    _check_prefix_free(stream)
    n0 = math.ceil(2 * T / p)
    qs = stream.queries
    blocks = tuple(qs[i:i + n0] for i in range(0, len(qs), n0))
    removal = tuple(min(2 * T, len(b)) for b in blocks[:-1]) + ((0,) if blocks else ())
    return BlockDecomposition(n0, blocks, removal)


@dataclass(frozen=True)
class TransitionEdge:
    source: Hashable  # query id, or EMPTY
    target: int
    block: int


@dataclass(frozen=True)
class Witness:
    order: tuple[int, ...]
    end: Time


def block_transitions(
    block: Sequence[Query],
    cache_inits: Mapping[Hashable, Optional[Sequence[int]]],
    T,
    window: Union[Time, Mapping[Hashable, Time]] = 0,
    *,
    cfg: SimConfig = SimConfig(),
    block_index: int = 0,
) -> dict[TransitionEdge, Witness]:
    """Every feasible (cache init, last query) pair for one block.

    ``cache_inits`` maps an init vertex to the prompt it leaves in the
    cache; ``window`` gives the earliest time the block may start (one
    value, or one per init).  Orderings are explored as a DP over subsets
    keeping the earliest finish per (subset, last query); an edge carries one
    witness ordering attaining that earliest finish.
    """
    T = as_time(T)
    qs = list(block)
    m = len(qs)
    full = (1 << m) - 1
    arrival = [q.arrival for q in qs]
    inner = [[cost_of(a.prompt, b.prompt, cfg.cost) for b in qs] for a in qs]
    edges: dict[TransitionEdge, Witness] = {}
    for src, prompt in cache_inits.items():
        start = window[src] if isinstance(window, Mapping) else window
        first = [cost_of(prompt, q.prompt, cfg.cost) for q in qs]
        # layer[(mask, last)] = (finish, parent key)
        layers: list[dict] = [{(0, -1): (start, None)}]
        for _ in range(m):
            nxt: dict = {}
            for key, (clock, _) in layers[-1].items():
                mask, last = key
                row = first if last < 0 else inner[last]
                for i in range(m):
                    if mask >> i & 1:
                        continue
                    done = max(clock, arrival[i]) + row[i]
                    if done - arrival[i] > T:
                        continue
                    k2 = (mask | 1 << i, i)
                    cur = nxt.get(k2)
                    if cur is None or done < cur[0]:
                        nxt[k2] = (done, key)
            layers.append(nxt)
            if not nxt:
                break
        if len(layers) != m + 1:
            continue
        for key, (end, _) in layers[m].items():
            order = []
            k, depth = key, m
            while depth > 0:
                order.append(qs[k[1]].id)
                k = layers[depth][k][1]
                depth -= 1
            order.reverse()
            edges[TransitionEdge(src, qs[key[1]].id, block_index)] = Witness(tuple(order), end)
    return edges


def percentile_schedule(
    stream: QueryStream,
    T,
    p,
    *,
    max_len: Optional[int] = None,
    cfg: SimConfig = SimConfig(),
) -> FeasibilityOutcome:
    """Schedule meeting T for a (1 - p) fraction of queries, or a certificate.

    Infeasible means no order meets T for *all* queries.  Requires
    c_attn = 0, an integer T, and a prefix-free set of prompts.
    """
    if cfg.cost.c_attn != 0:
        raise ValueError("the percentile algorithm is only valid for c_attn = 0")
    if cfg.batch_bin:
        raise ValueError("batch binning is not supported here")
    dec = decompose(stream, T, p, max_len=max_len)
    T = as_time(T)
    if not stream.queries:
        return Feasible(Schedule(()), 0)
    prompts = {q.id: q.prompt for q in stream}
    # vertex -> (finish time, predecessor vertex, witness order)
    layer: dict[Hashable, tuple] = {EMPTY: (cfg.clock0, None, ())}
    history = []
    for k, block in enumerate(dec.reduced):
        inits = {v: (None if v is EMPTY else prompts[v]) for v in layer}
        window = {v: layer[v][0] for v in layer}
        edges = block_transitions(block, inits, T, window, cfg=cfg, block_index=k)
        nxt: dict[Hashable, tuple] = {}
        for edge, wit in edges.items():
            cur = nxt.get(edge.target)
            if cur is None or wit.end < cur[0]:
                nxt[edge.target] = (wit.end, edge.source, wit.order)
        if not nxt:
            return Infeasible(
                f"block {k + 1} of {dec.d} (reduced to {len(block)} queries) has no ordering "
                f"meeting TTFT <= {T} from any of {len(layer)} reachable cache states; "
                f"hence no order of all {len(stream)} queries meets TTFT <= {T}"
            )
        history.append(nxt)
        layer = nxt
    vertex = min(layer, key=lambda v: (layer[v][0], v))
    pieces = []
    for step in reversed(history):
        _, pred, order = step[vertex]
        pieces.append(order)
        vertex = pred
    order = [qid for piece in reversed(pieces) for qid in piece]
    order.extend(q.id for q in dec.removed)
    schedule = Schedule(tuple(order))
    result = run_fixed(stream, schedule, cfg)
    return Feasible(schedule, result.satisfied(T))
