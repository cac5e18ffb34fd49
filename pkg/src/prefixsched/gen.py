"""Query-stream generators.

* ``gen_shuffled``: (user)(doc) prompts with each user prefix repeated
  ``k_rep`` times, arriving every ``s`` time units in a uniformly shuffled order.
* ``gen_3partition_stream``: the stream whose TTFT feasibility at
  ``T = (m + m^2) H`` encodes a 3-PARTITION instance (valid for c_attn = 0).
* ``toy_stream``: the four-query two-user example.
* ``gen_poisson``: the same prompts with exponential inter-arrival gaps.

Token ids are allocated from disjoint ranges so that prompts which are not
supposed to share a prefix differ in their first token.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import asdict, dataclass
from decimal import Decimal

from .core import Query, QueryStream, Time, as_time

BLOCK = 1000
DOC_BASE = 10**6


@dataclass(frozen=True)
class ShuffledQueueParams:
    n: int
    k_rep: int
    u: int
    d: int
    s: Time = 0
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.k_rep < 1:
            raise ValueError("n and k_rep must be positive")
        if self.n % self.k_rep:
            raise ValueError(f"k_rep={self.k_rep} does not divide n={self.n}")
        if self.u < 1 or self.d < 1:
            raise ValueError("u and d must be at least 1")
        s = as_time(self.s)
        if s < 0:
            raise ValueError(f"arrival gap s must be non-negative, got {s}")
        object.__setattr__(self, "s", s)

    def as_dict(self) -> dict:
        out = asdict(self)
        out["s"] = str(self.s)
        return out


def _run(base: int, length: int) -> tuple:
    return tuple(range(base, base + length))


def shuffled_prompts(n: int, k_rep: int, u: int, d: int) -> list[tuple]:
    """Prompt ``i`` (0-based) is user ``i mod (n/k_rep)`` followed by doc ``i``."""
    if n % k_rep:
        raise ValueError(f"k_rep={k_rep} does not divide n={n}")
    users = n // k_rep
    stride = max(BLOCK, u, d)
    doc_base = max(DOC_BASE, users * stride)
    return [_run(stride * (i % users), u) + _run(doc_base + stride * i, d) for i in range(n)]


def gen_shuffled(params: ShuffledQueueParams) -> QueryStream:
    p = params
    prompts = shuffled_prompts(p.n, p.k_rep, p.u, p.d)
    sigma = list(range(1, p.n + 1))
    random.Random(p.seed).shuffle(sigma)
    return QueryStream(tuple(Query(i, prompts[i], p.s * sigma[i]) for i in range(p.n)))


def toy_stream(s: Time = 0) -> QueryStream:
    """x1=(user1)(doc1), x2=(user2)(doc2), x3=(user1)(doc3), x4=(user2)(doc4); u=d=5.

    Query ``x_i`` has id ``i - 1`` and arrives at ``s * i``.
    """
    s = as_time(s)
    prompts = shuffled_prompts(4, 2, 5, 5)
    return QueryStream(tuple(Query(i, prompts[i], s * (i + 1)) for i in range(4)))


def gen_poisson(n: int, rate, *, k_rep: int, u: int, d: int, seed: int = 0, places: int = 9) -> QueryStream:
    """Shuffled prompts with exponential(rate) gaps, rounded to ``places`` decimals."""
    rate = as_time(rate)
    if rate <= 0:
        raise ValueError(f"rate must be positive, got {rate}")
    rng = random.Random(seed)
    prompts = shuffled_prompts(n, k_rep, u, d)
    rng.shuffle(prompts)
    lam = float(rate)
    quantum = Decimal(1).scaleb(-places)
    t = 0.0
    queries = []
    for i in range(n):
        t += rng.expovariate(lam)
        queries.append(Query(i, prompts[i], as_time(Decimal(repr(t)).quantize(quantum))))
    return QueryStream(tuple(queries))


@dataclass(frozen=True)
class PartitionInstance:
    m: int
    H: int
    A: tuple[int, ...]

    def __post_init__(self):
        A = tuple(self.A)
        object.__setattr__(self, "A", A)
        if self.m < 1 or self.H < 1:
            raise ValueError("m and H must be positive")
        if len(A) != 3 * self.m:
            raise ValueError(f"need {3 * self.m} integers, got {len(A)}")
        if sum(A) != self.m * self.H:
            raise ValueError(f"sum(A)={sum(A)} differs from m*H={self.m * self.H}")
        for a in A:
            if not 4 * a > self.H or not 2 * a < self.H:
                raise ValueError(f"{a} is outside (H/4, H/2) for H={self.H}")

    @property
    def T(self) -> int:
        return (self.m + self.m**2) * self.H

    def has_partition(self) -> bool:
        """Exhaustive search for m disjoint triples each summing to H."""
        return _triples(sorted(self.A), self.H)


def _triples(rest: list[int], H: int) -> bool:
    if not rest:
        return True
    first, others = rest[0], rest[1:]
    for i, j in itertools.combinations(range(len(others)), 2):
        if first + others[i] + others[j] == H:
            left = [a for t, a in enumerate(others) if t not in (i, j)]
            if _triples(left, H):
                return True
    return False


def enumerate_instances(max_m: int, max_H: int):
    """Every valid instance with m <= max_m and H <= max_H (A as a sorted multiset)."""
    for m in range(1, max_m + 1):
        for H in range(1, max_H + 1):
            lo, hi = H // 4 + 1, (H - 1) // 2
            vals = [a for a in range(lo, hi + 1) if 4 * a > H and 2 * a < H]
            for A in itertools.combinations_with_replacement(vals, 3 * m):
                if sum(A) == m * H:
                    yield PartitionInstance(m, H, A)


def gen_3partition_stream(inst: PartitionInstance) -> tuple[QueryStream, int]:
    """Hardness construction; returns the stream and its TTFT bound ``T``.

    X: 3m single-token-type prompts of lengths a_i, all arriving at T.
    Y: m prompts of length mH, y_i arriving at i(H + mH).
    Z: copies of Y, z_i arriving at T + i(H + mH).
    w1, w2: length-T prompts arriving at 0 and 2T.
    Ids: w1 = 0, X = 1..3m, Y, Z, then w2.
    """
    m, H = inst.m, inst.H
    T = inst.T
    period = H + m * H
    queries = [Query(0, (0,) * T, 0)]
    tok = 1
    qid = 1
    for a in inst.A:
        queries.append(Query(qid, (tok,) * a, T))
        qid += 1
        tok += 1
    ys = []
    for i in range(1, m + 1):
        ys.append((tok,) * (m * H))
        tok += 1
    for i, y in enumerate(ys, 1):
        queries.append(Query(qid, y, i * period))
        qid += 1
    for i, y in enumerate(ys, 1):
        queries.append(Query(qid, y, T + i * period))
        qid += 1
    queries.append(Query(qid, (tok,) * T, 2 * T))
    return QueryStream(tuple(queries)), T

