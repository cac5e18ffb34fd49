"""Domain types, exact time arithmetic, and TTFT percentile metrics.

Times are measured in token-time units: one unit is the time needed to
prefill a single token when the attention term is switched off.  All times
are exact rationals (``int`` when integral, ``Fraction`` otherwise) so that
analytic identities can be checked with ``==``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Iterator, Sequence, Union

Time = Union[int, Fraction]
TokenSeq = tuple  # tuple[int, ...]; kept as a plain alias for speed

SUMMARY_PERCENTILES: tuple[Fraction, ...] = (
    Fraction(1, 2),
    Fraction(9, 10),
    Fraction(95, 100),
    Fraction(99, 100),
)


class StreamError(ValueError):
    """Malformed query stream (duplicate ids, bad tokens, negative arrivals)."""


def as_time(value) -> Time:
    """Convert ``value`` to an exact time.

    Accepts ints, Fractions, Decimals, decimal strings (``"2.5"``) and
    fraction strings (``"5/2"``).  Floats are converted through their
    shortest ``repr`` so ``0.1`` means one tenth, not the binary value.
    """
    if isinstance(value, bool):
        raise TypeError("bool is not a time")
    if isinstance(value, int):
        return value
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"non-finite time {value!r}")
        value = Fraction(repr(value))
    elif isinstance(value, (Decimal, str)):
        value = Fraction(str(value).strip())
    elif not isinstance(value, Fraction):
        value = Fraction(value)
    return value.numerator if value.denominator == 1 else value


def fmt_time(t: Time) -> str:
    """Exact decimal rendering of ``t``; ``"p/q"`` if the expansion never ends."""
    t = Fraction(t)
    if t.denominator == 1:
        return str(t.numerator)
    q = t.denominator
    twos = fives = 0
    while q % 2 == 0:
        q //= 2
        twos += 1
    while q % 5 == 0:
        q //= 5
        fives += 1
    if q != 1:
        return f"{t.numerator}/{t.denominator}"
    places = max(twos, fives)
    scaled = abs(t.numerator) * 10**places // t.denominator
    digits = str(scaled).rjust(places + 1, "0")
    body = f"{digits[:-places]}.{digits[-places:]}".rstrip("0")
    return ("-" if t < 0 else "") + body


def check_tokens(tokens: Iterable[int]) -> TokenSeq:
    seq = tuple(tokens)
    for tok in seq:
        if not isinstance(tok, int) or isinstance(tok, bool) or tok < 0:
            raise StreamError(f"token ids must be non-negative integers, got {tok!r}")
    return seq


@dataclass(frozen=True)
class Query:
    id: int
    prompt: TokenSeq
    arrival: Time = 0

    def __post_init__(self):
        if not isinstance(self.id, int) or self.id < 0:
            raise StreamError(f"query id must be a non-negative integer, got {self.id!r}")
        object.__setattr__(self, "prompt", check_tokens(self.prompt))
        if not self.prompt:
            raise StreamError(f"query {self.id} has an empty prompt")
        arrival = as_time(self.arrival)
        if arrival < 0:
            raise StreamError(f"query {self.id} arrives at negative time {arrival}")
        object.__setattr__(self, "arrival", arrival)

    def __len__(self) -> int:
        return len(self.prompt)


@dataclass(frozen=True)
class QueryStream:
    """Queries in canonical order: by arrival, ties by id."""

    queries: tuple[Query, ...] = ()

    def __post_init__(self):
        qs = tuple(sorted(self.queries, key=lambda q: (q.arrival, q.id)))
        seen: set[int] = set()
        for q in qs:
            if q.id in seen:
                raise StreamError(f"duplicate query id {q.id}")
            seen.add(q.id)
        object.__setattr__(self, "queries", qs)

    def __len__(self) -> int:
        return len(self.queries)

    def __iter__(self) -> Iterator[Query]:
        return iter(self.queries)

    def __getitem__(self, i):
        return self.queries[i]

    def by_id(self) -> dict[int, Query]:
        return {q.id: q for q in self.queries}

    @property
    def ids(self) -> tuple[int, ...]:
        return tuple(q.id for q in self.queries)


def canonicalize(stream: QueryStream | Iterable[Query]) -> QueryStream:
    queries = stream.queries if isinstance(stream, QueryStream) else tuple(stream)
    return QueryStream(queries)


@dataclass(frozen=True)
class CostModel:
    """Relative weight of the quadratic attention term (``c_attn``)."""

    c_attn: Time = 0

    def __post_init__(self):
        c = as_time(self.c_attn)
        if c < 0:
            raise ValueError(f"c_attn must be non-negative, got {c}")
        object.__setattr__(self, "c_attn", c)


@dataclass(frozen=True)
class Schedule:
    order: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "order", tuple(self.order))
        if len(set(self.order)) != len(self.order):
            raise ValueError("schedule repeats a query id")

    def __len__(self) -> int:
        return len(self.order)

    def __iter__(self):
        return iter(self.order)

    def check_against(self, stream: QueryStream) -> None:
        if sorted(self.order) != sorted(stream.ids):
            raise ValueError("schedule is not a permutation of the stream's query ids")


@dataclass(frozen=True)
class QueryRecord:
    id: int
    arrival: Time
    start: Time
    completion: Time

    @property
    def ttft(self) -> Time:
        return self.completion - self.arrival


@dataclass(frozen=True)
class SimResult:
    """Per-query timings, listed in processing order."""

    records: tuple[QueryRecord, ...]
    _by_id: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        object.__setattr__(self, "_by_id", {r.id: r for r in self.records})

    def __len__(self) -> int:
        return len(self.records)

    def __getitem__(self, query_id: int) -> QueryRecord:
        return self._by_id[query_id]

    @property
    def order(self) -> tuple[int, ...]:
        return tuple(r.id for r in self.records)

    @property
    def ttfts(self) -> list[Time]:
        return [r.ttft for r in self.records]

    @property
    def max_ttft(self) -> Time:
        return max(self.ttfts)

    def percentiles(self, ps: Sequence = SUMMARY_PERCENTILES) -> dict[Fraction, Time]:
        xs = sorted(self.ttfts)
        return {as_time(p): percentile(xs, p) for p in ps}

    def summary(self, ps: Sequence = SUMMARY_PERCENTILES) -> dict[str, Time]:
        out: dict[str, Time] = {"max": self.max_ttft}
        for p, v in self.percentiles(ps).items():
            out[pct_label(p)] = v
        return out

    def satisfied(self, T: Time) -> int:
        return sum(1 for r in self.records if r.ttft <= T)

    def to_csv(self) -> str:
        lines = ["id,arrival,start,completion,ttft"]
        for r in self.records:
            lines.append(
                ",".join(
                    [str(r.id), fmt_time(r.arrival), fmt_time(r.start),
                     fmt_time(r.completion), fmt_time(r.ttft)]
                )
            )
        return "\n".join(lines) + "\n"


def pct_label(p) -> str:
    """``0.5 -> "p50"``, ``0.999 -> "p99.9"``."""
    return "p" + fmt_time(as_time(p) * 100)


def percentile(sorted_ttfts: Sequence[Time], p) -> Time:
    """Nearest-rank percentile: the element at 1-based rank ``ceil(p * n)``."""
    if not sorted_ttfts:
        raise ValueError("empty sample")
    p = as_time(p)
    if not 0 < p <= 1:
        raise ValueError(f"percentile fraction must lie in (0, 1], got {p}")
    rank = math.ceil(p * len(sorted_ttfts))
    return sorted_ttfts[rank - 1]


# --- JSON Lines stream format -------------------------------------------------

def _json_time(t: Time) -> str:
    s = fmt_time(t)
    return s if "/" not in s else json.dumps(s)


def dumps_stream(stream: QueryStream) -> str:
    lines = []
    for q in stream:
        toks = ", ".join(str(t) for t in q.prompt)
        lines.append(f'{{"id": {q.id}, "arrival": {_json_time(q.arrival)}, "tokens": [{toks}]}}')
    return "".join(line + "\n" for line in lines)


def loads_stream(text: str) -> QueryStream:
    queries = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line, parse_float=Decimal)
            queries.append(Query(rec["id"], rec["tokens"], as_time(rec["arrival"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise StreamError(f"line {lineno}: {exc}") from exc
    return QueryStream(tuple(queries))


def load_stream(path: str | Path) -> QueryStream:
    return loads_stream(Path(path).read_text(encoding="utf-8"))


def save_stream(stream: QueryStream, path: str | Path) -> None:
    Path(path).write_text(dumps_stream(stream), encoding="utf-8")

