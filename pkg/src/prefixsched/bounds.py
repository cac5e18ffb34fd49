"""Closed-form maximum-TTFT bounds for the shuffled two-level queue.

All values are exact rationals.  ``k`` is both the user replication factor
of the stream and the k-LPM cycle length; the queue is assumed to start
processing at ``T >= s * n`` (everything has arrived by then).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .core import Time, as_time


@dataclass(frozen=True)
class BoundInputs:
    n: int
    u: int
    d: int
    s: Time
    k: int
    T: Time = 0
    epsilon: Time = Fraction(1, 10)

    def __post_init__(self):
        for name in ("s", "T", "epsilon"):
            object.__setattr__(self, name, as_time(getattr(self, name)))
        if self.k < 1:
            raise ValueError(f"k must be positive, got {self.k}")
        if not 0 <= self.epsilon < 1:
            raise ValueError(f"epsilon must lie in [0, 1), got {self.epsilon}")

    @property
    def covers_arrivals(self) -> bool:
        return self.T >= self.s * self.n


def klpm_upper(b: BoundInputs) -> Time:
    """Deterministic: T + n(u/k + d - s/k)."""
    return as_time(b.T + b.n * (Fraction(b.u, b.k) + b.d - Fraction(b.s) / b.k))


def lpm_lower(b: BoundInputs) -> Time:
    """High-probability: T + (1 - eps) n (u/k + d)."""
    return as_time(b.T + (1 - b.epsilon) * b.n * (Fraction(b.u, b.k) + b.d))


def fcfs_lower(b: BoundInputs) -> Time:
    """High-probability: T + (1 - eps) n (u + d - s)."""
    return as_time(b.T + (1 - b.epsilon) * b.n * (b.u + b.d - b.s))


def lpm_completion_identity(j: int, k: int, u: int, d: int, T: Time = 0) -> Time:
    """Completion of the j-th query LPM processes: T + ceil(j/k) u + d j."""
    if j < 1:
        raise ValueError("j is 1-based")
    return as_time(T) + math.ceil(Fraction(j, k)) * u + d * j


def separation_holds(b: BoundInputs) -> bool:
    """True iff the k-LPM upper bound is strictly below both lower bounds."""
    up = klpm_upper(b)
    return up < lpm_lower(b) and up < fcfs_lower(b)


def bound_table(b: BoundInputs) -> list[tuple[str, Time]]:
    return [
        ("klpm_upper", klpm_upper(b)),
        ("lpm_lower", lpm_lower(b)),
        ("fcfs_lower", fcfs_lower(b)),
        ("separation_holds", separation_holds(b)),
    ]
