"""LLM query scheduling under prefix reuse: simulator, policies, bounds, feasibility."""

from .core import (
    CostModel,
    Query,
    QueryRecord,
    QueryStream,
    Schedule,
    SimResult,
    canonicalize,
    load_stream,
    percentile,
    save_stream,
)
from .sched import FCFS, INF, LPM, Policy, klpm, parse_policy
from .sim import SimConfig, batchify, cost_of, run_fixed, run_policy

__all__ = [
    "CostModel",
    "FCFS",
    "INF",
    "LPM",
    "Policy",
    "Query",
    "QueryRecord",
    "QueryStream",
    "Schedule",
    "SimConfig",
    "SimResult",
    "batchify",
    "canonicalize",
    "cost_of",
    "klpm",
    "load_stream",
    "parse_policy",
    "percentile",
    "run_fixed",
    "run_policy",
    "save_stream",
]
