"""Command-line interface: gen, run, sweep, bounds, feasible.

Exit status: 0 on success, 1 on usage or parameter errors, 2 when the
instance is infeasible (or too large for the exact search).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from . import bounds as bnd
from .core import SUMMARY_PERCENTILES, CostModel, as_time, fmt_time, load_stream, dumps_stream, pct_label
from .feasible import InstanceTooLarge, brute_force, percentile_schedule
from .gen import (
    PartitionInstance,
    ShuffledQueueParams,
    gen_3partition_stream,
    gen_poisson,
    gen_shuffled,
    toy_stream,
)
from .sched import FCFS, INF, LPM, klpm, parse_policy
from .sim import SimConfig, parse_start, run_policy

EXIT_USAGE = 1
EXIT_INFEASIBLE = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _csv_list(conv):
    def parse(text: str):
        items = [t for t in text.split(",") if t.strip()]
        if not items:
            raise argparse.ArgumentTypeError("empty list")
        try:
            return [conv(t.strip()) for t in items]
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
    return parse


def _k_value(text: str):
    return INF if text.lower() in ("inf", "infinity") else int(text)


def _write(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _meta_path(out: str) -> Path:
    return Path(out).with_suffix(".meta.json")


# --- gen ----------------------------------------------------------------------

def cmd_gen(args) -> int:
    meta: dict = {"generator": args.kind, "seed": args.seed}
    if args.kind == "shuffled":
        params = ShuffledQueueParams(args.n, args.k_rep, args.u, args.d, as_time(args.s), args.seed)
        stream = gen_shuffled(params)
        meta["params"] = params.as_dict()
    elif args.kind == "partition":
        inst = PartitionInstance(args.m, args.h, tuple(args.a))
        stream, T = gen_3partition_stream(inst)
        meta["params"] = {"m": inst.m, "H": inst.H, "A": list(inst.A)}
        meta["T"] = T
        meta["has_partition"] = inst.has_partition()
    elif args.kind == "poisson":
        stream = gen_poisson(args.n, as_time(args.rate), k_rep=args.k_rep, u=args.u, d=args.d, seed=args.seed)
        meta["params"] = {"n": args.n, "rate": args.rate, "k_rep": args.k_rep, "u": args.u, "d": args.d}
    else:
        stream = toy_stream(as_time(args.s))
        meta["params"] = {"n": 4, "k_rep": 2, "u": 5, "d": 5, "s": args.s}
    _write(dumps_stream(stream), args.out)
    if args.out:
        _meta_path(args.out).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return 0


# --- run ----------------------------------------------------------------------

def _summary_strings(summary: dict) -> dict[str, str]:
    return {k: fmt_time(v) for k, v in summary.items()}


def cmd_run(args) -> int:
    stream = load_stream(args.stream)
    policy = parse_policy(args.policy)
    cfg = SimConfig(CostModel(as_time(args.c_attn)), parse_start(args.start), args.batch)
    schedule, result = run_policy(stream, policy, cfg, args.seed)
    summary = _summary_strings(result.summary())
    if args.format == "json":
        doc = {
            "policy": policy.name,
            "seed": args.seed,
            "schedule": list(schedule.order),
            "summary": summary,
            "records": [
                {"id": r.id, "arrival": fmt_time(r.arrival), "start": fmt_time(r.start),
                 "completion": fmt_time(r.completion), "ttft": fmt_time(r.ttft)}
                for r in result.records
            ],
        }
        _write(json.dumps(doc, indent=2) + "\n", args.out)
        return 0
    _write(result.to_csv(), args.out)
    line = "max_ttft=" + summary["max"] + "".join(
        f" {k}={v}" for k, v in summary.items() if k != "max"
    )
    print(line, file=sys.stdout if args.out else sys.stderr)
    return 0


# --- sweep --------------------------------------------------------------------

@dataclass(frozen=True)
class SweepSpec:
    ks: tuple
    arrivals: tuple  # gaps s, or Poisson rates
    mode: str  # "s" or "rate"
    n: int
    k_rep: int
    u: int
    d: int
    c_attn: object = 0
    seeds: tuple = (0,)
    percentiles: tuple = SUMMARY_PERCENTILES
    start: str = "immediate"

    def __post_init__(self):
        if not self.ks or not self.arrivals or not self.seeds:
            raise UsageError("sweep grid is empty")
        if self.mode not in ("s", "rate"):
            raise UsageError(f"unknown arrival mode {self.mode!r}")

    def cells(self):
        for x in self.arrivals:
            for k in self.ks:
                for seed in self.seeds:
                    yield (self, k, x, seed)

    def header(self) -> list[str]:
        return ["policy", "k", "s_or_rate", "n", "u", "d", "c_attn", "seed", "max"] + [
            pct_label(p) for p in self.percentiles
        ]


def _policy_for(k):
    if k == 1:
        return FCFS
    if k == INF:
        return LPM
    return klpm(k)


def _run_cell(cell) -> list[str]:
    spec, k, x, seed = cell
    x = as_time(x)
    if spec.mode == "s":
        stream = gen_shuffled(ShuffledQueueParams(spec.n, spec.k_rep, spec.u, spec.d, x, seed))
    else:
        stream = gen_poisson(spec.n, x, k_rep=spec.k_rep, u=spec.u, d=spec.d, seed=seed)
    if spec.start == "delayed:auto":
        if spec.mode != "s":
            raise UsageError("delayed:auto needs a deterministic gap grid")
        start = x * spec.n
    else:
        start = parse_start(spec.start)
    policy = _policy_for(k)
    cfg = SimConfig(CostModel(as_time(spec.c_attn)), start)
    _, result = run_policy(stream, policy, cfg, seed)
    summary = result.summary(spec.percentiles)
    return [
        policy.kind,
        "inf" if k == INF else str(k),
        fmt_time(x),
        str(spec.n),
        str(spec.u),
        str(spec.d),
        fmt_time(as_time(spec.c_attn)),
        str(seed),
    ] + [fmt_time(v) for v in summary.values()]


def run_sweep(spec: SweepSpec, jobs: int = 1) -> str:
    cells = list(spec.cells())
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            rows = list(pool.map(_run_cell, cells, chunksize=max(1, len(cells) // (4 * jobs))))
    else:
        rows = [_run_cell(c) for c in cells]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(spec.header())
    w.writerows(rows)
    return buf.getvalue()


def cmd_sweep(args) -> int:
    if (args.s is None) == (args.rate is None):
        raise UsageError("give exactly one of --s or --rate")
    mode, grid = ("s", args.s) if args.s is not None else ("rate", args.rate)
    spec = SweepSpec(
        ks=tuple(args.k),
        arrivals=tuple(grid),
        mode=mode,
        n=args.n,
        k_rep=args.k_rep,
        u=args.u,
        d=args.d,
        c_attn=args.c_attn,
        seeds=tuple(range(args.seed, args.seed + args.seeds)),
        percentiles=tuple(as_time(p) / 100 for p in args.percentiles),
        start=args.start,
    )
    text = run_sweep(spec, args.jobs)
    if args.format == "json":
        rows = list(csv.DictReader(io.StringIO(text)))
        text = json.dumps(rows, indent=2) + "\n"
    _write(text, args.out)
    return 0


# --- bounds -------------------------------------------------------------------

def cmd_bounds(args) -> int:
    s = as_time(args.s)
    T = as_time(args.T) if args.T is not None else s * args.n
    b = bnd.BoundInputs(args.n, args.u, args.d, s, args.k, T, as_time(args.eps))
    inputs = {"n": args.n, "u": args.u, "d": args.d, "s": fmt_time(s), "k": args.k,
              "T": fmt_time(T), "epsilon": fmt_time(b.epsilon)}
    table = [(name, str(v).lower() if isinstance(v, bool) else fmt_time(v)) for name, v in bnd.bound_table(b)]
    if args.format == "json":
        text = json.dumps({"inputs": inputs, "bounds": dict(table)}, indent=2) + "\n"
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["formula", *inputs.keys(), "value"])
        for name, value in table:
            w.writerow([name, *inputs.values(), value])
        text = buf.getvalue()
    _write(text, args.out)
    return 0


# --- feasible -----------------------------------------------------------------

def cmd_feasible(args) -> int:
    stream = load_stream(args.stream)
    cfg = SimConfig(CostModel(as_time(args.c_attn)), parse_start(args.start))
    if args.mode == "exact":
        outcome = brute_force(stream, as_time(args.T), cfg, limit=args.limit)
    else:
        if args.p is None:
            raise UsageError("--p is required in percentile mode")
        outcome = percentile_schedule(stream, as_time(args.T), as_time(args.p), max_len=args.max_len, cfg=cfg)
    if outcome.feasible:
        doc = {"outcome": "feasible", "satisfied_count": outcome.satisfied_count,
               "schedule": list(outcome.schedule.order)}
    else:
        doc = {"outcome": "infeasible", "satisfied_count": 0, "schedule": [],
               "certificate": outcome.certificate}
    _write(json.dumps(doc) + "\n", args.out)
    return 0 if outcome.feasible else EXIT_INFEASIBLE


# --- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="base random seed (default 0)")
    common.add_argument("--out", help="output file (default: standard output)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")

    ap = _Parser(prog="prefixsched", description="LLM query scheduling under prefix reuse")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="generate a query stream (JSON Lines)")
    gsub = g.add_subparsers(dest="kind", required=True, parser_class=_Parser)
    sh = gsub.add_parser("shuffled", parents=[common], help="regular-arrival shuffled queue")
    for name in ("--n", "--k-rep", "--u", "--d"):
        sh.add_argument(name, type=int, required=True)
    sh.add_argument("--s", default="0", help="inter-arrival gap")
    pa = gsub.add_parser("partition", parents=[common], help="3-PARTITION hardness stream")
    pa.add_argument("--m", type=int, required=True)
    pa.add_argument("--h", type=int, required=True)
    pa.add_argument("--a", type=_csv_list(int), required=True, help="comma-separated integers")
    po = gsub.add_parser("poisson", parents=[common], help="shuffled prompts, Poisson arrivals")
    po.add_argument("--n", type=int, required=True)
    po.add_argument("--rate", required=True, help="queries per token-time unit")
    for name in ("--k-rep", "--u", "--d"):
        po.add_argument(name, type=int, required=True)
    toy = gsub.add_parser("toy", parents=[common], help="four-query two-user example")
    toy.add_argument("--s", default="0")

    r = sub.add_parser("run", parents=[common], help="simulate a policy on a stream")
    r.add_argument("stream")
    r.add_argument("--policy", required=True, help="fcfs | lpm | klpm:<k> | klpm:inf")
    r.add_argument("--start", default="immediate", help="immediate | delayed:<T>")
    r.add_argument("--c-attn", default="0")
    r.add_argument("--batch", type=int, default=None, help="report completions binned by B")

    sw = sub.add_parser("sweep", parents=[common], help="policy x arrival grid x seeds")
    sw.add_argument("--k", type=_csv_list(_k_value), required=True, help="e.g. 1,4,inf")
    sw.add_argument("--s", type=_csv_list(str), help="inter-arrival gaps (theory mode)")
    sw.add_argument("--rate", type=_csv_list(str), help="Poisson rates (benchmark mode)")
    for name in ("--n", "--k-rep", "--u", "--d"):
        sw.add_argument(name, type=int, required=True)
    sw.add_argument("--c-attn", default="0")
    sw.add_argument("--seeds", type=int, default=1, help="seeds per cell, counted from --seed")
    sw.add_argument("--percentiles", type=_csv_list(str), default=["50", "90", "95", "99"])
    sw.add_argument("--start", default="immediate", help="immediate | delayed:<T> | delayed:auto (T = s*n)")
    sw.add_argument("--jobs", type=int, default=1)

    b = sub.add_parser("bounds", parents=[common], help="evaluate the max-TTFT bounds")
    for name in ("--n", "--u", "--d", "--k"):
        b.add_argument(name, type=int, required=True)
    b.add_argument("--s", required=True)
    b.add_argument("--T", default=None, help="delayed start (default s*n)")
    b.add_argument("--eps", default="0.1")

    f = sub.add_parser("feasible", parents=[common], help="TTFT feasibility of a stream")
    f.add_argument("stream")
    f.add_argument("--T", required=True, help="TTFT constraint")
    f.add_argument("--p", default=None, help="allowed violating fraction (percentile mode)")
    f.add_argument("--mode", choices=("exact", "percentile"), default="exact")
    f.add_argument("--limit", type=int, default=10, help="max queries for exact search")
    f.add_argument("--max-len", type=int, default=None)
    f.add_argument("--start", default="immediate")
    f.add_argument("--c-attn", default="0")
    return ap


COMMANDS = {"gen": cmd_gen, "run": cmd_run, "sweep": cmd_sweep, "bounds": cmd_bounds, "feasible": cmd_feasible}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except InstanceTooLarge as exc:
        print(f"prefixsched: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (UsageError, ValueError, KeyError, OSError) as exc:
        print(f"prefixsched: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
