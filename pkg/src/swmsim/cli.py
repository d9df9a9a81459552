"""Command-line front end: instance generation, simulation, LP bounds,
parameter sweeps, and dying-queue trace reports.

Exit codes: 0 success, 1 usage error, 2 input error, 3 contract/solver error.
All outputs are deterministic given the flags and inputs.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction

from . import fast
from .instances import PhiKParams, StaircaseParams, phi_k_instance, staircase_instance
from .lpbound import SolverError, build_model, ratio_report
from .model import (
    ContractError,
    InstanceError,
    LimitError,
    SwitchConfig,
    expand,
    format_instance,
    parse_instance,
    simulate,
    trace_csv,
)
from .policies import BruteForceLimits, brute_force_opt, make_policy

CSV_VERSION = "# swmsim-csv v1"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _write_out(text: str, path: str | None):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as f:
            f.write(text)


def _json_default(v):
    if isinstance(v, Fraction):
        return str(v)
    raise TypeError(f"cannot serialize {type(v).__name__}")


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


# ---------------------------------------------------------------------------
# gen
# ---------------------------------------------------------------------------

def cmd_gen(args) -> int:
    if args.family == "staircase":
        if args.B is None:
            raise InstanceError("staircase generation needs --B")
        if args.a is None and args.C is None:
            raise InstanceError("staircase generation needs --a or --C")
        if args.exact:
            params = StaircaseParams.exact_near(args.B, a=args.a,
                                                C=args.C if args.C else math.sqrt(2),
                                                horizon=args.horizon)
        else:
            a = args.a if args.a is not None else max(1, round(args.C * math.sqrt(args.B)))
            horizon = args.horizon
            if horizon is None:
                from .instances import h_for
                horizon = 4 * (a + h_for(args.B, a))
            params = StaircaseParams(B=args.B, a=a, horizon=horizon, C=args.C)
        timeline = staircase_instance(params)
        config = SwitchConfig(params.B, args.N)
        meta = {"family": "staircase", "B": params.B, "a": params.a, "h": params.h,
                "p": params.p, "horizon": params.horizon, "exact": params.is_exact}
    elif args.family == "phi-k":
        if args.k is None or args.B is None:
            raise InstanceError("phi-k generation needs --k and --B")
        params = PhiKParams(k=args.k, B=args.B, cycles=args.cycles)
        timeline = phi_k_instance(params)
        config = SwitchConfig(args.B, args.N)
        meta = {"family": "phi-k", "k": args.k, "B": args.B, "cycles": args.cycles}
    else:
        raise InstanceError(f"unknown family {args.family!r}")
    _write_out(format_instance(config, timeline, meta=meta), args.out)
    return 0


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def _staircase_params_from_meta(config, meta) -> StaircaseParams:
    try:
        return StaircaseParams(B=int(meta["B"]), a=int(meta["a"]), horizon=int(meta["horizon"]))
    except KeyError as exc:
        raise InstanceError(
            "staircase-offline needs an instance generated by 'gen --family staircase' "
            f"(missing meta key {exc})"
        ) from exc


def cmd_simulate(args) -> int:
    with open(args.instance) as f:
        config, instance, meta = parse_instance(f.read())
    from .model import ArrivalSchedule, QueueTimeline
    timeline = instance if isinstance(instance, QueueTimeline) else None
    if timeline is not None:
        schedule = expand(timeline, config)
        timeline = schedule.timeline  # physical ids after recycling
    else:
        schedule = instance

    if args.policy == "brute-force":
        limits = BruteForceLimits(max_packets=args.bf_max_packets,
                                  max_queues=args.bf_max_queues,
                                  max_horizon=args.bf_max_horizon)
        total = brute_force_opt(schedule, config, limits)
        summary = {"policy": "brute-force", "total": total}
        _write_out(_dump_json(summary), args.summary or args.out)
        return 0

    staircase_params = None
    if args.policy == "staircase-offline":
        staircase_params = _staircase_params_from_meta(config, meta)
        if staircase_instance(staircase_params) != timeline:
            raise InstanceError("instance does not match its staircase parameters")
    policy = make_policy(args.policy, timeline=timeline, staircase_params=staircase_params)
    result = simulate(schedule, policy, config, record_occupancy=args.record_occupancy)
    if args.trace:
        _write_out(trace_csv(result), args.trace)
    summary = {
        "policy": result.policy,
        "total": result.total_transmitted,
        "total_arrivals": result.total_arrivals,
        "total_dropped": result.total_dropped,
        "per_queue_dead": {str(q): v for q, v in sorted(result.per_queue_dead_transmissions.items())},
    }
    _write_out(_dump_json(summary), args.summary or args.out)
    return 0


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def _parse_grid(spec: str) -> list[float]:
    try:
        parts = spec.split(":")
        if len(parts) == 3:
            lo, hi, step = float(parts[0]), float(parts[1]), float(parts[2])
            n = int(round((hi - lo) / step))
            return [round(lo + i * step, 9) for i in range(n + 1)]
        return [float(p) for p in spec.split(",")]
    except ValueError as exc:
        raise UsageError(f"cannot parse grid {spec!r}") from exc


def _sweep_point(task):
    k, g, cycles, warmup, tail, prefer_low = task
    B = round(k * k / g)
    row = {"k": k, "B": B, "k2_over_b": g, "method": "simulation", "error": ""}
    try:
        if B < k:
            raise InstanceError(f"B={B} < k={k} is outside the family's regime")
        params = PhiKParams(k=k, B=B, cycles=cycles)
        lqd = fast.run_phi_k(params, "lqd", prefer_low_ids=prefer_low)
        opt = fast.run_phi_k(params, "lateqd")
        first = warmup * k + 1
        # tail cycles are truncation-distorted; excluding them (with the drain)
        # measures the steady late-cycle ratio
        last = (cycles - tail) * k if tail > 0 else 10**15
        total_policy = lqd.tx_in(first, last)
        total_opt = opt.tx_in(first, last)
        row.update(total_opt=total_opt, total_policy=total_policy,
                   ratio=total_opt / total_policy)
    except (InstanceError, LimitError, ContractError) as exc:
        row.update(total_opt="", total_policy="", ratio="", error=str(exc))
    return row


SWEEP_COLUMNS = ["k", "B", "k2_over_b", "total_opt", "total_policy", "ratio", "method", "error"]


def cmd_sweep(args) -> int:
    grid = _parse_grid(args.grid)
    if args.warmup_cycles + args.tail_cycles >= args.cycles:
        raise UsageError("--warmup-cycles plus --tail-cycles must be smaller than --cycles")
    tasks = [(k, g, args.cycles, args.warmup_cycles, args.tail_cycles,
              args.lqd_tie == "low") for k in args.k for g in grid]
    if args.threads > 1:
        with ProcessPoolExecutor(max_workers=args.threads) as pool:
            rows = list(pool.map(_sweep_point, tasks))
    else:
        rows = [_sweep_point(t) for t in tasks]
    buf = io.StringIO()
    buf.write(CSV_VERSION + "\n")
    writer = csv.DictWriter(buf, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    _write_out(buf.getvalue(), args.out)
    return 0


# ---------------------------------------------------------------------------
# bound
# ---------------------------------------------------------------------------

def cmd_bound(args) -> int:
    if args.emit_mps or args.emit_lp:
        from .lpio import emit_lp_text, emit_mps
        outdir = args.emit_mps or args.emit_lp
        os.makedirs(outdir, exist_ok=True)
        emitted = []
        for variant in ("any", "online", "lqd"):
            model = build_model(args.k, args.B, variant, args.d_cap,
                                chain_wrap=not args.no_chain_wrap, chain_slack=args.chain_slack)
            lp = model.to_linear_program()
            if args.emit_mps:
                path = os.path.join(outdir, f"{lp.name}.mps")
                text = emit_mps(lp)
            else:
                path = os.path.join(outdir, f"{lp.name}.lp")
                text = emit_lp_text(lp)
            with open(path, "w") as f:
                f.write(text)
            emitted.append(path)
        _write_out(_dump_json({"emitted": emitted}), args.out)
        return 0
    report = ratio_report(args.k, args.B, backend=args.backend, command=args.command,
                          d_cap=args.d_cap, chain_wrap=not args.no_chain_wrap,
                          chain_slack=args.chain_slack)
    report["schema"] = "swmsim-bound-v1"
    _write_out(_dump_json(report), args.out)
    return 0


# ---------------------------------------------------------------------------
# dead-trace
# ---------------------------------------------------------------------------

DEAD_COLUMNS = ["queue", "death_slot", "lqd_accepted", "lqd_dead_tx", "lateqd_accepted"]


def cmd_dead_trace(args) -> int:
    params = PhiKParams(k=args.k, B=args.B, cycles=args.cycles)
    lqd = fast.run_phi_k(params, "lqd")
    opt = fast.run_phi_k(params, "lateqd")
    buf = io.StringIO()
    buf.write(CSV_VERSION + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(DEAD_COLUMNS)
    for q in range(1, args.k * args.cycles + 1):
        writer.writerow([
            q, q,
            lqd.accepted_at_death.get(q, 0),
            lqd.dead_transmissions.get(q, 0),
            opt.accepted_at_death.get(q, 0),
        ])
    _write_out(buf.getvalue(), args.out)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="swmsim",
                     description="Shared-memory switch buffer-management workbench")
    parser.add_argument("--seed", type=int, default=0,
                        help="seed for randomized workflows (reserved; commands are deterministic)")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate an instance file")
    g.add_argument("--family", required=True, choices=["staircase", "phi-k"])
    g.add_argument("--B", type=int)
    g.add_argument("--a", type=int)
    g.add_argument("--C", type=float)
    g.add_argument("--exact", action="store_true",
                   help="shrink B to the nearest exact staircase value")
    g.add_argument("--k", type=int)
    g.add_argument("--cycles", type=int, default=10)
    g.add_argument("--horizon", type=int)
    g.add_argument("--N", type=int, default=None, help="bound queue ids (recycling)")
    g.add_argument("--out", default=None)
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("simulate", help="run a policy over an instance file")
    s.add_argument("instance")
    s.add_argument("--policy", required=True,
                   choices=["lqd", "lqd-frac", "lateqd", "lateqd-aggregate",
                            "staircase-offline", "brute-force"])
    s.add_argument("--trace", default=None, help="write the per-slot trace CSV here")
    s.add_argument("--summary", default=None, help="write the summary JSON here")
    s.add_argument("--record-occupancy", action="store_true")
    s.add_argument("--bf-max-packets", type=int, default=24)
    s.add_argument("--bf-max-queues", type=int, default=5)
    s.add_argument("--bf-max-horizon", type=int, default=8)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_simulate)

    w = sub.add_parser("sweep", help="competitive-ratio sweep over k^2/B")
    w.add_argument("--k", type=int, nargs="+", required=True)
    w.add_argument("--grid", required=True, help="lo:hi:step or comma-separated values")
    w.add_argument("--cycles", type=int, default=10)
    w.add_argument("--warmup-cycles", type=int, default=2)
    w.add_argument("--tail-cycles", type=int, default=2,
                   help="truncation-distorted final cycles excluded from ratios "
                        "(0 keeps them and the drain)")
    w.add_argument("--lqd-tie", choices=["low", "high"], default="low",
                   help="which queue ids receive the water-fill remainder")
    w.add_argument("--threads", type=int, default=1)
    w.add_argument("--out", default=None)
    w.set_defaults(func=cmd_sweep)

    b = sub.add_parser("bound", help="LP throughput bounds and ratio report")
    b.add_argument("--k", type=int, required=True)
    b.add_argument("--B", type=int, required=True)
    b.add_argument("--backend", default="auto",
                   choices=["auto", "internal", "highs", "command"])
    b.add_argument("--command", default=None,
                   help="external solver template with {input}/{output} "
                        "(default: $SWMSIM_LP_COMMAND or the bundled swmsim-lp-solve)")
    b.add_argument("--d-cap", type=int, default=None)
    b.add_argument("--chain-slack", type=float, default=1.0)
    b.add_argument("--no-chain-wrap", action="store_true")
    b.add_argument("--emit-mps", default=None, metavar="DIR",
                   help="write the three variant models as MPS and exit")
    b.add_argument("--emit-lp", default=None, metavar="DIR",
                   help="write the three variant models as LP text and exit")
    b.add_argument("--out", default=None)
    b.set_defaults(func=cmd_bound)

    d = sub.add_parser("dead-trace", help="per-dying-queue acceptance/transmission series")
    d.add_argument("--k", type=int, required=True)
    d.add_argument("--B", type=int, required=True)
    d.add_argument("--cycles", type=int, default=3)
    d.add_argument("--out", default=None)
    d.set_defaults(func=cmd_dead_trace)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"swmsim: usage error: {exc}", file=sys.stderr)
        return 1
    except (InstanceError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"swmsim: input error: {exc}", file=sys.stderr)
        return 2
    except (ContractError, SolverError, LimitError) as exc:
        print(f"swmsim: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
