"""Command-line entry point.

Exit codes (stable):
  0  success
  1  invalid input data (missing or malformed config/trace file)
  2  usage error (bad flags, unknown policy, empty lists, size caps)
  3  a decision failed the per-slot constraint check; a slot dump is written

Every error prints one machine-parseable line ``carbon-offload: {json}`` on
stderr followed by a human-readable message. Flags override config-file
values, which override built-in defaults. ``CARBON_SCHED_LOG`` sets the log
level (default WARNING).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

from .benchmark import format_gap_table, gap_table, oracle_compare
from .data import TraceError, load_bundled_trace, load_trace
from .engine import ConstraintViolation, canonical_param, default_jobs, run_simulation, sweep
from .model import SimConfig, ValidationError, load_config
from .policies import POLICY_NAMES, parse_policy
from .rounding import MAX_BRUTE_LOCATIONS, MAX_BRUTE_TASKS

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_USAGE = 2
EXIT_CONSTRAINT = 3

PROG = "carbon-offload"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # type: ignore[override]
        raise UsageError(message)


def _diagnose(kind: str, code: int, message: str, **extra) -> int:
    payload = {"error": kind, "exit": code, "message": message, **extra}
    print(f"{PROG}: {json.dumps(payload, sort_keys=True)}", file=sys.stderr)
    print(f"{PROG}: {kind} error: {message}", file=sys.stderr)
    return code


def _csv_list(text: str) -> list[str]:
    items = [s.strip() for s in text.split(",") if s.strip()]
    if not items:
        raise UsageError("empty list")
    return items


def _base_config(args) -> SimConfig:
    cfg = load_config(args.config) if args.config else SimConfig()
    overrides = {}
    for flag, key in (("v", "lyapunov_v"), ("budget", "budget_per_slot"),
                      ("frame_length", "frame_length"), ("frame_count", "frame_count"),
                      ("rounding", "rounding")):
        val = getattr(args, flag, None)
        if val is not None:
            overrides[key] = val
    if getattr(args, "no_repair", False):
        overrides["repair"] = False
    return cfg.replace(**overrides) if overrides else cfg


def _trace(args):
    return load_trace(args.trace) if args.trace else load_bundled_trace()


def cmd_run(args) -> int:
    try:
        policy = parse_policy(args.policy)
    except ValidationError as exc:
        raise UsageError(str(exc)) from None
    cfg = _base_config(args)
    seed = cfg.seed if args.seed is None else args.seed
    report = run_simulation(cfg, policy, seed, _trace(args), args.out)
    s = report.summary()
    print(f"policy={s['policy']} seed={s['seed']} slots={s['slots']} "
          f"avg_accuracy_loss={s['avg_accuracy_loss']:.6g} avg_purchase_cost={s['avg_purchase_cost']:.6g} "
          f"avg_queue_backlog={s['avg_queue_backlog']:.6g}")
    print(f"wrote {Path(args.out) / 'slots.csv'} and {Path(args.out) / 'report.json'}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    try:
        param = canonical_param(args.param)
        policies = [parse_policy(p).value for p in _csv_list(args.policies)]
    except ValidationError as exc:
        raise UsageError(str(exc)) from None
    values = _csv_list(args.values)
    seeds = [int(s) for s in _csv_list(args.seeds)]
    cfg = _base_config(args)
    if param != "price_kind":
        try:
            values = [float(v) for v in values]
        except ValueError:
            raise UsageError(f"non-numeric value in --values {args.values!r}") from None
    jobs = args.jobs if args.jobs is not None else default_jobs()
    rows = sweep(cfg, param, values, policies, seeds, _trace(args), args.out, jobs)
    for r in rows:
        print(f"{param}={r['value']} policy={r['policy']} seed={r['seed']} "
              f"accuracy_loss_per_task={r['accuracy_loss_per_task']:.6g} "
              f"avg_purchase_cost={r['avg_purchase_cost']:.6g} avg_queue_backlog={r['avg_queue_backlog']:.6g}")
    hashes = {(r["value"], r["seed"]): r["task_stream_hash"] for r in rows}
    paired = all(hashes[(r["value"], r["seed"])] == r["task_stream_hash"] for r in rows)
    print(f"paired task streams across arms: {'yes' if paired else 'no'}")
    print(f"wrote {Path(args.out) / 'summary.csv'}")
    return EXIT_OK


def cmd_oracle_compare(args) -> int:
    if args.instances < 1:
        raise UsageError("--instances must be >= 1")
    if not 1 <= args.max_tasks <= MAX_BRUTE_TASKS:
        raise UsageError(f"--max-tasks must be in [1, {MAX_BRUTE_TASKS}]")
    if not 2 <= args.max_locations <= MAX_BRUTE_LOCATIONS:
        raise UsageError(f"--max-locations must be in [2, {MAX_BRUTE_LOCATIONS}]")
    cfg = load_config(args.config) if args.config else SimConfig()
    records = oracle_compare(args.instances, args.max_tasks, args.max_locations, args.seed, cfg)
    table = gap_table(records)
    print(format_gap_table(table))
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(json.dumps(table, indent=2, sort_keys=True), encoding="utf-8")
    return EXIT_OK


def cmd_validate_trace(args) -> int:
    table = load_trace(args.trace)
    print(f"ok: {table.n_slots} slots x {len(table.regions)} regions "
          f"({', '.join(table.regions)}), {table.timestamps[0].isoformat()} .. "
          f"{table.timestamps[-1].isoformat()}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog=PROG, description="Carbon-aware ML task offloading simulator")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def sim_flags(sp):
        sp.add_argument("--config", help="JSON config (keys as SimConfig fields)")
        sp.add_argument("--trace", help="carbon-intensity CSV (default: bundled synthetic trace)")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--v", type=float, help="Lyapunov control parameter")
        sp.add_argument("--budget", type=float, help="per-slot purchasing budget ($)")
        sp.add_argument("--frame-length", type=int)
        sp.add_argument("--frame-count", type=int)
        sp.add_argument("--rounding", choices=("r3dra", "irr"))
        sp.add_argument("--no-repair", action="store_true", help="disable the capacity repair pass")

    run = sub.add_parser("run", help="simulate one policy")
    sim_flags(run)
    run.add_argument("--policy", required=True, help="|".join(POLICY_NAMES))
    run.add_argument("--seed", type=int)
    run.set_defaults(func=cmd_run)

    sw = sub.add_parser("sweep", help="grid over one parameter")
    sim_flags(sw)
    sw.add_argument("--param", required=True,
                    help="v | frame_length | budget_per_slot | future_price_mean | tasks_max | "
                         "num_locations | price_kind")
    sw.add_argument("--values", required=True, help="comma-separated values")
    sw.add_argument("--policies", default="ttoa", help="comma-separated policy names")
    sw.add_argument("--seeds", default="0", help="comma-separated seeds")
    sw.add_argument("--jobs", type=int, help="parallel runs (default: available cores)")
    sw.set_defaults(func=cmd_sweep)

    oc = sub.add_parser("oracle-compare", help="rounding gap against exhaustive search")
    oc.add_argument("--instances", type=int, default=200)
    oc.add_argument("--max-tasks", type=int, default=6)
    oc.add_argument("--max-locations", type=int, default=4)
    oc.add_argument("--seed", type=int, default=0)
    oc.add_argument("--config")
    oc.add_argument("--out", help="write the table as JSON to this file")
    oc.set_defaults(func=cmd_oracle_compare)

    vt = sub.add_parser("validate-trace", help="check a carbon-intensity CSV")
    vt.add_argument("--trace", required=True)
    vt.set_defaults(func=cmd_validate_trace)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    level = os.environ.get("CARBON_SCHED_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        return _diagnose("usage", EXIT_USAGE, str(exc))
    except ConstraintViolation as exc:
        extra = {"slot": exc.slot}
        if exc.dump_path is not None:
            extra["dump"] = str(exc.dump_path)
        return _diagnose("constraint", EXIT_CONSTRAINT, str(exc), **extra)
    except TraceError as exc:
        return _diagnose("trace", EXIT_INPUT, str(exc), line=exc.line)
    except (ValidationError, FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        return _diagnose("input", EXIT_INPUT, str(exc))


if __name__ == "__main__":
    sys.exit(main())
