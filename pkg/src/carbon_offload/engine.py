"""Trace-driven slot loop, per-run reports and parameter sweeps."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .costs import accuracy_loss, carbon_emission, check_constraints
from .data import (
    TraceTable,
    gen_locations,
    gen_prices,
    gen_tasks,
    load_bundled_trace,
    substream,
    task_stream_digest,
)
from .lyapunov import FrameBoundCheck, bound_constants, verify_frame_bound
from .model import PriceKind, SimConfig, SlotObservation, ValidationError, validate_locations
from .policies import PolicyKind, PolicyState, parse_policy, step

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1

SLOT_COLUMNS = (
    "slot", "frame", "is_frame_start", "n_tasks",
    "accuracy_loss", "purchase_cost", "emission_kg", "cer_future_share_kg", "cer_spot_kg",
    "queue_backlog", "queue_next", "n_cloud", "n_edge",
    "coverage_slack_kg", "min_capacity_slack_cycles", "assignment_slack", "binary_slack", "feasible",
    "repairs", "orphans", "spot_price", "future_price",
    "avg_accuracy_loss", "avg_purchase_cost", "avg_queue_backlog",
)


class ConstraintViolation(RuntimeError):
    """A decision failed the per-slot feasibility check; ``dump`` holds the slot state."""

    def __init__(self, slot: int, dump: dict[str, Any], dump_path: Path | None = None) -> None:
        self.slot = slot
        self.dump = dump
        self.dump_path = dump_path
        where = f" (dump: {dump_path})" if dump_path else ""
        super().__init__(f"slot {slot}: constraint violation, worst {dump['report']['worst_violation']:.3e}{where}")


@dataclass(frozen=True)
class SlotRecord:
    slot: int
    frame: int
    is_frame_start: bool
    n_tasks: int
    accuracy_loss: float
    purchase_cost: float
    emission_kg: float
    cer_future_share_kg: float
    cer_spot_kg: float
    queue_backlog: float
    queue_next: float
    n_cloud: int
    n_edge: int
    coverage_slack_kg: float
    min_capacity_slack_cycles: float
    assignment_slack: float
    binary_slack: float
    feasible: bool
    repairs: int
    orphans: int
    spot_price: float
    future_price: float
    avg_accuracy_loss: float
    avg_purchase_cost: float
    avg_queue_backlog: float

    def csv_row(self) -> list[str]:
        return [repr(v) if isinstance(v, float) else str(int(v)) if isinstance(v, bool) else str(v)
                for v in dataclasses.astuple(self)]


@dataclass
class SimReport:
    policy: str
    seed: int
    config: dict[str, Any]
    records: list[SlotRecord] = field(default_factory=list)
    frame_checks: list[FrameBoundCheck] = field(default_factory=list)
    c_max: float = 0.0
    task_stream_hash: str = ""
    trace_wrapped: bool = False
    price_redraws: int = 0
    wall_clock_s: float = 0.0

    def series(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    @property
    def total_tasks(self) -> int:
        return sum(r.n_tasks for r in self.records)

    def summary(self) -> dict[str, Any]:
        n = len(self.records)
        tasks = self.total_tasks
        mean = (lambda name: float(self.series(name).mean())) if n else (lambda name: 0.0)
        return {
            "policy": self.policy,
            "seed": self.seed,
            "slots": n,
            "tasks": tasks,
            "avg_accuracy_loss": mean("accuracy_loss"),
            "accuracy_loss_per_task": float(self.series("accuracy_loss").sum() / tasks) if tasks else 0.0,
            "avg_purchase_cost": mean("purchase_cost"),
            "avg_emission_kg": mean("emission_kg"),
            "avg_queue_backlog": mean("queue_backlog"),
            "final_queue_backlog": self.records[-1].queue_next if n else 0.0,
            "cloud_fraction": float(sum(r.n_cloud for r in self.records) / tasks) if tasks else 0.0,
            "repairs": sum(r.repairs for r in self.records),
            "orphans": sum(r.orphans for r in self.records),
            "infeasible_slots": sum(not r.feasible for r in self.records),
            "frames": len(self.frame_checks),
            "frame_bound_failures": sum(not c.passed for c in self.frame_checks),
            "c_max": self.c_max,
            "task_stream_hash": self.task_stream_hash,
        }

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SLOT_COLUMNS)
        for r in self.records:
            w.writerow(r.csv_row())
        return buf.getvalue()

    def to_json(self) -> dict[str, Any]:
        return {
            "schema_version": SCHEMA_VERSION,
            "summary": self.summary(),
            "config": self.config,
            "trace_wrapped": self.trace_wrapped,
            "price_redraws": self.price_redraws,
            "frame_checks": [{"lhs": c.lhs, "rhs": c.rhs, "passed": c.passed} for c in self.frame_checks],
            "wall_clock_s": self.wall_clock_s,
        }

    def write(self, out_dir: str | Path) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        csv_path, json_path = out / "slots.csv", out / "report.json"
        csv_path.write_text(self.to_csv_text(), encoding="utf-8")
        json_path.write_text(json.dumps(self.to_json(), indent=2, sort_keys=True), encoding="utf-8")
        return csv_path, json_path


def _frame_checks(report: SimReport, cfg: SimConfig) -> None:
    costs = report.series("purchase_cost")
    acc = report.series("accuracy_loss")
    queue = report.series("queue_backlog")
    if not len(costs):
        return
    queue = np.append(queue, report.records[-1].queue_next)
    report.c_max = float(costs.max())
    consts = bound_constants(report.c_max, cfg.budget_per_slot, cfg.frame_length)
    t_len = cfg.frame_length
    for start in range(0, len(costs) - t_len + 1, t_len):
        report.frame_checks.append(verify_frame_bound(
            queue[start:start + t_len + 1].tolist(), acc[start:start + t_len].tolist(),
            costs[start:start + t_len].tolist(), cfg.lyapunov_v, consts))


def run_simulation(cfg: SimConfig, policy: PolicyKind | str, seed: int | None = None,
                   trace: TraceTable | None = None, out_dir: str | Path | None = None) -> SimReport:
    """Run one policy for ``cfg.horizon`` slots.

    Sub-streams for locations, prices and tasks depend only on ``seed``, so
    runs that share a seed see identical inputs whatever the policy or
    control parameter. When ``out_dir`` is given, per-slot rows are flushed
    to ``slots.csv`` as they are produced and ``report.json`` is written at
    the end.
    """
    kind = parse_policy(policy) if isinstance(policy, str) else policy
    seed = cfg.seed if seed is None else int(seed)
    trace = load_bundled_trace() if trace is None else trace
    started = time.perf_counter()
    horizon = cfg.horizon

    region_cols = trace.location_regions(cfg.num_locations)
    locations = gen_locations(cfg, substream(seed, "locations"),
                              [trace.regions[c] for c in region_cols])
    validate_locations(locations)
    prices = gen_prices(cfg.price_model, horizon, substream(seed, "prices"))
    tasks = gen_tasks(substream(seed, "tasks"), cfg, horizon)
    rng = substream(seed, "rounding")
    wrapped = trace.n_slots < horizon
    if wrapped:
        log.warning("trace has %d slots, fewer than the horizon %d; wrapping cyclically",
                    trace.n_slots, horizon)

    report = SimReport(kind.value, seed, cfg.replace(seed=seed).to_dict(),
                       task_stream_hash=task_stream_digest(tasks), trace_wrapped=wrapped,
                       price_redraws=prices.redraws)
    state = PolicyState.new(kind, cfg)
    sink = None
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        sink = (Path(out_dir) / "slots.csv").open("w", newline="", encoding="utf-8")
        writer = csv.writer(sink, lineterminator="\n")
        writer.writerow(SLOT_COLUMNS)
    sums = np.zeros(3)
    try:
        for tau in range(horizon):
            obs = SlotObservation(tau, trace.slot_intensities(tau, region_cols),
                                  float(prices.spot[tau]), float(prices.future[tau]), tasks[tau])
            q_before = state.queue.backlog
            result = step(state, obs, cfg, locations, rng)
            decision = result.decision
            check = check_constraints(decision, obs, locations)
            if not check.feasible:
                dump = {
                    "slot": tau, "policy": kind.value, "seed": seed,
                    "report": check.to_dict(),
                    "assignment": decision.assignment.tolist(),
                    "dropped": list(decision.dropped),
                    "cer_spot": decision.cer_spot, "cer_future_share": decision.cer_future_share,
                    "workloads": obs.workloads().tolist(), "input_bits": obs.input_bits().tolist(),
                    "capacities": [loc.capacity_cycles for loc in locations],
                    "carbon_intensity": obs.carbon_intensity.tolist(),
                    "queue_backlog": q_before,
                }
                path = None
                if out_dir is not None:
                    path = Path(out_dir) / f"violation_slot_{tau}.json"
                    path.write_text(json.dumps(dump, indent=2), encoding="utf-8")
                raise ConstraintViolation(tau, dump, path)

            n_cloud = int(decision.assignment[:, 0].sum()) if obs.n_tasks else 0
            rounding = result.rounding
            acc = accuracy_loss(decision, locations)
            sums += (acc, result.cost, q_before)
            k = tau + 1
            record = SlotRecord(
                slot=tau, frame=tau // cfg.frame_length, is_frame_start=tau % cfg.frame_length == 0,
                n_tasks=obs.n_tasks, accuracy_loss=acc, purchase_cost=result.cost,
                emission_kg=carbon_emission(decision, obs, locations),
                cer_future_share_kg=decision.cer_future_share, cer_spot_kg=decision.cer_spot,
                queue_backlog=q_before, queue_next=state.queue.backlog,
                n_cloud=n_cloud, n_edge=int(decision.assignment.sum()) - n_cloud,
                coverage_slack_kg=check.coverage_slack,
                min_capacity_slack_cycles=min(check.capacity_slack, default=float("inf")),
                assignment_slack=check.assignment_slack, binary_slack=check.binary_slack,
                feasible=check.feasible,
                repairs=rounding.capacity_moves if rounding else 0,
                orphans=rounding.orphans if rounding else 0,
                spot_price=obs.spot_price, future_price=obs.future_price,
                avg_accuracy_loss=float(sums[0] / k), avg_purchase_cost=float(sums[1] / k),
                avg_queue_backlog=float(sums[2] / k),
            )
            report.records.append(record)
            if sink is not None:
                writer.writerow(record.csv_row())
                sink.flush()
    finally:
        if sink is not None:
            sink.close()

    _frame_checks(report, cfg)
    report.wall_clock_s = time.perf_counter() - started
    if out_dir is not None:
        (Path(out_dir) / "report.json").write_text(
            json.dumps(report.to_json(), indent=2, sort_keys=True), encoding="utf-8")
    return report


# sweep parameter -> accepted aliases
SWEEP_PARAMS = {
    "v": ("v", "lyapunov_v", "V"),
    "frame_length": ("frame_length", "T"),
    "budget_per_slot": ("budget_per_slot", "R_bug", "budget"),
    "future_price_mean": ("future_price_mean", "E[R_lt]"),
    "tasks_max": ("tasks_max", "N_max"),
    "num_locations": ("num_locations", "M"),
    "price_kind": ("price_kind", "price-model", "price_model"),
}


def canonical_param(name: str) -> str:
    for canon, aliases in SWEEP_PARAMS.items():
        if name in aliases:
            return canon
    raise ValidationError(f"unknown sweep parameter {name!r}; choose from {', '.join(SWEEP_PARAMS)}")


def apply_param(cfg: SimConfig, param: str, value: Any) -> SimConfig:
    """Config with one swept parameter changed.

    ``frame_length`` keeps the horizon K*T fixed; ``future_price_mean``
    scales the spot mean by the same factor so the spot/future ratio holds.
    """
    param = canonical_param(param)
    if param == "v":
        return cfg.replace(lyapunov_v=float(value))
    if param == "frame_length":
        t = int(value)
        if t < 1:
            raise ValidationError("frame_length must be >= 1")
        return cfg.replace(frame_length=t, frame_count=max(1, cfg.horizon // t))
    if param == "budget_per_slot":
        return cfg.replace(budget_per_slot=float(value))
    pm = cfg.price_model
    if param == "future_price_mean":
        f = float(value) / pm.future_mean
        return cfg.replace(price_model=dataclasses.replace(
            pm, future_mean=float(value), future_spread=pm.future_spread * f,
            spot_mean=pm.spot_mean * f, spot_spread=pm.spot_spread * f))
    if param == "tasks_max":
        return cfg.replace(tasks_per_slot=(min(cfg.tasks_per_slot[0], int(value)), int(value)))
    if param == "num_locations":
        return cfg.replace(num_locations=int(value))
    return cfg.replace(price_model=dataclasses.replace(pm, kind=PriceKind(str(value))))


@dataclass(frozen=True)
class SweepCell:
    param: str
    value: Any
    policy: str
    seed: int


def _run_cell(args: tuple[SimConfig, SweepCell, TraceTable | None, str | None]) -> dict[str, Any]:
    cfg, cell, trace, out_dir = args
    report = run_simulation(apply_param(cfg, cell.param, cell.value), cell.policy, cell.seed, trace,
                            out_dir)
    return {"param": cell.param, "value": cell.value, **report.summary()}


def sweep(cfg: SimConfig, param: str, values: Sequence[Any], policies: Iterable[str],
          seeds: Iterable[int], trace: TraceTable | None = None, out_dir: str | Path | None = None,
          jobs: int = 1) -> list[dict[str, Any]]:
    """Run the Cartesian grid values x policies x seeds; rows come back in grid order."""
    param = canonical_param(param)
    values = list(values)
    policies = [parse_policy(p).value for p in policies]
    seeds = [int(s) for s in seeds]
    if not values or not policies or not seeds:
        raise ValidationError("sweep needs at least one value, policy and seed")
    for v in values:
        apply_param(cfg, param, v)  # fail fast on bad values
    cells = [SweepCell(param, v, p, s) for v in values for p in policies for s in seeds]
    args = []
    for cell in cells:
        cell_dir = None
        if out_dir is not None:
            cell_dir = str(Path(out_dir) / f"{param}={cell.value}" / f"{cell.policy}_seed{cell.seed}")
        args.append((cfg, cell, trace, cell_dir))
    jobs = max(1, int(jobs))
    if jobs == 1 or len(cells) == 1:
        rows = [_run_cell(a) for a in args]
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, len(cells))) as pool:
            rows = list(pool.map(_run_cell, args))
    if out_dir is not None:
        write_summary(rows, Path(out_dir) / "summary.csv")
    return rows


SUMMARY_COLUMNS = ("param", "value", "policy", "seed", "slots", "tasks", "avg_accuracy_loss",
                   "accuracy_loss_per_task", "avg_purchase_cost", "avg_emission_kg",
                   "avg_queue_backlog", "final_queue_backlog", "cloud_fraction", "repairs", "orphans",
                   "infeasible_slots", "frames", "frame_bound_failures", "task_stream_hash")


def write_summary(rows: Sequence[dict[str, Any]], path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for row in rows:
            w.writerow([repr(row[c]) if isinstance(row[c], float) else row[c] for c in SUMMARY_COLUMNS])


def default_jobs() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)
