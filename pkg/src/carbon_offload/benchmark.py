"""Rounding-gap harness: R3DRA and independent rounding against exhaustive search."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from .costs import check_constraints
from .data import TraceTable, gen_locations, gen_prices, load_bundled_trace, substream
from .model import MlTask, SimConfig, SlotDecision, SlotObservation, ValidationError
from .rounding import MAX_BRUTE_LOCATIONS, MAX_BRUTE_TASKS, brute_force_opt, irr_round, r3dra_round, repair_capacity
from .subproblems import Subproblem


@dataclass(frozen=True)
class GapRecord:
    index: int
    frame_start: bool
    n_tasks: int
    n_locations: int
    queue: float
    opt: float
    lp: float
    r3dra: float
    irr: float
    r3dra_feasible: bool
    irr_feasible: bool

    @property
    def r3dra_ratio(self) -> float:
        return self.r3dra / self.opt

    @property
    def irr_ratio(self) -> float:
        return self.irr / self.opt


def balance_queue(problem: Subproblem) -> float:
    """Backlog at which moving a task from the cloud to an average edge
    trades accuracy and purchase cost one for one."""
    e = problem.emission
    a = problem.accuracy
    d_acc = float(a[1:].mean() - a[0])
    d_em = float((e[:, 0] - e[:, 1:].mean(axis=1)).mean()) if e.size else 0.0
    unit = problem.purchase_unit_cost * (problem.frame_length if problem.frame_start else 1)
    if d_em <= 0:
        return problem.v * d_acc / (unit * float(e.mean())) if e.size and e.mean() > 0 else 0.0
    return problem.v * d_acc / (unit * d_em)


def random_instance(rng: np.random.Generator, cfg: SimConfig, trace: TraceTable, max_tasks: int,
                    max_locations: int) -> Subproblem:
    """One random frame-start or in-frame subproblem with realistic parameter ranges.

    The backlog is the instance's balance point times 10^U(-1, 1), so both
    objective terms matter.
    """
    n = int(rng.integers(1, max_tasks + 1))
    m = int(rng.integers(2, max_locations + 1))
    sub_cfg = cfg.replace(num_locations=m)
    cols = trace.location_regions(m)
    locations = gen_locations(sub_cfg, rng, [trace.regions[c] for c in cols])
    slot = int(rng.integers(trace.n_slots))
    prices = gen_prices(cfg.price_model, 1, rng)
    tasks = tuple(MlTask(i, float(rng.uniform(*cfg.input_bits_range)), float(rng.uniform(*cfg.workload_range)))
                  for i in range(n))
    frame_start = bool(rng.random() < 0.5)
    obs = SlotObservation(slot, trace.slot_intensities(slot, cols), float(prices.spot[0]),
                          float(prices.future[0]), tasks)
    probe = Subproblem(obs, locations, 1.0, cfg.lyapunov_v, frame_start, cfg.frame_length)
    share = 0.0
    if not frame_start:
        share = float(rng.uniform(0.0, 1.0) * probe.emission[:, 0].sum())
        probe = Subproblem(obs, locations, 1.0, cfg.lyapunov_v, False, 1, share)
    q = balance_queue(probe) * 10.0 ** rng.uniform(-1.0, 1.0)
    return Subproblem(obs, locations, q, cfg.lyapunov_v, frame_start,
                      cfg.frame_length if frame_start else 1, share)


def evaluate_instance(problem: Subproblem, rng: np.random.Generator, index: int = 0) -> GapRecord:
    opt = brute_force_opt(problem)
    relaxed = problem.solve_relaxation()
    work = problem.obs.workloads()
    outcome = repair_capacity(r3dra_round(relaxed.fractional, work, problem.locations, rng), work,
                              problem.locations)
    irr = irr_round(relaxed.fractional, rng)

    def feasible(x: np.ndarray, dropped) -> bool:
        purchase = problem.minimal_purchase(x)
        if problem.frame_start:
            decision = SlotDecision(x, 0.0, purchase / problem.frame_length, dropped)
        else:
            decision = SlotDecision(x, purchase, problem.future_share, dropped)
        return check_constraints(decision, problem.obs, problem.locations).feasible and not any(dropped)

    return GapRecord(
        index, problem.frame_start, problem.n_tasks, problem.n_locations, problem.queue,
        opt.objective, relaxed.objective, problem.objective(outcome.assignment),
        problem.objective(irr.assignment), feasible(outcome.assignment, outcome.dropped),
        feasible(irr.assignment, irr.dropped),
    )


def oracle_compare(instances: int, max_tasks: int = 6, max_locations: int = 4, seed: int = 0,
                   cfg: SimConfig | None = None, trace: TraceTable | None = None) -> list[GapRecord]:
    if instances < 1:
        raise ValidationError("need at least one instance")
    if not 1 <= max_tasks <= MAX_BRUTE_TASKS or not 2 <= max_locations <= MAX_BRUTE_LOCATIONS:
        raise ValidationError(
            f"need 1 <= max_tasks <= {MAX_BRUTE_TASKS} and 2 <= max_locations <= {MAX_BRUTE_LOCATIONS}")
    cfg = SimConfig() if cfg is None else cfg
    trace = load_bundled_trace() if trace is None else trace
    gen = substream(seed, "instances")
    rounding_rng = substream(seed, "rounding")
    return [evaluate_instance(random_instance(gen, cfg, trace, max_tasks, max_locations), rounding_rng, k)
            for k in range(instances)]


def gap_table(records: list[GapRecord]) -> dict[str, Any]:
    r3 = np.array([r.r3dra_ratio for r in records])
    ir = np.array([r.irr_ratio for r in records])

    def stats(x: np.ndarray) -> dict[str, float]:
        return {"mean": float(x.mean()), "p50": float(np.percentile(x, 50)),
                "p95": float(np.percentile(x, 95)), "max": float(x.max())}

    return {
        "instances": len(records),
        "r3dra_over_opt": stats(r3),
        "irr_over_opt": stats(ir),
        "r3dra_within_1_5": float(np.mean(r3 <= 1.5)),
        "r3dra_infeasible": int(sum(not r.r3dra_feasible for r in records)),
        "irr_infeasible_rate": float(np.mean([not r.irr_feasible for r in records])),
        "lp_above_opt": int(sum(r.lp > r.opt * (1 + 1e-9) + 1e-9 for r in records)),
    }


def format_gap_table(table: dict[str, Any]) -> str:
    lines = [f"instances: {table['instances']}", "method,mean,p50,p95,max"]
    for key, name in (("r3dra_over_opt", "r3dra/opt"), ("irr_over_opt", "irr/opt")):
        s = table[key]
        lines.append(f"{name},{s['mean']:.6f},{s['p50']:.6f},{s['p95']:.6f},{s['max']:.6f}")
    lines.append(f"r3dra share within 1.5x opt: {table['r3dra_within_1_5']:.4f}")
    lines.append(f"r3dra infeasible after repair: {table['r3dra_infeasible']}")
    lines.append(f"irr infeasible rate: {table['irr_infeasible_rate']:.4f}")
    return "\n".join(lines)
