"""Acceptance gate: one test and one printed PASS/FAIL line per criterion.

Criteria that this implementation cannot meet are asserted at their stated
tolerance and marked as strict expected failures, so they stay visible as
red lines and would flag an unexpected pass.
"""

import time

import numpy as np
import pytest

from carbon_offload.benchmark import gap_table, oracle_compare
from carbon_offload.engine import run_simulation
from carbon_offload.model import SimConfig
from carbon_offload.rounding import r3dra_round
from carbon_offload.simplex import simplex_solve

from conftest import ACCEPTANCE_LINES, cloud, edge
from oracles import random_feasible_lp, vertex_enumeration

SEED = 0
V_GRID = [k * 1e8 for k in range(1, 11)]
T_GRID = [5, 10, 15, 20, 25, 30]

_runs: dict = {}


def run(policy, seed=SEED, **changes):
    key = (policy, seed, tuple(sorted(changes.items())))
    if key not in _runs:
        cfg = SimConfig(**changes)
        if "frame_length" in changes:
            cfg = cfg.replace(frame_count=SimConfig().horizon // cfg.frame_length)
        _runs[key] = run_simulation(cfg, policy, seed)
    return _runs[key]


def criterion_runs():
    """Every run used by criteria 3-6."""
    out = [run("ttoa", lyapunov_v=3e8)]
    out += [run("ttoa", lyapunov_v=v) for v in V_GRID]
    out += [run(p, lyapunov_v=8e8) for p in ("ttoa", "acloud", "greedy")]
    out += [run(p, frame_length=t) for t in T_GRID for p in ("ttoa", "otime")]
    return out


def record(k, ok, detail):
    line = f"criterion {k:>2} {'PASS' if ok else 'FAIL'}: {detail}"
    ACCEPTANCE_LINES[k] = line
    print(line)
    return ok


def test_c01_rounding_gap_against_exhaustive_search():
    t0 = time.perf_counter()
    table = gap_table(oracle_compare(200, max_tasks=6, max_locations=4, seed=SEED))
    dt = time.perf_counter() - t0
    ok = table["r3dra_within_1_5"] >= 0.95 and table["r3dra_infeasible"] == 0 and dt < 120
    assert record(1, ok, f"share within 1.5x OPT {table['r3dra_within_1_5']:.3f} (>= 0.95), "
                         f"infeasible after repair {table['r3dra_infeasible']} (== 0), "
                         f"p95 ratio {table['r3dra_over_opt']['p95']:.3f}, {dt:.1f}s (< 120s)")


def test_c02_marginals_preserved():
    rng = np.random.default_rng(SEED)
    x = rng.dirichlet(np.ones(4), size=5)
    locs = (cloud(), *(edge(j, capacity=1e30) for j in range(1, 4)))
    work = rng.uniform(5e11, 1e12, 5)
    t0 = time.perf_counter()
    hits = np.zeros_like(x)
    for _ in range(10_000):
        hits += r3dra_round(x, work, locs, rng).assignment
    dt = time.perf_counter() - t0
    err = float(np.abs(hits / 10_000 - x).max())
    assert record(2, err <= 0.02 and dt < 30, f"max |freq - x| {err:.4f} (<= 0.02), {dt:.1f}s (< 30s)")


@pytest.mark.xfail(strict=True, reason="running average is not monotone step by step over the last "
                                       "300 slots; see the decisions ledger")
def test_c03_budget_compliance():
    t0 = time.perf_counter()
    rep = run("ttoa", lyapunov_v=3e8)
    dt = time.perf_counter() - t0
    budget = SimConfig().budget_per_slot
    avg = rep.series("avg_purchase_cost")
    tail = avg[-300:]
    steps = np.diff(tail)
    rises = int(np.sum(steps > 1e-12 * np.abs(tail[:-1])))
    final_ok = avg[-1] <= 1.05 * budget
    slope = float(np.polyfit(np.arange(300), tail, 1)[0])
    ok = final_ok and rises == 0 and dt < 60
    assert record(3, ok, f"final avg cost / budget {avg[-1] / budget:.4f} (<= 1.05), "
                         f"rising steps in last 300 slots {rises} (== 0; OLS slope {slope:.3g} $/slot), "
                         f"{dt:.1f}s (< 60s)")


@pytest.mark.xfail(strict=True, reason="V in [1e8, 1e9] is negligible against the queue term in "
                                       "these units; see the decisions ledger")
def test_c04_v_tradeoff():
    t0 = time.perf_counter()
    reps = [run("ttoa", lyapunov_v=v) for v in V_GRID]
    dt = time.perf_counter() - t0
    loss = np.array([r.summary()["avg_accuracy_loss"] for r in reps])
    backlog = np.array([r.summary()["avg_queue_backlog"] for r in reps])
    worst_rise = float(np.max(loss[1:] / loss[:-1] - 1.0))
    backlog_drops = int(np.sum(np.diff(backlog) < 0))
    r2 = float(np.corrcoef(V_GRID, backlog)[0, 1] ** 2) if np.std(backlog) > 0 else float("nan")
    ok = worst_rise <= 0.01 and backlog_drops == 0 and r2 >= 0.8 and dt < 600
    assert record(4, ok, f"worst adjacent loss increase {worst_rise:+.2%} (<= 1%), "
                         f"backlog decreases {backlog_drops} (== 0), R^2 {r2:.3f} (>= 0.8), "
                         f"{dt:.1f}s (< 600s)")


@pytest.mark.xfail(strict=True, reason="budget-compliant TTOA cannot keep enough tasks on the cloud "
                                       "to stay within 0.05 of ACloud, and Greedy is more accurate; "
                                       "see the decisions ledger")
def test_c05_baseline_dominance():
    t, a, g = (run(p, lyapunov_v=8e8).summary() for p in ("ttoa", "acloud", "greedy"))
    cost_ratio = t["avg_purchase_cost"] / a["avg_purchase_cost"]
    acc_gap = t["accuracy_loss_per_task"] - a["accuracy_loss_per_task"]
    ok = (cost_ratio <= 0.6 and acc_gap <= 0.05
          and t["avg_accuracy_loss"] <= g["avg_accuracy_loss"])
    assert record(5, ok, f"cost TTOA/ACloud {cost_ratio:.3f} (<= 0.6), per-task loss gap to ACloud "
                         f"{acc_gap:.4f} (<= 0.05), avg loss TTOA {t['avg_accuracy_loss']:.4f} vs Greedy "
                         f"{g['avg_accuracy_loss']:.4f} (TTOA <=)")


def test_c06_two_timescale_advantage():
    pairs = [(run("ttoa", frame_length=t).summary()["avg_accuracy_loss"],
              run("otime", frame_length=t).summary()["avg_accuracy_loss"]) for t in T_GRID]
    ok = all(a <= b for a, b in pairs)
    detail = ", ".join(f"T={t}: {a:.4f}<={b:.4f}" for t, (a, b) in zip(T_GRID, pairs))
    assert record(6, ok, f"TTOA vs OTime avg loss {detail}")


def test_c07_sample_path_bound_every_frame():
    reps = criterion_runs()
    frames = sum(len(r.frame_checks) for r in reps)
    failed = sum(not c.passed for r in reps for c in r.frame_checks)
    complete = all(len(r.frame_checks) == r.config["frame_count"] for r in reps)
    assert record(7, failed == 0 and complete, f"{frames} frames over {len(reps)} runs, {failed} failures")


def test_c08_feasibility_every_slot():
    reps = criterion_runs()
    slots = sum(len(r.records) for r in reps)
    bad = sum(not rec.feasible for r in reps for rec in r.records)
    worst = min(float(r.series("coverage_slack_kg").min()) for r in reps)
    assert record(8, bad == 0 and worst >= -1e-9,
                  f"{slots} slots over {len(reps)} runs, {bad} infeasible, min coverage slack {worst:.3g} kg")


def test_c09_simplex_matches_vertex_enumeration():
    rng = np.random.default_rng(SEED)
    problems = [random_feasible_lp(rng, degenerate=bool(rng.random() < 0.3)) for _ in range(1000)]
    t0 = time.perf_counter()
    worst = 0.0
    for p in problems:
        sol = simplex_solve(p)
        best, _ = vertex_enumeration(p)
        worst = max(worst, abs(sol.objective - best) if sol.optimal else np.inf)
    dt = time.perf_counter() - t0
    assert record(9, worst <= 1e-6 and dt < 60, f"1000 LPs, worst |simplex - oracle| {worst:.2e} (<= 1e-6), "
                                                f"{dt:.1f}s (< 60s)")


def test_c10_byte_identical_repeat():
    first = run("ttoa", lyapunov_v=3e8).to_csv_text()
    again = run_simulation(SimConfig(lyapunov_v=3e8), "ttoa", SEED).to_csv_text()
    assert record(10, first == again, f"repeat CSV identical: {first == again} ({len(first)} bytes)")
