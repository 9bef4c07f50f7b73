"""Rounding fractional assignments to binary ones.

``r3dra_round`` is the resource-restricted randomized dependent rounding
procedure: within each task row, pairs of fractional entries exchange
probability mass until at most one stays fractional; a final fractional
entry is rounded up unless that overloads its edge. ``irr_round`` is the
independent-rounding baseline and ``brute_force_opt`` the exact optimum by
enumeration, used as the reference for rounding gaps.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .model import Location, ValidationError
from .subproblems import Subproblem

SNAP_TOL = 1e-9
ROW_SUM_TOL = 1e-6
MAX_BRUTE_TASKS = 8
MAX_BRUTE_LOCATIONS = 5


class InstanceTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class RepairMove:
    task: int
    source: int | None  # None: the task had been dropped (orphan)
    target: int


@dataclass(frozen=True, eq=False)
class RoundingOutcome:
    assignment: np.ndarray
    dropped: tuple[bool, ...]
    repairs: tuple[RepairMove, ...] = ()
    iterations: int = 0

    @property
    def orphans(self) -> int:
        return sum(1 for mv in self.repairs if mv.source is None) + sum(self.dropped)

    @property
    def capacity_moves(self) -> int:
        return sum(1 for mv in self.repairs if mv.source is not None)


def _snap(p: float, tol: float = SNAP_TOL) -> float:
    if abs(p) <= tol:
        return 0.0
    if abs(p - 1.0) <= tol:
        return 1.0
    return p


def _is_integral(p: float) -> bool:
    return p == 0.0 or p == 1.0


def pair_adjust(p1: float, p2: float, s1: float, s2: float,
                rng: np.random.Generator) -> tuple[float, float]:
    """Move probability mass between two fractional entries of one task row.

    The expected value of each entry is preserved and at least one of the two
    returned values is integral.
    """
    if not (s1 > 0 and s2 > 0):
        raise ValidationError("pair weights must be > 0")
    eps1 = min(1.0 - p1, (s2 / s1) * p2)
    eps2 = min(p1, (s2 / s1) * (1.0 - p2))
    if eps1 + eps2 <= 0:
        raise ValidationError(f"degenerate pair ({p1}, {p2}): nothing to exchange")
    if rng.random() < eps2 / (eps1 + eps2):
        p1, p2 = p1 + eps1, p2 - (s1 / s2) * eps1
    else:
        p1, p2 = p1 - eps2, p2 + (s1 / s2) * eps2
    return _snap(p1), _snap(p2)


def _validate_fractional(fractional: np.ndarray) -> np.ndarray:
    x = np.asarray(fractional, dtype=float)
    if x.ndim != 2:
        raise ValidationError("fractional assignment must be a 2-D matrix")
    if x.size and (x.min() < -ROW_SUM_TOL or x.max() > 1 + ROW_SUM_TOL):
        raise ValidationError("fractional entries must lie in [0, 1]")
    bad = np.flatnonzero(np.abs(x.sum(axis=1) - 1.0) > ROW_SUM_TOL)
    if bad.size:
        raise ValidationError(f"rows {bad.tolist()} do not sum to 1")
    return np.clip(x, 0.0, 1.0)


def r3dra_round(fractional: np.ndarray, workloads: Sequence[float], locations: Sequence[Location],
                rng: np.random.Generator) -> RoundingOutcome:
    x = _validate_fractional(fractional)
    n, m = x.shape
    workloads = np.asarray(workloads, dtype=float)
    caps = np.array([loc.capacity_cycles for loc in locations])
    out = np.zeros((n, m))
    dropped = [False] * n
    loads = np.zeros(m)
    iterations = 0
    for i in range(n):
        p = [_snap(v) for v in x[i]]
        floating = [j for j in range(m) if not _is_integral(p[j])]
        for j in range(m):
            if _is_integral(p[j]):
                out[i, j] = p[j]
        weight = workloads[i]  # every entry of a row carries the task's workload
        while len(floating) > 1:
            a, b = rng.choice(len(floating), size=2, replace=False)
            m1, m2 = floating[a], floating[b]
            p[m1], p[m2] = pair_adjust(p[m1], p[m2], weight, weight, rng)
            iterations += 1
            for j in (m1, m2):
                if _is_integral(p[j]):
                    out[i, j] = p[j]
                    floating.remove(j)
        if len(floating) == 1:
            j = floating[0]
            # Row mass is conserved, so a leftover entry only survives as drift;
            # it never adds a second location to a row that already has one.
            out[i, j] = 0.0 if out[i].sum() >= 1.0 else 1.0
            if out[i, j] and loads[j] + workloads[i] > caps[j]:
                out[i, j] = 0.0
        if out[i].sum() == 0:
            dropped[i] = True
        loads += workloads[i] * out[i]
    return RoundingOutcome(out, tuple(dropped), (), iterations)


def irr_round(fractional: np.ndarray, rng: np.random.Generator) -> RoundingOutcome:
    """Independent per-row categorical draw; capacities are ignored."""
    x = _validate_fractional(fractional)
    n, m = x.shape
    out = np.zeros((n, m))
    for i in range(n):
        probs = x[i] / x[i].sum()
        out[i, rng.choice(m, p=probs)] = 1.0
    return RoundingOutcome(out, (False,) * n, (), 0)


def repair_capacity(outcome: RoundingOutcome, workloads: Sequence[float],
                    locations: Sequence[Location]) -> RoundingOutcome:
    """Send dropped tasks and, per overloaded edge, its largest tasks to the cloud."""
    x = outcome.assignment.copy()
    workloads = np.asarray(workloads, dtype=float)
    moves = list(outcome.repairs)
    for i, was_dropped in enumerate(outcome.dropped):
        if was_dropped:
            x[i, :] = 0.0
            x[i, 0] = 1.0
            moves.append(RepairMove(i, None, 0))
    edges = [j for j, loc in enumerate(locations) if not loc.is_cloud]
    while True:
        loads = workloads @ x if x.size else np.zeros(len(locations))
        over = [j for j in edges if loads[j] > locations[j].capacity_cycles]
        if not over:
            break
        j = over[0]
        on_edge = np.flatnonzero(x[:, j] == 1.0)
        i = int(on_edge[np.argmax(workloads[on_edge])])
        x[i, j] = 0.0
        x[i, 0] = 1.0
        moves.append(RepairMove(i, j, 0))
    return replace(outcome, assignment=x, dropped=(False,) * x.shape[0], repairs=tuple(moves))


@dataclass(frozen=True, eq=False)
class BruteForceResult:
    assignment: np.ndarray
    purchase: float
    objective: float
    candidates: int = field(default=0)


def brute_force_opt(problem: Subproblem) -> BruteForceResult:
    """Exact optimum of the integral subproblem by enumerating all M^N assignments."""
    n, m = problem.n_tasks, problem.n_locations
    if n > MAX_BRUTE_TASKS or m > MAX_BRUTE_LOCATIONS:
        raise InstanceTooLarge(
            f"brute force limited to N <= {MAX_BRUTE_TASKS}, M <= {MAX_BRUTE_LOCATIONS} (got {n}, {m})"
        )
    if n == 0:
        empty = np.zeros((0, m))
        purchase = problem.minimal_purchase(empty)
        return BruteForceResult(empty, purchase, problem.objective(empty, purchase), 1)

    choice = np.array(list(itertools.product(range(m), repeat=n)), dtype=int)
    workloads = problem.obs.workloads()
    feasible = np.ones(len(choice), dtype=bool)
    for j, loc in enumerate(problem.locations):
        if not loc.is_cloud:
            feasible &= ((choice == j) * workloads).sum(axis=1) <= loc.capacity_cycles
    choice = choice[feasible]
    rows = np.arange(n)
    car = problem.emission[rows, choice].sum(axis=1)
    loss = problem.accuracy[choice].sum(axis=1)
    if problem.frame_start:
        purchase = problem.frame_length * car
    else:
        purchase = np.maximum(0.0, car - problem.future_share)
    objective = problem.v * loss + problem.queue * problem.purchase_unit_cost * purchase
    k = int(np.argmin(objective))
    best = np.zeros((n, m))
    best[rows, choice[k]] = 1.0
    purchase_k = problem.minimal_purchase(best)
    return BruteForceResult(best, purchase_k, problem.objective(best, purchase_k), int(feasible.sum()))
