"""Per-slot offloading/purchasing subproblems and their LP relaxations.

Two shapes share one builder:

* frame start: decide the assignment and the future-market purchase r_lt,
  which is split evenly over the T slots of the frame (no spot purchase);
* in-frame slot: decide the assignment and the spot purchase r_rt on top of
  the already-held future share.

Both minimise ``V * accuracy loss + Q * (per-slot CER spend)`` subject to one
location per task, edge capacities and CER coverage of the slot's emission.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .costs import emission_matrix
from .model import Location, SlotObservation, ValidationError
from .simplex import LpProblem, LpSolution, simplex_solve


class SubproblemError(RuntimeError):
    pass


@dataclass(frozen=True)
class Subproblem:
    obs: SlotObservation
    locations: tuple[Location, ...]
    queue: float
    v: float
    frame_start: bool
    frame_length: int = 1
    future_share: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "locations", tuple(self.locations))
        if self.queue < 0 or self.v < 0 or self.future_share < 0:
            raise ValidationError("queue, v and future_share must be >= 0")
        if self.frame_length < 1:
            raise ValidationError("frame_length must be >= 1")
        if self.frame_start and self.future_share:
            raise ValidationError("a frame-start problem holds no prior future share")
        object.__setattr__(self, "_emission", emission_matrix(self.obs, self.locations))

    @property
    def n_tasks(self) -> int:
        return self.obs.n_tasks

    @property
    def n_locations(self) -> int:
        return len(self.locations)

    @property
    def emission(self) -> np.ndarray:
        return self._emission  # type: ignore[attr-defined]

    @property
    def accuracy(self) -> np.ndarray:
        return np.array([loc.accuracy_loss for loc in self.locations])

    @property
    def purchase_unit_cost(self) -> float:
        """Dollars charged to this slot per kg of the purchase variable."""
        if self.frame_start:
            return self.obs.future_price / self.frame_length
        return self.obs.spot_price

    def minimal_purchase(self, assignment: np.ndarray) -> float:
        return minimal_cer(assignment, self.obs, self.locations, self.future_share,
                           frame_start=self.frame_start, frame_length=self.frame_length,
                           emission=self.emission)

    def objective(self, assignment: np.ndarray, purchase: float | None = None) -> float:
        if purchase is None:
            purchase = self.minimal_purchase(assignment)
        loss = float(np.sum(np.asarray(assignment) @ self.accuracy))
        return self.v * loss + self.queue * self.purchase_unit_cost * purchase

    def to_lp(self) -> LpProblem:
        n, m = self.n_tasks, self.n_locations
        nx = n * m
        c = np.concatenate([np.tile(self.v * self.accuracy, n), [self.queue * self.purchase_unit_cost]])

        a_eq = np.zeros((n, nx + 1))
        for i in range(n):
            a_eq[i, i * m:(i + 1) * m] = 1.0
        b_eq = np.ones(n)

        workloads = self.obs.workloads()
        edges = [j for j, loc in enumerate(self.locations) if not loc.is_cloud]
        a_ub = np.zeros((len(edges) + 1, nx + 1))
        b_ub = np.zeros(len(edges) + 1)
        for r, j in enumerate(edges):
            # capacity rows are normalised by W_j
            a_ub[r, j:nx:m] = workloads / self.locations[j].capacity_cycles
            b_ub[r] = 1.0
        e_scale = float(self.emission.max(initial=0.0)) or 1.0
        a_ub[-1, :nx] = self.emission.ravel() / e_scale
        if self.frame_start:
            a_ub[-1, nx] = -1.0 / (self.frame_length * e_scale)
            b_ub[-1] = 0.0
        else:
            a_ub[-1, nx] = -1.0 / e_scale
            b_ub[-1] = self.future_share / e_scale

        lower = np.zeros(nx + 1)
        upper = np.concatenate([np.ones(nx), [np.inf]])
        return LpProblem(c, a_ub, b_ub, a_eq, b_eq, lower, upper)

    def solve_relaxation(self) -> "Relaxation":
        sol = simplex_solve(self.to_lp())
        if not sol.optimal:
            raise SubproblemError(f"slot {self.obs.slot}: relaxed subproblem is {sol.status.value}")
        n, m = self.n_tasks, self.n_locations
        x = np.clip(sol.x[: n * m].reshape(n, m), 0.0, 1.0)
        # The LP already drives the purchase to its minimum when Q > 0; with Q = 0
        # it is objective-free, so always report the least feasible amount.
        purchase = self.minimal_purchase(x)
        return Relaxation(x, purchase, self.objective(x, purchase), sol)


@dataclass(frozen=True)
class Relaxation:
    fractional: np.ndarray
    purchase: float
    objective: float
    lp: LpSolution


def build_p3(obs_t: SlotObservation, q: float, v: float, locations: Sequence[Location],
             frame_length: int) -> LpProblem:
    """Relaxed frame-start problem (variables: x_ij in [0,1], r_lt >= 0)."""
    return Subproblem(obs_t, tuple(locations), q, v, True, frame_length).to_lp()


def build_p4(obs: SlotObservation, q: float, future_share: float, v: float,
             locations: Sequence[Location]) -> LpProblem:
    """Relaxed in-frame problem (variables: x_ij in [0,1], r_rt >= 0)."""
    return Subproblem(obs, tuple(locations), q, v, False, 1, future_share).to_lp()


def minimal_cer(assignment: np.ndarray, obs: SlotObservation, locations: Sequence[Location],
                future_share: float = 0.0, *, frame_start: bool = False, frame_length: int = 1,
                emission: np.ndarray | None = None) -> float:
    """Least purchase that covers the slot's emission for a fixed assignment.

    In-frame: r_rt = max(0, Car - share). Frame start: r_lt = T * Car.
    """
    if emission is None:
        emission = emission_matrix(obs, locations)
    car = float(np.sum(np.asarray(assignment, dtype=float) * emission))
    if frame_start:
        return frame_length * max(car, 0.0)
    return max(0.0, car - future_share)
