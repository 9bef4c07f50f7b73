"""Emission, purchase cost, accuracy loss and feasibility checks."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import Location, SlotDecision, SlotObservation, ValidationError

FEASIBILITY_TOL = 1e-9


def emission_matrix(obs: SlotObservation, locations: Sequence[Location]) -> np.ndarray:
    """kgCO2 emitted if task i runs at location j: H_i * P_j * C_j."""
    if len(obs.carbon_intensity) != len(locations):
        raise ValidationError(
            f"slot {obs.slot}: {len(obs.carbon_intensity)} intensities for {len(locations)} locations"
        )
    per_bit = np.array([loc.energy_per_bit for loc in locations]) * obs.carbon_intensity
    return np.outer(obs.input_bits(), per_bit)


def _check_shape(decision: SlotDecision, obs: SlotObservation, n_locations: int) -> None:
    if decision.assignment.shape != (obs.n_tasks, n_locations):
        raise ValidationError(
            f"slot {obs.slot}: assignment shape {decision.assignment.shape} "
            f"!= ({obs.n_tasks}, {n_locations})"
        )


def carbon_emission(decision: SlotDecision, obs: SlotObservation,
                    locations: Sequence[Location]) -> float:
    _check_shape(decision, obs, len(locations))
    return float(np.sum(decision.assignment * emission_matrix(obs, locations)))


def purchase_cost(decision: SlotDecision, obs: SlotObservation, frame_future_price: float) -> float:
    """Dollars spent on the CER held this slot (future share + spot)."""
    if decision.cer_spot < 0 or decision.cer_future_share < 0:
        raise ValidationError("purchase quantities must be >= 0")
    if not (frame_future_price > 0 and obs.spot_price > 0):
        raise ValidationError("prices must be > 0")
    return decision.cer_future_share * frame_future_price + decision.cer_spot * obs.spot_price


def accuracy_loss(decision: SlotDecision, locations: Sequence[Location]) -> float:
    a = np.array([loc.accuracy_loss for loc in locations])
    if decision.assignment.shape[1] != len(a):
        raise ValidationError("assignment columns must match locations")
    return float(np.sum(decision.assignment @ a))


@dataclass(frozen=True)
class ConstraintReport:
    """Slacks of the per-slot constraints; negative slack is a violation.

    ``binary_slack``: minus the largest distance of an entry from {0, 1}.
    ``assignment_slack``: minus the largest |row sum - 1| over non-dropped rows.
    ``capacity_slack``: per edge, W_j - load_j in cycles.
    ``coverage_slack``: CER held minus emission, kgCO2.
    """

    binary_slack: float
    assignment_slack: float
    capacity_slack: tuple[float, ...]
    coverage_slack: float
    tol: float = FEASIBILITY_TOL

    @property
    def binary_ok(self) -> bool:
        return self.binary_slack >= -self.tol

    @property
    def assignment_ok(self) -> bool:
        return self.assignment_slack >= -self.tol

    @property
    def capacity_ok(self) -> bool:
        return all(s >= -self.tol for s in self.capacity_slack)

    @property
    def coverage_ok(self) -> bool:
        return self.coverage_slack >= -self.tol

    @property
    def feasible(self) -> bool:
        return self.binary_ok and self.assignment_ok and self.capacity_ok and self.coverage_ok

    @property
    def worst_violation(self) -> float:
        slacks = [self.binary_slack, self.assignment_slack, self.coverage_slack, *self.capacity_slack]
        return max(0.0, -min(slacks))

    def to_dict(self) -> dict:
        return {
            "feasible": self.feasible,
            "binary_slack": self.binary_slack,
            "assignment_slack": self.assignment_slack,
            "capacity_slack": list(self.capacity_slack),
            "coverage_slack": self.coverage_slack,
            "worst_violation": self.worst_violation,
        }


def check_constraints(decision: SlotDecision, obs: SlotObservation,
                      locations: Sequence[Location], tol: float = FEASIBILITY_TOL) -> ConstraintReport:
    x = decision.assignment
    n, m = obs.n_tasks, len(locations)
    _check_shape(decision, obs, m)
    if n == 0:
        binary = assign = 0.0
        loads = np.zeros(m)
    else:
        binary = -float(np.max(np.minimum(np.abs(x), np.abs(x - 1.0))))
        keep = ~np.array(decision.dropped, dtype=bool)
        row_err = np.abs(x.sum(axis=1) - 1.0)[keep]
        assign = -float(row_err.max()) if row_err.size else 0.0
        loads = obs.workloads() @ x
    cap = tuple(
        float(loc.capacity_cycles - loads[j]) for j, loc in enumerate(locations) if not loc.is_cloud
    )
    cover = decision.cer_available - carbon_emission(decision, obs, locations)
    return ConstraintReport(binary, assign, cap, float(cover), tol)
