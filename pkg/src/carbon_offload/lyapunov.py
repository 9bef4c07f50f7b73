"""Virtual budget queue, quadratic Lyapunov function and frame drift bound."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence


class InvariantError(RuntimeError):
    """A state invariant (e.g. a non-negative backlog) was broken."""


def queue_update(q: float, slot_cost: float, budget: float) -> float:
    """One step of Q(τ+1) = max(Q(τ) + C(τ) - R_bug, 0)."""
    if q < 0:
        raise InvariantError(f"queue backlog must be >= 0, got {q}")
    if slot_cost < 0:
        raise InvariantError(f"slot cost must be >= 0, got {slot_cost}")
    if not budget > 0:
        raise ValueError(f"budget must be > 0, got {budget}")
    return max(q + slot_cost - budget, 0.0)


def lyapunov_value(q: float) -> float:
    return 0.5 * q * q


@dataclass
class VirtualQueue:
    budget: float
    backlog: float = 0.0
    history: list[float] = field(default_factory=list)

    def update(self, slot_cost: float) -> float:
        self.history.append(self.backlog)
        self.backlog = queue_update(self.backlog, slot_cost, self.budget)
        return self.backlog


@dataclass(frozen=True)
class BoundConstants:
    b1: float
    b2: float
    c_max: float
    r_bug: float


def bound_constants(c_max: float, budget: float, frame_length: int) -> BoundConstants:
    """B1 = (C_max² + R_bug²)/2 and B2 = B1 + C_max²(T-1)/2."""
    if c_max < 0 or not budget > 0 or frame_length < 1:
        raise ValueError("need c_max >= 0, budget > 0, frame_length >= 1")
    b1 = (c_max * c_max + budget * budget) / 2.0
    b2 = b1 + c_max * c_max * (frame_length - 1) / 2.0
    return BoundConstants(b1, b2, c_max, budget)


@dataclass(frozen=True)
class FrameBoundCheck:
    lhs: float
    rhs: float
    passed: bool


def verify_frame_bound(queue: Sequence[float], accuracy: Sequence[float], costs: Sequence[float],
                       v: float, constants: BoundConstants, rel_tol: float = 1e-9) -> FrameBoundCheck:
    """Check the loosened T-slot drift-plus-penalty inequality on one sample path.

    ``queue`` holds Q(t), ..., Q(t+T) (T+1 values); ``accuracy`` and ``costs``
    hold the T per-slot accuracy losses and purchase costs of the frame.
    The comparison allows a relative rounding slack of ``rel_tol``.
    """
    t_len = len(costs)
    if t_len < 1 or len(accuracy) != t_len or len(queue) != t_len + 1:
        raise ValueError("frame trajectory needs T costs, T accuracy values and T+1 queue values")
    q0 = queue[0]
    penalty = v * sum(accuracy)
    lhs = lyapunov_value(queue[-1]) - lyapunov_value(q0) + penalty
    drift_term = sum(q0 * (c - constants.r_bug) for c in costs)
    rhs = constants.b2 * t_len + penalty + drift_term
    scale = abs(lhs) + abs(rhs) + constants.b2 * t_len + abs(drift_term) + abs(penalty)
    return FrameBoundCheck(lhs, rhs, lhs <= rhs + rel_tol * scale)
