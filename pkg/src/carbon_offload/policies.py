"""Online controllers: the two-timescale Lyapunov policy and three baselines.

Every controller returns one SlotDecision per slot and then settles the
slot's realized purchase cost into its own virtual queue, so queue
backlogs are comparable across policies.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .costs import emission_matrix, purchase_cost
from .lyapunov import VirtualQueue
from .model import FrameDecision, Location, SimConfig, SlotDecision, SlotObservation, ValidationError
from .rounding import RoundingOutcome, irr_round, r3dra_round, repair_capacity
from .subproblems import Subproblem, minimal_cer


class PolicyKind(str, Enum):
    TTOA = "ttoa"
    ACLOUD = "acloud"
    OTIME = "otime"
    GREEDY = "greedy"


POLICY_NAMES = tuple(k.value for k in PolicyKind)


def parse_policy(name: str) -> PolicyKind:
    try:
        return PolicyKind(name.lower())
    except ValueError:
        raise ValidationError(f"unknown policy {name!r}; choose from {', '.join(POLICY_NAMES)}") from None


@dataclass
class PolicyState:
    kind: PolicyKind
    queue: VirtualQueue
    frame_length: int = 1
    frame_future_total: float = 0.0
    frame_share: float = 0.0
    frame_price: float | None = None
    frame_queue: float = 0.0  # Q(t), frozen for the in-frame problems
    frame_start_slot: int = -1
    cumulative_spend: float = 0.0
    slots_settled: int = 0
    last_rounding: RoundingOutcome | None = field(default=None, repr=False)

    @classmethod
    def new(cls, kind: PolicyKind | str, cfg: SimConfig) -> "PolicyState":
        kind = parse_policy(kind) if isinstance(kind, str) else kind
        return cls(kind, VirtualQueue(cfg.budget_per_slot), cfg.frame_length)


@dataclass(frozen=True)
class SlotResult:
    decision: SlotDecision
    cost: float
    frame_decision: FrameDecision | None = None
    rounding: RoundingOutcome | None = None


def _settle(state: PolicyState, decision: SlotDecision, obs: SlotObservation,
            frame_price: float) -> float:
    cost = purchase_cost(decision, obs, frame_price)
    state.queue.update(cost)
    state.cumulative_spend += cost
    state.slots_settled += 1
    return cost


def _round(problem: Subproblem, cfg: SimConfig, rng: np.random.Generator) -> RoundingOutcome:
    obs = problem.obs
    if obs.n_tasks == 0:
        return RoundingOutcome(np.zeros((0, problem.n_locations)), ())
    relaxed = problem.solve_relaxation()
    if cfg.rounding == "irr":
        outcome = irr_round(relaxed.fractional, rng)
    else:
        outcome = r3dra_round(relaxed.fractional, obs.workloads(), problem.locations, rng)
    if cfg.repair:
        outcome = repair_capacity(outcome, obs.workloads(), problem.locations)
    return outcome


def ttoa_frame_start(state: PolicyState, obs_t: SlotObservation, cfg: SimConfig,
                     locations: Sequence[Location], rng: np.random.Generator) -> FrameDecision:
    """Decide the frame's future purchase and the frame-start slot's assignment."""
    if obs_t.slot % cfg.frame_length != 0:
        raise ValidationError(f"slot {obs_t.slot} is not a frame start (T={cfg.frame_length})")
    q = state.queue.backlog
    problem = Subproblem(obs_t, tuple(locations), q, cfg.lyapunov_v, True, cfg.frame_length)
    outcome = _round(problem, cfg, rng)
    total = problem.minimal_purchase(outcome.assignment)
    share = total / cfg.frame_length
    state.frame_future_total = total
    state.frame_share = share
    state.frame_price = obs_t.future_price
    state.frame_queue = q
    state.frame_start_slot = obs_t.slot
    state.last_rounding = outcome
    decision = SlotDecision(outcome.assignment, 0.0, share, outcome.dropped)
    return FrameDecision(total, cfg.frame_length, decision)


def ttoa_slot(state: PolicyState, obs: SlotObservation, cfg: SimConfig,
              locations: Sequence[Location], rng: np.random.Generator) -> SlotDecision:
    """In-frame decision with the queue frozen at its frame-start value."""
    if state.frame_start_slot < 0:
        raise ValidationError("ttoa_slot called before any frame start")
    problem = Subproblem(obs, tuple(locations), state.frame_queue, cfg.lyapunov_v, False, 1,
                         state.frame_share)
    outcome = _round(problem, cfg, rng)
    state.last_rounding = outcome
    spot = problem.minimal_purchase(outcome.assignment)
    return SlotDecision(outcome.assignment, spot, state.frame_share, outcome.dropped)


def acloud_slot(state: PolicyState, obs: SlotObservation, cfg: SimConfig,
                locations: Sequence[Location], rng: np.random.Generator | None = None) -> SlotDecision:
    x = np.zeros((obs.n_tasks, len(locations)))
    x[:, 0] = 1.0
    state.last_rounding = None
    return SlotDecision(x, minimal_cer(x, obs, locations), 0.0)


def otime_slot(state: PolicyState, obs: SlotObservation, cfg: SimConfig,
               locations: Sequence[Location], rng: np.random.Generator) -> SlotDecision:
    """Single-timescale variant: spot purchases only, current queue each slot."""
    problem = Subproblem(obs, tuple(locations), state.queue.backlog, cfg.lyapunov_v, False, 1, 0.0)
    outcome = _round(problem, cfg, rng)
    state.last_rounding = outcome
    return SlotDecision(outcome.assignment, problem.minimal_purchase(outcome.assignment), 0.0,
                        outcome.dropped)


def greedy_slot(state: PolicyState, obs: SlotObservation, cfg: SimConfig,
                locations: Sequence[Location], rng: np.random.Generator | None = None) -> SlotDecision:
    """Per task, in arrival order: the most accurate location that fits both the
    remaining capacity and the running-average budget, else the feasible
    location with the least emission."""
    m = len(locations)
    x = np.zeros((obs.n_tasks, m))
    if obs.n_tasks == 0:
        state.last_rounding = None
        return SlotDecision(x, 0.0, 0.0)
    emission = emission_matrix(obs, locations)
    work = obs.workloads()
    caps = np.array([loc.capacity_cycles for loc in locations])
    by_accuracy = sorted(range(m), key=lambda j: (locations[j].accuracy_loss, j))
    loads = np.zeros(m)
    slot_spend = 0.0
    allowance = cfg.budget_per_slot * (state.slots_settled + 1) - state.cumulative_spend
    for i in range(obs.n_tasks):
        fits = [j for j in range(m) if loads[j] + work[i] <= caps[j]]
        choice = None
        for j in by_accuracy:
            if j in fits and slot_spend + emission[i, j] * obs.spot_price <= allowance:
                choice = j
                break
        if choice is None:
            choice = min(fits, key=lambda j: (emission[i, j], j))
        x[i, choice] = 1.0
        loads[choice] += work[i]
        slot_spend += emission[i, choice] * obs.spot_price
    state.last_rounding = None
    return SlotDecision(x, minimal_cer(x, obs, locations), 0.0)


def step(state: PolicyState, obs: SlotObservation, cfg: SimConfig, locations: Sequence[Location],
         rng: np.random.Generator) -> SlotResult:
    """Decide one slot for ``state.kind`` and settle its cost into the queue."""
    frame_decision = None
    frame_price = obs.future_price
    if state.kind is PolicyKind.TTOA:
        if obs.slot % cfg.frame_length == 0:
            frame_decision = ttoa_frame_start(state, obs, cfg, locations, rng)
            decision = frame_decision.slot_decision
        else:
            decision = ttoa_slot(state, obs, cfg, locations, rng)
        frame_price = state.frame_price
    elif state.kind is PolicyKind.ACLOUD:
        decision = acloud_slot(state, obs, cfg, locations, rng)
    elif state.kind is PolicyKind.OTIME:
        decision = otime_slot(state, obs, cfg, locations, rng)
    else:
        decision = greedy_slot(state, obs, cfg, locations, rng)
    cost = _settle(state, decision, obs, frame_price)
    return SlotResult(decision, cost, frame_decision, state.last_rounding)
