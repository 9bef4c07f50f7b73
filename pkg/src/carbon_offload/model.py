"""Domain types, canonical units and run configuration.

Canonical units everywhere in the package: bits, CPU cycles, Joules,
kgCO2, dollars. One slot is 30 simulated minutes.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Sequence

import numpy as np

G_PER_KG = 1e3
J_PER_KWH = 3.6e6

#: kgCO2 emitted by one Joule at an intensity of 1 gCO2/kWh.
KG_PER_TRACE_UNIT = 1.0 / (G_PER_KG * J_PER_KWH)


class ValidationError(ValueError):
    """Raised when input data violates a documented precondition."""


def intensity_from_trace_units(g_per_kwh: float) -> float:
    """Convert a carbon intensity in gCO2/kWh to kgCO2/J."""
    if not g_per_kwh >= 0:
        raise ValidationError(f"carbon intensity must be >= 0, got {g_per_kwh!r}")
    return g_per_kwh / G_PER_KG / J_PER_KWH


def intensity_to_trace_units(kg_per_j: float) -> float:
    if not kg_per_j >= 0:
        raise ValidationError(f"carbon intensity must be >= 0, got {kg_per_j!r}")
    return kg_per_j * J_PER_KWH * G_PER_KG


@dataclass(frozen=True)
class MlTask:
    id: int
    input_bits: float
    workload_cycles: float

    def __post_init__(self) -> None:
        if not (self.input_bits > 0 and self.workload_cycles > 0):
            raise ValidationError(f"task {self.id}: input_bits and workload_cycles must be > 0")


class LocationKind(str, Enum):
    CLOUD = "cloud"
    EDGE = "edge"


@dataclass(frozen=True)
class Location:
    """An offloading target. Index 0 is always the cloud."""

    id: int
    kind: LocationKind
    accuracy_loss: float
    energy_per_bit: float  # J/bit
    capacity_cycles: float = math.inf  # per slot; the cloud is unbounded
    region: str | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.accuracy_loss <= 1.0:
            raise ValidationError(f"location {self.id}: accuracy_loss must be in [0, 1]")
        if not self.energy_per_bit >= 0:
            raise ValidationError(f"location {self.id}: energy_per_bit must be >= 0")
        if self.kind is LocationKind.EDGE and not self.capacity_cycles > 0:
            raise ValidationError(f"edge {self.id}: capacity_cycles must be > 0")

    @property
    def is_cloud(self) -> bool:
        return self.kind is LocationKind.CLOUD


def validate_locations(locations: Sequence[Location]) -> None:
    if len(locations) < 2:
        raise ValidationError("need the cloud plus at least one edge")
    if not locations[0].is_cloud or any(loc.is_cloud for loc in locations[1:]):
        raise ValidationError("location 0 must be the cloud and the only cloud")
    if [loc.id for loc in locations] != list(range(len(locations))):
        raise ValidationError("location ids must be 0..M-1 in order")
    cloud_loss = locations[0].accuracy_loss
    if any(loc.accuracy_loss <= cloud_loss for loc in locations[1:]):
        raise ValidationError("cloud accuracy loss must be strictly below every edge's")


def _frozen_array(values: Any) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class SlotObservation:
    """What the operator sees at the beginning of one slot."""

    slot: int
    carbon_intensity: np.ndarray  # kgCO2/J per location
    spot_price: float  # $/kgCO2
    future_price: float  # $/kgCO2, used only at frame starts
    tasks: tuple[MlTask, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "carbon_intensity", _frozen_array(self.carbon_intensity))
        object.__setattr__(self, "tasks", tuple(self.tasks))
        if np.any(self.carbon_intensity < 0) or not np.all(np.isfinite(self.carbon_intensity)):
            raise ValidationError(f"slot {self.slot}: carbon intensities must be finite and >= 0")
        if not (self.spot_price > 0 and self.future_price > 0):
            raise ValidationError(f"slot {self.slot}: prices must be > 0")

    @property
    def n_tasks(self) -> int:
        return len(self.tasks)

    def input_bits(self) -> np.ndarray:
        return np.array([t.input_bits for t in self.tasks], dtype=float)

    def workloads(self) -> np.ndarray:
        return np.array([t.workload_cycles for t in self.tasks], dtype=float)


@dataclass(frozen=True)
class SlotDecision:
    """Binary offloading matrix (tasks x locations) plus CER held for the slot.

    ``dropped`` marks tasks whose row was left empty by rounding and never
    repaired; such rows are exempt from the one-location-per-task rule.
    """

    assignment: np.ndarray
    cer_spot: float = 0.0
    cer_future_share: float = 0.0
    dropped: tuple[bool, ...] = ()

    def __post_init__(self) -> None:
        arr = np.array(self.assignment, dtype=float)
        if arr.ndim != 2:
            raise ValidationError("assignment must be a 2-D tasks x locations matrix")
        arr.flags.writeable = False
        object.__setattr__(self, "assignment", arr)
        dropped = tuple(bool(d) for d in self.dropped) or (False,) * arr.shape[0]
        if len(dropped) != arr.shape[0]:
            raise ValidationError("dropped flags must have one entry per task")
        object.__setattr__(self, "dropped", dropped)
        if not (self.cer_spot >= 0 and self.cer_future_share >= 0):
            raise ValidationError("CER quantities must be >= 0")

    @classmethod
    def empty(cls, n_locations: int, *, cer_future_share: float = 0.0) -> "SlotDecision":
        return cls(np.zeros((0, n_locations)), 0.0, cer_future_share)

    @property
    def cer_available(self) -> float:
        return self.cer_future_share + self.cer_spot


@dataclass(frozen=True)
class FrameDecision:
    cer_future_total: float
    frame_length: int
    slot_decision: SlotDecision

    def __post_init__(self) -> None:
        if not self.cer_future_total >= 0:
            raise ValidationError("cer_future_total must be >= 0")
        if self.slot_decision.cer_future_share != self.cer_future_total / self.frame_length:
            raise ValidationError("frame share must equal cer_future_total / T")

    @property
    def per_slot_share(self) -> float:
        return self.cer_future_total / self.frame_length


class PriceKind(str, Enum):
    UNIFORM = "uniform"
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class PriceModel:
    """I.i.d. CER price process.

    Prices are quoted per ``unit_kg`` kilograms of CO2 and converted to
    $/kg when sampled. The default unit is the CO2 of one Joule at
    1 gCO2/kWh, which is the unit in which the budget and control
    parameter defaults are expressed.
    """

    kind: PriceKind = PriceKind.UNIFORM
    future_mean: float = 1.5
    spot_mean: float = 3.0
    future_spread: float = 0.5
    spot_spread: float = 1.0
    unit_kg: float = KG_PER_TRACE_UNIT

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", PriceKind(self.kind))
        if not (self.future_mean > 0 and self.spot_mean > 0 and self.unit_kg > 0):
            raise ValidationError("price means and unit_kg must be > 0")
        if not self.spot_mean > self.future_mean:
            raise ValidationError("spot price mean must exceed the future price mean")
        if self.future_spread < 0 or self.spot_spread < 0:
            raise ValidationError("price spreads must be >= 0")
        if self.kind is PriceKind.UNIFORM and (
            self.future_spread >= self.future_mean or self.spot_spread >= self.spot_mean
        ):
            raise ValidationError("uniform spread must be smaller than the mean (prices > 0)")


Range = tuple[float, float]


def _check_range(name: str, rng: Sequence[float], positive: bool = True) -> tuple[float, float]:
    lo, hi = (float(v) for v in rng)
    if lo > hi or (positive and lo <= 0):
        raise ValidationError(f"{name}: invalid range [{lo}, {hi}]")
    return lo, hi


@dataclass(frozen=True)
class SimConfig:
    """Run configuration; defaults match the reference evaluation setup."""

    frame_length: int = 15
    frame_count: int = 100
    num_locations: int = 5
    budget_per_slot: float = 3.25e8
    lyapunov_v: float = 3e8
    price_model: PriceModel = field(default_factory=PriceModel)
    tasks_per_slot: tuple[int, int] = (1, 10)
    input_bits_range: Range = (1e8, 1e9)
    workload_range: Range = (5e11, 1e12)
    edge_accuracy_range: Range = (0.10, 0.15)
    cloud_accuracy: float = 0.02
    edge_energy_range: Range = (2e-5, 5e-5)
    cloud_energy_range: Range = (3e-4, 5e-4)
    edge_capacity_range: Range = (2e12, 5e12)
    rounding: str = "r3dra"
    repair: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        if isinstance(self.price_model, dict):
            object.__setattr__(self, "price_model", PriceModel(**self.price_model))
        if self.frame_length < 1 or self.frame_count < 1:
            raise ValidationError("frame_length and frame_count must be >= 1")
        if self.num_locations < 2:
            raise ValidationError("num_locations must be >= 2")
        if not self.budget_per_slot > 0:
            raise ValidationError("budget_per_slot must be > 0")
        if not self.lyapunov_v >= 0:
            raise ValidationError("lyapunov_v must be >= 0")
        lo, hi = (int(v) for v in self.tasks_per_slot)
        if lo < 0 or hi < lo:
            raise ValidationError("tasks_per_slot must be 0 <= lo <= hi")
        object.__setattr__(self, "tasks_per_slot", (lo, hi))
        for name in ("input_bits_range", "workload_range", "edge_energy_range",
                     "cloud_energy_range", "edge_capacity_range"):
            object.__setattr__(self, name, _check_range(name, getattr(self, name)))
        a_lo, a_hi = _check_range("edge_accuracy_range", self.edge_accuracy_range, positive=False)
        if not 0 <= self.cloud_accuracy < a_lo or a_hi > 1:
            raise ValidationError("need 0 <= cloud_accuracy < edge accuracy losses <= 1")
        object.__setattr__(self, "edge_accuracy_range", (a_lo, a_hi))
        if self.rounding not in ("r3dra", "irr"):
            raise ValidationError(f"unknown rounding {self.rounding!r}")
        if int(self.seed) < 0:
            raise ValidationError("seed must be a non-negative integer")

    @property
    def horizon(self) -> int:
        return self.frame_length * self.frame_count

    def replace(self, **changes: Any) -> "SimConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        out = dataclasses.asdict(self)
        out["price_model"]["kind"] = self.price_model.kind.value
        for key, val in out.items():
            if isinstance(val, tuple):
                out[key] = list(val)
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SimConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        data = dict(data)
        if "price_model" in data:
            pm = data["price_model"]
            if not isinstance(pm, dict):
                raise ValidationError("price_model must be an object")
            pm_known = {f.name for f in dataclasses.fields(PriceModel)}
            bad = set(pm) - pm_known
            if bad:
                raise ValidationError(f"unknown price_model keys: {sorted(bad)}")
            try:
                data["price_model"] = PriceModel(**pm)
            except (TypeError, ValueError) as exc:
                raise ValidationError(f"price_model: {exc}") from exc
        for key, val in data.items():
            if isinstance(val, list):
                data[key] = tuple(val)
        try:
            return cls(**data)
        except TypeError as exc:
            raise ValidationError(str(exc)) from exc


def load_config(path: str | Path) -> SimConfig:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ValidationError(f"{path}: top-level JSON value must be an object")
    return SimConfig.from_dict(data)
