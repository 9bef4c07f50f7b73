"""Carbon-intensity traces and seeded stochastic inputs (prices, tasks, locations)."""

from __future__ import annotations

import csv
import hashlib
import logging
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .model import (
    Location,
    LocationKind,
    MlTask,
    PriceKind,
    PriceModel,
    SimConfig,
    ValidationError,
    intensity_from_trace_units,
)

log = logging.getLogger(__name__)

TRACE_HEADER = ("timestamp", "region_id", "intensity_g_per_kwh")
SLOT = timedelta(minutes=30)
BUNDLED_TRACE = "uk_regions_synthetic.csv"

# Named sub-streams of the root seed; fixed keys so that adding a generator
# never shifts another one's draws.
STREAMS = {"locations": 0, "prices": 1, "tasks": 2, "rounding": 3, "instances": 4}


def substream(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(STREAMS[name],)))


class TraceError(ValidationError):
    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class TraceTable:
    timestamps: tuple[datetime, ...]
    regions: tuple[str, ...]
    intensity: np.ndarray  # (slots, regions), kgCO2/J

    @property
    def n_slots(self) -> int:
        return len(self.timestamps)

    def region_means(self) -> np.ndarray:
        return self.intensity.mean(axis=0)

    def location_regions(self, n_locations: int) -> list[int]:
        """Region column per location: the cloud takes the dirtiest region on
        average, edges take the remaining regions round-robin."""
        order = list(range(len(self.regions)))
        cloud = int(np.argmax(self.region_means()))
        rest = [r for r in order if r != cloud] or [cloud]
        return [cloud] + [rest[k % len(rest)] for k in range(n_locations - 1)]

    def slot_intensities(self, slot: int, region_cols: Sequence[int]) -> np.ndarray:
        return self.intensity[slot % self.n_slots, list(region_cols)]


def _parse_timestamp(text: str) -> datetime:
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None or ts.utcoffset() != timedelta(0):
        raise ValueError("timestamp must be UTC")
    return ts.astimezone(timezone.utc)


def _format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_trace(lines: Iterable[str], source: str = "<trace>") -> TraceTable:
    reader = csv.reader(lines)
    try:
        header = next(reader)
    except StopIteration:
        raise TraceError(f"{source}: empty file", 1) from None
    if tuple(h.strip() for h in header) != TRACE_HEADER:
        raise TraceError(f"{source}: header must be {','.join(TRACE_HEADER)}", 1)

    stamps: list[datetime] = []
    rows: list[dict[str, float]] = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != 3:
            raise TraceError(f"expected 3 fields, got {len(row)}", lineno)
        try:
            ts = _parse_timestamp(row[0])
        except ValueError as exc:
            raise TraceError(f"bad timestamp {row[0]!r} ({exc})", lineno) from None
        region = row[1].strip()
        if not region:
            raise TraceError("empty region_id", lineno)
        try:
            value = float(row[2])
        except ValueError:
            raise TraceError(f"bad intensity {row[2]!r}", lineno) from None
        if not np.isfinite(value) or value < 0:
            raise TraceError(f"intensity must be finite and >= 0, got {row[2]!r}", lineno)
        if not stamps or ts != stamps[-1]:
            if stamps and ts < stamps[-1]:
                raise TraceError(f"timestamp {row[0]} is earlier than {_format_timestamp(stamps[-1])}",
                                 lineno)
            if stamps and ts - stamps[-1] != SLOT:
                raise TraceError(
                    f"gap in 30-minute cadence: {_format_timestamp(stamps[-1])} -> {row[0]}", lineno
                )
            stamps.append(ts)
            rows.append({})
        if region in rows[-1]:
            raise TraceError(f"duplicate row for region {region!r} at {row[0]}", lineno)
        rows[-1][region] = value

    if not stamps:
        raise TraceError(f"{source}: no data rows")
    regions = tuple(sorted(rows[0]))
    for k, slot_rows in enumerate(rows):
        if set(slot_rows) != set(regions):
            missing = sorted(set(regions) ^ set(slot_rows))
            raise TraceError(f"{source}: regions {missing} missing or extra at {_format_timestamp(stamps[k])}")
    g = np.array([[slot_rows[r] for r in regions] for slot_rows in rows])
    kg = np.vectorize(intensity_from_trace_units, otypes=[float])(g)
    return TraceTable(tuple(stamps), regions, kg)


def load_trace(path: str | Path) -> TraceTable:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        return parse_trace(fh, str(path))


def bundled_trace_path() -> Path:
    return Path(str(resources.files("carbon_offload").joinpath("data", BUNDLED_TRACE)))


def load_bundled_trace() -> TraceTable:
    return load_trace(bundled_trace_path())


def write_trace(path: str | Path, timestamps: Sequence[datetime], regions: Sequence[str],
                g_per_kwh: np.ndarray) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for k, ts in enumerate(timestamps):
            for r, region in enumerate(regions):
                w.writerow([_format_timestamp(ts), region, f"{g_per_kwh[k, r]:.1f}"])


# name -> (mean gCO2/kWh, diurnal amplitude, wind sensitivity, solar sensitivity)
UK_REGION_PROFILES = {
    "north-scotland": (45.0, 10.0, 35.0, 0.0),
    "south-scotland": (80.0, 20.0, 45.0, 5.0),
    "north-west-england": (190.0, 45.0, 60.0, 20.0),
    "london": (200.0, 50.0, 55.0, 30.0),
    "south-wales": (270.0, 55.0, 60.0, 25.0),
}


def synthesize_uk_trace(n_slots: int, seed: int = 2022,
                        start: datetime = datetime(2022, 3, 1, tzinfo=timezone.utc)):
    """Synthetic regional intensity series with UK-like levels and shape.

    A national wind factor (AR(1) at half-hour resolution, multi-day
    correlation), an evening-peaking diurnal cycle and a midday solar dip
    are combined per region, plus small regional noise. Returns
    ``(timestamps, regions, g_per_kwh)``.
    """
    rng = np.random.default_rng(seed)
    regions = tuple(UK_REGION_PROFILES)
    hours = (np.arange(n_slots) * 0.5 + start.hour + start.minute / 60) % 24
    wind = np.zeros(n_slots)
    for k in range(1, n_slots):
        wind[k] = 0.985 * wind[k - 1] + rng.normal(0.0, 0.17)
    diurnal = np.cos(2 * np.pi * (hours - 18.0) / 24.0)
    solar = np.clip(np.cos(2 * np.pi * (hours - 13.0) / 24.0), 0.0, None) ** 2
    out = np.empty((n_slots, len(regions)))
    for r, name in enumerate(regions):
        mean, amp, wind_k, solar_k = UK_REGION_PROFILES[name]
        noise = np.zeros(n_slots)
        for k in range(1, n_slots):
            noise[k] = 0.8 * noise[k - 1] + rng.normal(0.0, 0.05 * mean)
        out[:, r] = mean + amp * diurnal - solar_k * solar - wind_k * wind + noise
    out = np.clip(out, 5.0, None)
    stamps = [start + k * SLOT for k in range(n_slots)]
    return stamps, regions, out


@dataclass(frozen=True)
class PriceSeries:
    future: np.ndarray  # $/kg per slot
    spot: np.ndarray
    redraws: int = 0


def _sample(rng: np.random.Generator, kind: PriceKind, mean: float, spread: float,
            size: int) -> tuple[np.ndarray, int]:
    if kind is PriceKind.UNIFORM:
        return rng.uniform(mean - spread, mean + spread, size), 0
    sd = spread / np.sqrt(3.0)  # same variance as the uniform model
    out = rng.normal(mean, sd, size)
    redraws = 0
    bad = out <= 0
    while bad.any():
        redraws += int(bad.sum())
        out[bad] = rng.normal(mean, sd, int(bad.sum()))
        bad = out <= 0
    return out, redraws


def gen_prices(model: PriceModel, slots: int, rng: np.random.Generator) -> PriceSeries:
    """I.i.d. future/spot price series in $/kg."""
    future, r1 = _sample(rng, model.kind, model.future_mean, model.future_spread, slots)
    spot, r2 = _sample(rng, model.kind, model.spot_mean, model.spot_spread, slots)
    return PriceSeries(future / model.unit_kg, spot / model.unit_kg, r1 + r2)


def gen_tasks(rng: np.random.Generator, cfg: SimConfig, slots: int | None = None) -> list[tuple[MlTask, ...]]:
    slots = cfg.horizon if slots is None else slots
    lo, hi = cfg.tasks_per_slot
    counts = rng.integers(lo, hi + 1, size=slots)
    out = []
    next_id = 0
    for n in counts:
        bits = rng.uniform(*cfg.input_bits_range, size=n)
        work = rng.uniform(*cfg.workload_range, size=n)
        out.append(tuple(MlTask(next_id + k, float(b), float(w)) for k, (b, w) in enumerate(zip(bits, work))))
        next_id += int(n)
    return out


def task_stream_digest(stream: Sequence[Sequence[MlTask]]) -> str:
    h = hashlib.sha256()
    for slot_tasks in stream:
        h.update(len(slot_tasks).to_bytes(4, "little"))
        for t in slot_tasks:
            h.update(np.array([t.input_bits, t.workload_cycles]).tobytes())
    return h.hexdigest()


def gen_locations(cfg: SimConfig, rng: np.random.Generator,
                  regions: Sequence[str] | None = None) -> tuple[Location, ...]:
    m = cfg.num_locations
    if m < 2:
        raise ValidationError("need at least two locations")
    cloud = Location(0, LocationKind.CLOUD, cfg.cloud_accuracy,
                     float(rng.uniform(*cfg.cloud_energy_range)),
                     region=regions[0] if regions else None)
    acc = rng.uniform(*cfg.edge_accuracy_range, size=m - 1)
    energy = rng.uniform(*cfg.edge_energy_range, size=m - 1)
    cap = rng.uniform(*cfg.edge_capacity_range, size=m - 1)
    edges = [
        Location(j, LocationKind.EDGE, float(acc[j - 1]), float(energy[j - 1]), float(cap[j - 1]),
                 region=regions[j] if regions else None)
        for j in range(1, m)
    ]
    return (cloud, *edges)
