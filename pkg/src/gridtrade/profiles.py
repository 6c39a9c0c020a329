"""Half-hourly load, solar and price time series.

CSV files carry a fixed ``timestamp,value`` header with ISO-8601 timestamps.
Gaps are rejected rather than interpolated.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta
from pathlib import Path
from typing import Literal, Sequence

import numpy as np

Kind = Literal["power", "price"]

DEFAULT_START = datetime(2017, 1, 1)
SLOTS_PER_DAY = 48


class ProfileError(ValueError):
    """Base class for profile ingestion problems."""


class ParseError(ProfileError):
    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.line = line


class SpacingError(ProfileError):
    pass


class AlignmentError(ProfileError):
    pass


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Uniformly sampled series. Values are kW for power and £/kWh for price."""

    start: datetime
    values: np.ndarray
    step_minutes: int = 30
    kind: Kind = "power"

    def __post_init__(self):
        values = np.array(self.values, dtype=float).reshape(-1)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if self.step_minutes <= 0:
            raise ProfileError(f"step_minutes must be positive, got {self.step_minutes}")
        if values.size < 1:
            raise ProfileError("time series must have at least one value")
        if not np.all(np.isfinite(values)):
            raise ProfileError("time series contains non-finite values")
        if self.kind == "power" and np.any(values < 0):
            idx = int(np.argmax(values < 0))
            raise ProfileError(f"negative power {values[idx]} at index {idx}")

    def __len__(self) -> int:
        return self.values.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, TimeSeries):
            return NotImplemented
        return (
            self.start == other.start
            and self.step_minutes == other.step_minutes
            and self.kind == other.kind
            and np.array_equal(self.values, other.values)
        )

    @property
    def step_hours(self) -> float:
        return self.step_minutes / 60.0

    def timestamps(self) -> list[datetime]:
        step = timedelta(minutes=self.step_minutes)
        return [self.start + i * step for i in range(len(self))]

    def truncate(self, n: int) -> "TimeSeries":
        return replace(self, values=self.values[:n])

    def scaled(self, factor: float) -> "TimeSeries":
        return replace(self, values=self.values * factor)


def load_profile_csv(path, kind: Kind = "power") -> TimeSeries:
    path = Path(path)
    stamps: list[datetime] = []
    values: list[float] = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["timestamp", "value"]:
            raise ParseError(path, 1, f"expected header 'timestamp,value', got {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise ParseError(path, lineno, f"expected 2 fields, got {len(row)}")
            try:
                ts = datetime.fromisoformat(row[0].strip())
                val = float(row[1])
            except ValueError as exc:
                raise ParseError(path, lineno, str(exc)) from None
            if not math.isfinite(val):
                raise ParseError(path, lineno, f"non-finite value {row[1]!r}")
            if kind == "power" and val < 0:
                raise ProfileError(f"{path}:{lineno}: negative power {val}")
            stamps.append(ts)
            values.append(val)
    if not stamps:
        raise ParseError(path, 2, "no data rows")
    if len(stamps) == 1:
        return TimeSeries(stamps[0], values, 30, kind)
    step = stamps[1] - stamps[0]
    if step <= timedelta(0):
        raise SpacingError(f"{path}: timestamps must be strictly increasing")
    for i in range(2, len(stamps)):
        if stamps[i] - stamps[i - 1] != step:
            raise SpacingError(
                f"{path}:{i + 2}: spacing {stamps[i] - stamps[i - 1]} differs from {step}"
            )
    minutes, rem = divmod(step.total_seconds(), 60)
    if rem:
        raise SpacingError(f"{path}: step {step} is not a whole number of minutes")
    return TimeSeries(stamps[0], values, int(minutes), kind)


def write_profile_csv(series: TimeSeries, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["timestamp", "value"])
        for ts, v in zip(series.timestamps(), series.values):
            writer.writerow([ts.isoformat(), repr(float(v))])


def synthesize_profiles(
    seed: int,
    days: int,
    profile_kind: Literal["load", "solar"],
    *,
    peak_kw: float = 1.0,
    daylight: tuple[float, float] = (6.0, 18.0),
    start: datetime = DEFAULT_START,
    step_minutes: int = 30,
) -> TimeSeries:
    """Generate a deterministic synthetic profile.

    Solar is a half-sine over the ``daylight`` window (hours), scaled per day by
    a seeded clearness factor in [0.5, 1] and per slot by small multiplicative
    noise. Load is a base level plus Gaussian morning (08:00) and evening
    (19:00) peaks, with seeded per-slot noise. ``peak_kw`` scales the result.
    """
    if days < 1:
        raise ValueError("days must be >= 1")
    rng = np.random.default_rng(seed)
    per_day = int(round(24 * 60 / step_minutes))
    hours = np.arange(days * per_day) * step_minutes / 60.0
    hod = hours % 24.0
    if profile_kind == "solar":
        dawn, dusk = daylight
        phase = np.clip((hod - dawn) / (dusk - dawn), 0.0, 1.0)
        shape = np.sin(np.pi * phase)
        shape[(hod <= dawn) | (hod >= dusk)] = 0.0
        clearness = rng.uniform(0.5, 1.0, size=days).repeat(per_day)
        noise = np.clip(1.0 + 0.1 * rng.standard_normal(hours.size), 0.0, None)
        values = peak_kw * shape * clearness * noise
    elif profile_kind == "load":
        shape = (
            0.3
            + 0.5 * np.exp(-0.5 * ((hod - 8.0) / 1.5) ** 2)
            + 1.0 * np.exp(-0.5 * ((hod - 19.0) / 2.0) ** 2)
        )
        noise = 1.0 + 0.1 * rng.standard_normal(hours.size)
        values = np.clip(peak_kw * shape / 1.3 * noise, 0.0, None)
    else:
        raise ValueError(f"unknown profile kind {profile_kind!r}")
    return TimeSeries(start, values, step_minutes, "power")


def synthesize_wholesale_price(
    seed: int,
    days: int,
    *,
    mean: float = 0.05,
    start: datetime = DEFAULT_START,
    step_minutes: int = 30,
) -> TimeSeries:
    """Winter-style wholesale price in £/kWh with an evening peak."""
    if days < 1:
        raise ValueError("days must be >= 1")
    rng = np.random.default_rng(seed)
    per_day = int(round(24 * 60 / step_minutes))
    hod = (np.arange(days * per_day) * step_minutes / 60.0) % 24.0
    shape = 0.8 + 0.15 * np.exp(-0.5 * ((hod - 8.5) / 1.5) ** 2) + 0.6 * np.exp(
        -0.5 * ((hod - 18.0) / 1.5) ** 2
    )
    level = rng.uniform(0.85, 1.15, size=days).repeat(per_day)
    values = mean * shape * level * (1.0 + 0.03 * rng.standard_normal(hod.size))
    return TimeSeries(start, np.clip(values, 0.0, None), step_minutes, "price")


@dataclass(frozen=True)
class ScenarioData:
    """Per-participant load and solar series plus market price inputs."""

    loads: tuple[TimeSeries, ...]
    solar: tuple[TimeSeries, ...]
    wholesale: TimeSeries
    esp_import_price: float = 0.05
    esp_export_price: float = 0.03
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "loads", tuple(self.loads))
        object.__setattr__(self, "solar", tuple(self.solar))
        if len(self.loads) != len(self.solar):
            raise ProfileError("loads and solar must list the same participants")
        if not (self.esp_import_price >= self.esp_export_price >= 0):
            raise ProfileError("require esp_import_price >= esp_export_price >= 0")

    def all_series(self) -> list[TimeSeries]:
        return [*self.loads, *self.solar, self.wholesale, *self.extra.values()]

    @property
    def horizon(self) -> int:
        return min(len(s) for s in self.all_series())


def align(scenario: ScenarioData) -> ScenarioData:
    """Truncate every series to the common length.

    Raises AlignmentError when starts or steps differ.
    """
    series = scenario.all_series()
    first = series[0]
    for s in series[1:]:
        if s.step_minutes != first.step_minutes:
            raise AlignmentError(f"step mismatch: {s.step_minutes} vs {first.step_minutes}")
        if s.start != first.start:
            raise AlignmentError(f"start mismatch: {s.start} vs {first.start}")
    n = min(len(s) for s in series)
    return replace(
        scenario,
        loads=tuple(s.truncate(n) for s in scenario.loads),
        solar=tuple(s.truncate(n) for s in scenario.solar),
        wholesale=scenario.wholesale.truncate(n),
        extra={k: v.truncate(n) for k, v in scenario.extra.items()},
    )


def as_series(values: Sequence[float], like: TimeSeries, kind: Kind) -> TimeSeries:
    return TimeSeries(like.start, values, like.step_minutes, kind)
