"""Battery state-of-charge dynamics, feasibility limits and wear cost.

Sign convention: battery power ``b`` is positive when discharging and negative
when charging. Net power ``x = d - (g + b)`` is positive for buyers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

SOC_TOLERANCE = 1e-9


class FeasibilityError(ValueError):
    pass


@dataclass(frozen=True)
class BatterySpec:
    capacity_kwh: float = 13.5
    soc_min: float = 0.0
    soc_max: float = 1.0
    b_min: float = -5.0
    b_max: float = 5.0
    round_trip_efficiency: float = 0.925
    price_per_kwh: float = 314.64
    life_cycles: float = 5000.0
    depth_of_discharge: float = 1.0
    initial_soc: float = 0.5

    def __post_init__(self):
        if not (0.0 <= self.soc_min < self.soc_max <= 1.0):
            raise ValueError(f"need 0 <= soc_min < soc_max <= 1, got {self.soc_min}, {self.soc_max}")
        if self.capacity_kwh <= 0:
            raise ValueError("capacity_kwh must be positive")
        if not (0.0 < self.round_trip_efficiency <= 1.0):
            raise ValueError("round_trip_efficiency must be in (0, 1]")
        if self.life_cycles <= 0:
            raise ValueError("life_cycles must be positive")
        if not (0.0 < self.depth_of_discharge <= 1.0):
            raise ValueError("depth_of_discharge must be in (0, 1]")
        if not (self.b_min < 0.0 < self.b_max):
            raise ValueError("inverter limits must satisfy b_min < 0 < b_max")
        if not (self.soc_min <= self.initial_soc <= self.soc_max):
            raise ValueError("initial_soc outside [soc_min, soc_max]")

    @property
    def charge_efficiency(self) -> float:
        return math.sqrt(self.round_trip_efficiency)

    @property
    def discharge_factor(self) -> float:
        # SoC drops by this factor times the delivered energy
        return 1.0 / math.sqrt(self.round_trip_efficiency)


@dataclass(frozen=True)
class BatteryState:
    soc: float


@dataclass(frozen=True)
class ProsumerSpec:
    """A market participant. ``battery=None`` marks a plain consumer."""

    id: str
    bus_id: int
    battery: Optional[BatterySpec] = None
    pv_capacity: float = 0.0


def efficiency_for(b: float, spec: BatterySpec) -> float:
    return spec.charge_efficiency if b < 0 else spec.discharge_factor


def feasible_action_bounds(state: BatteryState, spec: BatterySpec, dt: float) -> tuple[float, float]:
    """Power range (lo, hi) in kW that keeps SoC within limits over ``dt`` hours."""
    e = spec.capacity_kwh
    hi = min(spec.b_max, e * (state.soc - spec.soc_min) / (spec.discharge_factor * dt))
    lo = max(spec.b_min, e * (state.soc - spec.soc_max) / (spec.charge_efficiency * dt))
    return min(lo, 0.0), max(hi, 0.0)


def clip_action(b: float, state: BatteryState, spec: BatterySpec, dt: float) -> float:
    lo, hi = feasible_action_bounds(state, spec, dt)
    return min(max(b, lo), hi)


def step_soc(state: BatteryState, b: float, spec: BatterySpec, dt: float) -> BatteryState:
    lo, hi = feasible_action_bounds(state, spec, dt)
    slack = SOC_TOLERANCE * spec.capacity_kwh / dt
    if b < lo - slack or b > hi + slack:
        raise FeasibilityError(f"battery power {b} kW outside feasible range [{lo}, {hi}]")
    soc = state.soc - efficiency_for(b, spec) * b * dt / spec.capacity_kwh
    if soc < spec.soc_min - SOC_TOLERANCE or soc > spec.soc_max + SOC_TOLERANCE:
        raise FeasibilityError(f"SoC {soc} left [{spec.soc_min}, {spec.soc_max}]")
    return BatteryState(min(max(soc, spec.soc_min), spec.soc_max))


def wear_cost_per_kwh(spec: BatterySpec) -> float:
    """Empirical wear cost in £/kWh, using the per-kWh battery price as given."""
    return spec.price_per_kwh / (
        spec.life_cycles * 2.0 * spec.depth_of_discharge * spec.capacity_kwh
        * spec.round_trip_efficiency ** 2
    )


def net_power(d: float, g: float, b: float) -> float:
    return d - (g + b)
