"""Backward-induction battery scheduling for a single price-taking prosumer.

Serves as ground truth for the learner: with exogenous prices there is no
game, so the discretized optimum is computable exactly on the SoC lattice.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Optional, Sequence

import numpy as np

from .prosumer import BatterySpec, BatteryState, feasible_action_bounds, wear_cost_per_kwh


@dataclass(frozen=True)
class DpGrid:
    """SoC lattice size and action handling.

    ``mode="transition"`` lets every action move exactly between lattice
    points (power solved from the SoC dynamics). ``mode="snap"`` uses
    ``action_points`` evenly spaced powers and rounds the resulting SoC to the
    nearest lattice point; the worst rounding is reported.
    """

    soc_points: int = 101
    action_points: int = 21
    mode: Literal["transition", "snap"] = "transition"

    def __post_init__(self):
        if self.soc_points < 2 or self.action_points < 2:
            raise ValueError("lattice counts must be >= 2")
        if self.mode not in ("transition", "snap"):
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass(frozen=True, eq=False)
class DpResult:
    cost: float
    actions: np.ndarray      # battery power per slot, kW
    soc: np.ndarray          # SoC at the start of each slot plus the final value
    snap_error: float        # largest SoC rounding applied (0 in transition mode)
    slot_costs: np.ndarray


def slot_cost(b, load: float, solar: float, buy: float, sell: float, dnt: float,
              wear: float, dt: float):
    """Cost in £ of running the battery at ``b`` kW for one slot."""
    x = load - solar - b
    unit = np.where(x >= 0, buy, sell)
    return ((unit + dnt) * x + wear * np.abs(b)) * dt


def solve_dp(
    battery: BatterySpec,
    load: Sequence[float],
    solar: Sequence[float],
    buy: Sequence[float],
    sell: Sequence[float],
    dt: float = 0.5,
    grid: DpGrid = DpGrid(),
    dnt: Optional[Sequence[float]] = None,
    initial_soc: Optional[float] = None,
    terminal_soc: Optional[float] = None,
) -> DpResult:
    load, solar = np.asarray(load, float), np.asarray(solar, float)
    buy, sell = np.asarray(buy, float), np.asarray(sell, float)
    T = len(load)
    if not (len(solar) == len(buy) == len(sell) == T):
        raise ValueError("load, solar and price series must share a length")
    dnt = np.zeros(T) if dnt is None else np.asarray(dnt, float)
    wear = wear_cost_per_kwh(battery)
    e = battery.capacity_kwh
    lattice = np.linspace(battery.soc_min, battery.soc_max, grid.soc_points)
    soc0 = battery.initial_soc if initial_soc is None else initial_soc
    i0 = int(np.argmin(np.abs(lattice - soc0)))
    snap_error = abs(lattice[i0] - soc0)

    if grid.mode == "transition":
        delta = lattice[None, :] - lattice[:, None]  # row i -> column j
        power = np.where(delta > 0,
                         -e * delta / (battery.charge_efficiency * dt),
                         -e * delta / (battery.discharge_factor * dt))
        eps = 1e-12
        allowed = (power >= battery.b_min - eps) & (power <= battery.b_max + eps)
        power = np.clip(power, battery.b_min, battery.b_max)
        nxt = np.broadcast_to(np.arange(grid.soc_points), power.shape)
    else:
        levels = np.linspace(battery.b_min, battery.b_max, grid.action_points)
        power = np.empty((grid.soc_points, grid.action_points))
        nxt = np.empty_like(power, dtype=int)
        for i, s in enumerate(lattice):
            lo, hi = feasible_action_bounds(BatteryState(s), battery, dt)
            b = np.clip(levels, lo, hi)
            eta = np.where(b < 0, battery.charge_efficiency, battery.discharge_factor)
            s_next = s - eta * b * dt / e
            j = np.clip(np.rint((s_next - lattice[0]) / (lattice[1] - lattice[0])).astype(int),
                        0, grid.soc_points - 1)
            snap_error = max(snap_error, float(np.max(np.abs(lattice[j] - s_next))))
            power[i], nxt[i] = b, j
        allowed = np.ones_like(power, dtype=bool)

    value = np.zeros(grid.soc_points)
    if terminal_soc is not None:
        value = np.full(grid.soc_points, np.inf)
        value[int(np.argmin(np.abs(lattice - terminal_soc)))] = 0.0
    policy = np.zeros((T, grid.soc_points), dtype=int)
    for t in range(T - 1, -1, -1):
        stage = slot_cost(power, load[t], solar[t], buy[t], sell[t], dnt[t], wear, dt)
        total = np.where(allowed, stage + value[nxt], np.inf)
        policy[t] = np.argmin(total, axis=1)
        value = total[np.arange(grid.soc_points), policy[t]]

    i = i0
    actions = np.zeros(T)
    socs = np.zeros(T + 1)
    costs = np.zeros(T)
    socs[0] = lattice[i]
    for t in range(T):
        k = policy[t, i]
        actions[t] = power[i, k]
        costs[t] = slot_cost(actions[t], load[t], solar[t], buy[t], sell[t], dnt[t], wear, dt)
        i = nxt[i, k]
        socs[t + 1] = lattice[i]
    return DpResult(float(costs.sum()), actions, socs, float(snap_error), costs)


def idle_cost(battery: BatterySpec, load, solar, buy, sell, dt: float = 0.5, dnt=None) -> float:
    """Cost of never using the battery."""
    load = np.asarray(load, float)
    dnt = np.zeros(len(load)) if dnt is None else np.asarray(dnt, float)
    return float(sum(slot_cost(0.0, load[t], solar[t], buy[t], sell[t], dnt[t], 0.0, dt)
                     for t in range(len(load))))
