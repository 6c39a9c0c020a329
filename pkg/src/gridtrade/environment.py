"""Multi-agent P2P trading environment.

Every slot: normalized actions are mapped to battery power, clipped to the
feasible range, net powers and the community SDR price are formed, network
tariffs are computed from the bus injections, and each participant is charged
``[(pi + dnt) x + wear |b|] dt``. Agents are the participants owning a battery;
plain consumers still trade and load the network.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .network import (
    FlowResult,
    RadialNetwork,
    NetSnapshot,
    ViolationPrice,
    compute_dlmp,
    solve_lindistflow,
)
from .pricing import PriceBounds, SlotPrices, compute_prices, compute_sdr
from .profiles import ScenarioData
from .prosumer import (
    BatterySpec,
    BatteryState,
    ProsumerSpec,
    clip_action,
    net_power,
    step_soc,
    wear_cost_per_kwh,
)


class EpisodeFinished(RuntimeError):
    pass


@dataclass(frozen=True)
class AgentState:
    g: float
    d: float
    soc: float

    def as_array(self) -> np.ndarray:
        return np.array([self.g, self.d, self.soc])


@dataclass(frozen=True)
class JointTransition:
    states: np.ndarray       # (P, 3)
    actions: np.ndarray      # (P,)
    rewards: np.ndarray      # (P,)
    next_states: np.ndarray  # (P, 3)
    done: bool


@dataclass(frozen=True, eq=False)
class MarketSnapshot:
    """Per-slot market outcome. Participant arrays follow scenario order."""

    slot: int
    prices: SlotPrices
    g: np.ndarray
    d: np.ndarray
    soc: np.ndarray
    b: np.ndarray
    x: np.ndarray
    dnt: np.ndarray
    cost: np.ndarray
    wear: np.ndarray
    network_loss: float = 0.0
    max_line_loading: float = 0.0
    min_voltage: float = 1.0
    mean_voltage: float = 1.0

    def unit_price(self, i: int) -> float:
        return self.prices.buy if self.x[i] >= 0 else self.prices.sell

    @property
    def rewards(self) -> np.ndarray:
        return -self.cost


@dataclass(frozen=True)
class MarketScenario:
    """Everything needed to run the market for a horizon.

    ``fixed_prices`` (buy, sell arrays in £/kWh) replaces SDR pricing with
    exogenous prices. ``penalty=None`` makes network limits hard.
    """

    participants: tuple[ProsumerSpec, ...]
    data: ScenarioData
    bounds: PriceBounds = field(default_factory=PriceBounds)
    network: Optional[RadialNetwork] = None
    dnt_enabled: bool = True
    penalty: Optional[ViolationPrice] = field(default_factory=ViolationPrice)
    fixed_prices: Optional[tuple[np.ndarray, np.ndarray]] = None

    def __post_init__(self):
        object.__setattr__(self, "participants", tuple(self.participants))
        if len(self.participants) != len(self.data.loads):
            raise ValueError("one load/solar series is required per participant")
        if not any(p.battery is not None for p in self.participants):
            raise ValueError("scenario has no battery-owning agents")
        if self.network is not None:
            for p in self.participants:
                k = self.network.index_of(p.bus_id)
                if k == 0:
                    raise ValueError(f"participant {p.id} sits on the substation bus")
        if self.fixed_prices is not None:
            buy, sell = (np.asarray(a, float) for a in self.fixed_prices)
            object.__setattr__(self, "fixed_prices", (buy, sell))

    @property
    def horizon(self) -> int:
        n = self.data.horizon
        if self.fixed_prices is not None:
            n = min(n, len(self.fixed_prices[0]), len(self.fixed_prices[1]))
        return n

    @property
    def dt(self) -> float:
        return self.data.wholesale.step_hours

    @property
    def agent_indices(self) -> list[int]:
        return [i for i, p in enumerate(self.participants) if p.battery is not None]

    @property
    def agent_ids(self) -> list[str]:
        return [self.participants[i].id for i in self.agent_indices]

    def with_dnt(self, enabled: bool) -> "MarketScenario":
        from dataclasses import replace
        return replace(self, dnt_enabled=enabled)


class P2PTradingEnv:
    def __init__(self, scenario: MarketScenario, episode_length: int = 48):
        self.scenario = scenario
        self.episode_length = episode_length
        self.dt = scenario.dt
        n = len(scenario.participants)
        self._load = np.stack([s.values for s in scenario.data.loads])[:, : scenario.horizon]
        self._solar = np.stack([s.values for s in scenario.data.solar])[:, : scenario.horizon]
        self._wholesale = scenario.data.wholesale.values[: scenario.horizon]
        self._agents = scenario.agent_indices
        self._wear = np.array([
            wear_cost_per_kwh(p.battery) if p.battery is not None else 0.0
            for p in scenario.participants
        ])
        net = scenario.network
        if net is not None:
            self._bus_pos = np.array([net.index_of(p.bus_id) for p in scenario.participants])
        self._soc = np.zeros(n)
        self._t = 0
        self._end = 0
        self._started = False

    @property
    def n_agents(self) -> int:
        return len(self._agents)

    @property
    def horizon(self) -> int:
        return self.scenario.horizon

    @property
    def slot(self) -> int:
        return self._t

    @property
    def done(self) -> bool:
        return self._started and self._t >= self._end

    def _battery(self, i: int) -> BatterySpec:
        return self.scenario.participants[i].battery

    def reset(self, start_slot: int = 0, length: Optional[int] = None) -> np.ndarray:
        if not 0 <= start_slot < self.horizon:
            raise IndexError(f"start slot {start_slot} outside horizon [0, {self.horizon})")
        length = self.episode_length if length is None else length
        self._t = start_slot
        self._end = min(start_slot + length, self.horizon)
        self._soc = np.array([
            p.battery.initial_soc if p.battery is not None else 0.0
            for p in self.scenario.participants
        ])
        self._started = True
        return self.observe()

    def _state_at(self, t: int) -> np.ndarray:
        t = min(t, self.horizon - 1)
        idx = self._agents
        return np.stack([self._solar[idx, t], self._load[idx, t], self._soc[idx]], axis=1)

    def observe(self) -> np.ndarray:
        return self._state_at(self._t)

    def agent_states(self) -> list[AgentState]:
        return [AgentState(*row) for row in self.observe()]

    def action_to_power(self, i: int, a: float) -> float:
        spec = self._battery(i)
        a = min(max(float(a), -1.0), 1.0)
        return spec.b_min + (a + 1.0) * 0.5 * (spec.b_max - spec.b_min)

    def network_snapshot(self, t: int, x: np.ndarray, d: np.ndarray) -> NetSnapshot:
        net = self.scenario.network
        p = np.zeros(net.n_buses)
        q = np.zeros(net.n_buses)
        np.add.at(p, self._bus_pos, -x)
        np.add.at(q, self._bus_pos, -net.load_tan_phi * d)
        return NetSnapshot(p, float(self._wholesale[t]), q)

    def slot_prices(self, t: int, supplies, demands) -> SlotPrices:
        sdr = compute_sdr(supplies, demands)
        if self.scenario.fixed_prices is not None:
            buy, sell = self.scenario.fixed_prices
            return SlotPrices(sdr, float(buy[t]), float(sell[t]))
        return compute_prices(sdr, self.scenario.bounds)

    def step(self, actions) -> tuple[JointTransition, MarketSnapshot]:
        if not self._started or self.done:
            raise EpisodeFinished("episode finished; call reset()")
        actions = np.asarray(actions, dtype=float).reshape(-1)
        if actions.size != self.n_agents:
            raise ValueError(f"expected {self.n_agents} actions, got {actions.size}")
        t = self._t
        dt = self.dt
        states = self.observe()
        g = self._solar[:, t]
        d = self._load[:, t]
        n = len(g)
        b = np.zeros(n)
        soc_before = self._soc.copy()
        for j, i in enumerate(self._agents):
            spec = self._battery(i)
            b[i] = clip_action(self.action_to_power(i, actions[j]), BatteryState(self._soc[i]),
                               spec, dt)
        x = np.array([net_power(d[i], g[i], b[i]) for i in range(n)])
        prices = self.slot_prices(t, g + b, d)

        dnt = np.zeros(n)
        loss = loading = 0.0
        vmin = vmean = 1.0
        net = self.scenario.network
        if net is not None:
            snap = self.network_snapshot(t, x, d)
            if self.scenario.dnt_enabled:
                res = compute_dlmp(net, snap, self.scenario.penalty)
                dnt = res.dnt[self._bus_pos]
                flow: FlowResult = res.flow
            else:
                flow = solve_lindistflow(net, snap)
            loss = flow.total_loss
            loading = float(np.max(flow.loading(net)))
            volts = flow.voltage
            vmin = float(np.min(volts))
            vmean = float(np.mean(volts[1:]))

        unit = np.where(x >= 0, prices.buy, prices.sell)
        wear = self._wear * np.abs(b) * dt
        cost = (unit + dnt) * x * dt + wear

        for i in self._agents:
            self._soc[i] = step_soc(BatteryState(self._soc[i]), b[i], self._battery(i), dt).soc
        self._t += 1
        done = self._t >= self._end
        snapshot = MarketSnapshot(t, prices, g.copy(), d.copy(), soc_before, b, x, dnt, cost,
                                  wear, loss, loading, vmin, vmean)
        transition = JointTransition(states, actions.copy(), -cost[self._agents],
                                     self._state_at(self._t), done)
        return transition, snapshot


def episode_return(rewards: Iterable[float], gamma: float = 1.0) -> float:
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    total = 0.0
    discount = 1.0
    for r in rewards:
        total += discount * r
        discount *= gamma
    return total


TRACE_HEADER = ["slot", "agent", "g", "d", "soc", "b", "x", "price_buy", "price_sell", "dnt", "reward"]


def write_trace_csv(snapshots: Sequence[MarketSnapshot], participant_ids: Sequence[str], fh,
                    only: Optional[Sequence[int]] = None) -> None:
    """Evaluation trace, one row per slot and participant. ``soc`` is the value
    at the start of the slot."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(TRACE_HEADER)
    idx = range(len(participant_ids)) if only is None else only
    for snap in snapshots:
        for i in idx:
            writer.writerow([
                snap.slot, participant_ids[i], f"{snap.g[i]:.6f}", f"{snap.d[i]:.6f}",
                f"{snap.soc[i]:.9f}", f"{snap.b[i]:.6f}", f"{snap.x[i]:.6f}",
                f"{snap.prices.buy:.9f}", f"{snap.prices.sell:.9f}", f"{snap.dnt[i]:.9f}",
                f"{-snap.cost[i]:.9f}",
            ])
