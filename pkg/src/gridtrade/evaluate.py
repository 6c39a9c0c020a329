"""Run trained actors through the market without exploration noise."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .environment import MarketScenario, MarketSnapshot, P2PTradingEnv
from .maddpg.agent import execute_policy
from .maddpg.mlp import Mlp


@dataclass
class EvaluationResult:
    snapshots: list[MarketSnapshot]
    participant_ids: list[str]
    agent_ids: list[str]
    dt: float

    def summary(self) -> dict:
        cost = np.sum([s.cost for s in self.snapshots], axis=0)
        ids = self.participant_ids
        return {
            "total_cost_per_agent": {a: float(cost[ids.index(a)]) for a in self.agent_ids},
            "total_cost_per_participant": {p: float(c) for p, c in zip(ids, cost)},
            "total_network_loss": float(sum(s.network_loss for s in self.snapshots) * self.dt),
            "peak_line_loading_fraction": float(max(s.max_line_loading for s in self.snapshots)),
            "min_voltage_pu": float(min(s.min_voltage for s in self.snapshots)),
            "mean_voltage_pu": float(np.mean([s.mean_voltage for s in self.snapshots])),
            "slots": len(self.snapshots),
        }


def evaluate_policies(
    scenario: MarketScenario,
    actors: Mapping[str, Mlp] | Sequence[Mlp],
    start_slot: int,
    length: int,
    episode_length: int = 48,
) -> EvaluationResult:
    """Roll the actors over ``[start_slot, start_slot + length)``, resetting
    the batteries every ``episode_length`` slots as during training."""
    agent_ids = scenario.agent_ids
    if isinstance(actors, Mapping):
        missing = [a for a in agent_ids if a not in actors]
        if missing:
            raise KeyError(f"no trained actor for agents {missing}")
        nets = [actors[a] for a in agent_ids]
    else:
        nets = list(actors)
        if len(nets) != len(agent_ids):
            raise ValueError(f"expected {len(agent_ids)} actors, got {len(nets)}")
    env = P2PTradingEnv(scenario, episode_length)
    snapshots: list[MarketSnapshot] = []
    end = min(start_slot + length, scenario.horizon)
    t = start_slot
    while t < end:
        states = env.reset(t, min(episode_length, end - t))
        while not env.done:
            actions = [float(execute_policy(nets[i], states[i])[0]) for i in range(len(nets))]
            tr, snap = env.step(actions)
            snapshots.append(snap)
            states = tr.next_states
        t = env.slot
    return EvaluationResult(snapshots, [p.id for p in scenario.participants], agent_ids, env.dt)
