"""MADDPG training loop for the P2P trading environment."""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Literal, Optional

import numpy as np

from ..environment import P2PTradingEnv
from .agent import AgentBundle, act, critic_target, soft_update, update_actor, update_critic
from .buffer import ReplayBuffer
from .noise import OuNoise

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class Hyperparams:
    gamma: float = 0.95
    batch_size: int = 256
    actor_lr: float = 1e-4
    critic_lr: float = 3e-4
    tau: float = 0.01
    episodes: int = 300
    hidden: tuple[int, ...] = (64, 64)
    buffer_capacity: int = 100_000
    noise_theta: float = 0.15
    noise_sigma: float = 0.2
    noise_sigma_final: float = 0.02
    episode_length: int = 48
    episode_mode: Literal["sequential", "random"] = "sequential"
    reward_scale: float = 1.0

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must lie in (0, 1]")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.episodes < 0 or self.episode_length < 1:
            raise ValueError("episodes and episode_length must be positive")
        if self.episode_mode not in ("sequential", "random"):
            raise ValueError(f"unknown episode_mode {self.episode_mode!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "Hyperparams":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown hyperparameters: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["hidden"] = list(self.hidden)
        return out

    def sigma_at(self, episode: int) -> float:
        if self.episodes <= 1:
            return self.noise_sigma
        frac = episode / (self.episodes - 1)
        return self.noise_sigma + frac * (self.noise_sigma_final - self.noise_sigma)


@dataclass
class TrainResult:
    agents: list[AgentBundle]
    agent_ids: list[str]
    log: list[dict] = field(default_factory=list)
    updates: int = 0

    def episode_rewards(self, agent: Optional[str] = None) -> np.ndarray:
        """Mean per-slot reward per episode (summed over agents when ``agent`` is None)."""
        rows = [r for r in self.log if agent is None or r["agent"] == agent]
        n_ep = max(r["episode"] for r in rows) + 1 if rows else 0
        out = np.zeros(n_ep)
        for r in rows:
            out[r["episode"]] += r["mean_reward"]
        return out


def _params_finite(agent: AgentBundle) -> bool:
    return all(np.isfinite(p).all() for p in (*agent.actor.parameters(), *agent.critic.parameters()))


def episode_start(ep: int, horizon: int, length: int, mode: str, rng: np.random.Generator) -> int:
    if horizon <= length:
        return 0
    if mode == "random":
        return int(rng.integers(0, horizon - length + 1))
    windows = horizon // length
    return (ep % windows) * length


def train(
    env: P2PTradingEnv,
    hp: Hyperparams,
    seed: int = 0,
    on_episode: Optional[Callable[[list[dict]], None]] = None,
) -> TrainResult:
    """Run the MADDPG loop: act with OU exploration, store the joint transition,
    then for each agent sample a minibatch and update critic, actor and targets."""
    seeds = np.random.SeedSequence(seed).spawn(4)
    init_rng, noise_rng, sample_rng, episode_rng = (np.random.default_rng(s) for s in seeds)
    n = env.n_agents
    agents = [AgentBundle.create(n, hp.hidden, hp.actor_lr, hp.critic_lr, init_rng) for _ in range(n)]
    noises = [OuNoise(1, hp.noise_theta, hp.noise_sigma, noise_rng) for _ in range(n)]
    buffer = ReplayBuffer(hp.buffer_capacity, n)
    ids = env.scenario.agent_ids
    result = TrainResult(agents, ids)
    env.episode_length = hp.episode_length

    for ep in range(hp.episodes):
        sigma = hp.sigma_at(ep)
        for nz in noises:
            nz.sigma = sigma
            nz.reset()
        start = episode_start(ep, env.horizon, hp.episode_length, hp.episode_mode, episode_rng)
        states = env.reset(start, hp.episode_length)
        reward_sum = np.zeros(n)
        losses: list[list[float]] = [[] for _ in range(n)]
        steps = 0
        while not env.done:
            actions = np.array([act(agents[i], states[i], noises[i])[0] for i in range(n)])
            tr, _ = env.step(actions)
            buffer.add(tr.states, tr.actions, tr.rewards * hp.reward_scale, tr.next_states, tr.done)
            states = tr.next_states
            reward_sum += tr.rewards
            steps += 1
            if len(buffer) < hp.batch_size:
                continue
            for p in range(n):
                batch = buffer.sample(hp.batch_size, sample_rng)
                y = critic_target(p, batch, agents, hp.gamma)
                loss = update_critic(agents[p], batch, y)
                if not math.isfinite(loss):
                    raise TrainingDiverged(f"non-finite critic loss for agent {ids[p]} in episode {ep}")
                update_actor(p, batch, agents)
                soft_update(agents[p], hp.tau)
                if not _params_finite(agents[p]):
                    raise TrainingDiverged(f"non-finite parameters for agent {ids[p]} in episode {ep}")
                losses[p].append(loss)
            result.updates += 1
        rows = []
        for p in range(n):
            rows.append({
                "episode": ep,
                "agent": ids[p],
                "mean_reward": float(reward_sum[p] / max(steps, 1)),
                "critic_loss": float(np.mean(losses[p])) if losses[p] else None,
            })
        result.log.extend(rows)
        if on_episode is not None:
            on_episode(rows)
        log.debug("episode %d: %s", ep, [round(r["mean_reward"], 5) for r in rows])
    return result
