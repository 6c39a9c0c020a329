"""Per-agent actor/critic pairs and the MADDPG update rules.

Each critic sees every agent's state and action (centralized training); each
actor sees only its own state (decentralized execution).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .buffer import Batch
from .mlp import Adam, Mlp
from .noise import OuNoise

STATE_DIM = 3
ACTION_DIM = 1


@dataclass
class AgentBundle:
    actor: Mlp
    critic: Mlp
    target_actor: Mlp
    target_critic: Mlp
    actor_lr: float
    critic_lr: float
    actor_opt: Adam = field(init=False)
    critic_opt: Adam = field(init=False)

    def __post_init__(self):
        self.actor_opt = Adam(self.actor.parameters(), self.actor_lr)
        self.critic_opt = Adam(self.critic.parameters(), self.critic_lr)

    @classmethod
    def create(cls, n_agents: int, hidden: Sequence[int], actor_lr: float, critic_lr: float,
               rng: np.random.Generator, state_dim: int = STATE_DIM,
               action_dim: int = ACTION_DIM) -> "AgentBundle":
        actor = Mlp([state_dim, *hidden, action_dim], "tanh", rng, final_scale=3e-3)
        critic_in = n_agents * (state_dim + action_dim)
        critic = Mlp([critic_in, *hidden, 1], "identity", rng, final_scale=3e-3)
        return cls(actor, critic, actor.copy(), critic.copy(), actor_lr, critic_lr)


def critic_input(states: np.ndarray, actions: np.ndarray) -> np.ndarray:
    """Concatenate flattened joint states ``(B, P, S)`` and joint actions ``(B, P)``."""
    b = states.shape[0]
    return np.concatenate([states.reshape(b, -1), actions.reshape(b, -1)], axis=1)


def act(agent: AgentBundle, state, noise: Optional[OuNoise] = None) -> np.ndarray:
    a = agent.actor(np.asarray(state, dtype=float))
    if noise is not None:
        a = a + noise.sample()
    return np.clip(a, -1.0, 1.0)


def joint_actions(actors: Sequence[Mlp], states: np.ndarray) -> np.ndarray:
    """Actions ``(B, P)`` from each actor applied to its own state column."""
    return np.concatenate([actors[i](states[:, i, :]) for i in range(len(actors))], axis=1)


def critic_target(p: int, batch: Batch, agents: Sequence[AgentBundle], gamma: float) -> np.ndarray:
    next_actions = joint_actions([a.target_actor for a in agents], batch.next_states)
    q_next = agents[p].target_critic(critic_input(batch.next_states, next_actions))[:, 0]
    return batch.rewards[:, p] + gamma * (1.0 - batch.done) * q_next


def update_critic(agent: AgentBundle, batch: Batch, targets: np.ndarray) -> float:
    """One Adam step on the mean squared TD error; returns the pre-step loss."""
    cache = agent.critic.forward(critic_input(batch.states, batch.actions))
    resid = targets - cache.output[:, 0]
    loss = float(np.mean(resid ** 2))
    grad_out = (-2.0 / len(resid)) * resid[:, None]
    grads, _ = agent.critic.backward(cache, grad_out)
    agent.critic_opt.step(agent.critic.parameters(), grads)
    return loss


def actor_objective_grads(p: int, batch: Batch, agents: Sequence[AgentBundle]):
    """Gradient of ``-mean_j Q_p(s_j, a_j)`` w.r.t. actor p's parameters, where
    ``a_j`` holds every agent's current policy action and only agent p's
    action path is differentiated. Returns (grads, objective)."""
    actor = agents[p].actor
    a_cache = actor.forward(batch.states[:, p, :])
    actions = joint_actions([a.actor for a in agents], batch.states)
    actions[:, p] = a_cache.output[:, 0]
    c_cache = agents[p].critic.forward(critic_input(batch.states, actions))
    s = len(batch)
    _, grad_in = agents[p].critic.backward(c_cache, np.full((s, 1), -1.0 / s))
    n_agents = actions.shape[1]
    dq_da = grad_in[:, n_agents * batch.states.shape[2] + p]
    grads, _ = actor.backward(a_cache, dq_da[:, None])
    return grads, -float(np.mean(c_cache.output))


def update_actor(p: int, batch: Batch, agents: Sequence[AgentBundle]) -> None:
    grads, _ = actor_objective_grads(p, batch, agents)
    agents[p].actor_opt.step(agents[p].actor.parameters(), grads)


def soft_update(agent: AgentBundle, tau: float) -> None:
    for net, target in ((agent.actor, agent.target_actor), (agent.critic, agent.target_critic)):
        for src, dst in zip(net.parameters(), target.parameters()):
            dst *= 1.0 - tau
            dst += tau * src


def execute_policy(actor: Mlp, state) -> np.ndarray:
    """Decentralized action from the local ``(g, d, soc)`` triple only."""
    return np.clip(actor(np.asarray(state, dtype=float)), -1.0, 1.0)
