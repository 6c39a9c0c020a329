from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Batch:
    states: np.ndarray       # (S, P, state_dim)
    actions: np.ndarray      # (S, P)
    rewards: np.ndarray      # (S, P)
    next_states: np.ndarray  # (S, P, state_dim)
    done: np.ndarray         # (S,)

    def __len__(self) -> int:
        return self.rewards.shape[0]


class ReplayBuffer:
    """Bounded ring of joint transitions shared by all agents."""

    def __init__(self, capacity: int, n_agents: int, state_dim: int = 3, action_dim: int = 1):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.states = np.zeros((capacity, n_agents, state_dim))
        self.actions = np.zeros((capacity, n_agents * action_dim))
        self.rewards = np.zeros((capacity, n_agents))
        self.next_states = np.zeros((capacity, n_agents, state_dim))
        self.done = np.zeros(capacity)
        self.cursor = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def add(self, states, actions, rewards, next_states, done: bool) -> None:
        i = self.cursor
        self.states[i] = states
        self.actions[i] = np.ravel(actions)
        self.rewards[i] = rewards
        self.next_states[i] = next_states
        self.done[i] = float(done)
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample_indices(self, batch_size: int, rng: np.random.Generator) -> np.ndarray:
        if self.size < batch_size:
            raise ValueError(f"buffer holds {self.size} < batch size {batch_size}")
        return rng.integers(0, self.size, size=batch_size)

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        idx = self.sample_indices(batch_size, rng)
        return Batch(self.states[idx], self.actions[idx], self.rewards[idx],
                     self.next_states[idx], self.done[idx])
