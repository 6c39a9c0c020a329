from __future__ import annotations

import numpy as np


class OuNoise:
    """Discrete Ornstein-Uhlenbeck process with zero mean.

    ``x <- x + theta * (0 - x) + sigma * N(0, 1)`` per call.
    """

    def __init__(self, size: int = 1, theta: float = 0.15, sigma: float = 0.2,
                 rng: np.random.Generator | None = None):
        self.theta = theta
        self.sigma = sigma
        self.rng = rng if rng is not None else np.random.default_rng()
        self.state = np.zeros(size)

    def reset(self) -> None:
        self.state[:] = 0.0

    def sample(self) -> np.ndarray:
        self.state += -self.theta * self.state + self.sigma * self.rng.standard_normal(self.state.size)
        return self.state.copy()
