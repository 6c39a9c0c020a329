"""Dense ReLU networks with hand-written backpropagation and Adam."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Optional, Sequence

import numpy as np

Activation = Literal["tanh", "identity"]


class ShapeError(ValueError):
    pass


@dataclass
class ForwardCache:
    inputs: list[np.ndarray]   # input to each layer
    pre: list[np.ndarray]      # pre-activation of each layer
    output: np.ndarray
    squeeze: bool


class Mlp:
    """Fully connected net: ReLU hidden layers, tanh or identity output.

    Weights are stored as ``(fan_in, fan_out)`` so a batch ``X @ W + b`` maps
    rows to rows. Initialization follows the uniform fan-in rule, with the
    last layer drawn from ``±final_scale`` when given.
    """

    def __init__(
        self,
        sizes: Sequence[int],
        out_activation: Activation = "identity",
        rng: Optional[np.random.Generator] = None,
        final_scale: Optional[float] = None,
    ):
        if len(sizes) < 2 or any(int(s) < 1 for s in sizes):
            raise ShapeError(f"bad layer sizes {sizes}")
        if out_activation not in ("tanh", "identity"):
            raise ValueError(f"unknown output activation {out_activation!r}")
        self.sizes = [int(s) for s in sizes]
        self.out_activation = out_activation
        rng = rng if rng is not None else np.random.default_rng(0)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        n_layers = len(self.sizes) - 1
        for i, (fan_in, fan_out) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
            bound = 1.0 / np.sqrt(fan_in)
            if i == n_layers - 1 and final_scale is not None:
                bound = final_scale
            self.weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.biases.append(rng.uniform(-bound, bound, size=fan_out))

    @property
    def in_dim(self) -> int:
        return self.sizes[0]

    @property
    def out_dim(self) -> int:
        return self.sizes[-1]

    def parameters(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def set_parameters(self, params: Sequence[np.ndarray]) -> None:
        params = list(params)
        if len(params) != 2 * len(self.weights):
            raise ShapeError("parameter count mismatch")
        for i in range(len(self.weights)):
            w, b = np.asarray(params[2 * i], float), np.asarray(params[2 * i + 1], float)
            if w.shape != self.weights[i].shape or b.shape != self.biases[i].shape:
                raise ShapeError(f"layer {i}: shape mismatch")
            self.weights[i] = w.copy()
            self.biases[i] = b.copy()

    def copy(self) -> "Mlp":
        clone = Mlp.__new__(Mlp)
        clone.sizes = list(self.sizes)
        clone.out_activation = self.out_activation
        clone.weights = [w.copy() for w in self.weights]
        clone.biases = [b.copy() for b in self.biases]
        return clone

    def forward(self, x) -> ForwardCache:
        x = np.asarray(x, dtype=float)
        squeeze = x.ndim == 1
        h = x[None, :] if squeeze else x
        if h.ndim != 2 or h.shape[1] != self.in_dim:
            raise ShapeError(f"expected input width {self.in_dim}, got shape {x.shape}")
        inputs, pre = [], []
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            inputs.append(h)
            z = h @ w + b
            pre.append(z)
            if i < last:
                h = np.maximum(z, 0.0)
            elif self.out_activation == "tanh":
                h = np.tanh(z)
            else:
                h = z
        return ForwardCache(inputs, pre, h, squeeze)

    def __call__(self, x) -> np.ndarray:
        cache = self.forward(x)
        return cache.output[0] if cache.squeeze else cache.output

    def backward(self, cache: ForwardCache, grad_out) -> tuple[list[np.ndarray], np.ndarray]:
        """Reverse-mode gradients of ``sum(grad_out * output)``.

        Returns parameter gradients in ``parameters()`` order and the gradient
        with respect to the input.
        """
        g = np.asarray(grad_out, dtype=float)
        if cache.squeeze and g.ndim == 1:
            g = g[None, :]
        if g.shape != cache.output.shape:
            raise ShapeError(f"gradient shape {g.shape} != output shape {cache.output.shape}")
        if self.out_activation == "tanh":
            g = g * (1.0 - cache.output ** 2)
        grads: list[np.ndarray] = [None] * (2 * len(self.weights))  # type: ignore[list-item]
        for i in range(len(self.weights) - 1, -1, -1):
            grads[2 * i] = cache.inputs[i].T @ g
            grads[2 * i + 1] = g.sum(axis=0)
            g = g @ self.weights[i].T
            if i > 0:
                g = g * (cache.pre[i - 1] > 0.0)
        return grads, (g[0] if cache.squeeze else g)


def forward(mlp: Mlp, x) -> np.ndarray:
    return mlp(x)


def backward(mlp: Mlp, x, grad_out) -> tuple[list[np.ndarray], np.ndarray]:
    return mlp.backward(mlp.forward(x), grad_out)


class Adam:
    """Adam rule applied in place to a list of arrays (descent direction)."""

    def __init__(self, params: Sequence[np.ndarray], lr: float,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params: Sequence[np.ndarray], grads: Sequence[np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def state(self) -> dict:
        return {"t": self.t, "m": [m.copy() for m in self.m], "v": [v.copy() for v in self.v]}
