"""Fully-connected binary-logit network with explicit backpropagation.

Weights are stored as ``(fan_in, fan_out)`` matrices so a layer computes
``h @ W + b``. The last layer is linear and has one unit (the logit).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

ACTIVATIONS = ("relu", "tanh")

Layer = tuple[np.ndarray, np.ndarray]  # (W, b)


@dataclass(frozen=True)
class MlpArchitecture:
    layer_sizes: tuple[int, ...]
    activation: str = "relu"

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 3:
            raise ValueError("need input, at least one hidden layer and the output layer")
        if sizes[-1] != 1:
            raise ValueError("output layer must have exactly one unit (binary logit)")
        if any(s < 1 for s in sizes):
            raise ValueError(f"layer sizes must be positive: {sizes}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")
        object.__setattr__(self, "layer_sizes", sizes)

    @property
    def shapes(self) -> list[tuple[int, int]]:
        s = self.layer_sizes
        return list(zip(s[:-1], s[1:]))

    @property
    def n_layers(self) -> int:
        return len(self.layer_sizes) - 1


def he_std(fan_in: int) -> float:
    return float(np.sqrt(2.0 / fan_in))


def init_layers(arch: MlpArchitecture, rng: np.random.Generator) -> list[Layer]:
    return [(rng.normal(0.0, he_std(i), size=(i, o)), np.zeros(o)) for i, o in arch.shapes]


def _act(z: np.ndarray, kind: str) -> np.ndarray:
    return np.maximum(z, 0.0) if kind == "relu" else np.tanh(z)


def _act_grad(z: np.ndarray, a: np.ndarray, kind: str) -> np.ndarray:
    return (z > 0.0).astype(z.dtype) if kind == "relu" else 1.0 - a * a


def forward(arch: MlpArchitecture, layers: Sequence[Layer], x: np.ndarray):
    """Return ``(logits, cache)``; ``cache`` feeds :func:`backward`."""
    h = np.asarray(x, dtype=float)
    inputs, pre = [], []
    last = len(layers) - 1
    for k, (W, b) in enumerate(layers):
        inputs.append(h)
        z = h @ W + b
        if k < last:
            pre.append(z)
            h = _act(z, arch.activation)
        else:
            h = z
    return h[:, 0], (inputs, pre)


def backward(arch: MlpArchitecture, layers: Sequence[Layer], cache, d_logits: np.ndarray) -> list[Layer]:
    """Gradients ``(dW, db)`` per layer given ``dL/dlogit`` per example."""
    inputs, pre = cache
    delta = np.asarray(d_logits, dtype=float)[:, None]
    grads: list[Layer] = [None] * len(layers)  # type: ignore[list-item]
    for k in range(len(layers) - 1, -1, -1):
        W, _ = layers[k]
        grads[k] = (inputs[k].T @ delta, delta.sum(axis=0))
        if k > 0:
            z = pre[k - 1]
            delta = (delta @ W.T) * _act_grad(z, inputs[k], arch.activation)
    return grads


def logits(arch: MlpArchitecture, layers: Sequence[Layer], x: np.ndarray) -> np.ndarray:
    return forward(arch, layers, x)[0]
