"""Entropy decomposition of binary Monte Carlo predictions.

For samples ``p_1..p_S`` of ``p(y=1 | x, theta_i)``:

* total     = H(mean_i p_i)
* aleatoric = mean_i H(p_i)
* epistemic = total - aleatoric   (the mutual information estimate)

All entropies are in nats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

UNCERTAINTY_KINDS = ("total", "aleatoric", "epistemic")
LN2 = math.log(2.0)


@dataclass(frozen=True)
class UncertaintyTriple:
    total: float
    aleatoric: float

    @property
    def epistemic(self) -> float:
        return self.total - self.aleatoric

    def get(self, kind: str) -> float:
        if kind not in UNCERTAINTY_KINDS:
            raise ValueError(f"unknown uncertainty kind {kind!r}; expected one of {UNCERTAINTY_KINDS}")
        return getattr(self, kind)

    def scaled(self, factor: float) -> tuple[float, float, float]:
        return self.total * factor, self.aleatoric * factor, self.epistemic * factor


def _check_probability(p: float) -> float:
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability {p!r} outside [0, 1]")
    return p


def predictive_mean(samples: Sequence[float]) -> float:
    values = [_check_probability(s) for s in samples]
    if not values:
        raise ValueError("predictive_mean needs at least one sample")
    first = values[0]
    if all(v == first for v in values):
        # identical samples must reproduce the sample bit-for-bit
        return first
    return min(1.0, max(0.0, math.fsum(values) / len(values)))


def binary_entropy(p: float) -> float:
    p = _check_probability(p)
    if p == 0.0 or p == 1.0:
        return 0.0
    return -(p * math.log(p) + (1.0 - p) * math.log1p(-p))


def decompose_samples(samples: Sequence[float]) -> UncertaintyTriple:
    mean = predictive_mean(samples)
    total = binary_entropy(mean)
    if all(s == samples[0] for s in samples):
        return UncertaintyTriple(total, total)
    aleatoric = math.fsum(binary_entropy(s) for s in samples) / len(samples)
    return UncertaintyTriple(total, aleatoric)


def decompose(record) -> UncertaintyTriple:
    """Decompose one :class:`~uqlab.predstore.PredictionRecord`."""
    return decompose_samples(record.samples)


def uncertainty_values(records: Iterable, kind: str = "total") -> np.ndarray:
    if kind not in UNCERTAINTY_KINDS:
        raise ValueError(f"unknown uncertainty kind {kind!r}; expected one of {UNCERTAINTY_KINDS}")
    return np.array([decompose(r).get(kind) for r in records], dtype=float)


def predictive_means(records: Iterable) -> np.ndarray:
    return np.array([predictive_mean(r.samples) for r in records], dtype=float)

