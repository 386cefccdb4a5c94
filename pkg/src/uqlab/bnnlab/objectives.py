"""Loss pieces shared by every training method."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

N_CLASSES = 2
_PROB_EPS = 1e-12


def class_weights(labels: np.ndarray) -> np.ndarray:
    """Per-example weight ``1 / p(k)`` from the batch's own class frequencies.

    A single-class batch has frequency 1 for that class, so its examples get
    weight 1.
    """
    labels = np.asarray(labels, dtype=int)
    m = labels.size
    if m == 0:
        raise ValueError("empty batch")
    n_pos = labels.sum()
    freq = np.where(labels == 1, n_pos / m, (m - n_pos) / m)
    return 1.0 / freq


def class_weighted_ce(batch_probs, batch_labels) -> float:
    """``(1 / (K M)) * sum_i CE_i / p(k_i)`` with K = 2 classes."""
    p = np.clip(np.asarray(batch_probs, dtype=float), _PROB_EPS, 1.0 - _PROB_EPS)
    y = np.asarray(batch_labels, dtype=int)
    if p.shape != y.shape:
        raise ValueError("probabilities and labels differ in shape")
    ce = -(y * np.log(p) + (1 - y) * np.log1p(-p))
    return float(np.sum(class_weights(y) * ce) / (N_CLASSES * y.size))


def weighted_ce_from_logits(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Class-weighted cross-entropy on logits and its gradient per logit."""
    y = np.asarray(labels, dtype=float)
    w = class_weights(labels) / (N_CLASSES * y.size)
    ce = np.logaddexp(0.0, logits) - y * logits
    return float(np.sum(w * ce)), w * (expit(logits) - y)


def mean_ce_from_logits(logits: np.ndarray, labels: np.ndarray) -> float:
    y = np.asarray(labels, dtype=float)
    return float(np.mean(np.logaddexp(0.0, logits) - y * logits))


@dataclass(frozen=True)
class ConstantKL:
    beta: float = 1.0

    def __post_init__(self):
        if not self.beta >= 0:
            raise ValueError("beta must be >= 0")


@dataclass(frozen=True)
class CyclicalKL:
    """Linear ramp from 0 to 1 over the first ``ramp_fraction`` of each
    period, then hold at 1."""

    period: int
    ramp_fraction: float = 0.5

    def __post_init__(self):
        if self.period < 1:
            raise ValueError("period must be >= 1")
        if not 0.0 < self.ramp_fraction <= 1.0:
            raise ValueError("ramp_fraction must lie in (0, 1]")


KLSchedule = ConstantKL | CyclicalKL


def kl_anneal_weight(step: int, schedule: KLSchedule) -> float:
    if step < 0:
        raise ValueError("step must be >= 0")
    if isinstance(schedule, ConstantKL):
        return float(schedule.beta)
    if isinstance(schedule, CyclicalKL):
        ramp = schedule.ramp_fraction * schedule.period
        return min(1.0, (step % schedule.period) / ramp)
    raise TypeError(f"unknown KL schedule {schedule!r}")


def parse_kl_schedule(text: str) -> KLSchedule:
    """``"constant:0.3"`` or ``"cyclical:200:0.5"``."""
    parts = text.split(":")
    try:
        if parts[0] == "constant" and len(parts) == 2:
            return ConstantKL(float(parts[1]))
        if parts[0] == "cyclical" and len(parts) in (2, 3):
            return CyclicalKL(int(parts[1]), float(parts[2]) if len(parts) == 3 else 0.5)
    except ValueError as exc:
        raise ValueError(f"invalid KL schedule {text!r}: {exc}") from None
    raise ValueError(f"invalid KL schedule {text!r}")
