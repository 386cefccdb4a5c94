"""Selective prediction by uncertainty-ordered referral.

Records are ranked from most to least uncertain (ties by ascending id). For
every partition ``k = 0..N`` the ``k`` most uncertain records are referred
and the base metric is evaluated on the remaining ``N - k``; the referral
rate of that partition is ``tau = k / N``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .metrics import MetricValue, get_metric
from .uncertainty import UNCERTAINTY_KINDS, predictive_means, uncertainty_values

# slack for tau*N arithmetic (1/3 * 3 and friends)
_GRID_EPS = 1e-9


@dataclass(frozen=True)
class ReferralPoint:
    tau: float
    retained_count: int
    metric: MetricValue


@dataclass(frozen=True)
class ReferralCurve:
    base_metric_kind: str
    uncertainty_kind: str
    points: tuple[ReferralPoint, ...]

    @property
    def taus(self) -> np.ndarray:
        return np.array([p.tau for p in self.points])

    @property
    def values(self) -> np.ndarray:
        return np.array([p.metric.value for p in self.points])

    @property
    def defined(self) -> np.ndarray:
        return np.array([p.metric.defined for p in self.points], dtype=bool)

    @property
    def n(self) -> int:
        return len(self.points) - 1

    @property
    def area(self) -> float:
        return referral_area(self)


def _check_kind(kind: str) -> None:
    if kind not in UNCERTAINTY_KINDS:
        raise ValueError(f"unknown uncertainty kind {kind!r}; expected one of {UNCERTAINTY_KINDS}")


def _order_indices(uncertainties: np.ndarray, ids: Sequence[str]) -> list[int]:
    return sorted(range(len(ids)), key=lambda i: (-uncertainties[i], ids[i]))


def referral_order(records, uncertainty_kind: str = "total") -> list[str]:
    records = list(records)
    if not records:
        raise ValueError("referral_order of an empty set")
    _check_kind(uncertainty_kind)
    ids = [r.id for r in records]
    u = uncertainty_values(records, uncertainty_kind)
    return [ids[i] for i in _order_indices(u, ids)]


def referral_curve_from(
    means: np.ndarray,
    labels: np.ndarray,
    uncertainties: np.ndarray,
    ids: Sequence[str],
    base_metric: str | Callable = "accuracy",
    uncertainty_kind: str = "total",
) -> ReferralCurve:
    """Array-level sweep; ``uncertainties`` may be any real-valued score."""
    n = len(ids)
    if n == 0:
        raise ValueError("referral_curve of an empty set")
    metric_fn = get_metric(base_metric) if isinstance(base_metric, str) else base_metric
    kind = base_metric if isinstance(base_metric, str) else getattr(metric_fn, "__name__", "custom")
    order = np.array(_order_indices(np.asarray(uncertainties, dtype=float), list(ids)))
    means = np.asarray(means, dtype=float)[order]
    labels = np.asarray(labels, dtype=int)[order]
    points = []
    for k in range(n + 1):
        retained = n - k
        if retained == 0:
            value = MetricValue.undefined(kind)
        else:
            value = metric_fn(means[k:], labels[k:])
        points.append(ReferralPoint(k / n, retained, value))
    return ReferralCurve(kind, uncertainty_kind, tuple(points))


def referral_curve(records, uncertainty_kind: str = "total", base_metric: str | Callable = "accuracy") -> ReferralCurve:
    records = list(records)
    if not records:
        raise ValueError("referral_curve of an empty set")
    _check_kind(uncertainty_kind)
    labels = np.array([r.binary_label for r in records], dtype=int)
    return referral_curve_from(
        predictive_means(records),
        labels,
        uncertainty_values(records, uncertainty_kind),
        [r.id for r in records],
        base_metric,
        uncertainty_kind,
    )


def referral_area(curve: ReferralCurve) -> float:
    """Normalised area under the referral curve.

    Each partition point owns one grid cell, so on the uniform ``k/N`` grid
    the area is the mean metric over the defined points. Undefined points
    are dropped and the result is renormalised by the cells that remain.
    """
    vals = [p.metric.value for p in curve.points if p.metric.defined]
    if len(vals) < 2:
        raise ValueError("referral_area needs at least two defined points")
    return math.fsum(vals) / len(vals)


def min_referral_for_target(curve: ReferralCurve, target: float) -> float | None:
    for p in curve.points:
        if p.metric.defined and p.metric.value >= target:
            return p.tau
    return None


def metric_at_budget(curve: ReferralCurve, max_tau: float) -> MetricValue:
    """Metric at the largest grid rate within budget, falling back to the
    closest defined point below it."""
    best = None
    for p in curve.points:
        if p.tau > max_tau + _GRID_EPS:
            break
        if p.metric.defined:
            best = p.metric
    if best is None:
        return curve.points[0].metric
    return best


def uncertainty_threshold_for_rate(records, uncertainty_kind: str = "total", tau: float = 0.0) -> float:
    """Threshold gamma such that the ceil(tau*N) top-ranked records are referred.

    Returns ``+inf`` when nothing is referred.
    """
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau {tau} outside [0, 1]")
    records = list(records)
    if not records:
        raise ValueError("uncertainty_threshold_for_rate of an empty set")
    _check_kind(uncertainty_kind)
    n = len(records)
    m = math.ceil(tau * n - _GRID_EPS)
    if m <= 0:
        return math.inf
    ids = [r.id for r in records]
    u = uncertainty_values(records, uncertainty_kind)
    order = _order_indices(u, ids)
    return float(u[order[m - 1]])
