"""Predictive-performance metrics computed from Monte Carlo predictive means.

Record-level entry points (``accuracy``, ``nll``, ``ece``, ``roc_curve``)
take a sequence of prediction records; ``auroc``/``auprc`` take raw scores
and labels. The ``*_from`` variants work on ``(means, labels)`` arrays and
are what the referral sweep calls repeatedly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.stats import rankdata

from .uncertainty import predictive_means

NLL_EPS = 1e-12
DEFAULT_ECE_BINS = 15
METRIC_KINDS = ("accuracy", "auroc", "auprc", "nll", "ece")


@dataclass(frozen=True)
class MetricValue:
    kind: str
    value: float
    defined: bool = True

    @classmethod
    def undefined(cls, kind: str) -> "MetricValue":
        return cls(kind, float("nan"), False)


@dataclass(frozen=True)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))


def _arrays(records) -> tuple[np.ndarray, np.ndarray]:
    records = list(records)
    if not records:
        raise ValueError("metric requires at least one record")
    labels = np.array([r.binary_label for r in records], dtype=int)
    return predictive_means(records), labels


def _check_pair(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError(f"scores and labels must be equal-length vectors, got {scores.shape} and {labels.shape}")
    return scores, labels


def predict_labels(means: np.ndarray) -> np.ndarray:
    # p = 0.5 predicts the referable (positive) class
    return (np.asarray(means) >= 0.5).astype(int)


# -- array-level metrics -------------------------------------------------------

def accuracy_from(means, labels) -> MetricValue:
    means, labels = _check_pair(means, labels)
    if means.size == 0:
        raise ValueError("accuracy of an empty set")
    return MetricValue("accuracy", float(np.mean(predict_labels(means) == labels)))


def auroc(scores, labels) -> MetricValue:
    """Mann-Whitney form: P(score+ > score-) + 0.5 P(tie)."""
    scores, labels = _check_pair(scores, labels)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return MetricValue.undefined("auroc")
    ranks = rankdata(scores)  # average ranks for ties
    u = ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return MetricValue("auroc", float(u / (n_pos * n_neg)))


def auprc(scores, labels) -> MetricValue:
    """Step-wise average precision over distinct score thresholds."""
    scores, labels = _check_pair(scores, labels)
    n_pos = int(labels.sum())
    if n_pos == 0:
        return MetricValue.undefined("auprc")
    tp, fp, _ = _threshold_counts(scores, labels)
    precision = tp / (tp + fp)
    d_recall = np.diff(np.concatenate([[0.0], tp])) / n_pos
    return MetricValue("auprc", float(np.sum(d_recall * precision)))


def nll_from(means, labels) -> MetricValue:
    means, labels = _check_pair(means, labels)
    if means.size == 0:
        raise ValueError("nll of an empty set")
    p_true = np.where(labels == 1, means, 1.0 - means)
    p_true = np.clip(p_true, NLL_EPS, 1.0 - NLL_EPS)
    return MetricValue("nll", float(np.mean(-np.log(p_true))))


def ece_from(means, labels, n_bins: int = DEFAULT_ECE_BINS) -> MetricValue:
    """Expected calibration error on the binary confidence ``max(p, 1-p)``.

    Confidence lives in [0.5, 1]; that interval is split into ``n_bins``
    equal-width right-closed bins (0.5 itself joins the first bin).
    """
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    means, labels = _check_pair(means, labels)
    n = means.size
    if n == 0:
        raise ValueError("ece of an empty set")
    conf = np.maximum(means, 1.0 - means)
    correct = (predict_labels(means) == labels).astype(float)
    idx = np.ceil((conf - 0.5) * 2.0 * n_bins).astype(int) - 1
    idx = np.clip(idx, 0, n_bins - 1)
    total = 0.0
    for b in np.unique(idx):
        in_bin = idx == b
        gap = abs(correct[in_bin].mean() - conf[in_bin].mean())
        total += in_bin.sum() / n * gap
    return MetricValue("ece", float(total))


def auroc_from(means, labels) -> MetricValue:
    return auroc(means, labels)


def auprc_from(means, labels) -> MetricValue:
    return auprc(means, labels)


BASE_METRICS: dict[str, Callable[[np.ndarray, np.ndarray], MetricValue]] = {
    "accuracy": accuracy_from,
    "auroc": auroc_from,
    "auprc": auprc_from,
    "nll": nll_from,
    "ece": ece_from,
}


def get_metric(kind: str) -> Callable[[np.ndarray, np.ndarray], MetricValue]:
    try:
        return BASE_METRICS[kind]
    except KeyError:
        raise ValueError(f"unknown metric {kind!r}; expected one of {METRIC_KINDS}") from None


# -- record-level metrics ------------------------------------------------------

def accuracy(records) -> MetricValue:
    return accuracy_from(*_arrays(records))


def nll(records) -> MetricValue:
    return nll_from(*_arrays(records))


def ece(records, n_bins: int = DEFAULT_ECE_BINS) -> MetricValue:
    return ece_from(*_arrays(records), n_bins=n_bins)


def evaluate_all(records, n_bins: int = DEFAULT_ECE_BINS) -> dict[str, MetricValue]:
    means, labels = _arrays(records)
    return {
        "nll": nll_from(means, labels),
        "accuracy": accuracy_from(means, labels),
        "auprc": auprc(means, labels),
        "auroc": auroc(means, labels),
        "ece": ece_from(means, labels, n_bins),
    }


# -- ROC -----------------------------------------------------------------------

def _threshold_counts(scores: np.ndarray, labels: np.ndarray):
    """Cumulative (tp, fp) when predicting positive for score >= each distinct
    threshold, thresholds in decreasing order."""
    order = np.argsort(-scores, kind="mergesort")
    s = scores[order]
    y = labels[order]
    last_of_group = np.r_[np.nonzero(np.diff(s))[0], s.size - 1]
    tp = np.cumsum(y)[last_of_group].astype(float)
    fp = np.cumsum(1 - y)[last_of_group].astype(float)
    return tp, fp, s[last_of_group]


def roc_curve_from(scores, labels) -> RocCurve:
    scores, labels = _check_pair(scores, labels)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC curve needs both classes present")
    tp, fp, thr = _threshold_counts(scores, labels)
    tpr = np.concatenate([[0.0], tp / n_pos])
    fpr = np.concatenate([[0.0], fp / n_neg])
    thresholds = np.concatenate([[np.inf], thr])
    area = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))
    return RocCurve(fpr, tpr, thresholds, area)


def roc_curve(records) -> RocCurve:
    return roc_curve_from(*_arrays(records))


def meets_operating_point(curve: RocCurve, sensitivity: float, specificity: float) -> bool:
    """True iff one threshold reaches ``TPR >= sensitivity`` and
    ``FPR <= 1 - specificity`` at the same time."""
    tol = 1e-12
    ok = (curve.tpr >= sensitivity - tol) & (curve.fpr <= 1.0 - specificity + tol)
    return bool(np.any(ok))


def metric_on_records(kind: str, records: Sequence, **kwargs) -> MetricValue:
    return get_metric(kind)(*_arrays(records), **kwargs)
