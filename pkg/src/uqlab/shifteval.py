"""Distribution-shift evaluation sets and diagnostics."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .metrics import MetricValue, auprc, auroc, predict_labels
from .predstore import DatasetSummary, EvalDataset, PredictionRecord
from .uncertainty import LN2, predictive_means, uncertainty_values

DEFAULT_HIST_BINS = 20


class ShiftEvalError(ValueError):
    pass


@dataclass(frozen=True)
class OodScoreSet:
    ids: tuple[str, ...]
    scores: np.ndarray  # total predictive entropy, nats
    labels: np.ndarray  # 0 = in-domain, 1 = shifted


@dataclass(frozen=True)
class JointBalancedDataset:
    dataset: EvalDataset
    n_in: int
    n_shift_upsampled: int

    @property
    def records(self) -> tuple[PredictionRecord, ...]:
        return self.dataset.records


@dataclass(frozen=True)
class UncertaintyHistogram:
    clinical_label: int
    bin_edges: np.ndarray
    correct_density: np.ndarray
    incorrect_density: np.ndarray
    correct_empty: bool
    incorrect_empty: bool


def ood_scores(in_domain, shifted) -> OodScoreSet:
    in_domain, shifted = list(in_domain), list(shifted)
    if not in_domain or not shifted:
        raise ShiftEvalError("OOD detection needs non-empty in-domain and shifted sets")
    records = in_domain + shifted
    return OodScoreSet(
        ids=tuple(r.id for r in records),
        scores=uncertainty_values(records, "total"),
        labels=np.r_[np.zeros(len(in_domain), int), np.ones(len(shifted), int)],
    )


def ood_detection(in_domain, shifted) -> tuple[MetricValue, MetricValue]:
    """(AUROC, AUPRC) of total entropy as a shifted-vs-in-domain detector."""
    s = ood_scores(in_domain, shifted)
    return auroc(s.scores, s.labels), auprc(s.scores, s.labels)


def _suffixed(record: PredictionRecord, k: int) -> PredictionRecord:
    return replace(record, id=f"{record.id}#{k}")


def build_joint_balanced(in_domain: EvalDataset, shifted: EvalDataset, seed: int) -> JointBalancedDataset:
    """Upsample the shifted set to the in-domain size and take the union.

    The shifted set is copied ``n_in // n_sh`` whole times; the remaining
    ``n_in % n_sh`` slots are filled with distinct shifted records drawn
    without replacement. Copy ``k`` of a record gets the id suffix ``#k``.
    """
    n_in, n_sh = len(in_domain), len(shifted)
    if n_in == 0 or n_sh == 0:
        raise ShiftEvalError("joint balancing needs non-empty in-domain and shifted sets")
    if n_sh > n_in:
        raise ShiftEvalError(f"shifted set ({n_sh}) larger than in-domain set ({n_in})")
    copies, remainder = divmod(n_in, n_sh)
    upsampled = [_suffixed(r, k) for k in range(copies) for r in shifted]
    if remainder:
        rng = np.random.default_rng(seed)
        picks = np.sort(rng.choice(n_sh, size=remainder, replace=False))
        upsampled += [_suffixed(shifted[int(i)], copies) for i in picks]
    joint = EvalDataset(tuple(in_domain) + tuple(upsampled), name=f"{in_domain.name}+{shifted.name}-balanced")
    return JointBalancedDataset(joint, n_in, len(upsampled))


def rebalance_classes(shifted: EvalDataset, reference: DatasetSummary, n: int, seed: int) -> EvalDataset:
    """Resample ``shifted`` to the reference clinical-label proportions.

    Draws ``n`` records with replacement: a class from the reference
    distribution, then a record uniformly within that class. Draw ``i`` gets
    the id suffix ``#i``.
    """
    if n < 0:
        raise ShiftEvalError("n must be non-negative")
    probs = reference.class_probabilities()
    labels = sorted(probs)
    p = np.array([probs[k] for k in labels])
    by_class: dict[int, list[PredictionRecord]] = {k: [] for k in labels}
    for r in shifted:
        if r.clinical_label in by_class:
            by_class[r.clinical_label].append(r)
    for k, pk in zip(labels, p):
        if pk > 0 and not by_class[k]:
            raise ShiftEvalError(f"clinical label {k} has reference mass {pk:.4g} but no shifted records")
    rng = np.random.default_rng(seed)
    classes = rng.choice(len(labels), size=n, p=p)
    out = []
    for i, c in enumerate(classes):
        pool = by_class[labels[int(c)]]
        out.append(_suffixed(pool[int(rng.integers(len(pool)))], i))
    return EvalDataset(tuple(out), name=f"{shifted.name}-rebalanced")


def uncertainty_histograms(dataset, n_bins: int = DEFAULT_HIST_BINS) -> list[UncertaintyHistogram]:
    """Per clinical label, normalised total-uncertainty histograms split by
    whether the thresholded prediction is correct. Bins tile [0, ln 2]."""
    records = list(dataset)
    if n_bins < 1:
        raise ShiftEvalError("n_bins must be >= 1")
    missing = [r.id for r in records if r.clinical_label is None]
    if missing:
        raise ShiftEvalError(f"records without clinical_label: {', '.join(missing[:5])}")
    edges = np.linspace(0.0, LN2, n_bins + 1)
    u = np.clip(uncertainty_values(records, "total"), 0.0, LN2)
    labels = np.array([r.binary_label for r in records], dtype=int)
    correct = predict_labels(predictive_means(records)) == labels
    clinical = np.array([r.clinical_label for r in records], dtype=int)

    def density(values: np.ndarray) -> tuple[np.ndarray, bool]:
        if values.size == 0:
            return np.zeros(n_bins), True
        counts, _ = np.histogram(values, bins=edges)
        return counts / values.size, False

    out = []
    for k in sorted(set(clinical.tolist())):
        sel = clinical == k
        cd, ce = density(u[sel & correct])
        idn, ie = density(u[sel & ~correct])
        out.append(UncertaintyHistogram(k, edges, cd, idn, ce, ie))
    return out

