"""Monte Carlo prediction export and ensemble pooling."""

from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy.special import expit

from ..labels import binarize_label
from ..predstore import IN_DOMAIN, EvalDataset, PredictionRecord
from .mlp import forward
from .posteriors import sample_weights
from .tasks import LabelledPoints

DEFAULT_MC_SAMPLES = 5


class EnsembleMismatch(ValueError):
    pass


def predict_probs(model, x: np.ndarray, n_samples: int, rng: np.random.Generator) -> np.ndarray:
    """``(n_points, n_samples)`` matrix of sigmoid outputs, one column per
    weight draw."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    spec = getattr(model, "posterior", model)
    cols = [expit(forward(spec.arch, sample_weights(spec, rng), x)[0]) for _ in range(n_samples)]
    return np.stack(cols, axis=1)


def predict_mc(
    model,
    points: LabelledPoints,
    n_samples: int = DEFAULT_MC_SAMPLES,
    rng: np.random.Generator | None = None,
    domain: str = IN_DOMAIN,
    name: str = "",
) -> EvalDataset:
    rng = rng if rng is not None else np.random.default_rng(0)
    probs = predict_probs(model, points.x, n_samples, rng)
    records = tuple(
        PredictionRecord(
            id=rid,
            binary_label=binarize_label(int(c)),
            domain=domain,
            samples=tuple(row.tolist()),
            clinical_label=int(c),
        )
        for rid, c, row in zip(points.ids, points.clinical, probs)
    )
    return EvalDataset(records, name)


def pool_ensemble(members: Sequence[EvalDataset], name: str | None = None) -> EvalDataset:
    """Equal-weight mixture: concatenate every member's samples per id.

    Members must share the id set and agree on labels and domain per id.
    """
    if not members:
        raise EnsembleMismatch("no ensemble members")
    first = members[0]
    lookups = [m.by_id() for m in members]
    ids = set(first.ids)
    for k, lk in enumerate(lookups[1:], start=1):
        if set(lk) != ids:
            raise EnsembleMismatch(f"member {k} has a different id set")
    pooled = []
    for rec in first:
        parts = [lk[rec.id] for lk in lookups]
        for other in parts[1:]:
            if (other.binary_label, other.clinical_label, other.domain) != (
                rec.binary_label, rec.clinical_label, rec.domain
            ):
                raise EnsembleMismatch(f"members disagree on labels/domain for {rec.id!r}")
        samples = tuple(s for p in parts for s in p.samples)
        pooled.append(PredictionRecord(rec.id, rec.binary_label, rec.domain, samples, rec.clinical_label))
    return EvalDataset(tuple(pooled), first.name if name is None else name)
