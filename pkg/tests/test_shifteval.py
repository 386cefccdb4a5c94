import math
from collections import Counter

import numpy as np
import pytest
from scipy.stats import chi2, chisquare

from conftest import dataset, rec
from uqlab.metrics import auroc
from uqlab.predstore import SHIFTED, EvalDataset, DatasetSummary, summarize
from uqlab.shifteval import (
    ShiftEvalError,
    build_joint_balanced,
    ood_detection,
    ood_scores,
    rebalance_classes,
    uncertainty_histograms,
)
from uqlab.uncertainty import LN2, binary_entropy


def p_for_entropy(h):
    """Probability in [0, 0.5] with binary entropy h (bisection)."""
    lo, hi = 0.0, 0.5
    for _ in range(200):
        mid = (lo + hi) / 2
        lo, hi = (mid, hi) if binary_entropy(mid) < h else (lo, mid)
    return (lo + hi) / 2


def with_entropies(prefix, hs, domain="in_domain"):
    return EvalDataset(tuple(rec(f"{prefix}{i}", 0, [p_for_entropy(h)], domain=domain) for i, h in enumerate(hs)))


def plain(prefix, n, domain="in_domain"):
    return EvalDataset(tuple(rec(f"{prefix}{i}", i % 2, [0.5], domain=domain) for i in range(n)))


def test_ood_examples():
    a = with_entropies("i", [0.1, 0.2])
    b = with_entropies("s", [0.15, 0.3], SHIFTED)
    au, _ = ood_detection(a, b)
    assert au.value == 0.75
    assert ood_detection(with_entropies("i", [0.1, 0.2]), with_entropies("s", [0.4, 0.5], SHIFTED))[0].value == 1.0
    with pytest.raises(ShiftEvalError):
        ood_detection(a, EvalDataset(()))


def test_ood_identical_distributions_near_chance():
    rng = np.random.default_rng(0)
    hs = rng.uniform(0, LN2, 4000)
    au, _ = ood_detection(with_entropies("i", hs[:2000]), with_entropies("s", hs[2000:], SHIFTED))
    # SE of AUROC at n = m = 2000 is about 0.009
    assert abs(au.value - 0.5) < 0.03


def test_ood_equals_metrics_auroc_on_random_instances():
    rng = np.random.default_rng(1)
    for _ in range(30):
        a = dataset([(f"i{j}", 0, rng.random(3).tolist()) for j in range(int(rng.integers(1, 20)))])
        b = dataset([(f"s{j}", 1, rng.random(2).tolist(), None, SHIFTED) for j in range(int(rng.integers(1, 20)))])
        s = ood_scores(a, b)
        assert ood_detection(a, b)[0].value == auroc(s.scores, s.labels).value


def test_joint_examples():
    j = build_joint_balanced(plain("i", 10), plain("s", 3, SHIFTED), seed=4)
    assert j.n_shift_upsampled == 10 and len(j.dataset) == 20
    base = Counter(r.id.split("#")[0] for r in j.records if "#" in r.id)
    assert sorted(base.values()) == [3, 3, 4]
    one = build_joint_balanced(plain("i", 5), plain("s", 5, SHIFTED), seed=0)
    assert [r.id for r in one.records[5:]] == [f"s{i}#0" for i in range(5)]
    outs = {tuple(r.id for r in build_joint_balanced(plain("i", 5), plain("s", 5, SHIFTED), s).records) for s in range(10)}
    assert len(outs) == 1
    with pytest.raises(ShiftEvalError):
        build_joint_balanced(plain("i", 2), plain("s", 3, SHIFTED), 0)


def multiplicity_ok(n_in, n_sh, seed):
    j = build_joint_balanced(plain("i", n_in), plain("s", n_sh, SHIFTED), seed)
    counts = Counter(r.id.split("#")[0] for r in j.records[n_in:])
    lo, hi = n_in // n_sh, -(-n_in // n_sh)
    return (
        len(j.dataset) == 2 * n_in
        and j.n_shift_upsampled == n_in
        and [r.id for r in j.records[:n_in]] == [f"i{i}" for i in range(n_in)]
        and set(counts) == {f"s{i}" for i in range(n_sh)}
        and all(c in (lo, hi) for c in counts.values())
    )


def test_joint_multiplicity_exhaustive():
    for n_in in range(1, 51):
        for n_sh in range(1, n_in + 1):
            assert multiplicity_ok(n_in, n_sh, seed=n_in * 100 + n_sh), (n_in, n_sh)


def graded(prefix, per_class):
    rows = []
    for k, count in per_class.items():
        rows += [(f"{prefix}{k}-{i}", int(k >= 2), [0.5], k, SHIFTED) for i in range(count)]
    return dataset(rows)


def test_rebalance_examples():
    shifted = graded("s", {0: 3, 1: 2, 2: 2})
    only0 = DatasetSummary(10, 0, {0: 10, 1: 0, 2: 0, 3: 0, 4: 0})
    out = rebalance_classes(shifted, only0, 4, seed=1)
    assert len(out) == 4 and {r.clinical_label for r in out} == {0}
    a = rebalance_classes(shifted, only0, 4, seed=1)
    assert [r.id for r in a] == [r.id for r in out]
    half = DatasetSummary(2, 0, {0: 1, 1: 1, 2: 0, 3: 0, 4: 0})
    big = rebalance_classes(shifted, half, 10_000, seed=2)
    frac = sum(r.clinical_label == 0 for r in big) / 10_000
    assert abs(frac - 0.5) < 3 * math.sqrt(0.25 / 10_000)
    with pytest.raises(ShiftEvalError):
        rebalance_classes(graded("s", {0: 1}), half, 5, 0)


@pytest.mark.parametrize("seed", range(5))
def test_rebalance_chi_square(seed):
    reference = summarize(graded("r", {0: 62, 1: 18, 2: 14, 3: 3, 4: 3}))
    shifted = graded("s", {0: 4, 1: 9, 2: 3, 3: 7, 4: 2})
    out = rebalance_classes(shifted, reference, 10_000, seed)
    obs = np.array([sum(r.clinical_label == k for r in out) for k in range(5)])
    exp = np.array([reference.class_probabilities()[k] for k in range(5)]) * 10_000
    stat, _ = chisquare(obs, exp)
    assert stat < chi2.ppf(0.999, df=4)


def hist_rows(rows):
    return dataset([(f"r{i}", int(c >= 2), s, c) for i, (c, s) in enumerate(rows)])


def test_hist_examples():
    (h,) = uncertainty_histograms(hist_rows([(0, [0.0])]), 20)
    assert h.correct_density[0] == 1.0 and h.correct_density[1:].sum() == 0.0
    assert h.incorrect_empty and not h.incorrect_density.any()
    (h,) = uncertainty_histograms(hist_rows([(0, [0.0]), (0, [0.5])]), 2)  # 0.5 predicts 1: wrong
    assert list(h.correct_density) == [1.0, 0.0]
    assert list(h.incorrect_density) == [0.0, 1.0]
    with pytest.raises(ShiftEvalError):
        uncertainty_histograms(dataset([("a", 1, [0.5])]), 5)


def test_hist_bins_tile_and_order_invariance():
    rng = np.random.default_rng(3)
    rows = [(int(rng.integers(0, 5)), rng.random(3).tolist()) for _ in range(200)]
    hs = uncertainty_histograms(hist_rows(rows), 7)
    perm = rng.permutation(len(rows))
    hs2 = uncertainty_histograms(dataset([(f"r{i}", int(rows[i][0] >= 2), rows[i][1], rows[i][0]) for i in perm]), 7)
    for a, b in zip(hs, hs2):
        assert a.bin_edges[0] == 0.0 and a.bin_edges[-1] == LN2 and len(a.bin_edges) == 8
        assert np.allclose(np.diff(a.bin_edges), LN2 / 7)
        for d, empty in ((a.correct_density, a.correct_empty), (a.incorrect_density, a.incorrect_empty)):
            assert empty or d.sum() == pytest.approx(1.0)
        assert np.array_equal(a.correct_density, b.correct_density)
        assert np.array_equal(a.incorrect_density, b.incorrect_density)
