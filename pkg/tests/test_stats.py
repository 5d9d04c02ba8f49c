"""ROC/AUC kernels, quantiles, normal inverse, BCa bootstrap."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from synthaudit import stats
from synthaudit.errors import EmptyInput, OutOfDomain, SingleClass


# ---------------------------------------------------------------------------
# roc_curve / auc_rank


def test_roc_worked_example():
    curve = stats.roc_curve([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1])
    assert curve.auc == pytest.approx(0.75, abs=1e-12)
    expected = [[0.0, 0.0], [0.0, 0.5], [0.5, 0.5], [0.5, 1.0], [1.0, 1.0]]
    assert curve.points.tolist() == expected


def test_roc_starts_and_ends():
    rng = np.random.default_rng(3)
    scores = rng.standard_normal(50)
    labels = rng.integers(0, 2, 50)
    if labels.sum() in (0, 50):
        labels[0] = 1 - labels[0]
    curve = stats.roc_curve(scores, labels)
    assert tuple(curve.points[0]) == (0.0, 0.0)
    assert tuple(curve.points[-1]) == (1.0, 1.0)
    assert np.all(np.diff(curve.fpr) >= 0)
    assert np.all(np.diff(curve.tpr) >= 0)


def test_roc_ties_collapse():
    # all scores equal: single threshold, curve is the diagonal corner pair
    curve = stats.roc_curve([0.5, 0.5, 0.5, 0.5], [1, 0, 1, 0])
    assert curve.points.tolist() == [[0.0, 0.0], [1.0, 1.0]]
    assert curve.auc == pytest.approx(0.5, abs=1e-12)


def test_roc_single_class():
    with pytest.raises(SingleClass):
        stats.roc_curve([0.1, 0.2], [1, 1])
    with pytest.raises(SingleClass):
        stats.auc_rank([0.1, 0.2], [0, 0])


def test_roc_rejects_bad_input():
    with pytest.raises(ValueError):
        stats.roc_curve([0.1, np.nan], [0, 1])
    with pytest.raises(ValueError):
        stats.roc_curve([0.1, 0.2], [0, 2])


@settings(max_examples=150, deadline=None)
@given(
    n=st.integers(2, 40),
    seed=st.integers(0, 2**31),
    quantize=st.booleans(),
)
def test_trapezoid_equals_rank_oracle(n, seed, quantize):
    rng = np.random.default_rng(seed)
    scores = rng.standard_normal(n)
    if quantize:
        scores = np.round(scores * 2) / 2  # force ties
    labels = rng.integers(0, 2, n)
    if labels.sum() == 0:
        labels[0] = 1
    if labels.sum() == n:
        labels[0] = 0
    curve = stats.roc_curve(scores, labels)
    assert abs(curve.auc - stats.auc_rank(scores, labels)) < 1e-9


def test_one_vs_rest():
    y = np.array([0, 1, 2, 1, 0])
    assert stats.one_vs_rest(y, 1).tolist() == [0, 1, 0, 1, 0]
    assert stats.one_vs_rest(y, 9).tolist() == [0, 0, 0, 0, 0]


# ---------------------------------------------------------------------------
# macro_average


def test_macro_average_two_curve_example():
    perfect = stats.roc_curve([1.0, 0.0], [1, 0])       # auc 1.0
    chance = stats.roc_curve([0.5, 0.5], [1, 0])        # auc 0.5
    avg = stats.macro_average([perfect, chance])
    assert avg.points.tolist() == [[0.0, 0.0], [0.0, 0.5], [1.0, 1.0]]
    assert avg.auc == pytest.approx(0.75, abs=1e-12)


def test_macro_average_single_curve_unchanged():
    curve = stats.roc_curve([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1])
    avg = stats.macro_average([curve])
    assert avg.points.tolist() == curve.points.tolist()
    assert avg.auc == pytest.approx(curve.auc, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(
    n=st.integers(3, 25),
    seed=st.integers(0, 2**31),
    copies=st.integers(2, 4),
)
def test_macro_average_identical_copies(n, seed, copies):
    rng = np.random.default_rng(seed)
    scores = np.round(rng.standard_normal(n), 1)
    labels = rng.integers(0, 2, n)
    if labels.sum() == 0:
        labels[0] = 1
    if labels.sum() == n:
        labels[0] = 0
    curve = stats.roc_curve(scores, labels)
    avg = stats.macro_average([curve] * copies)
    assert avg.points.shape == curve.points.shape
    assert np.max(np.abs(avg.points - curve.points)) < 1e-12
    assert abs(avg.auc - curve.auc) < 1e-12


def test_macro_average_empty():
    with pytest.raises(EmptyInput):
        stats.macro_average([])


def test_macro_average_auc_is_mean_of_aucs():
    # refining a piecewise-linear curve onto a union grid keeps its area,
    # so the averaged curve's AUC is the mean of the input AUCs
    rng = np.random.default_rng(11)
    curves = []
    for _ in range(3):
        scores = rng.standard_normal(30)
        labels = rng.integers(0, 2, 30)
        labels[0], labels[1] = 0, 1
        curves.append(stats.roc_curve(scores, labels))
    avg = stats.macro_average(curves)
    assert avg.auc == pytest.approx(np.mean([c.auc for c in curves]), abs=1e-12)


# ---------------------------------------------------------------------------
# confusion


def test_confusion_counts_and_tie_break():
    probs = np.array([
        [0.5, 0.3, 0.2],
        [0.4, 0.4, 0.2],  # tie: argmax picks class 0
        [0.1, 0.2, 0.7],
        [0.2, 0.5, 0.3],
    ])
    labels = [0, 1, 2, 2]
    cm = stats.confusion(probs, labels)
    assert cm.counts.tolist() == [
        [1, 0, 0],
        [1, 0, 0],
        [0, 1, 1],
    ]
    assert cm.counts.sum() == 4


def test_confusion_rejects():
    with pytest.raises(ValueError):
        stats.confusion(np.array([[0.5, 0.5]]), [3])
    with pytest.raises(ValueError):
        stats.confusion(np.array([[np.nan, 0.5]]), [0])


# ---------------------------------------------------------------------------
# empirical_quantile


@settings(max_examples=100, deadline=None)
@given(
    n=st.integers(1, 60),
    seed=st.integers(0, 2**31),
    p=st.floats(0.0, 100.0),
)
def test_quantile_matches_numpy(n, seed, p):
    values = np.random.default_rng(seed).standard_normal(n)
    ours = stats.empirical_quantile(values, p)
    ref = float(np.percentile(values, p))
    assert ours == pytest.approx(ref, abs=1e-12)


def test_quantile_endpoints():
    v = [3.0, 1.0, 2.0]
    assert stats.empirical_quantile(v, 0.0) == 1.0
    assert stats.empirical_quantile(v, 100.0) == 3.0
    assert stats.empirical_quantile(v, 50.0) == 2.0


def test_quantile_errors():
    with pytest.raises(EmptyInput):
        stats.empirical_quantile([], 50.0)
    with pytest.raises(ValueError):
        stats.empirical_quantile([1.0, np.nan], 50.0)
    with pytest.raises(ValueError):
        stats.empirical_quantile([1.0], 101.0)


# ---------------------------------------------------------------------------
# normal_quantile


def test_normal_quantile_known_values():
    assert stats.normal_quantile(0.5) == pytest.approx(0.0, abs=1e-12)
    assert stats.normal_quantile(0.975) == pytest.approx(1.959963984540054, abs=1e-9)
    assert stats.normal_quantile(0.025) == pytest.approx(-1.959963984540054, abs=1e-9)
    assert stats.normal_quantile(0.841344746068543) == pytest.approx(1.0, abs=1e-9)


def test_normal_quantile_inverts_cdf():
    for p in np.linspace(1e-6, 1 - 1e-6, 501):
        x = stats.normal_quantile(float(p))
        back = 0.5 * math.erfc(-x / math.sqrt(2.0))
        assert abs(back - p) < 1e-12, p


def test_normal_quantile_symmetry():
    for p in (0.001, 0.01, 0.2, 0.35):
        assert stats.normal_quantile(p) == pytest.approx(
            -stats.normal_quantile(1 - p), abs=1e-9
        )


def test_normal_quantile_domain():
    for p in (0.0, 1.0, -0.1, 1.5):
        with pytest.raises(OutOfDomain):
            stats.normal_quantile(p)


# ---------------------------------------------------------------------------
# bca_interval


def test_bca_degenerate_collapses():
    ci = stats.bca_interval(np.ones(15), np.mean, 2000, 0.05, seed=0)
    assert ci.lower == ci.point_estimate == ci.upper == 1.0
    assert ci.method == "degenerate"


def test_bca_percentile_fallback_on_flat_jackknife():
    # mode of a 6-vs-1 sample: every leave-one-out keeps the mode, so the
    # jackknife is flat and the acceleration is undefined; resamples that
    # draw enough of the minority value still vary the statistic
    data = np.array([5, 5, 5, 5, 5, 5, 1], dtype=np.float64)

    def mode(a):
        return float(np.bincount(a.astype(np.int64)).argmax())

    ci = stats.bca_interval(data, mode, 2000, 0.05, seed=4)
    assert ci.method == "percentile"
    assert ci.lower <= ci.point_estimate <= ci.upper


def test_bca_deterministic_and_seed_sensitive():
    rng = np.random.default_rng(0)
    data = rng.standard_normal(25)
    a = stats.bca_interval(data, np.mean, 200, 0.05, seed=7)
    b = stats.bca_interval(data, np.mean, 200, 0.05, seed=7)
    c = stats.bca_interval(data, np.mean, 200, 0.05, seed=8)
    assert (a.lower, a.upper) == (b.lower, b.upper)
    assert (a.lower, a.upper) != (c.lower, c.upper)
    assert a.method == "bca"
    assert a.lower <= a.point_estimate <= a.upper


def test_bca_resample_streams_independent_of_count():
    # resample r draws the same indices no matter how many resamples run
    for r in (0, 3, 17):
        one = stats._resample_rng(123, r).integers(0, 30, size=30)
        two = stats._resample_rng(123, r).integers(0, 30, size=30)
        assert np.array_equal(one, two)


def test_bca_alpha_nesting():
    data = np.random.default_rng(5).standard_normal(40)
    narrow = stats.bca_interval(data, np.mean, 400, 0.10, seed=1)
    wide = stats.bca_interval(data, np.mean, 400, 0.01, seed=1)
    assert wide.lower <= narrow.lower
    assert narrow.upper <= wide.upper


def test_bca_validates_input():
    with pytest.raises(ValueError):
        stats.bca_interval(np.ones(1), np.mean, 10, 0.05, seed=0)
    with pytest.raises(ValueError):
        stats.bca_interval(np.ones(5), np.mean, 0, 0.05, seed=0)
    with pytest.raises(ValueError):
        stats.bca_interval(np.ones(5), np.mean, 10, 1.5, seed=0)
