import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from gsifit.analytics import (DegenerateInput, TestMethod, describe, kde_1d, mann_whitney_u,
                              mean_shift, midranks, pearson, silhouette, silverman_bandwidth,
                              wilcoxon_signed_rank)
from gsifit.safety import ValidationError


# ---------------------------------------------------------------- oracles

def mw_enumeration_p(a, b):
    """Two-sided exact p over every relabelling of the pooled sample."""
    pooled = list(a) + list(b)
    ranks = stats.rankdata(pooled)
    na, n = len(a), len(pooled)
    observed = sum(ranks[:na])
    sums = [sum(ranks[i] for i in idx) for idx in itertools.combinations(range(n), na)]
    total = len(sums)
    lower = sum(s <= observed + 1e-9 for s in sums) / total
    upper = sum(s >= observed - 1e-9 for s in sums) / total
    return min(1.0, 2 * min(lower, upper))


def wilcoxon_enumeration_p(diffs):
    """Two-sided exact p over all 2^n sign assignments of the nonzero differences."""
    d = [x for x in diffs if x != 0]
    ranks = stats.rankdata(np.abs(d))
    observed = sum(r for r, x in zip(ranks, d) if x > 0)
    sums = [sum(r for r, s in zip(ranks, signs) if s)
            for signs in itertools.product((False, True), repeat=len(d))]
    total = len(sums)
    lower = sum(s <= observed + 1e-9 for s in sums) / total
    upper = sum(s >= observed - 1e-9 for s in sums) / total
    return min(1.0, 2 * min(lower, upper))


# ---------------------------------------------------------------- describe

def test_describe_constant():
    d = describe([0.5, 0.5, 0.5])
    assert (d.mean, d.sd, d.se) == (0.5, 0.0, 0.0)


def test_describe_hand_values():
    d = describe([1, 2, 3, 4])
    assert d.mean == 2.5
    assert d.sd == pytest.approx(math.sqrt(5 / 3))
    assert d.sd == pytest.approx(1.2910, abs=1e-4)
    assert d.se == pytest.approx(0.6455, abs=1e-4)
    assert (d.min, d.max, d.n) == (1, 4, 4)


def test_describe_singleton_flags_sd():
    d = describe([3.2])
    assert d.mean == 3.2 and not d.sd_defined and math.isnan(d.sd) and math.isnan(d.se)
    with pytest.raises(ValidationError):
        describe([])


@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=50))
def test_describe_invariants(xs):
    d = describe(xs)
    assert d.min <= d.mean <= d.max
    assert d.se == pytest.approx(d.sd / math.sqrt(d.n))


# ---------------------------------------------------------------- pearson

def test_pearson_perfect():
    x = [1.0, 2.0, 4.0, 7.0]
    assert pearson(x, x).statistic == pytest.approx(1.0)
    assert pearson(x, [-v for v in x]).statistic == pytest.approx(-1.0)


def test_pearson_hand_fixture_exact():
    res = pearson([1, 2, 3, 4, 5], [2, 1, 4, 3, 5])
    assert res.statistic == 0.8 and res.effect_r == 0.8
    assert res.method is TestMethod.PEARSON
    assert res.p_value == pytest.approx(stats.pearsonr([1, 2, 3, 4, 5], [2, 1, 4, 3, 5])[1])


def test_pearson_rejects_degenerate():
    with pytest.raises(DegenerateInput):
        pearson([1, 1, 1], [1, 2, 3])
    with pytest.raises(ValidationError):
        pearson([1, 2], [1, 2])
    with pytest.raises(ValidationError):
        pearson([1, 2, 3], [1, 2])


vec = st.lists(st.floats(-100, 100, allow_subnormal=False), min_size=3, max_size=20)


@settings(max_examples=100)
@given(st.data())
def test_pearson_symmetry_and_affine_invariance(data):
    x = np.array(data.draw(vec))
    y = np.array(data.draw(st.lists(st.floats(-100, 100, allow_subnormal=False),
                                    min_size=len(x), max_size=len(x))))
    if np.ptp(x) < 1e-3 or np.ptp(y) < 1e-3:
        return
    r = pearson(x, y).statistic
    assert pearson(y, x).statistic == pytest.approx(r, abs=1e-12)
    assert pearson(3.0 * x + 2.0, 0.5 * y - 7.0).statistic == pytest.approx(r, abs=1e-9)
    assert -1.0 <= r <= 1.0


# ---------------------------------------------------------------- Mann-Whitney

def test_mw_complete_separation():
    res = mann_whitney_u([1, 2, 3], [4, 5, 6])
    assert res.statistic == 0
    assert res.exact
    assert res.p_value == pytest.approx(2 / 20)


def test_mw_identical_samples():
    a = [1.0, 2.0, 3.0, 4.0, 5.0]
    res = mann_whitney_u(a, a)
    assert res.effect_r == pytest.approx(0.0) and res.p_value == pytest.approx(1.0)
    big = list(np.linspace(0, 1, 15))
    res = mann_whitney_u(big, big)
    assert not res.exact and res.effect_r == pytest.approx(0.0) and res.p_value == pytest.approx(1.0)


@given(st.lists(st.integers(0, 6), min_size=1, max_size=12),
       st.lists(st.integers(0, 6), min_size=1, max_size=12))
def test_mw_u_sum_identity(a, b):
    ua = mann_whitney_u(a, b).statistic
    ub = mann_whitney_u(b, a).statistic
    assert ua + ub == pytest.approx(len(a) * len(b))


def test_mw_exact_matches_enumeration_all_small_partitions():
    rng = np.random.default_rng(0)
    checked = 0
    for n in range(2, 11):
        for na in range(1, n):
            for trial in range(3):
                # trial 0 continuous, trials 1-2 heavily tied
                pooled = rng.normal(size=n) if trial == 0 else rng.integers(0, 3, size=n).astype(float)
                a, b = pooled[:na], pooled[na:]
                res = mann_whitney_u(a, b)
                assert res.exact
                assert res.p_value == pytest.approx(mw_enumeration_p(a, b), abs=1e-12)
                checked += 1
    assert checked > 100


def test_mw_normal_path_against_scipy():
    rng = np.random.default_rng(1)
    a = rng.normal(0, 1, 30)
    b = rng.normal(0.8, 1, 25)
    res = mann_whitney_u(a, b)
    ref = stats.mannwhitneyu(a, b, alternative="two-sided", method="asymptotic", use_continuity=True)
    assert not res.exact
    assert res.statistic == pytest.approx(ref.statistic)
    assert res.p_value == pytest.approx(ref.pvalue, rel=1e-9)
    assert 0 <= res.effect_r <= 1


@given(st.lists(st.integers(-20, 20), min_size=1, max_size=10),
       st.lists(st.integers(-20, 20), min_size=1, max_size=10))
def test_mw_invariant_under_monotone_transform(a, b):
    base = mann_whitney_u(a, b)
    moved = mann_whitney_u(np.exp(np.array(a) / 3), np.exp(np.array(b) / 3))
    assert moved.statistic == base.statistic
    assert moved.p_value == pytest.approx(base.p_value)


def test_mw_rejects_empty():
    with pytest.raises(ValidationError):
        mann_whitney_u([], [1.0])


# ---------------------------------------------------------------- Wilcoxon

def test_wilcoxon_uniform_shift():
    pre = [1.0, 2.5, 3.0, 4.0, 7.0, 1.5]
    res = wilcoxon_signed_rank(pre, [p + 0.7 for p in pre])
    assert res.statistic == 0
    assert res.p_value == pytest.approx(2 / 2**6)


def test_wilcoxon_symmetric_differences():
    res = wilcoxon_signed_rank([0, 0, 0, 0], [1.0, -1.0, 2.5, -2.5])
    assert res.exact and res.p_value == 1.0


def test_wilcoxon_all_zero_is_degenerate():
    with pytest.raises(DegenerateInput):
        wilcoxon_signed_rank([1, 2, 3], [1, 2, 3])


def test_wilcoxon_exact_matches_enumeration():
    rng = np.random.default_rng(2)
    for n in range(1, 13):
        for trial in range(4):
            if trial < 2:
                diffs = rng.normal(size=n)
            else:
                diffs = rng.integers(-3, 4, size=n).astype(float)
            if not np.any(diffs != 0):
                continue
            res = wilcoxon_signed_rank(np.zeros(n), diffs)
            assert res.exact
            assert res.p_value == pytest.approx(wilcoxon_enumeration_p(diffs), abs=1e-12)


def test_wilcoxon_exact_against_scipy_no_ties():
    rng = np.random.default_rng(3)
    d = rng.normal(0.3, 1, 18)
    ours = wilcoxon_signed_rank(np.zeros(18), d)
    ref = stats.wilcoxon(d, method="exact")
    assert ours.statistic == pytest.approx(ref.statistic)
    assert ours.p_value == pytest.approx(ref.pvalue, rel=1e-9)


def test_wilcoxon_normal_path_against_scipy():
    rng = np.random.default_rng(4)
    pre = rng.normal(size=40)
    post = pre + rng.normal(0.3, 1, 40)
    ours = wilcoxon_signed_rank(pre, post)
    ref = stats.wilcoxon(post - pre, method="approx", correction=True)
    assert not ours.exact
    assert ours.p_value == pytest.approx(ref.pvalue, rel=1e-9)
    assert ours.effect_r == pytest.approx(abs(ours.z) / math.sqrt(40))


def test_wilcoxon_pratt_keeps_zero_ranks():
    pre = np.zeros(6)
    post = np.array([0.0, 0.0, 1.0, 2.0, 3.0, -4.0])
    wil = wilcoxon_signed_rank(pre, post)
    pratt = wilcoxon_signed_rank(pre, post, zero_method="pratt")
    assert wil.n == (4,) and pratt.n == (4,)
    assert wil.statistic == 4.0  # ranks 1,2,3 positive, 4 negative
    assert pratt.statistic == 6.0  # ranks shift to 3,4,5 / 6


# ---------------------------------------------------------------- clustering

def blobs(centers, n, spread, seed=0):
    rng = np.random.default_rng(seed)
    return np.concatenate([c + rng.uniform(-spread, spread, n) for c in centers])


def test_two_blobs():
    pts = blobs([0.95, 0.60], 20, 0.005)
    res = mean_shift(pts, bandwidth=0.05)
    assert res.n_clusters == 2 and res.counts == [20, 20]
    assert sum(res.counts) == len(pts)
    assert res.outliers == []


def test_identical_points_single_cluster():
    res = mean_shift([0.7] * 8)
    assert res.n_clusters == 1
    assert res.modes[0, 0] == pytest.approx(0.7)
    assert math.isnan(res.silhouette)


def test_three_blobs_with_outlier():
    pts = np.concatenate([blobs([0.2, 0.5, 0.9], 15, 0.01, seed=1), [0.7]])
    res = mean_shift(pts, bandwidth=0.03)
    assert res.counts == [15, 15, 1, 15]
    assert res.outliers == [len(pts) - 1]
    assert res.labels[-1] == 2
    assert res.silhouette > 0.6


def test_mean_shift_permutation_invariant():
    pts = blobs([0.1, 0.4, 0.45, 0.9], 10, 0.02, seed=2)
    base = mean_shift(pts, bandwidth=0.04)
    perm = np.random.default_rng(0).permutation(len(pts))
    shuffled = mean_shift(pts[perm], bandwidth=0.04)
    assert shuffled.counts == base.counts
    assert np.array_equal(shuffled.labels, base.labels[perm])


def test_mean_shift_two_dimensional():
    rng = np.random.default_rng(5)
    pts = np.concatenate([rng.normal([0, 0], 0.05, (10, 2)), rng.normal([3, 3], 0.05, (12, 2))])
    res = mean_shift(pts, bandwidth=0.5)
    assert res.counts == [10, 12]


def test_mean_shift_validation():
    with pytest.raises(ValidationError):
        mean_shift([1.0, 2.0], bandwidth=0.0)
    with pytest.raises(ValidationError):
        mean_shift([1.0])


def test_silverman_default_bandwidth():
    x = np.random.default_rng(0).normal(size=200)
    assert silverman_bandwidth(x) == pytest.approx(1.06 * x.std(ddof=1) * 200 ** -0.2, rel=1e-3)
    assert mean_shift(x).bandwidth == pytest.approx(silverman_bandwidth(x))


def test_silhouette_separated_blobs():
    pts = blobs([0.0, 10.0], 10, 0.1)
    labels = [0] * 10 + [1] * 10
    assert silhouette(pts, labels) > 0.95


def test_silhouette_interleaved():
    pts = np.tile([0.0, 1.0], 20)
    labels = [0] * 20 + [1] * 20
    assert silhouette(pts, labels) == pytest.approx(0.0, abs=0.05)


def test_silhouette_singletons_score_zero():
    assert silhouette([0.0, 5.0], [0, 1]) == 0.0
    with pytest.raises(DegenerateInput):
        silhouette([0.0, 1.0, 2.0], [1, 1, 1])


@given(st.lists(st.floats(-5, 5), min_size=3, max_size=25), st.integers(0, 1000))
def test_silhouette_range(xs, seed):
    labels = np.random.default_rng(seed).integers(0, 3, len(xs))
    labels[0], labels[1] = 0, 1
    s = silhouette(xs, labels)
    assert -1.0 <= s <= 1.0


def test_silhouette_matches_reference_formula():
    rng = np.random.default_rng(6)
    x = rng.normal(size=(15, 2))
    labels = rng.integers(0, 3, 15)
    d = np.sqrt(((x[:, None] - x[None]) ** 2).sum(-1))
    s = []
    for i in range(15):
        same = (labels == labels[i])
        if same.sum() == 1:
            s.append(0.0)
            continue
        a = d[i, same].sum() / (same.sum() - 1)
        b = min(d[i, labels == k].mean() for k in set(labels) if k != labels[i])
        s.append((b - a) / max(a, b))
    assert silhouette(x, labels) == pytest.approx(np.mean(s))


# ---------------------------------------------------------------- KDE

def trapezoid(y, x):
    return float(np.sum((y[1:] + y[:-1]) * np.diff(x)) / 2)


def test_kde_normal_sample():
    x = np.random.default_rng(0).normal(size=1000)
    xs, dens = kde_1d(x)
    assert abs(xs[np.argmax(dens)]) < 0.3
    assert trapezoid(dens, xs) == pytest.approx(1.0, abs=1e-3)


def test_kde_two_points_symmetric():
    xs, dens = kde_1d([0.0, 10.0], bandwidth=0.5, grid=1001)
    assert trapezoid(dens, xs) == pytest.approx(1.0, abs=1e-3)
    left = trapezoid(dens[xs <= 5], xs[xs <= 5])
    right = trapezoid(dens[xs >= 5], xs[xs >= 5])
    assert left == pytest.approx(right, abs=1e-6)
    assert dens[np.argmin(np.abs(xs - 5))] < 1e-6


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=2, max_size=40), st.floats(0.05, 5.0),
       st.floats(1e-2, 1e2))
def test_kde_integrates_to_one(xs, h, scale):
    # grid resolution tracks the data scale; keep range / bandwidth bounded
    xs, h = [x * scale for x in xs], h * scale
    grid_x, dens = kde_1d(xs, bandwidth=h, grid=4096)
    assert trapezoid(dens, grid_x) == pytest.approx(1.0, abs=1e-3)


def test_kde_grid_span():
    xs, _ = kde_1d([1.0, 2.0], bandwidth=0.1, grid=11)
    assert xs[0] == pytest.approx(1.0 - 0.4) and xs[-1] == pytest.approx(2.0 + 0.4)
    with pytest.raises(ValidationError):
        kde_1d([1.0])


def test_midranks():
    assert midranks(np.array([3.0, 1.0, 3.0, 2.0])).tolist() == [3.5, 1.0, 3.5, 2.0]
