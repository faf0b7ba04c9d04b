from __future__ import annotations

import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as hst

from cave.stats import (PairedOutcomes, credit_correlation,
                        credit_quantile_accuracy, delta_ci_paired,
                        delta_ci_unpaired, mcnemar, mcnemar_paired, normal_ci,
                        stratified_accuracy, wilson_ci)

from .reference import mcnemar_exact_reference, wilson_reference


# normal approximation ----------------------------------------------------------

def test_normal_ci_published_rows():
    lo, hi = normal_ci(423, 1350)
    assert lo * 100 == pytest.approx(28.9, abs=0.1)
    assert hi * 100 == pytest.approx(33.8, abs=0.1)
    lo, hi = normal_ci(67, 388)
    assert lo * 100 == pytest.approx(13.5, abs=0.1)
    assert hi * 100 == pytest.approx(21.1, abs=0.1)
    # the remaining published row implies 416 successes of 980 (its four
    # per-scenario counts are 77 + 143 + 51 + 145)
    lo, hi = normal_ci(416, 980)
    assert lo * 100 == pytest.approx(39.4, abs=0.1)
    assert hi * 100 == pytest.approx(45.5, abs=0.1)


def test_normal_ci_degenerate():
    assert normal_ci(0, 10) == (0.0, 0.0)
    assert normal_ci(10, 10) == (1.0, 1.0)


def test_normal_ci_contains_point_estimate():
    lo, hi = normal_ci(3, 17)
    assert lo <= 3 / 17 <= hi


def test_normal_ci_validation():
    with pytest.raises(ValueError):
        normal_ci(5, 0)
    with pytest.raises(ValueError):
        normal_ci(-1, 10)
    with pytest.raises(ValueError):
        normal_ci(11, 10)


# Wilson ------------------------------------------------------------------------

def test_wilson_example():
    lo, hi = wilson_ci(8, 10)
    assert lo == pytest.approx(0.490, abs=5e-4)
    assert hi == pytest.approx(0.943, abs=5e-4)


def test_wilson_boundary():
    lo, hi = wilson_ci(0, 10)
    assert lo == 0.0
    assert 0.0 < hi < 1.0


def test_wilson_matches_reference():
    for s, n in [(1, 7), (5, 9), (50, 60), (0, 4), (4, 4)]:
        assert wilson_ci(s, n) == pytest.approx(wilson_reference(s, n), abs=1e-12)


def test_wilson_normal_asymptotic_agreement():
    n = 10 ** 5
    s = int(0.31 * n)
    w = wilson_ci(s, n)
    g = normal_ci(s, n)
    assert abs(w[0] - g[0]) * 100 < 0.1
    assert abs(w[1] - g[1]) * 100 < 0.1


@settings(max_examples=200, deadline=None)
@given(hst.integers(0, 60), hst.integers(1, 60))
def test_wilson_inside_unit_interval_unclamped(s, n):
    if s > n:
        return
    lo, hi = wilson_ci(s, n)
    assert 0.0 <= lo <= hi <= 1.0
    assert lo <= s / n <= hi


# McNemar -----------------------------------------------------------------------

def test_mcnemar_symmetric_counts():
    result = mcnemar(6, 6)
    assert result.p_value >= 0.5
    assert result.method == "exact"


def test_mcnemar_exact_example():
    result = mcnemar(10, 2)
    assert result.p_value == pytest.approx(158 / 4096, abs=1e-15)


def test_mcnemar_swap_invariance():
    assert mcnemar(10, 2).p_value == mcnemar(2, 10).p_value
    assert mcnemar(100, 70).p_value == mcnemar(70, 100).p_value


def test_mcnemar_exact_matches_enumeration_small():
    for b in range(13):
        for c in range(13 - b):
            result = mcnemar(b, c)
            if b + c == 0:
                continue
            assert result.p_value == pytest.approx(
                mcnemar_exact_reference(b, c), abs=1e-12)


def test_mcnemar_no_discordant_flag():
    result = mcnemar(0, 0)
    assert result.p_value == 1.0
    assert result.no_discordant


def test_mcnemar_chi2_vs_scipy():
    scipy_stats = pytest.importorskip("scipy.stats")
    result = mcnemar(312, 218)
    stat = (abs(312 - 218) - 1) ** 2 / (312 + 218)
    assert result.method == "chi2_cc"
    assert result.p_value == pytest.approx(scipy_stats.chi2.sf(stat, 1), abs=1e-12)


def test_mcnemar_p_in_unit_interval():
    for b, c in [(0, 1), (1, 0), (25, 0), (500, 499), (3, 3)]:
        assert 0.0 < mcnemar(b, c).p_value <= 1.0


def test_mcnemar_paired_outcomes():
    outcomes = PairedOutcomes(
        model_a_correct=(True, True, False, True, False),
        model_b_correct=(True, False, False, False, True))
    assert outcomes.discordant() == (2, 1)
    assert mcnemar_paired(outcomes).p_value == mcnemar(2, 1).p_value


def test_paired_outcomes_length_check():
    with pytest.raises(ValueError):
        PairedOutcomes((True,), (True, False))


# delta intervals -----------------------------------------------------------------

def test_delta_unpaired_published_row():
    lo, hi = delta_ci_unpaired(423, 1350, 329, 1350)
    assert lo * 100 == pytest.approx(3.6, abs=0.1)
    assert hi * 100 == pytest.approx(10.3, abs=0.1)


def test_delta_paired_contains_estimate():
    lo, hi = delta_ci_paired(120, 60, 1000)
    assert lo <= (120 - 60) / 1000 <= hi
    assert lo > 0  # clearly significant margin


# stratified accuracy --------------------------------------------------------------

def test_stratified_single_bin_equals_overall():
    values = [1.0] * 10
    correct = [True] * 7 + [False] * 3
    report = stratified_accuracy(values, correct)
    assert len(report.bins) == 1
    assert report.bins[0].accuracy == pytest.approx(0.7)
    assert report.bins[0].interval == wilson_ci(7, 10)


def test_stratified_partition():
    values = [1, 1, 2, 2, 3, 3]
    correct = [True, False, True, True, False, False]
    report = stratified_accuracy(values, correct, edges=[1, 2, 3])
    assert sum(b.n for b in report.bins) == 6
    assert [b.n for b in report.bins] == [2, 4]  # last bin right-inclusive


def test_stratified_monotone_fixture_detected():
    rng = random.Random(5)
    values, correct = [], []
    for hops, acc in [(1, 0.9), (2, 0.6), (3, 0.3)]:
        for _ in range(200):
            values.append(hops)
            correct.append(rng.random() < acc)
    report = stratified_accuracy(values, correct)
    accs = [b.accuracy for b in report.bins]
    assert accs == sorted(accs, reverse=True)


# credit quantiles -----------------------------------------------------------------

def test_quantiles_q1_is_overall():
    credits = [0.1, 0.9, 0.4]
    correct = [True, False, True]
    groups = credit_quantile_accuracy(credits, correct, q=1)
    assert len(groups) == 1
    assert groups[0].accuracy == pytest.approx(2 / 3)


def test_quantiles_perfect_separation():
    credits = list(range(16))
    correct = [False] * 8 + [True] * 8
    groups = credit_quantile_accuracy(credits, correct, q=8)
    assert [g.accuracy for g in groups] == [0, 0, 0, 0, 1, 1, 1, 1]


def test_quantiles_partition_audit():
    rng = random.Random(11)
    n = 103
    credits = [rng.uniform(-1, 1) for _ in range(n)]
    correct = [rng.random() < 0.5 for _ in range(n)]
    groups = credit_quantile_accuracy(credits, correct, q=8)
    sizes = [g.n for g in groups]
    assert sum(sizes) == n
    assert max(sizes) - min(sizes) <= 1
    assert sizes == sorted(sizes, reverse=True)  # remainder lands early


# credit correlation ----------------------------------------------------------------

def test_correlation_all_ties():
    rho, gap = credit_correlation([0.5] * 6, [True, False, True, False, True, False])
    assert rho == 0.0
    assert gap == 0.0


def test_correlation_monotone_sign():
    credits = [1, 2, 3, 4, 5, 6]
    correct = [False, False, False, True, True, True]
    rho, gap = credit_correlation(credits, correct)
    assert rho > 0
    assert gap == pytest.approx(3.0)


def test_correlation_matches_scipy():
    scipy_stats = pytest.importorskip("scipy.stats")
    rng = random.Random(2)
    credits = [rng.gauss(0, 1) for _ in range(60)]
    correct = [rng.random() < 0.4 for _ in range(60)]
    if len(set(correct)) < 2:
        correct[0] = not correct[0]
    rho, _ = credit_correlation(credits, correct)
    expected = scipy_stats.spearmanr(credits, [1.0 if c else 0.0 for c in correct])
    assert rho == pytest.approx(expected.statistic, abs=1e-12)


def test_correlation_empty_class_gap_zero():
    rho, gap = credit_correlation([1.0, 2.0], [True, True])
    assert gap == 0.0
    assert rho == 0.0  # correctness vector is constant: all ranks tie
