import itertools
import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import mannwhitneyu, spearmanr

from persistprobe.stats import (
    equivalence_verdicts, exact_p_value, mann_whitney_u, normal_p_value, rankdata, spearman_rho,
    u_statistic)


def u_by_pairs(a, b):
    return sum(1 if x > y else Fraction(1, 2) if x == y else 0 for x in a for y in b)


def brute_p(a, b):
    # enumerate every split of the pooled values into groups of the same sizes
    pool = list(a) + list(b)
    n1 = len(a)
    u_obs = u_by_pairs(a, b)
    le = ge = total = 0
    for idx in itertools.combinations(range(len(pool)), n1):
        s = set(idx)
        ga = [pool[i] for i in idx]
        gb = [pool[i] for i in range(len(pool)) if i not in s]
        u = u_by_pairs(ga, gb)
        total += 1
        le += u <= u_obs
        ge += u >= u_obs
    return min(1.0, 2 * min(le, ge) / total)


def test_two_by_two_example():
    # hand enumeration of the 6 splits of ranks {1,2,3,4}: U_a takes 0,1,2,2,3,4
    r = mann_whitney_u([1, 3], [2, 4])
    assert r.u_statistic == 1
    assert r.p_value == pytest.approx(2 / 3, abs=1e-12)
    assert r.method == "exact" and not r.significant
    assert brute_p([1, 3], [2, 4]) == pytest.approx(2 / 3)


def test_identical_and_separated():
    r = mann_whitney_u([1, 2, 3], [1, 2, 3])
    assert r.u_statistic == 4.5 and not r.significant
    r = mann_whitney_u([1, 2, 3], [10, 20, 30])
    assert r.u_statistic == 0


def test_exhaustive_against_oracle_small():
    vals = range(1, 9)
    for n1 in range(1, 4):
        for n2 in range(1, 4):
            for combo in itertools.combinations(vals, n1 + n2):
                for idx in itertools.combinations(range(n1 + n2), n1):
                    a = [combo[i] for i in idx]
                    b = [combo[i] for i in range(n1 + n2) if i not in idx]
                    assert abs(mann_whitney_u(a, b).p_value - brute_p(a, b)) < 1e-12


@given(st.lists(st.integers(0, 6), min_size=1, max_size=8),
       st.lists(st.integers(0, 6), min_size=1, max_size=8))
def test_u_statistic_complement_and_pairs(a, b):
    assert u_statistic(a, b) + u_statistic(b, a) == len(a) * len(b)
    assert u_statistic(a, b) == u_by_pairs(a, b)


@given(st.lists(st.integers(-50, 50), min_size=1, max_size=7),
       st.lists(st.integers(-50, 50), min_size=1, max_size=7))
def test_monotone_transform_invariance(a, b):
    f = lambda v: 3 * v ** 3 + 7
    r1, r2 = mann_whitney_u(a, b), mann_whitney_u([f(v) for v in a], [f(v) for v in b])
    assert (r1.u_statistic, r1.p_value) == (r2.u_statistic, r2.p_value)


@given(st.lists(st.integers(0, 30), min_size=1, max_size=15),
       st.lists(st.integers(0, 30), min_size=1, max_size=15), st.booleans())
@settings(max_examples=200)
def test_normal_matches_scipy_asymptotic(a, b, two_sided):
    if len(set(a + b)) == 1:
        return
    n1, n2 = len(a), len(b)
    u = u_statistic(a, b)
    got = normal_p_value(u, n1, n2, rankdata(a + b), two_sided)
    alt = "two-sided" if two_sided else "less"
    ref = mannwhitneyu(a, b, alternative=alt, method="asymptotic", use_continuity=True).pvalue
    assert got == pytest.approx(ref, abs=1e-9)


@given(st.lists(st.integers(0, 100), min_size=2, max_size=12, unique=True), st.data())
def test_exact_matches_scipy_exact(vals, data):
    n1 = data.draw(st.integers(1, len(vals) - 1))
    a, b = vals[:n1], vals[n1:]
    got = exact_p_value(u_statistic(a, b), len(a), len(b))
    ref = mannwhitneyu(a, b, alternative="two-sided", method="exact").pvalue
    assert got == pytest.approx(ref, abs=1e-12)


def test_one_sided_exact():
    # a entirely below b: P(U_a <= 0) = 1 / C(6, 3)
    r = mann_whitney_u([1, 2, 3], [4, 5, 6], two_sided=False)
    assert r.p_value == pytest.approx(1 / 20)
    r = mann_whitney_u([4, 5, 6], [1, 2, 3], two_sided=False)
    assert r.p_value == 1.0


def test_normal_close_to_exact_at_six():
    a, b = [1, 4, 5, 9, 11, 12], [2, 3, 6, 7, 8, 10]
    u = u_statistic(a, b)
    ex = exact_p_value(u, 6, 6)
    nm = normal_p_value(u, 6, 6, rankdata(a + b))
    assert abs(ex - nm) < 0.1


def test_method_selection():
    assert mann_whitney_u([1, 2, 3, 4, 5, 6], [7, 8, 9, 10, 11, 12]).method == "exact"
    assert mann_whitney_u([1, 2, 3, 4, 5, 6], [7, 8, 9, 10, 11, 12, 13]).method == "normal"
    assert mann_whitney_u([1, 1, 2], [3, 4]).method == "normal"
    with pytest.raises(ValueError):
        mann_whitney_u([], [1])


def test_equivalence_table():
    same = [([1, 2, 3, 4], [1, 2, 3, 4])] * 3
    assert not any(r.significant for r in equivalence_verdicts(same))
    sep = equivalence_verdicts([(list(range(10)), list(range(100, 110)))])
    assert sep[0].significant and sep[0].p_value < 0.001
    assert equivalence_verdicts([]) == []
    # n = 6 cross-check of the approximation against enumeration
    a, b = list(range(6)), list(range(10, 16))
    assert brute_p(a, b) < 0.05 and mann_whitney_u(a, b).significant


def test_rankdata_ties():
    assert rankdata([10, 20, 20, 30]) == [1, 2.5, 2.5, 4]


@given(st.lists(st.tuples(st.integers(0, 20), st.integers(0, 20)), min_size=3, max_size=30))
def test_spearman_matches_scipy(pairs):
    xs, ys = zip(*pairs)
    got = spearman_rho(xs, ys)
    if len(set(xs)) == 1 or len(set(ys)) == 1:
        assert math.isnan(got)
        return
    assert got == pytest.approx(spearmanr(xs, ys).statistic, abs=1e-9)


def test_spearman_example_and_errors():
    assert spearman_rho([1, 2, 3, 4], [40, 30, 20, 10]) == pytest.approx(-1)
    with pytest.raises(ValueError):
        spearman_rho([1], [1])
