"""Mann-Whitney U test and rank helpers."""

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

EXACT_MAX_N = 12


@dataclass(frozen=True)
class UTestResult:
    u_statistic: float
    p_value: float
    significant: bool
    method: str
    n1: int
    n2: int


def rankdata(values):
    """1-based ranks with ties given the mean of the ranks they span."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        mid = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = mid
        i = j + 1
    return ranks


def u_statistic(a, b) -> float:
    """U for sample ``a``: number of (a_i, b_j) pairs with a_i > b_j, ties counting one half."""
    ranks = rankdata(list(a) + list(b))
    n1 = len(a)
    return sum(ranks[:n1]) - n1 * (n1 + 1) / 2


@lru_cache(maxsize=None)
def _u_frequencies(n1: int, n2: int) -> tuple:
    """Number of rank arrangements giving each U = 0..n1*n2 (no ties).

    Recurrence on the largest observation: it belongs to sample 1, adding n2
    to U, or to sample 2, adding nothing.
    """
    if n1 == 0 or n2 == 0:
        return (1,)
    with_a = _u_frequencies(n1 - 1, n2)
    with_b = _u_frequencies(n1, n2 - 1)
    out = [0] * (n1 * n2 + 1)
    for u, c in enumerate(with_a):
        out[u + n2] += c
    for u, c in enumerate(with_b):
        out[u] += c
    return tuple(out)


def exact_p_value(u: float, n1: int, n2: int, two_sided: bool = True) -> float:
    freq = _u_frequencies(n1, n2)
    total = sum(freq)
    u_low = min(u, n1 * n2 - u)
    tail = Fraction(sum(c for k, c in enumerate(freq) if k <= u_low), total)
    if two_sided:
        return float(min(Fraction(1), 2 * tail))
    # one-sided: probability of a U at least as small as the observed one for sample a
    return float(Fraction(sum(c for k, c in enumerate(freq) if k <= u), total))


def normal_p_value(u: float, n1: int, n2: int, ranks, two_sided: bool = True) -> float:
    n = n1 + n2
    mu = n1 * n2 / 2
    ties = {}
    for r in ranks:
        ties[r] = ties.get(r, 0) + 1
    tie_term = sum(t ** 3 - t for t in ties.values())
    var = n1 * n2 / 12 * ((n + 1) - tie_term / (n * (n - 1))) if n > 1 else 0.0
    if var <= 0:
        return 1.0
    sd = math.sqrt(var)
    if two_sided:
        z = max(abs(u - mu) - 0.5, 0.0) / sd
        return min(1.0, math.erfc(z / math.sqrt(2)))
    z = (u - mu + 0.5) / sd
    return min(1.0, 0.5 * math.erfc(-z / math.sqrt(2)))


def mann_whitney_u(sample_a, sample_b, alpha: float = 0.05, two_sided: bool = True
                   ) -> UTestResult:
    """Rank-sum comparison of two samples.

    Reports the smaller of U(a, b) and U(b, a). The p-value is exact (full
    null distribution) when n1 + n2 <= 12 with no ties, otherwise the normal
    approximation with tie and continuity correction. The one-sided variant
    tests whether ``sample_a`` tends to be smaller.
    """
    a, b = list(sample_a), list(sample_b)
    if not a or not b:
        raise ValueError("both samples must be non-empty")
    n1, n2 = len(a), len(b)
    ranks = rankdata(a + b)
    u_a = sum(ranks[:n1]) - n1 * (n1 + 1) / 2
    has_ties = len(set(ranks)) < len(ranks)
    if n1 + n2 <= EXACT_MAX_N and not has_ties:
        p = exact_p_value(u_a, n1, n2, two_sided)
        method = "exact"
    else:
        p = normal_p_value(u_a, n1, n2, ranks, two_sided)
        method = "normal"
    u = min(u_a, n1 * n2 - u_a)
    return UTestResult(u, p, p < alpha, method, n1, n2)


def equivalence_verdicts(pairs, alpha: float = 0.05, two_sided: bool = True) -> list:
    return [mann_whitney_u(a, b, alpha, two_sided) for a, b in pairs]


def spearman_rho(xs, ys) -> float:
    """Pearson correlation of mid-ranks; nan when either side is constant."""
    if len(xs) != len(ys) or len(xs) < 2:
        raise ValueError("need two equal-length sequences of length >= 2")
    rx, ry = rankdata(list(xs)), rankdata(list(ys))
    mx, my = sum(rx) / len(rx), sum(ry) / len(ry)
    sxy = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    sxx = sum((a - mx) ** 2 for a in rx)
    syy = sum((b - my) ** 2 for b in ry)
    if sxx == 0 or syy == 0:
        return float("nan")
    return sxy / math.sqrt(sxx * syy)
