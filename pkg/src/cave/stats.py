"""Evaluation statistics: binomial intervals, McNemar's test, stratified and
credit-conditioned accuracy, and credit-correctness correlation.

Accuracies are binomial proportions over test instances. Paired comparisons
on a shared instance set use McNemar's test: exact two-sided binomial when
the discordant count is small, chi-square with continuity correction
otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

Z_95 = 1.96
MCNEMAR_EXACT_LIMIT = 25  # exact binomial at or below this many discordant pairs


def normal_ci(successes: int, n: int, z: float = Z_95) -> "tuple[float, float]":
    """Normal-approximation interval p +- z*sqrt(p(1-p)/n), clamped to [0, 1]."""
    _check_counts(successes, n)
    p = successes / n
    half = z * math.sqrt(p * (1.0 - p) / n)
    return (max(0.0, p - half), min(1.0, p + half))


def wilson_ci(successes: int, n: int, z: float = Z_95) -> "tuple[float, float]":
    """Wilson score interval; lands in [0, 1] without clamping.

    The boundary cases take their exact closed-form values (lo = 0 when no
    successes, hi = 1 when all succeed) so float noise cannot leak outside
    the unit interval.
    """
    _check_counts(successes, n)
    p = successes / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1.0 - p) / n + z * z / (4 * n * n)) / denom
    lo = 0.0 if successes == 0 else center - half
    hi = 1.0 if successes == n else center + half
    return (lo, hi)


def delta_ci_unpaired(successes_a: int, n_a: int, successes_b: int, n_b: int,
                      z: float = Z_95) -> "tuple[float, float]":
    """Unpaired normal interval for an accuracy gap p_a - p_b."""
    _check_counts(successes_a, n_a)
    _check_counts(successes_b, n_b)
    pa, pb = successes_a / n_a, successes_b / n_b
    half = z * math.sqrt(pa * (1 - pa) / n_a + pb * (1 - pb) / n_b)
    return (pa - pb - half, pa - pb + half)


def delta_ci_paired(b: int, c: int, n: int, z: float = Z_95) -> "tuple[float, float]":
    """Paired interval for the gap from discordant counts on one instance set."""
    if n <= 0 or b < 0 or c < 0 or b + c > n:
        raise ValueError(f"bad discordant counts b={b} c={c} n={n}")
    delta = (b - c) / n
    half = z * math.sqrt(max(0.0, (b + c) - (b - c) ** 2 / n)) / n
    return (delta - half, delta + half)


def _check_counts(successes: int, n: int) -> None:
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0 <= successes <= n:
        raise ValueError(f"successes {successes} outside [0, {n}]")


@dataclass(frozen=True)
class PairedOutcomes:
    """Per-sample correctness of two models on a shared instance set."""

    model_a_correct: tuple
    model_b_correct: tuple

    def __post_init__(self) -> None:
        if len(self.model_a_correct) != len(self.model_b_correct):
            raise ValueError("paired outcome vectors must share one length")

    def discordant(self) -> "tuple[int, int]":
        b = sum(1 for a, bb in zip(self.model_a_correct, self.model_b_correct)
                if a and not bb)
        c = sum(1 for a, bb in zip(self.model_a_correct, self.model_b_correct)
                if not a and bb)
        return b, c


@dataclass(frozen=True)
class McNemarResult:
    p_value: float
    b: int
    c: int
    method: str  # "exact" | "chi2_cc" | "no_discordant"

    @property
    def no_discordant(self) -> bool:
        return self.method == "no_discordant"


def _chi2_sf_1df(x: float) -> float:
    return math.erfc(math.sqrt(x / 2.0))


def mcnemar(b: int, c: int,
            exact_limit: int = MCNEMAR_EXACT_LIMIT) -> McNemarResult:
    """Two-sided McNemar test on discordant counts.

    b counts instances only model A got right, c only model B. With b + c at
    or below `exact_limit` the exact binomial sign test is used; above it,
    chi-square with continuity correction. b + c = 0 yields p = 1, flagged.
    """
    if b < 0 or c < 0:
        raise ValueError("discordant counts must be non-negative")
    n = b + c
    if n == 0:
        return McNemarResult(p_value=1.0, b=b, c=c, method="no_discordant")
    if n <= exact_limit:
        k = min(b, c)
        tail = sum(math.comb(n, i) for i in range(k + 1)) / 2.0 ** n
        return McNemarResult(p_value=min(1.0, 2.0 * tail), b=b, c=c,
                             method="exact")
    stat = (abs(b - c) - 1.0) ** 2 / n
    return McNemarResult(p_value=_chi2_sf_1df(stat), b=b, c=c, method="chi2_cc")


def mcnemar_paired(outcomes: PairedOutcomes,
                   exact_limit: int = MCNEMAR_EXACT_LIMIT) -> McNemarResult:
    b, c = outcomes.discordant()
    return mcnemar(b, c, exact_limit=exact_limit)


@dataclass(frozen=True)
class BinReport:
    label: str
    n: int
    successes: int
    accuracy: float
    interval: tuple  # Wilson (lo, hi)


@dataclass(frozen=True)
class StratifiedReport:
    factor: str
    bins: tuple  # tuple[BinReport, ...]

    def to_rows(self) -> list:
        return [{"factor": self.factor, "bin": b.label, "n": b.n,
                 "successes": b.successes, "accuracy": b.accuracy,
                 "ci_lo": b.interval[0], "ci_hi": b.interval[1]}
                for b in self.bins]


def _bin_report(label: str, flags: "list[bool]") -> BinReport:
    n = len(flags)
    s = sum(flags)
    acc = s / n if n else 0.0
    interval = wilson_ci(s, n) if n else (0.0, 0.0)
    return BinReport(label=label, n=n, successes=s, accuracy=acc,
                     interval=interval)


def stratified_accuracy(values: Sequence[float], correct: Sequence[bool],
                        factor: str = "difficulty",
                        edges: "Sequence[float] | None" = None) -> StratifiedReport:
    """Per-bin accuracy with Wilson intervals.

    With `edges` [e0, e1, ..., ek], bins are [e0, e1), ..., [e_{k-1}, ek]
    (last bin right-inclusive). Without edges, one bin per distinct value.
    """
    if len(values) != len(correct):
        raise ValueError("values and correctness must align")
    bins: "list[BinReport]" = []
    if edges is None:
        for v in sorted(set(values)):
            flags = [bool(c) for x, c in zip(values, correct) if x == v]
            bins.append(_bin_report(str(v), flags))
    else:
        if len(edges) < 2:
            raise ValueError("need at least two bin edges")
        for i in range(len(edges) - 1):
            lo, hi = edges[i], edges[i + 1]
            last = i == len(edges) - 2
            flags = [bool(c) for x, c in zip(values, correct)
                     if (lo <= x < hi) or (last and x == hi)]
            bins.append(_bin_report(f"[{lo:g},{hi:g}{']' if last else ')'}", flags))
    return StratifiedReport(factor=factor, bins=tuple(bins))


def credit_quantile_accuracy(credits: Sequence[float], correct: Sequence[bool],
                             q: int = 8) -> "list[BinReport]":
    """Accuracy across q equal-size credit groups, low to high.

    Samples are ordered by credit (ties broken by input order); remainders
    enlarge the earliest groups so the groups partition the set exactly.
    """
    if len(credits) != len(correct):
        raise ValueError("credits and correctness must align")
    if q < 1:
        raise ValueError("q must be >= 1")
    n = len(credits)
    order = sorted(range(n), key=lambda i: (credits[i], i))
    base, rem = divmod(n, q)
    reports = []
    start = 0
    for g in range(q):
        size = base + (1 if g < rem else 0)
        idx = order[start:start + size]
        start += size
        flags = [bool(correct[i]) for i in idx]
        reports.append(_bin_report(f"q{g + 1}", flags))
    return reports


def _average_ranks(values: Sequence[float]) -> list:
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def credit_correlation(credits: Sequence[float],
                       correct: Sequence[bool]) -> "tuple[float, float]":
    """Spearman rank correlation (average-rank ties) between credit and the
    correctness indicator, plus the mean credit gap correct-minus-wrong.

    Degenerate inputs (all ties on either side, or an empty class) map to 0.
    """
    if len(credits) != len(correct):
        raise ValueError("credits and correctness must align")
    n = len(credits)
    if n == 0:
        return 0.0, 0.0
    flags = [1.0 if c else 0.0 for c in correct]
    rx = _average_ranks(list(credits))
    ry = _average_ranks(flags)
    mx = sum(rx) / n
    my = sum(ry) / n
    sxx = sum((x - mx) ** 2 for x in rx)
    syy = sum((y - my) ** 2 for y in ry)
    if sxx <= 0.0 or syy <= 0.0:
        rho = 0.0
    else:
        sxy = sum((x - mx) * (y - my) for x, y in zip(rx, ry))
        rho = sxy / math.sqrt(sxx * syy)
    right = [cr for cr, c in zip(credits, correct) if c]
    wrong = [cr for cr, c in zip(credits, correct) if not c]
    if right and wrong:
        gap = sum(right) / len(right) - sum(wrong) / len(wrong)
    else:
        gap = 0.0
    return rho, gap
