"""Statistical primitives for the corpus analysis.

Implemented from first principles (rank sums, exact enumeration, normal
approximation) so the test suite can cross-check them against an independent
reference implementation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import DegenerateInput, EmptySample

EXACT_MAX_MIN_N = 8     # exact enumeration when min(n, m) <= this and no ties
EXACT_MAX_PRODUCT = 1200  # ... and n*m at most this (keeps enumeration fast)


def rankdata_midranks(values: Sequence[float]) -> list[float]:
    """Ranks 1..n with ties sharing their midrank."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        midrank = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = midrank
        i = j + 1
    return ranks


@dataclass(frozen=True)
class MannWhitneyResult:
    u: float          # U statistic of the second sample (reported side)
    u_first: float    # U statistic of the first sample
    p: float          # one-tailed per `alternative`
    method: str       # "exact" | "normal"


def mann_whitney_u(
    a: Sequence[float],
    b: Sequence[float],
    alternative: str = "greater",
) -> MannWhitneyResult:
    """One-tailed Mann-Whitney U test.

    ``alternative="greater"`` tests whether ``a`` is stochastically greater
    than ``b`` (``"less"`` the reverse). U is computed from rank sums with
    midranks for ties. The p-value is exact (enumeration over all rank
    assignments) when min(len(a), len(b)) <= 8 and there are no ties,
    otherwise a normal approximation with tie and continuity correction.

    The reported ``u`` is the second sample's statistic; ``u_first`` carries
    the other side.
    """
    if alternative not in ("greater", "less"):
        raise ValueError(f"alternative must be 'greater' or 'less', got {alternative!r}")
    n1, n2 = len(a), len(b)
    if n1 == 0 or n2 == 0:
        raise EmptySample("both samples must be non-empty")

    pooled = list(a) + list(b)
    ranks = rankdata_midranks(pooled)
    r1 = sum(ranks[:n1])
    u1 = r1 - n1 * (n1 + 1) / 2
    u2 = n1 * n2 - u1

    has_ties = len(set(pooled)) != len(pooled)
    if not has_ties and min(n1, n2) <= EXACT_MAX_MIN_N and n1 * n2 <= EXACT_MAX_PRODUCT:
        p = _exact_p(n1, n2, u1, alternative)
        method = "exact"
    else:
        p = _normal_p(n1, n2, u1, ranks, alternative)
        method = "normal"
    return MannWhitneyResult(u=u2, u_first=u1, p=p, method=method)


def _exact_u_counts(m: int, n: int) -> list[int]:
    """counts[u] = number of tie-free rank splits with first-sample U == u.

    Recurrence on whether the largest pooled rank falls in the first sample
    (it then beats all n second-sample values) or the second:
    cnt(m, n, u) = cnt(m-1, n, u-n) + cnt(m, n-1, u).
    """
    size = m * n + 1
    prev = [[0] * size for _ in range(m + 1)]
    for mp in range(m + 1):
        prev[mp][0] = 1  # n' = 0: only U = 0
    for np_ in range(1, n + 1):
        cur = [[0] * size for _ in range(m + 1)]
        cur[0][0] = 1
        for mp in range(1, m + 1):
            row, left, down = cur[mp], cur[mp - 1], prev[mp]
            for u in range(0, mp * np_ + 1):
                row[u] = down[u] + (left[u - np_] if u >= np_ else 0)
        prev = cur
    return prev[m]


def _exact_p(n1: int, n2: int, u1: float, alternative: str) -> float:
    """P(U >= observed) (or <=) over all C(n1+n2, n1) equally likely splits."""
    counts = _exact_u_counts(n1, n2)
    total = sum(counts)
    u_obs = round(u1)  # tie-free U is integral
    if alternative == "greater":
        favorable = sum(counts[u_obs:])
    else:
        favorable = sum(counts[: u_obs + 1])
    return favorable / total


def _normal_p(
    n1: int, n2: int, u1: float, pooled_ranks: Sequence[float], alternative: str
) -> float:
    n = n1 + n2
    tie_term = _tie_correction_sum(pooled_ranks)
    variance = (n1 * n2 / 12) * ((n + 1) - tie_term / (n * (n - 1))) if n > 1 else 0.0
    if variance <= 0:
        return 1.0  # every observation tied: the test cannot discriminate
    mu = n1 * n2 / 2
    # Continuity correction shifts the statistic half a step toward the mean.
    if alternative == "greater":
        z = (u1 - mu - 0.5) / math.sqrt(variance)
    else:
        z = (u1 - mu + 0.5) / math.sqrt(variance)
        z = -z
    return _norm_sf(z)


def _tie_correction_sum(ranks: Sequence[float]) -> float:
    """Sum of t^3 - t over tie groups."""
    counts: dict[float, int] = {}
    for r in ranks:
        counts[r] = counts.get(r, 0) + 1
    return sum(t**3 - t for t in counts.values() if t > 1)


def _norm_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2))


def point_biserial_r(values: Sequence[float], success: Sequence[int]) -> float:
    """Pearson product-moment correlation with a binary second variable.

    ``success`` entries must be 0/1; both inputs must be non-constant and of
    equal length >= 3.
    """
    n = len(values)
    if n != len(success):
        raise ValueError("inputs must have equal length")
    if n < 3:
        raise ValueError("need at least 3 observations")
    for s in success:
        if s not in (0, 1):
            raise ValueError(f"success entries must be 0 or 1, got {s!r}")

    mean_x = sum(values) / n
    mean_y = sum(success) / n
    var_x = sum((x - mean_x) ** 2 for x in values)
    var_y = sum((y - mean_y) ** 2 for y in success)
    if var_x == 0 or var_y == 0:
        raise DegenerateInput("correlation undefined for a constant vector")
    cov = sum((x - mean_x) * (y - mean_y) for x, y in zip(values, success))
    return cov / math.sqrt(var_x * var_y)


# --- aggregate helpers ------------------------------------------------------


def mean(xs: Sequence[float]) -> float:
    return sum(xs) / len(xs)


def std(xs: Sequence[float], sample: bool = False) -> float:
    """Population SD by default; ``sample=True`` for the n-1 convention."""
    n = len(xs)
    if n == 0 or (sample and n == 1):
        return 0.0
    m = mean(xs)
    denom = n - 1 if sample else n
    return math.sqrt(sum((x - m) ** 2 for x in xs) / denom)


def median(xs: Sequence[float]) -> float:
    s = sorted(xs)
    n = len(s)
    mid = n // 2
    return float(s[mid]) if n % 2 else (s[mid - 1] + s[mid]) / 2


def mode_smallest(xs: Sequence[float]) -> float:
    """The most frequent value; ties broken by the smallest value."""
    counts: dict[float, int] = {}
    for x in xs:
        counts[x] = counts.get(x, 0) + 1
    best = max(counts.values())
    return min(v for v, c in counts.items() if c == best)
