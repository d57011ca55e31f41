"""Rank-sum tests, Holm step-down correction and confidence bands."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np
from scipy.stats import norm, rankdata

EXACT_MAX_TOTAL = 12
ALTERNATIVES = ("two-sided", "less", "greater")


@dataclass
class TestResult:
    """Outcome of a rank-sum comparison of sample ``a`` against sample ``b``.

    ``statistic`` is U for ``a``: the number of pairs ``(a_i, b_j)`` with
    ``a_i > b_j``, ties counting one half. ``alternative="less"`` asks
    whether ``a`` tends to be smaller than ``b``.
    """

    __test__ = False

    statistic: float
    statistic_b: float
    rank_sum: float
    method: str
    alternative: str
    p: float
    p_adjusted: float | None = None
    reject: bool | None = None
    level: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


@lru_cache(maxsize=None)
def _u_counts(n1: int, n2: int) -> tuple[int, ...]:
    """Number of rank arrangements giving each U in ``0..n1*n2`` (no ties)."""
    if n1 == 0 or n2 == 0:
        return (1,)
    counts = [0] * (n1 * n2 + 1)
    # the largest observation is either from the first sample (adds n2 to U) or the second
    for u, c in enumerate(_u_counts(n1 - 1, n2)):
        counts[u + n2] += c
    for u, c in enumerate(_u_counts(n1, n2 - 1)):
        counts[u] += c
    return tuple(counts)


def exact_u_pvalue(u: float, n1: int, n2: int, alternative: str = "two-sided") -> float:
    counts = np.array(_u_counts(n1, n2), dtype=float)
    total = counts.sum()
    k = int(round(u))
    p_le = counts[: k + 1].sum() / total
    p_ge = counts[k:].sum() / total
    if alternative == "less":
        return float(p_le)
    if alternative == "greater":
        return float(p_ge)
    return float(min(1.0, 2.0 * min(p_le, p_ge)))


def mann_whitney_u(a, b, alternative: str = "two-sided") -> TestResult:
    """Mann-Whitney U (equivalently Wilcoxon rank-sum) test.

    Exact p-values come from the null distribution of U when the pooled
    sample has at most 12 values and no ties; otherwise the normal
    approximation with tie and continuity corrections is used.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be nonempty")
    if alternative not in ALTERNATIVES:
        raise ValueError(f"alternative must be one of {ALTERNATIVES}")
    n1, n2 = a.size, b.size
    pooled = np.concatenate([a, b])
    ranks = rankdata(pooled)
    rank_sum = float(ranks[:n1].sum())
    u_a = rank_sum - n1 * (n1 + 1) / 2.0
    u_b = n1 * n2 - u_a
    _, tie_sizes = np.unique(pooled, return_counts=True)
    has_ties = np.any(tie_sizes > 1)

    if n1 + n2 <= EXACT_MAX_TOTAL and not has_ties:
        p = exact_u_pvalue(u_a, n1, n2, alternative)
        method = "exact"
    else:
        p = _normal_pvalue(u_a, n1, n2, tie_sizes, alternative)
        method = "normal"
    return TestResult(u_a, u_b, rank_sum, method, alternative, p)


def _normal_pvalue(u: float, n1: int, n2: int, tie_sizes: np.ndarray, alternative: str) -> float:
    n = n1 + n2
    mean = n1 * n2 / 2.0
    tie_term = float(((tie_sizes**3) - tie_sizes).sum()) / (n * (n - 1)) if n > 1 else 0.0
    var = n1 * n2 / 12.0 * ((n + 1) - tie_term)
    if var <= 0:
        return 1.0
    sd = math.sqrt(var)
    if alternative == "less":
        z = (u - mean + 0.5) / sd
        return float(norm.cdf(z))
    if alternative == "greater":
        z = (u - mean - 0.5) / sd
        return float(norm.sf(z))
    z = max(abs(u - mean) - 0.5, 0.0) / sd
    return float(min(1.0, 2.0 * norm.sf(z)))


wilcoxon_rank_sum = mann_whitney_u


def holm_bonferroni(pvalues) -> np.ndarray:
    """Holm step-down adjusted p-values, in the input order."""
    p = np.asarray(pvalues, dtype=float).ravel()
    if np.any((p < 0) | (p > 1)) or np.any(np.isnan(p)):
        raise ValueError("p-values must lie in [0, 1]")
    m = p.size
    order = np.argsort(p, kind="stable")
    scaled = np.minimum(1.0, (m - np.arange(m)) * p[order])
    adjusted = np.empty(m)
    adjusted[order] = np.maximum.accumulate(scaled)
    return adjusted


def apply_holm(results: list[TestResult], level: float) -> list[TestResult]:
    """Fill ``p_adjusted``, ``reject`` and ``level`` on a family of tests, in place."""
    if not results:
        return results
    adjusted = holm_bonferroni([r.p for r in results])
    for r, p_adj in zip(results, adjusted):
        r.p_adjusted = float(p_adj)
        r.reject = bool(p_adj < level)
        r.level = level
    return results


def mean_ci(samples: np.ndarray, z: float = 1.96):
    """Per-column mean and ``mean +- z * sd / sqrt(n)`` over the rows of ``samples``."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    n = samples.shape[0]
    mean = samples.mean(axis=0)
    if n < 2:
        return mean, mean.copy(), mean.copy()
    half = z * samples.std(axis=0, ddof=1) / math.sqrt(n)
    return mean, mean - half, mean + half
