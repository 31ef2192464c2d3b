"""Two-sample comparisons of final coverage: one-sided Mann-Whitney U,
the Vargha-Delaney effect size, and time to reach a coverage threshold."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .special import norm_sf

EXACT_LIMIT = 400  # n * m at or below this uses the exact permutation law


@dataclass(frozen=True)
class MannWhitneyResult:
    u: float          # U of the first sample: #{a > b} + 0.5 #{a = b}
    p_value: float    # one-sided, alternative "a tends to be larger than b"
    method: str       # "exact" or "normal"


def midranks(values) -> np.ndarray:
    """1-based ranks with ties sharing the average rank."""
    x = np.asarray(values, dtype=np.float64)
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(x.size)
    sx = x[order]
    i = 0
    while i < x.size:
        j = i
        while j + 1 < x.size and sx[j + 1] == sx[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def u_statistic(a, b) -> float:
    a = np.sort(np.asarray(a, dtype=np.float64))
    b = np.sort(np.asarray(b, dtype=np.float64))
    below = np.searchsorted(b, a, side="left")
    not_above = np.searchsorted(b, a, side="right")
    return float(below.sum() + 0.5 * (not_above - below).sum())


def _exact_upper_tail(a, b) -> float:
    """Pr(U >= u_obs) under random assignment of the pooled values.

    Counts, by dynamic programming over the pooled sample, the subsets of
    size n whose doubled midrank sum reaches the observed one; ties are
    handled exactly because the midranks are fixed by the pooled data.
    """
    n, m = len(a), len(b)
    ranks2 = np.rint(2 * midranks(np.concatenate([a, b]))).astype(np.int64)
    observed = int(ranks2[:n].sum())
    top = int(ranks2.sum())
    # ways[c][s]: subsets of size c with doubled rank sum s
    ways = [dict() for _ in range(n + 1)]
    ways[0][0] = 1
    for r in ranks2.tolist():
        for c in range(min(n, len(ranks2)) - 1, -1, -1):
            src, dst = ways[c], ways[c + 1]
            for s, w in src.items():
                dst[s + r] = dst.get(s + r, 0) + w
    total = math.comb(n + m, n)
    hits = sum(w for s, w in ways[n].items() if s >= observed)
    assert sum(ways[n].values()) == total and observed <= top
    return hits / total


def _normal_upper_tail(a, b, u: float) -> float:
    n, m = len(a), len(b)
    N = n + m
    _, counts = np.unique(np.concatenate([a, b]), return_counts=True)
    tie = float((counts ** 3 - counts).sum())
    var = n * m / 12.0 * ((N + 1) - tie / (N * (N - 1)))
    if var <= 0:
        return 1.0
    z = (u - n * m / 2.0 - 0.5) / math.sqrt(var)
    return norm_sf(z)


def mann_whitney_one_sided(a: Sequence[float], b: Sequence[float],
                           method: str = "auto") -> MannWhitneyResult:
    """Test H0 "a is not larger than b" against "a tends to be larger"."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be nonempty")
    u = u_statistic(a, b)
    if method == "auto":
        method = "exact" if a.size * b.size <= EXACT_LIMIT else "normal"
    if method == "exact":
        p = _exact_upper_tail(a, b)
    elif method == "normal":
        p = _normal_upper_tail(a, b, u)
    else:
        raise ValueError(f"unknown method {method!r}")
    return MannWhitneyResult(u, min(max(p, 0.0), 1.0), method)


def vargha_delaney(a: Sequence[float], b: Sequence[float]) -> float:
    """A12: Pr(a > b) + 0.5 Pr(a = b) for random draws from each sample."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be nonempty")
    return u_statistic(a, b) / (a.size * b.size)


# --- time to threshold -------------------------------------------------------------

def first_reach(curve: Sequence[tuple[int, int]], threshold: float) -> int | None:
    """First exec_index whose coverage is at least ``threshold``; None if never."""
    for exec_index, coverage in curve:
        if coverage >= threshold:
            return int(exec_index)
    return None


@dataclass(frozen=True)
class TimeToThreshold:
    threshold: float
    per_trial: tuple[int | None, ...]
    median: float | None  # None means "not reached"

    @property
    def reached(self) -> bool:
        return self.median is not None


def median_with_infinity(values: Sequence[int | None]) -> float | None:
    """Median where None counts as +infinity; None if the median is infinite."""
    if not values:
        raise ValueError("no values")
    x = sorted(math.inf if v is None else float(v) for v in values)
    n = len(x)
    mid = x[n // 2] if n % 2 else (x[n // 2 - 1] + x[n // 2]) / 2.0
    return None if math.isinf(mid) else mid


def time_to_threshold(curves: Sequence[Sequence[tuple[int, int]]],
                      threshold: float) -> TimeToThreshold:
    per_trial = tuple(first_reach(c, threshold) for c in curves)
    return TimeToThreshold(threshold, per_trial, median_with_infinity(list(per_trial)))
