"""Evaluation layer: smoothed reward curves, IQR bands, terminal rewards and
one-sided Wilcoxon signed-rank comparisons.

Wilcoxon conventions (fixed for reproducibility): zero differences are
discarded, tied magnitudes receive average ranks, the statistic is the sum of
positive-difference ranks, the p-value is exact by enumeration over the 2^m
sign assignments for m <= EXACT_MAX remaining pairs and a tie-corrected normal
approximation with 0.5 continuity correction above that.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

EXACT_MAX = 20
TERMINAL_TAIL = 500
SMOOTH_WINDOW = 200


@dataclass
class CurveSummary:
    """Across-run per-episode reward statistics for one method."""

    method: str
    mean: np.ndarray
    smoothed: np.ndarray
    q25: np.ndarray
    q75: np.ndarray


@dataclass
class TerminalReward:
    method: str
    scenario_index: int
    value: float
    truncated: bool = False


@dataclass
class PValueMatrix:
    """p[i][j]: one-sided p for 'method i does not outperform method j'."""

    methods: list[str]
    p: np.ndarray


def moving_average(series, window: int) -> np.ndarray:
    """Trailing moving average with a shrinking warm-up window.

    Element k is the mean of the last min(k+1, window) raw values, so the
    output has the same length as the input and starts at the first episode.
    """
    if window < 1:
        raise ValueError("window must be at least 1")
    series = np.asarray(series, dtype=float)
    if series.size == 0:
        return series.copy()
    cs = np.concatenate([[0.0], np.cumsum(series)])
    n = len(series)
    idx = np.arange(1, n + 1)
    lo = np.maximum(idx - window, 0)
    return (cs[idx] - cs[lo]) / (idx - lo)


def quantile(values, q: float) -> float:
    """Linear-interpolation order statistic at position (n-1)*q."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("empty input")
    if not 0.0 <= q <= 1.0:
        raise ValueError("q must be in [0, 1]")
    return float(np.quantile(values, q, method="linear"))


def terminal_reward(series, tail: int = TERMINAL_TAIL) -> tuple[float, bool]:
    """Mean of the last min(tail, len) values; flags truncation."""
    series = np.asarray(series, dtype=float)
    if series.size == 0:
        raise ValueError("empty series")
    truncated = series.size < tail
    return float(series[-tail:].mean()), truncated


def _exact_p_at_least(ranks2: np.ndarray, w2: int) -> float:
    """P(W+ >= w2/2) by counting sign assignments, with ranks scaled by 2.

    Dynamic program over the integer rank-sum distribution; exactly equivalent
    to enumerating all 2^m sign vectors.
    """
    total = int(ranks2.sum())
    # counts stay below 2^EXACT_MAX, well inside int64.
    counts = np.zeros(total + 1, dtype=np.int64)
    counts[0] = 1
    for r in ranks2:
        r = int(r)
        shifted = np.zeros(total + 1, dtype=np.int64)
        shifted[r:] = counts[: total + 1 - r]
        counts = counts + shifted
    favorable = int(np.sum(counts[max(w2, 0) :]))
    return favorable / (1 << len(ranks2))


def wilcoxon_one_sided(a, b) -> float:
    """Signed-rank p-value against the alternative 'a > b'."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or a.size < 1:
        raise ValueError("a and b must be equal-length 1-d samples")
    d = a - b
    d = d[d != 0.0]
    m = d.size
    if m == 0:
        return 1.0
    ranks = rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    if m <= EXACT_MAX:
        ranks2 = np.rint(2.0 * ranks).astype(int)
        w2 = int(round(2.0 * w_plus))
        return _exact_p_at_least(ranks2, w2)
    mu = m * (m + 1) / 4.0
    var = m * (m + 1) * (2 * m + 1) / 24.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    var -= float(np.sum(tie_counts**3 - tie_counts)) / 48.0
    if var <= 0.0:
        return 1.0 if w_plus <= mu else 0.0
    z = (w_plus - mu - 0.5) / math.sqrt(var)
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def pvalue_matrix(terminal_by_method: dict[str, np.ndarray]) -> PValueMatrix:
    """Pairwise one-sided tests on paired terminal rewards; diagonal is 1.0."""
    methods = list(terminal_by_method)
    sizes = {len(np.asarray(v)) for v in terminal_by_method.values()}
    if len(sizes) > 1:
        raise ValueError("all methods must share the same scenario set")
    k = len(methods)
    p = np.ones((k, k))
    for i, mi in enumerate(methods):
        for j, mj in enumerate(methods):
            if i != j:
                p[i, j] = wilcoxon_one_sided(
                    terminal_by_method[mi], terminal_by_method[mj]
                )
    return PValueMatrix(methods, p)


def summarize_curves(
    method: str, rewards: np.ndarray, window: int = SMOOTH_WINDOW
) -> CurveSummary:
    """Curve statistics from a (runs, episodes) reward matrix."""
    rewards = np.asarray(rewards, dtype=float)
    if rewards.ndim != 2:
        raise ValueError("rewards must be a (runs, episodes) matrix")
    mean = rewards.mean(axis=0)
    return CurveSummary(
        method=method,
        mean=mean,
        smoothed=moving_average(mean, window),
        q25=np.quantile(rewards, 0.25, axis=0, method="linear"),
        q75=np.quantile(rewards, 0.75, axis=0, method="linear"),
    )
