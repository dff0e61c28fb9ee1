"""Per-commit change classification and series-level change detection.

A commit is compared against the nearest preceding *eligible* commit and
graded on five non-cumulative levels:

1. Welch p-value below alpha (the significance gate)
2. Cohen's d beyond the negligible band
3. relative change of the aggregates at least "moderate"
4. practical (joule) delta at least "warning"
5. a configured context tag appears in the commit message

The final level is the highest satisfied one, but only when level 1 holds.
"""

from __future__ import annotations

import logging
import math
import re
from typing import Sequence

import numpy as np

from .errors import DegeneratePooledSD, SignificantDegenerate, StatsError
from .model import ChangeEvent, CommitDistribution, DetectionResult, SkippedCommit
from .stats import (
    aggregate,
    cohens_d,
    cohens_d_category,
    practical_significance,
    relative_change,
    welch_t_test,
)

log = logging.getLogger(__name__)


class ClassificationSkipped(StatsError):
    """The pair cannot be classified; ``reason`` says why."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


# --- level 5 ----------------------------------------------------------------

def match_context_tags(message: str, tags: Sequence[str]) -> list[str]:
    """Tags that occur as whole words in ``message``, case-insensitively, in tag order."""
    found = []
    for tag in tags:
        if re.search(r"(?<!\w)" + re.escape(tag) + r"(?!\w)", message, flags=re.IGNORECASE):
            found.append(tag)
    return found


# --- pairwise classification --------------------------------------------------

def classify_samples(base: Sequence[float], test: Sequence[float], message: str, cfg,
                     baseline_id: str = "baseline", test_id: str = "test") -> ChangeEvent:
    """Classify ``test`` against ``base`` given the test commit's message."""
    if len(base) < 2 or len(test) < 2:
        raise ClassificationSkipped("fewer than 2 usable samples")
    m_b = aggregate(base, cfg.aggregation)
    m_t = aggregate(test, cfg.aggregation)
    if not m_b > 0:
        raise ClassificationSkipped(f"baseline aggregate {m_b} is not positive")

    try:
        t, df, p = welch_t_test(base, test)
    except SignificantDegenerate as exc:
        t, df, p = exc.result
    try:
        d, d_cat = cohens_d(base, test, cfg.cohens_d_thresholds)
    except DegeneratePooledSD:
        if float(np.mean(base)) != float(np.mean(test)):
            raise ClassificationSkipped("zero pooled standard deviation with differing means")
        d, d_cat = 0.0, cohens_d_category(0.0, cfg.cohens_d_thresholds)

    pc, pc_cat = relative_change(m_b, m_t, cfg.percent_change_thresholds)
    dj, dj_cat = practical_significance(m_b, m_t, cfg.practical_thresholds)
    tags = match_context_tags(message, cfg.context_tags)

    satisfied = (
        p < cfg.significance_alpha,
        abs(d) > cfg.cohens_d_thresholds[0],
        pc >= cfg.percent_change_thresholds[0],
        dj >= cfg.practical_thresholds[0] * m_b,
        bool(tags),
    )
    level = max(k + 1 for k in range(5) if satisfied[k]) if satisfied[0] else 0
    if level >= 1 and m_t > m_b:
        direction = "regression"
    elif level >= 1 and m_t < m_b:
        direction = "improvement"
    else:
        direction = "none"
    return ChangeEvent(
        baseline=baseline_id, test=test_id, m_b=m_b, m_t=m_t,
        t_statistic=float(t), welch_df=float(df), p_value=float(p),
        cohens_d=float(d), d_category=d_cat,
        percent_change=pc, pc_category=pc_cat,
        delta_j=dj, dj_category=dj_cat,
        matched_tags=tuple(tags), level_satisfied=satisfied,
        level=level, direction=direction,
    )


def classify_change(baseline: CommitDistribution, test: CommitDistribution, cfg) -> ChangeEvent:
    """Grade ``test`` against ``baseline`` on levels 1-5.

    Raises:
        ClassificationSkipped: too few samples, or a statistic is undefined.
    """
    return classify_samples(baseline.samples, test.samples, test.commit.message, cfg,
                            baseline.commit.id, test.commit.id)


# --- change points ----------------------------------------------------------

def robust_sigma(series: Sequence[float]) -> float:
    """Noise scale from first differences: MAD-based, std fallback."""
    diffs = np.diff(np.asarray(series, dtype=float))
    if diffs.size == 0:
        return 0.0
    mad = float(np.median(np.abs(diffs - np.median(diffs))))
    sigma = 1.4826 * mad / math.sqrt(2.0)
    if sigma == 0.0 and diffs.size > 1:
        sigma = float(np.std(diffs, ddof=1)) / math.sqrt(2.0)
    return sigma


def bic_penalty(series: Sequence[float]) -> float:
    n = len(series)
    return 2.0 * robust_sigma(series) ** 2 * math.log(n)


def pelt(series: Sequence[float], penalty: float, min_size: int = 2) -> list[int]:
    """Exact penalised mean-shift segmentation (squared-error cost).

    Returns the first index of every new segment. Ties resolve towards the
    earliest last change point. Pruning is deferred by ``min_size`` steps,
    which keeps the result identical to unpruned optimal partitioning.
    """
    x = np.asarray(series, dtype=float)
    n = x.size
    if n < 2 * min_size:
        return []
    x = x - x.mean()
    cs = np.concatenate(([0.0], np.cumsum(x)))
    cs2 = np.concatenate(([0.0], np.cumsum(x * x)))

    def cost(s: int, t: int) -> float:
        seg = cs[t] - cs[s]
        return (cs2[t] - cs2[s]) - seg * seg / (t - s)

    F = [math.inf] * (n + 1)
    F[0] = -penalty
    last = [0] * (n + 1)
    candidates = [0]
    prune_at: dict[int, int] = {}
    for t in range(min_size, n + 1):
        candidates = [s for s in candidates if prune_at.get(s, n + 1) > t]
        best, arg = math.inf, -1
        scored = []
        for s in candidates:
            if t - s < min_size:
                continue
            v = F[s] + cost(s, t)
            scored.append((s, v))
            if v + penalty < best:
                best, arg = v + penalty, s
        F[t], last[t] = best, arg
        for s, v in scored:
            if v > best and s not in prune_at:
                prune_at[s] = t + min_size
        if t >= min_size and t <= n - min_size:
            candidates.append(t)
    cps = []
    t = n
    while t > 0:
        s = last[t]
        if s > 0:
            cps.append(s)
        t = s
    return sorted(cps)


def detect_change_points(series: Sequence[float], cfg) -> list[int]:
    """Mean-shift change points of an aggregate series via PELT."""
    n = len(series)
    if n < 4:
        log.warning("series of length %d too short for change-point detection", n)
        return []
    if cfg.changepoint_penalty == "bic":
        if robust_sigma(series) == 0.0:
            return []
        penalty = bic_penalty(series)
    else:
        penalty = float(cfg.changepoint_penalty)
    return pelt(series, penalty, cfg.changepoint_min_size)


# --- cusum ------------------------------------------------------------------

def cusum(series: Sequence[float]) -> list[float]:
    """Cumulative sum of deviations from the series mean, starting at 0."""
    x = np.asarray(series, dtype=float)
    if x.size == 0:
        raise ValueError("cusum needs a non-empty series")
    return [0.0] + [float(v) for v in np.cumsum(x - x.mean())]


def cusum_significant(series_ids: Sequence[str], events: Sequence[ChangeEvent]) -> list[float]:
    """Cumulative joule deltas of significant events along the series."""
    delta = {e.test: e.delta_j for e in events if e.level >= 1}
    out = [0.0]
    for cid in series_ids:
        out.append(out[-1] + delta.get(cid, 0.0))
    return out


# --- pipeline assembly ------------------------------------------------------

def ineligibility(dist: CommitDistribution, cfg) -> str | None:
    if dist.excluded:
        return dist.excluded
    if dist.n < 2:
        return "fewer than 2 usable samples"
    if dist.transient_outlier:
        return "transient outlier"
    if cfg.exclude_non_normal and dist.is_normal is False:
        return "non-normal distribution"
    return None


def detect_all(distributions: Sequence[CommitDistribution], cfg) -> DetectionResult:
    """Classify every eligible commit against its nearest eligible predecessor.

    ``distributions`` must be oldest-first with normality and outlier flags
    already set. The aggregate series (eligible commits only) also feeds the
    change-point and CUSUM artifacts.
    """
    result = DetectionResult()
    baseline: CommitDistribution | None = None
    for dist in distributions:
        reason = ineligibility(dist, cfg)
        if reason:
            result.skipped.append(SkippedCommit(dist.commit.id, reason))
            continue
        result.series_ids.append(dist.commit.id)
        result.aggregates.append(aggregate(dist.samples, cfg.aggregation))
        if baseline is None:
            result.skipped.append(SkippedCommit(dist.commit.id, "no eligible baseline"))
        else:
            try:
                result.events.append(classify_change(baseline, dist, cfg))
            except (ClassificationSkipped, StatsError) as exc:
                result.skipped.append(SkippedCommit(dist.commit.id, getattr(exc, "reason", str(exc))))
        baseline = dist

    if result.aggregates:
        if cfg.cusum_mode == "significant":
            result.cusum = cusum_significant(result.series_ids, result.events)
        else:
            result.cusum = cusum(result.aggregates)
        result.change_points = detect_change_points(result.aggregates, cfg)
    return result
