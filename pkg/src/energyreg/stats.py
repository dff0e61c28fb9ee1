"""Statistical primitives for commit-pair comparison.

Everything here is pure and operates on plain sequences of floats.
Quartiles use linear interpolation between order statistics (type 7).
"""

from __future__ import annotations

import math
from typing import NamedTuple, Sequence

import numpy as np
from scipy import special

from .errors import (
    DegeneratePooledSD,
    DegenerateSample,
    EmptySample,
    InvalidBaseline,
    SampleTooLarge,
    SampleTooSmall,
    SignificantDegenerate,
)

# ---------------------------------------------------------------------------
# Shapiro-Wilk, Royston (1995) algorithm AS R94
# ---------------------------------------------------------------------------

_C1 = (0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056)
_C2 = (0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633)
_C3 = (0.5440, -0.39978, 0.025054, -6.714e-4)
_C4 = (1.3822, -0.77857, 0.062767, -0.0020322)
_C5 = (-1.5861, -0.31082, -0.083751, 0.0038915)
_C6 = (-0.4803, -0.082676, 0.0030302)
_G = (-2.273, 0.459)


def _poly(coefs: Sequence[float], x: float) -> float:
    result = 0.0
    for c in reversed(coefs):
        result = result * x + c
    return result


def shapiro_coefficients(n: int) -> np.ndarray:
    """Full antisymmetric weight vector ``a`` (length n) for sorted data."""
    nn2 = n // 2
    half = np.zeros(nn2)
    if n == 3:
        half[0] = math.sqrt(0.5)
    else:
        an25 = n + 0.25
        m = special.ndtri((np.arange(1, nn2 + 1) - 0.375) / an25)
        summ2 = 2.0 * float(np.sum(m * m))
        ssumm2 = math.sqrt(summ2)
        rsn = 1.0 / math.sqrt(n)
        a1 = _poly(_C1, rsn) - m[0] / ssumm2
        if n > 5:
            a2 = -m[1] / ssumm2 + _poly(_C2, rsn)
            fac = math.sqrt((summ2 - 2.0 * m[0] ** 2 - 2.0 * m[1] ** 2)
                            / (1.0 - 2.0 * a1 ** 2 - 2.0 * a2 ** 2))
            half[1] = a2
            first = 2
        else:
            fac = math.sqrt((summ2 - 2.0 * m[0] ** 2) / (1.0 - 2.0 * a1 ** 2))
            first = 1
        half[0] = a1
        half[first:] = -m[first:] / fac
    a = np.zeros(n)
    a[:nn2] = -half
    a[n - nn2:] = half[::-1]
    return a


def _shapiro_pvalue(w: float, n: int) -> float:
    if n == 3:
        pw = (6.0 / math.pi) * (math.asin(math.sqrt(w)) - math.pi / 3.0)
        return min(max(pw, 0.0), 1.0)
    w1 = math.log1p(-w) if w < 1.0 else -math.inf
    if n <= 11:
        gamma = _poly(_G, n)
        if w1 >= gamma:
            return 1e-99
        w1 = -math.log(gamma - w1)
        mean = _poly(_C3, n)
        sd = math.exp(_poly(_C4, n))
    else:
        xx = math.log(n)
        mean = _poly(_C5, xx)
        sd = math.exp(_poly(_C6, xx))
    if math.isinf(w1):
        return 1.0
    return float(special.ndtr(-(w1 - mean) / sd))


class ShapiroResult(NamedTuple):
    w: float
    p: float


def shapiro_wilk(sample: Sequence[float]) -> ShapiroResult:
    """Shapiro-Wilk W statistic and p-value.

    Raises:
        SampleTooSmall: fewer than 3 values.
        SampleTooLarge: more than 5000 values.
        DegenerateSample: all values identical.
    """
    x = np.sort(np.asarray(sample, dtype=float))
    n = x.size
    if n < 3:
        raise SampleTooSmall(f"Shapiro-Wilk needs n >= 3, got {n}")
    if n > 5000:
        raise SampleTooLarge(f"Shapiro-Wilk supports n <= 5000, got {n}")
    rng = x[-1] - x[0]
    if not rng > 0 or rng < 1e-19 * max(1.0, abs(x[0])):
        raise DegenerateSample("all values identical")
    # scale by the range for conditioning; W is scale-invariant
    xs = (x - x[0]) / rng
    a = shapiro_coefficients(n)
    ss = float(np.sum((xs - xs.mean()) ** 2))
    w = float(np.dot(a, xs)) ** 2 / ss
    w = min(w, 1.0)
    return ShapiroResult(w, _shapiro_pvalue(w, n))


# ---------------------------------------------------------------------------
# aggregation and quantiles
# ---------------------------------------------------------------------------

def aggregate(samples: Sequence[float], method: str = "median") -> float:
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise EmptySample("cannot aggregate an empty sample")
    if method == "median":
        return float(np.median(x))
    if method == "mean":
        return float(np.mean(x))
    raise ValueError(f"unknown aggregation {method!r}")


def _quantile_sorted(sorted_rows: np.ndarray, p: float) -> np.ndarray:
    """Type-7 quantile along the last axis of already sorted data."""
    m = sorted_rows.shape[-1]
    h = (m - 1) * p
    lo = int(math.floor(h))
    hi = min(lo + 1, m - 1)
    frac = h - lo
    return sorted_rows[..., lo] + frac * (sorted_rows[..., hi] - sorted_rows[..., lo])


def quartiles(values: Sequence[float]) -> tuple[float, float, float]:
    s = np.sort(np.asarray(values, dtype=float))
    return (float(_quantile_sorted(s, 0.25)), float(_quantile_sorted(s, 0.5)),
            float(_quantile_sorted(s, 0.75)))


# ---------------------------------------------------------------------------
# transient outlier filter
# ---------------------------------------------------------------------------

MIN_WINDOW_POINTS = 4


class OutlierFlag(NamedTuple):
    commit_id: str
    transient_outlier: bool
    evaluated: bool


def window_indices(i: int, n: int, window: int, mode: str = "centered") -> list[int]:
    """Neighbour indices used to judge position ``i`` (self excluded)."""
    if mode == "centered":
        lo = i - window // 2
        hi = lo + window - 1
    elif mode == "trailing":
        lo, hi = i - window, i - 1
    else:
        raise ValueError(f"unknown window mode {mode!r}")
    return [j for j in range(max(lo, 0), min(hi, n - 1) + 1) if j != i]


def transient_outlier_flags(values, window: int, k: float = 1.5, max_run: int = 2,
                            mode: str = "centered") -> tuple[np.ndarray, np.ndarray]:
    """Vectorised core of :func:`filter_transient_outliers`.

    ``values`` is ``(n,)`` or ``(rows, n)``; every row is an independent
    series of the same length. Returns boolean ``(flags, evaluated)`` arrays
    of the same shape.
    """
    v = np.asarray(values, dtype=float)
    squeeze = v.ndim == 1
    if squeeze:
        v = v[None, :]
    rows, n = v.shape
    raw = np.zeros((rows, n), dtype=bool)
    evaluated = np.zeros((rows, n), dtype=bool)
    for i in range(n):
        idx = window_indices(i, n, window, mode)
        if len(idx) < MIN_WINDOW_POINTS:
            continue
        w = np.sort(v[:, idx], axis=1)
        q1 = _quantile_sorted(w, 0.25)
        q3 = _quantile_sorted(w, 0.75)
        iqr = q3 - q1
        x = v[:, i]
        raw[:, i] = (x < q1 - k * iqr) | (x > q3 + k * iqr)
        evaluated[:, i] = True

    # restore maximal runs longer than max_run: those are sustained shifts
    run = np.zeros((rows, n), dtype=np.int64)
    for i in range(n):
        prev = run[:, i - 1] if i else 0
        run[:, i] = np.where(raw[:, i], prev + 1, 0)
    total = run.copy()
    for i in range(n - 2, -1, -1):
        total[:, i] = np.where(raw[:, i] & raw[:, i + 1], total[:, i + 1], total[:, i])
    flags = raw & (total <= max_run)
    if squeeze:
        return flags[0], evaluated[0]
    return flags, evaluated


def filter_transient_outliers(series: Sequence[tuple[str, float]], cfg) -> list[OutlierFlag]:
    """Flag short runs of commits whose aggregate breaches the Tukey fence.

    Args:
        series: chronological ``(commit_id, aggregate)`` pairs.
        cfg: an :class:`~energyreg.config.AnalysisConfig`.
    """
    if not series:
        return []
    ids = [cid for cid, _ in series]
    flags, evaluated = transient_outlier_flags(
        [agg for _, agg in series],
        window=cfg.outlier_window,
        k=cfg.tukey_multiplier,
        max_run=cfg.max_transient_outliers,
        mode=cfg.outlier_window_mode,
    )
    return [OutlierFlag(cid, bool(f), bool(e)) for cid, f, e in zip(ids, flags, evaluated)]


# ---------------------------------------------------------------------------
# Welch, Cohen, relative and practical change
# ---------------------------------------------------------------------------

class WelchResult(NamedTuple):
    t: float
    df: float
    p: float


def student_t_two_sided(t: float, df: float) -> float:
    """Two-sided tail probability ``P(|T| >= |t|)`` via the regularized incomplete beta."""
    if math.isinf(t):
        return 0.0
    x = df / (df + t * t)
    return float(special.betainc(0.5 * df, 0.5, x))


def _moments(x: np.ndarray) -> tuple[int, float, float]:
    return x.size, float(np.mean(x)), float(np.var(x, ddof=1))


def welch_t_test(a: Sequence[float], b: Sequence[float]) -> WelchResult:
    """Welch's unequal-variances t-test, two-sided.

    ``t`` is positive when ``mean(a) > mean(b)``.

    Raises:
        SampleTooSmall: either sample has fewer than 2 values.
        SignificantDegenerate: both variances are zero and the means differ;
            ``exc.result`` holds ``t = ±inf, p = 0``.
    """
    xa = np.asarray(a, dtype=float)
    xb = np.asarray(b, dtype=float)
    if xa.size < 2 or xb.size < 2:
        raise SampleTooSmall("Welch t-test needs at least 2 values per sample")
    na, ma, va = _moments(xa)
    nb, mb, vb = _moments(xb)
    qa, qb = va / na, vb / nb
    se2 = qa + qb
    if se2 == 0.0:
        df = float(na + nb - 2)
        if ma == mb:
            return WelchResult(0.0, df, 1.0)
        raise SignificantDegenerate(WelchResult(math.copysign(math.inf, ma - mb), df, 0.0))
    t = (ma - mb) / math.sqrt(se2)
    df = se2 ** 2 / (qa ** 2 / (na - 1) + qb ** 2 / (nb - 1))
    return WelchResult(t, df, student_t_two_sided(t, df))


def _category(value: float, cuts: Sequence[float], names: Sequence[str], inclusive: bool) -> str:
    # inclusive: value <= cut falls in the lower bin; else value < cut does
    for cut, name in zip(cuts, names):
        if (value <= cut) if inclusive else (value < cut):
            return name
    return names[len(cuts)]


class CohenResult(NamedTuple):
    d: float
    category: str


def cohens_d_category(d: float, cuts: Sequence[float] = (0.2, 0.5, 0.8)) -> str:
    return _category(abs(d), cuts, ("negligible", "small", "medium", "large"), inclusive=True)


def cohens_d(a: Sequence[float], b: Sequence[float],
             cuts: Sequence[float] = (0.2, 0.5, 0.8)) -> CohenResult:
    """Standardised mean difference ``(mean(b) - mean(a)) / pooled_sd``.

    Raises:
        DegeneratePooledSD: pooled standard deviation is zero.
    """
    xa = np.asarray(a, dtype=float)
    xb = np.asarray(b, dtype=float)
    if xa.size < 2 or xb.size < 2:
        raise SampleTooSmall("Cohen's d needs at least 2 values per sample")
    na, ma, va = _moments(xa)
    nb, mb, vb = _moments(xb)
    sp = math.sqrt(((na - 1) * va + (nb - 1) * vb) / (na + nb - 2))
    if sp == 0.0:
        raise DegeneratePooledSD("pooled standard deviation is zero")
    d = (mb - ma) / sp
    return CohenResult(d, cohens_d_category(d, cuts))


class RelativeChange(NamedTuple):
    pc: float
    category: str


def relative_change(m_b: float, m_t: float, cuts: Sequence[float] = (0.05, 0.10)) -> RelativeChange:
    if not m_b > 0:
        raise InvalidBaseline(f"baseline aggregate must be > 0, got {m_b}")
    pc = abs((m_t - m_b) / m_b)
    return RelativeChange(pc, _category(pc, cuts, ("minor", "moderate", "major"), inclusive=False))


class PracticalChange(NamedTuple):
    delta_j: float
    category: str


def practical_significance(m_b: float, m_t: float,
                           cuts: Sequence[float] = (0.05, 0.10)) -> PracticalChange:
    """Signed joule difference, categorised against fractions of ``m_b``.

    Negative differences (improvements) always land in ``info``.
    """
    if not m_b > 0:
        raise InvalidBaseline(f"baseline aggregate must be > 0, got {m_b}")
    dj = m_t - m_b
    return PracticalChange(dj, _category(dj, [c * m_b for c in cuts],
                                         ("info", "warning", "critical"), inclusive=False))


# ---------------------------------------------------------------------------
# bootstrap
# ---------------------------------------------------------------------------

class BootstrapResult(NamedTuple):
    deltas: np.ndarray
    ci95: tuple[float, float]


def bootstrap_diff(a: Sequence[float], b: Sequence[float], cfg=None, seed: int = 0, *,
                   resamples: int | None = None, method: str | None = None) -> BootstrapResult:
    """Percentile bootstrap of ``aggregate(b*) - aggregate(a*)``.

    Resampling settings come from ``cfg`` (an AnalysisConfig) unless given
    explicitly. Deterministic for a given ``seed``.
    """
    xa = np.asarray(a, dtype=float)
    xb = np.asarray(b, dtype=float)
    if xa.size == 0 or xb.size == 0:
        raise EmptySample("bootstrap needs two non-empty samples")
    B = resamples if resamples is not None else (cfg.bootstrap_resamples if cfg else 10000)
    method = method or (cfg.aggregation if cfg else "median")
    reduce = np.median if method == "median" else np.mean
    rng = np.random.Generator(np.random.PCG64(seed))
    ia = rng.integers(0, xa.size, size=(B, xa.size))
    ib = rng.integers(0, xb.size, size=(B, xb.size))
    deltas = reduce(xb[ib], axis=1) - reduce(xa[ia], axis=1)
    lo, hi = np.percentile(deltas, [2.5, 97.5])
    return BootstrapResult(deltas, (float(lo), float(hi)))
