"""Plot-ready data for the six report views.

Nothing here draws; each function returns plain dataclasses that the SVG
renderer (or a test) can consume.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..model import ChangeEvent, CommitDistribution
from ..rng import derive_seed
from ..stats import _quantile_sorted, aggregate, bootstrap_diff

LEVEL_RING_COLORS = {2: "#1f77b4", 3: "#ff7f0e", 4: "#9467bd", 5: "#d62728"}
DIRECTION_COLORS = {"regression": "#d62728", "improvement": "#2ca02c"}
POINT_COLOR = "#1f77b4"


@dataclass(frozen=True)
class EvolutionPoint:
    index: int
    commit_id: str
    date: str
    aggregate: float
    outlier: bool


@dataclass(frozen=True)
class EvolutionMarker:
    index: int
    commit_id: str
    level: int
    direction: str
    bar_color: str
    ring_color: str
    ring_radius: float


@dataclass
class EvolutionData:
    points: list[EvolutionPoint] = field(default_factory=list)
    markers: list[EvolutionMarker] = field(default_factory=list)


def ring_radius(level: int) -> float:
    return 4.0 + 2.5 * (level - 1)


def evolution_plot_data(distributions: Sequence[CommitDistribution],
                        events: Sequence[ChangeEvent], cfg=None) -> EvolutionData:
    """One point per measured commit; bar + ring for every event at level >= 2."""
    data = EvolutionData()
    index_of = {}
    for d in distributions:
        if d.aggregate is None:
            continue
        index_of[d.commit.id] = len(data.points)
        data.points.append(EvolutionPoint(len(data.points), d.commit.id,
                                          d.commit.author_date.strftime("%Y-%m-%d %H:%M"),
                                          d.aggregate, d.transient_outlier))
    for e in events:
        if e.level < 2 or e.test not in index_of:
            continue
        data.markers.append(EvolutionMarker(index_of[e.test], e.test, e.level, e.direction,
                                            DIRECTION_COLORS.get(e.direction, "#7f7f7f"),
                                            LEVEL_RING_COLORS[e.level], ring_radius(e.level)))
    return data


@dataclass(frozen=True)
class BoxStats:
    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.minimum, self.q1, self.median, self.q3, self.maximum)


def box_stats(samples: Sequence[float]) -> BoxStats:
    s = np.sort(np.asarray(samples, dtype=float))
    return BoxStats(float(s[0]), float(_quantile_sorted(s, 0.25)), float(_quantile_sorted(s, 0.5)),
                    float(_quantile_sorted(s, 0.75)), float(s[-1]))


def silverman_bandwidth(samples: Sequence[float]) -> float:
    x = np.asarray(samples, dtype=float)
    sd = float(np.std(x, ddof=1)) if x.size > 1 else 0.0
    q1, q3 = np.percentile(x, [25, 75])
    spread = min(sd, (q3 - q1) / 1.34) if q3 > q1 else sd
    h = 0.9 * spread * x.size ** (-0.2)
    if h <= 0:
        h = 1e-3 * max(abs(float(np.mean(x))), 1.0)
    return h


@dataclass(frozen=True)
class ViolinOutline:
    grid: np.ndarray
    density: np.ndarray
    bandwidth: float


def violin_outline(samples: Sequence[float], points: int = 256) -> ViolinOutline:
    """Gaussian KDE on a grid extending five bandwidths past the data."""
    x = np.asarray(samples, dtype=float)
    h = silverman_bandwidth(x)
    grid = np.linspace(x.min() - 5 * h, x.max() + 5 * h, points)
    u = (grid[:, None] - x[None, :]) / h
    density = np.exp(-0.5 * u * u).sum(axis=1) / (x.size * h * math.sqrt(2 * math.pi))
    return ViolinOutline(grid, density, h)


def qq_points(a: Sequence[float], b: Sequence[float]) -> list[tuple[float, float]]:
    """Matched type-7 quantiles at ``min(len(a), len(b))`` evenly spaced probabilities."""
    sa = np.sort(np.asarray(a, dtype=float))
    sb = np.sort(np.asarray(b, dtype=float))
    m = min(sa.size, sb.size)
    probs = np.linspace(0.0, 1.0, m) if m > 1 else np.array([0.5])
    return [(float(_quantile_sorted(sa, p)), float(_quantile_sorted(sb, p))) for p in probs]


@dataclass
class BootstrapPanel:
    counts: list[int]
    edges: list[float]
    ci95: tuple[float, float]
    observed: float


@dataclass
class ComparisonData:
    baseline: str
    test: str
    box: tuple[BoxStats, BoxStats]
    violin: tuple[ViolinOutline, ViolinOutline]
    qq: list[tuple[float, float]]
    bootstrap: Optional[BootstrapPanel]
    notice: Optional[str] = None


def distribution_compare_data(a: CommitDistribution, b: CommitDistribution, cfg,
                              bins: int = 30) -> Optional[ComparisonData]:
    """Box/violin, Q-Q and bootstrap panels comparing two commits.

    Returns ``None`` when either side has fewer than three samples.
    """
    if a.n < 3 or b.n < 3:
        return None
    seed = derive_seed(cfg.bootstrap_seed, a.commit.id, b.commit.id)
    boot = bootstrap_diff(a.samples, b.samples, cfg, seed)
    lo, hi = float(boot.deltas.min()), float(boot.deltas.max())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    counts, edges = np.histogram(boot.deltas, bins=bins, range=(lo, hi))
    observed = aggregate(b.samples, cfg.aggregation) - aggregate(a.samples, cfg.aggregation)
    return ComparisonData(
        baseline=a.commit.id, test=b.commit.id,
        box=(box_stats(a.samples), box_stats(b.samples)),
        violin=(violin_outline(a.samples), violin_outline(b.samples)),
        qq=qq_points(a.samples, b.samples),
        bootstrap=BootstrapPanel([int(c) for c in counts], [float(e) for e in edges],
                                 boot.ci95, observed),
    )
