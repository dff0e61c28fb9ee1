import json
import re
from datetime import datetime, timedelta, timezone

import numpy as np
import pytest
from scipy import integrate
from scipy import stats as sps

from energyreg.analysis import analyze, load_bundles, summarize, write_bundles
from energyreg.config import AnalysisConfig
from energyreg.errors import ReportIOError
from energyreg.model import CommitRef, MeasurementSample
from energyreg.report import render_from_bundles, render_report
from energyreg.report.plots import (
    LEVEL_RING_COLORS,
    box_stats,
    distribution_compare_data,
    evolution_plot_data,
    qq_points,
    silverman_bandwidth,
    violin_outline,
)
from energyreg.report.svg import nice_ticks

T0 = datetime(2024, 1, 1, tzinfo=timezone.utc)
CFG = AnalysisConfig(bootstrap_resamples=300)


def campaign(levels, n=15, messages=None):
    z = sps.norm.ppf((np.arange(1, n + 1) - 0.375) / (n + 0.25))
    commits, samples = [], []
    for i, lv in enumerate(levels):
        c = CommitRef.make(f"{i + 1:040x}", T0 + timedelta(days=i),
                           messages[i] if messages else f"change <{i}> & more")
        commits.append(c)
        for r, v in enumerate(lv + 0.01 * lv * z):
            samples.append(MeasurementSample(c.id, r, float(v), 1.0, 0, 40.0, 40.0, T0))
    return commits, samples


LEVELS = [100, 100, 100, 112, 112, 112, 100.5, 100.5, 85, 85]


def test_evolution_markers_follow_levels():
    commits, samples = campaign(LEVELS)
    dists, det = analyze(samples, commits, CFG)
    data = evolution_plot_data(dists, det.events)
    assert len(data.points) == len(LEVELS)
    by_level = {m.level: m for m in data.markers}
    assert all(m.level >= 2 for m in data.markers)
    assert {e.test for e in det.events if e.level >= 2} == {m.commit_id for m in data.markers}
    for m in data.markers:
        assert m.ring_color == LEVEL_RING_COLORS[m.level]
        assert m.bar_color == ("#d62728" if m.direction == "regression" else "#2ca02c")
    assert by_level[4].direction == "regression"
    assert len({m.ring_radius for m in data.markers}) == len({m.level for m in data.markers})


def test_box_violin_qq():
    x = np.arange(1.0, 12.0)
    assert box_stats(x).as_tuple() == (1.0, 3.5, 6.0, 8.5, 11.0)
    h = silverman_bandwidth(x)
    assert h == pytest.approx(0.9 * min(np.std(x, ddof=1), 5.0 / 1.34) * 11 ** -0.2)
    v = violin_outline(x)
    area = integrate.trapezoid(v.density, v.grid)
    assert area == pytest.approx(1.0, abs=1e-3)
    q = qq_points([1, 2, 3], [10, 20, 30, 40, 50])
    assert q == [(1.0, 10.0), (2.0, 30.0), (3.0, 50.0)]
    assert silverman_bandwidth([5.0, 5.0, 5.0]) > 0


def test_compare_data_needs_three_samples():
    commits, samples = campaign([100, 110], n=2)
    dists, _ = analyze(samples, commits, CFG)
    assert distribution_compare_data(dists[0], dists[1], CFG) is None
    commits, samples = campaign([100, 110])
    dists, _ = analyze(samples, commits, CFG)
    cmp = distribution_compare_data(dists[0], dists[1], CFG)
    assert sum(cmp.bootstrap.counts) == 300
    lo, hi = cmp.bootstrap.ci95
    assert lo < cmp.bootstrap.observed < hi
    again = distribution_compare_data(dists[0], dists[1], CFG)
    assert again.bootstrap.counts == cmp.bootstrap.counts


def test_nice_ticks():
    assert nice_ticks(0.0, 97.0) == [0, 20, 40, 60, 80]
    assert nice_ticks(0.13, 0.62) == [0.2, 0.3, 0.4, 0.5, 0.6]
    assert nice_ticks(3.0, 3.0) == [3.0]


def test_html_self_contained_and_deterministic(tmp_path):
    commits, samples = campaign(LEVELS, messages=["bump <b>memory</b> & co"] * len(LEVELS))
    dists, det = analyze(samples, commits, CFG)
    page = render_report(tmp_path / "r", dists, det, CFG)
    html = page.read_text()
    assert "http" not in html and "<script" not in html and "<link" not in html
    assert "&lt;b&gt;memory&lt;/b&gt; &amp; co" in html
    for header in ("id", "date (UTC)", "message", "n", "aggregate (J)", "normality", "outlier",
                   "level", "direction", "&Delta;%", "&Delta;J (J)", "p", "d"):
        assert f"<th>{header}</th>" in html
    assert html.count("<svg") >= 3 + 3 * sum(1 for e in det.events if e.level >= 1)
    assert "Level configuration" in html and "p &lt; 0.05" in html
    for name in ("events.json", "series.json", "summary.json"):
        assert (tmp_path / "r" / name).exists()
    first = html
    render_from_bundles(tmp_path / "r")
    assert page.read_text() == first


def test_bundles_round_trip(tmp_path):
    commits, samples = campaign(LEVELS)
    dists, det = analyze(samples, commits, CFG)
    write_bundles(tmp_path, dists, det, CFG)
    d2, det2, cfg_dict = load_bundles(tmp_path)
    assert d2 == dists and det2.events == det.events and det2.change_points == det.change_points
    assert det2.cusum == pytest.approx(det.cusum)
    assert cfg_dict["bootstrap_resamples"] == 300
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary == summarize(dists, det.events)
    assert summary["significant"] == sum(1 for e in det.events if e.level >= 1)


def test_plot_selection(tmp_path):
    commits, samples = campaign(LEVELS)
    cfg = AnalysisConfig(bootstrap_resamples=100, plots=("evolution",))
    dists, det = analyze(samples, commits, cfg)
    html = render_report(tmp_path, dists, det, cfg).read_text()
    assert html.count("<svg") == 1 and "CUSUM" not in html


def test_missing_bundles_raise(tmp_path):
    with pytest.raises(ReportIOError):
        render_from_bundles(tmp_path)
