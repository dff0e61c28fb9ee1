"""Self-contained HTML report: inline CSS, inline SVG, no external fetches.

Rendering is a pure function of the JSON bundles, so regenerating a report
from the same bundles is byte-identical.
"""

from __future__ import annotations

import json
import logging
from html import escape
from pathlib import Path
from typing import Optional

from ..analysis import load_bundles, summarize, write_bundles, write_summary
from ..config import analysis_from_dict
from ..errors import ReportIOError
from ..model import ChangeEvent, CommitDistribution, DetectionResult
from . import svg
from .plots import distribution_compare_data, evolution_plot_data

log = logging.getLogger(__name__)

INDEX_HTML = "index.html"

_CSS = """
body{font-family:system-ui,-apple-system,Segoe UI,sans-serif;margin:24px;color:#222;max-width:1200px}
h1{font-size:22px}h2{font-size:18px;margin-top:32px;border-bottom:1px solid #ddd}
table{border-collapse:collapse;font-size:12px;margin:8px 0}
td,th{border:1px solid #ddd;padding:3px 6px;text-align:left;vertical-align:top}
th{background:#f4f4f4}td.num{text-align:right;font-variant-numeric:tabular-nums}
.cards{display:flex;gap:12px;flex-wrap:wrap}
.card{border:1px solid #ddd;border-radius:6px;padding:10px 14px;min-width:120px}
.card b{display:block;font-size:20px}
.regression{color:#b00}.improvement{color:#070}.muted{color:#888}
.panels{display:flex;flex-wrap:wrap;gap:8px}
tr.excluded td{color:#999}
"""


def _fmt(value, digits: int = 2, suffix: str = "") -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    return f"{value:.{digits}f}{suffix}"


def _p(value: Optional[float]) -> str:
    if value is None:
        return ""
    return f"{value:.2e}" if value < 1e-3 else f"{value:.4f}"


def _config_table(cfg_dict: dict, pipeline: Optional[dict]) -> str:
    a = cfg_dict
    d = a["cohens_d_thresholds"]
    pc = a["percent_change_thresholds"]
    pj = a["practical_thresholds"]
    rows = [
        ("1", "Welch t-test", f"p &lt; {a['significance_alpha']}"),
        ("2", "Cohen's d", f"|d| &gt; {d[0]} (negligible &le; {d[0]} &lt; small &le; {d[1]} "
                           f"&lt; medium &le; {d[2]} &lt; large)"),
        ("3", "relative change", f"&Delta;% &ge; {pc[0]:.0%} (minor &lt; {pc[0]:.0%} &le; moderate "
                                 f"&lt; {pc[1]:.0%} &le; major)"),
        ("4", "practical significance", f"&Delta;J &ge; {pj[0]:.0%} of m_b (info &lt; {pj[0]:.0%} "
                                        f"&le; warning &lt; {pj[1]:.0%} &le; critical)"),
        ("5", "context tags", escape(", ".join(a["context_tags"]) or "(none)")),
    ]
    out = ["<table><tr><th>level</th><th>criterion</th><th>threshold</th></tr>"]
    out += [f"<tr><td>{lv}</td><td>{name}</td><td>{rule}</td></tr>" for lv, name, rule in rows]
    out.append("</table>")
    settings = {k: v for k, v in a.items() if k not in (
        "cohens_d_thresholds", "percent_change_thresholds", "practical_thresholds", "context_tags",
        "significance_alpha")}
    out.append("<table><tr><th>analysis setting</th><th>value</th></tr>")
    out += [f"<tr><td>{escape(k)}</td><td>{escape(json.dumps(v))}</td></tr>" for k, v in settings.items()]
    out.append("</table>")
    if pipeline:
        out.append("<table><tr><th>pipeline setting</th><th>value</th></tr>")
        out += [f"<tr><td>{escape(k)}</td><td>{escape(json.dumps(v))}</td></tr>"
                for k, v in pipeline.items()]
        out.append("</table>")
    return "".join(out)


def _commit_table(distributions: list[CommitDistribution], events: list[ChangeEvent],
                  skipped: dict[str, str]) -> str:
    by_test = {e.test: e for e in events}
    head = ("id", "date (UTC)", "message", "n", "aggregate (J)", "normality", "outlier", "level",
            "direction", "&Delta;%", "&Delta;J (J)", "p", "d", "status")
    out = ["<table><tr>" + "".join(f"<th>{h}</th>" for h in head) + "</tr>"]
    for dist in distributions:
        c = dist.commit
        e = by_test.get(c.id)
        if dist.is_normal is None:
            normality = "n/a"
        else:
            normality = ("normal" if dist.is_normal else "non-normal") + (
                f" (p={_p(dist.shapiro_p)})" if dist.shapiro_p is not None else "")
        msg = c.message.strip().splitlines()[0] if c.message.strip() else ""
        if len(msg) > 72:
            msg = msg[:69] + "..."
        status = skipped.get(c.id, "")
        cls = ' class="excluded"' if dist.excluded else ""
        cells = [
            f'<span title="{escape(c.id)}">{escape(c.short_id)}</span>',
            c.author_date.strftime("%Y-%m-%d %H:%M"),
            escape(msg),
            str(dist.n),
            _fmt(dist.aggregate),
            normality,
            "yes" if dist.transient_outlier else "",
            str(e.level) if e else "",
            f'<span class="{e.direction}">{e.direction}</span>' if e and e.level else "",
            _fmt(e.percent_change * 100, 2, "%") if e else "",
            _fmt(e.delta_j) if e else "",
            _p(e.p_value) if e else "",
            _fmt(e.cohens_d, 3) if e else "",
            escape(status),
        ]
        numeric = {3, 4, 7, 9, 10, 11, 12}
        out.append(f"<tr{cls}>" + "".join(
            f'<td class="num">{v}</td>' if i in numeric else f"<td>{v}</td>"
            for i, v in enumerate(cells)) + "</tr>")
    out.append("</table>")
    return "".join(out)


def _comparison_targets(events: list[ChangeEvent], limit: int) -> list[ChangeEvent]:
    sig = [e for e in events if e.level >= 1]
    sig.sort(key=lambda e: (-e.level, -abs(e.delta_j), e.test))
    return sig[:limit]


def render_html(distributions: list[CommitDistribution], detection: DetectionResult,
                analysis_cfg: dict, summary: dict, pipeline: Optional[dict] = None,
                title: str = "Energy regression report") -> str:
    cfg = analysis_from_dict(analysis_cfg)
    plots = set(cfg.plots)
    events = detection.events
    skipped = {s.commit_id: s.reason for s in detection.skipped}
    by_id = {d.commit.id: d for d in distributions}
    dates = [by_id[cid].commit.author_date.strftime("%Y-%m-%d") for cid in detection.series_ids
             if cid in by_id]

    parts = [f"<!DOCTYPE html><html lang=\"en\"><head><meta charset=\"utf-8\">"
             f"<title>{escape(title)}</title><style>{_CSS}</style></head><body>",
             f"<h1>{escape(title)}</h1>"]
    cards = [("commits", summary["commits"]), ("normal rate", f"{summary['normal_rate']:.2%}"),
             ("significant", summary["significant"]), ("regressions", summary["regressions"]),
             ("improvements", summary["improvements"]), ("excluded", summary["excluded"])]
    parts.append('<div class="cards">' + "".join(
        f'<div class="card"><b>{v}</b>{escape(k)}</div>' for k, v in cards) + "</div>")

    parts.append("<h2>Level configuration</h2>")
    parts.append(_config_table(analysis_cfg, pipeline))

    if "evolution" in plots:
        parts.append("<h2>Evolution</h2>")
        evo = evolution_plot_data(distributions, events)
        if evo.points:
            parts.append(svg.evolution_svg(evo))
            parts.append('<p class="muted">Filled circles: commits (hollow: transient outliers). '
                         'Vertical bars: level &ge; 2 (red regression, green improvement). '
                         'Rings: level 2 blue, 3 orange, 4 purple, 5 red.</p>')
        else:
            parts.append('<p class="muted">No measured commits.</p>')
    if "cusum" in plots:
        parts.append("<h2>CUSUM</h2>")
        if detection.cusum:
            parts.append(svg.cusum_svg(detection.cusum, dates))
        else:
            parts.append('<p class="muted">No series.</p>')
    if "changepoints" in plots:
        parts.append("<h2>Change points</h2>")
        if detection.aggregates:
            parts.append(svg.changepoint_svg(detection.aggregates, detection.change_points, dates))
            cps = ", ".join(escape(detection.series_ids[i][:7]) for i in detection.change_points)
            parts.append(f'<p>Change points at: {cps or "none"}</p>')
        else:
            parts.append('<p class="muted">No series.</p>')

    pair_plots = plots & {"distribution", "qq", "bootstrap"}
    if pair_plots:
        parts.append("<h2>Commit comparisons</h2>")
        targets = _comparison_targets(events, cfg.report_max_comparisons)
        if not targets:
            parts.append('<p class="muted">No significant changes to compare.</p>')
        for e in targets:
            a, b = by_id.get(e.baseline), by_id.get(e.test)
            parts.append(f"<h3>{escape(e.baseline[:7])} &rarr; {escape(e.test[:7])}: level {e.level} "
                         f'<span class="{e.direction}">{e.direction}</span> '
                         f"(&Delta;J {e.delta_j:.2f} J, {e.percent_change:.2%})</h3>")
            cmp = distribution_compare_data(a, b, cfg) if a and b else None
            if cmp is None:
                parts.append('<p class="muted">Panel omitted: fewer than 3 samples on one side.</p>')
                continue
            panel = ['<div class="panels">']
            if "distribution" in plots:
                panel.append(svg.box_violin_svg(cmp))
            if "qq" in plots:
                panel.append(svg.qq_svg(cmp))
            if "bootstrap" in plots:
                panel.append(svg.bootstrap_svg(cmp))
            panel.append("</div>")
            lo, hi = cmp.bootstrap.ci95
            panel.append(f"<p>Bootstrap 95% interval of the aggregate delta: [{lo:.2f}, {hi:.2f}] J</p>")
            parts.append("".join(panel))

    parts.append("<h2>Commits</h2>")
    parts.append(_commit_table(distributions, events, skipped))
    parts.append("</body></html>\n")
    return "".join(parts)


def render_from_bundles(bundle_dir, out_dir=None) -> Path:
    """Render ``index.html`` from the JSON bundles in ``bundle_dir``.

    ``summary.json`` is recounted from the event and commit records and
    written next to the page.
    """
    bundle_dir = Path(bundle_dir)
    out = Path(out_dir) if out_dir is not None else bundle_dir
    dists, detection, cfg_dict = load_bundles(bundle_dir)
    summary = summarize(dists, detection.events)
    pipeline = None
    campaign = bundle_dir / "campaign.json"
    if campaign.exists():
        pipeline = json.loads(campaign.read_text(encoding="utf-8")).get("pipeline_config")
    html = render_html(dists, detection, cfg_dict, summary, pipeline)
    try:
        out.mkdir(parents=True, exist_ok=True)
        write_summary(out, summary)
        path = out / INDEX_HTML
        path.write_text(html, encoding="utf-8")
    except OSError as exc:
        raise ReportIOError(f"cannot write report: {exc}") from exc
    return path


def render_report(out_dir, distributions, detection: DetectionResult, cfg,
                  raw_csv: Optional[str] = None) -> Path:
    """Write the JSON bundles and the HTML report into ``out_dir``.

    The HTML is rendered from the bundles just written, so the in-memory
    and the from-disk paths cannot diverge.
    """
    write_bundles(out_dir, distributions, detection, cfg, raw_csv)
    return render_from_bundles(out_dir)
