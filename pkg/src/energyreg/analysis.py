"""From raw samples to commit distributions, change events and JSON bundles."""

from __future__ import annotations

import json
import logging
import shutil
from collections import defaultdict
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from .config import analysis_to_dict
from .detection import detect_all, ineligibility
from .errors import DegenerateSample, ReportIOError, SampleTooLarge, SampleTooSmall
from .model import (
    SCHEMA_VERSION,
    ChangeEvent,
    CommitDistribution,
    CommitRef,
    DetectionResult,
    MeasurementSample,
    SkippedCommit,
)
from .stats import aggregate, filter_transient_outliers, shapiro_wilk

log = logging.getLogger(__name__)

EVENTS_JSON = "events.json"
SERIES_JSON = "series.json"
SUMMARY_JSON = "summary.json"


def build_distributions(samples: Iterable[MeasurementSample], commits: Sequence[CommitRef],
                        cfg, excluded: Optional[Mapping[str, str]] = None) -> list[CommitDistribution]:
    """Group samples by commit, oldest first, with normality and outlier verdicts.

    Samples arrive in execution (shuffled) order; grouping sorts them by
    ``run_index``. Any failing run excludes its commit from detection.
    """
    excluded = dict(excluded or {})
    grouped: dict[str, list[MeasurementSample]] = defaultdict(list)
    for s in samples:
        grouped[s.commit_id].append(s)
    known = {c.id for c in commits}
    extra = sorted(set(grouped) - known)
    if extra:
        log.warning("%d commits in raw data lack metadata; appended in id order", len(extra))
        epoch = datetime(1970, 1, 1, tzinfo=timezone.utc)
        commits = list(commits) + [CommitRef.make(cid, epoch) for cid in extra]
    ordered = sorted(commits, key=lambda c: c.author_date)

    dists = []
    for c in ordered:
        runs = sorted(grouped.get(c.id, []), key=lambda s: s.run_index)
        passing = tuple(s.energy_joules for s in runs if s.passed)
        failed = sum(1 for s in runs if not s.passed)
        reason = excluded.get(c.id)
        if reason is None and failed:
            reason = f"test failures ({failed}/{len(runs)} runs)"
        if reason is None and not passing:
            reason = "no measurements"
        w = p = normal = None
        if 3 <= len(passing) <= 5000:
            try:
                w, p = shapiro_wilk(passing)
                normal = p > cfg.normality_alpha
            except DegenerateSample:
                normal = False
            except (SampleTooSmall, SampleTooLarge):
                normal = None
        agg = aggregate(passing, cfg.aggregation) if passing else None
        dists.append(CommitDistribution(c, passing, agg, w, p, normal, False, reason, failed))

    # outlier filtering over the commits that could otherwise be compared
    candidates = [d for d in dists if ineligibility(d, cfg) is None]
    flags = {f.commit_id: f.transient_outlier
             for f in filter_transient_outliers([(d.commit.id, d.aggregate) for d in candidates], cfg)}
    return [CommitDistribution(d.commit, d.samples, d.aggregate, d.shapiro_w, d.shapiro_p,
                               d.is_normal, flags.get(d.commit.id, False), d.excluded, d.failed_runs)
            for d in dists]


def analyze(samples, commits, cfg, excluded=None) -> tuple[list[CommitDistribution], DetectionResult]:
    dists = build_distributions(samples, commits, cfg, excluded)
    return dists, detect_all(dists, cfg)


# --- bundles ----------------------------------------------------------------

def summarize(distributions: Sequence[CommitDistribution], events: Sequence[ChangeEvent]) -> dict:
    """Headline tallies; every count is a recount over the given records."""
    n = len(distributions)
    normal = sum(1 for d in distributions if d.is_normal)
    sig = [e for e in events if e.level >= 1]
    levels = {str(k): sum(1 for e in events if e.level == k) for k in range(6)}
    return {
        "schema": SCHEMA_VERSION,
        "commits": n,
        "normal": normal,
        "normal_rate": round(normal / n, 4) if n else 0.0,
        "significant": len(sig),
        "regressions": sum(1 for e in sig if e.direction == "regression"),
        "improvements": sum(1 for e in sig if e.direction == "improvement"),
        "excluded": sum(1 for d in distributions if d.excluded),
        "transient_outliers": sum(1 for d in distributions if d.transient_outlier),
        "levels": levels,
    }


def _dump(path: Path, doc) -> None:
    try:
        path.write_text(json.dumps(doc, indent=1, sort_keys=False) + "\n", encoding="utf-8")
    except OSError as exc:
        raise ReportIOError(f"cannot write {path}: {exc}") from exc


def write_summary(out_dir, summary: dict) -> Path:
    path = Path(out_dir) / SUMMARY_JSON
    _dump(path, summary)
    return path


def write_bundles(out_dir, distributions, detection: DetectionResult, cfg,
                  raw_csv: Optional[str] = None) -> dict[str, Path]:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ReportIOError(f"cannot create {out}: {exc}") from exc
    paths = {name: out / name for name in (EVENTS_JSON, SERIES_JSON, SUMMARY_JSON)}
    _dump(paths[EVENTS_JSON], {
        "schema": SCHEMA_VERSION,
        "events": [e.to_json() for e in detection.events],
        "skipped": [s.to_json() for s in detection.skipped],
    })
    _dump(paths[SERIES_JSON], {
        "schema": SCHEMA_VERSION,
        "analysis_config": analysis_to_dict(cfg),
        "commits": [d.to_json() for d in distributions],
        "series_ids": detection.series_ids,
        "aggregates": detection.aggregates,
        "cusum_mode": cfg.cusum_mode,
        "cusum": detection.cusum,
        "change_points": detection.change_points,
    })
    write_summary(out, summarize(distributions, detection.events))
    if raw_csv is not None:
        dest = out / "raw.csv"
        if Path(raw_csv).resolve() != dest.resolve():
            shutil.copyfile(raw_csv, dest)
    return paths


def load_bundles(bundle_dir):
    """Read events/series bundles back into domain objects."""
    d = Path(bundle_dir)
    try:
        events_doc = json.loads((d / EVENTS_JSON).read_text(encoding="utf-8"))
        series_doc = json.loads((d / SERIES_JSON).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ReportIOError(f"cannot read bundles in {d}: {exc}") from exc
    events = [ChangeEvent.from_json(e) for e in events_doc.get("events", [])]
    skipped = [SkippedCommit(**s) for s in events_doc.get("skipped", [])]
    dists = [CommitDistribution.from_json(c) for c in series_doc.get("commits", [])]
    detection = DetectionResult(events=events, skipped=skipped,
                                series_ids=list(series_doc.get("series_ids", [])),
                                aggregates=list(series_doc.get("aggregates", [])),
                                cusum=list(series_doc.get("cusum", [])),
                                change_points=list(series_doc.get("change_points", [])))
    return dists, detection, series_doc.get("analysis_config", {})
