"""Domain value objects and their JSON (de)serialization.

All types are frozen dataclasses. Energies are joules as ``float``;
timestamps are timezone-aware UTC ``datetime`` objects rendered as
ISO-8601 with a ``Z`` suffix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from datetime import datetime, timezone
from typing import Any, Optional

SCHEMA_VERSION = 1

D_CATEGORIES = ("negligible", "small", "medium", "large")
PC_CATEGORIES = ("minor", "moderate", "major")
DJ_CATEGORIES = ("info", "warning", "critical")
DIRECTIONS = ("regression", "improvement", "none")


def utc(ts: datetime) -> datetime:
    if ts.tzinfo is None:
        return ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def format_ts(ts: datetime | None) -> str | None:
    if ts is None:
        return None
    return utc(ts).isoformat().replace("+00:00", "Z")


def parse_ts(text: str | None) -> datetime | None:
    if text is None or text == "":
        return None
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    return utc(datetime.fromisoformat(text))


def _float_or_none(value: Any) -> float | None:
    if value is None:
        return None
    return float(value)


def _json_float(value: float | None) -> float | str | None:
    # JSON has no inf/nan; keep them readable and reversible.
    if value is None:
        return None
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return value


def _from_json_float(value: Any) -> float | None:
    if value is None:
        return None
    return float(value)


@dataclass(frozen=True)
class CommitRef:
    id: str
    short_id: str
    author_date: datetime
    message: str = ""
    parent_id: Optional[str] = None
    tags: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.id:
            raise ValueError("commit id must be non-empty")
        if not self.id.startswith(self.short_id) or not self.short_id:
            raise ValueError(f"short_id {self.short_id!r} is not a prefix of {self.id!r}")
        object.__setattr__(self, "author_date", utc(self.author_date))
        object.__setattr__(self, "tags", tuple(self.tags))

    @classmethod
    def make(cls, id: str, author_date: datetime, message: str = "", **kw) -> "CommitRef":
        return cls(id=id, short_id=id[:7], author_date=author_date, message=message, **kw)

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "short_id": self.short_id,
            "author_date": format_ts(self.author_date),
            "message": self.message,
            "parent_id": self.parent_id,
            "tags": list(self.tags),
        }

    @classmethod
    def from_json(cls, d: dict) -> "CommitRef":
        return cls(
            id=d["id"],
            short_id=d.get("short_id") or d["id"][:7],
            author_date=parse_ts(d["author_date"]),
            message=d.get("message", ""),
            parent_id=d.get("parent_id"),
            tags=tuple(d.get("tags", ())),
        )


@dataclass(frozen=True)
class MeasurementSample:
    """One energy reading of one test-suite execution."""

    commit_id: str
    run_index: int
    energy_joules: float
    duration_seconds: float
    exit_status: int
    temp_before_celsius: Optional[float]
    temp_after_celsius: Optional[float]
    wall_clock_start: datetime

    def __post_init__(self):
        if self.energy_joules < 0:
            raise ValueError("energy_joules must be >= 0")
        if not self.duration_seconds > 0:
            raise ValueError("duration_seconds must be > 0")
        if self.run_index < 0:
            raise ValueError("run_index must be >= 0")
        object.__setattr__(self, "wall_clock_start", utc(self.wall_clock_start))

    @property
    def passed(self) -> bool:
        return self.exit_status == 0

    def to_json(self) -> dict:
        return {
            "commit_id": self.commit_id,
            "run_index": self.run_index,
            "energy_joules": self.energy_joules,
            "duration_seconds": self.duration_seconds,
            "exit_status": self.exit_status,
            "temp_before_celsius": self.temp_before_celsius,
            "temp_after_celsius": self.temp_after_celsius,
            "wall_clock_start": format_ts(self.wall_clock_start),
        }

    @classmethod
    def from_json(cls, d: dict) -> "MeasurementSample":
        return cls(
            commit_id=d["commit_id"],
            run_index=int(d["run_index"]),
            energy_joules=float(d["energy_joules"]),
            duration_seconds=float(d["duration_seconds"]),
            exit_status=int(d["exit_status"]),
            temp_before_celsius=_float_or_none(d.get("temp_before_celsius")),
            temp_after_celsius=_float_or_none(d.get("temp_after_celsius")),
            wall_clock_start=parse_ts(d["wall_clock_start"]),
        )


@dataclass(frozen=True)
class CommitDistribution:
    """All passing-run energies of one commit plus its quality verdicts.

    ``excluded`` carries a human-readable reason when the commit cannot take
    part in change detection (build failure, failing tests, no samples).
    """

    commit: CommitRef
    samples: tuple[float, ...]
    aggregate: Optional[float]
    shapiro_w: Optional[float] = None
    shapiro_p: Optional[float] = None
    is_normal: Optional[bool] = None
    transient_outlier: bool = False
    excluded: Optional[str] = None
    failed_runs: int = 0

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(float(x) for x in self.samples))

    @property
    def n(self) -> int:
        return len(self.samples)

    def to_json(self) -> dict:
        return {
            "commit": self.commit.to_json(),
            "samples": list(self.samples),
            "aggregate": self.aggregate,
            "shapiro_w": self.shapiro_w,
            "shapiro_p": self.shapiro_p,
            "is_normal": self.is_normal,
            "transient_outlier": self.transient_outlier,
            "excluded": self.excluded,
            "failed_runs": self.failed_runs,
        }

    @classmethod
    def from_json(cls, d: dict) -> "CommitDistribution":
        return cls(
            commit=CommitRef.from_json(d["commit"]),
            samples=tuple(d.get("samples", ())),
            aggregate=_float_or_none(d.get("aggregate")),
            shapiro_w=_float_or_none(d.get("shapiro_w")),
            shapiro_p=_float_or_none(d.get("shapiro_p")),
            is_normal=d.get("is_normal"),
            transient_outlier=bool(d.get("transient_outlier", False)),
            excluded=d.get("excluded"),
            failed_runs=int(d.get("failed_runs", 0)),
        )


@dataclass(frozen=True)
class ChangeEvent:
    """Pairwise comparison of a test commit against its baseline."""

    baseline: str
    test: str
    m_b: float
    m_t: float
    t_statistic: float
    welch_df: float
    p_value: float
    cohens_d: float
    d_category: str
    percent_change: float
    pc_category: str
    delta_j: float
    dj_category: str
    matched_tags: tuple[str, ...]
    level_satisfied: tuple[bool, bool, bool, bool, bool]
    level: int
    direction: str

    def __post_init__(self):
        object.__setattr__(self, "matched_tags", tuple(self.matched_tags))
        object.__setattr__(self, "level_satisfied", tuple(bool(x) for x in self.level_satisfied))

    @property
    def significant(self) -> bool:
        return self.level >= 1

    def check(self, rel_tol: float = 1e-9) -> list[str]:
        """Return the list of violated internal-consistency invariants."""
        problems = []
        sat = self.level_satisfied
        if len(sat) != 5:
            problems.append("level_satisfied must have 5 entries")
            return problems
        expected = max(k + 1 for k in range(5) if sat[k]) if sat[0] else 0
        if self.level != expected:
            problems.append(f"level {self.level} != {expected}")
        if self.level >= 1 and self.m_t > self.m_b:
            want = "regression"
        elif self.level >= 1 and self.m_t < self.m_b:
            want = "improvement"
        else:
            want = "none"
        if self.direction != want:
            problems.append(f"direction {self.direction} != {want}")
        if not math.isclose(self.delta_j, self.m_t - self.m_b, rel_tol=rel_tol, abs_tol=1e-12):
            problems.append("delta_j != m_t - m_b")
        pc = abs(self.m_t - self.m_b) / self.m_b
        if not math.isclose(self.percent_change, pc, rel_tol=rel_tol, abs_tol=1e-15):
            problems.append("percent_change != |m_t - m_b| / m_b")
        return problems

    def to_json(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = list(value)
            elif isinstance(value, float):
                value = _json_float(value)
            out[f.name] = value
        return out

    @classmethod
    def from_json(cls, d: dict) -> "ChangeEvent":
        kw = dict(d)
        for name in ("m_b", "m_t", "t_statistic", "welch_df", "p_value", "cohens_d",
                     "percent_change", "delta_j"):
            kw[name] = _from_json_float(kw[name])
        kw["matched_tags"] = tuple(kw["matched_tags"])
        kw["level_satisfied"] = tuple(kw["level_satisfied"])
        kw["level"] = int(kw["level"])
        return cls(**kw)


@dataclass(frozen=True)
class StabilityReport:
    baseline_samples: tuple[float, ...]
    probe_samples: tuple[float, ...]
    probe_scores: tuple[float, ...]
    verdict: str
    threshold: float
    first_violation_index: Optional[int] = None
    mad_degenerate: bool = False

    @property
    def stable(self) -> bool:
        return self.verdict == "stable"

    def to_json(self) -> dict:
        return {
            "baseline_samples": list(self.baseline_samples),
            "probe_samples": list(self.probe_samples),
            "probe_scores": [_json_float(z) for z in self.probe_scores],
            "verdict": self.verdict,
            "threshold": self.threshold,
            "first_violation_index": self.first_violation_index,
            "mad_degenerate": self.mad_degenerate,
        }


@dataclass(frozen=True)
class SkippedCommit:
    """A commit that produced no ChangeEvent, with the reason."""

    commit_id: str
    reason: str

    def to_json(self) -> dict:
        return {"commit_id": self.commit_id, "reason": self.reason}


@dataclass
class DetectionResult:
    events: list[ChangeEvent] = field(default_factory=list)
    skipped: list[SkippedCommit] = field(default_factory=list)
    series_ids: list[str] = field(default_factory=list)
    aggregates: list[float] = field(default_factory=list)
    cusum: list[float] = field(default_factory=list)
    change_points: list[int] = field(default_factory=list)
