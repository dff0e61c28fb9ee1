"""The two configuration documents: pipeline (measurement) and analysis.

Both are YAML mappings carrying a ``schema: 1`` header. Absent keys take
their defaults; every invariant is checked on load and violations raise
:class:`~energyreg.errors.ConfigInvalid` naming the offending key.
"""

from __future__ import annotations

import math
import os
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Optional, Union

import yaml

from .errors import ConfigInvalid, ConfigSyntax
from .model import SCHEMA_VERSION

GRANULARITIES = ("commit", "branch", "tag")
BACKENDS = ("perf-rapl", "trace")
AGGREGATIONS = ("median", "mean")
WINDOW_MODES = ("centered", "trailing")
CUSUM_MODES = ("deviation", "significant")
PLOTS = ("evolution", "distribution", "qq", "bootstrap", "cusum", "changepoints")

_PATH_KEYS = ("repo_manifest", "trace_manifest", "workdir", "thermal_sensor")

UINT64_MAX = 2**64 - 1


@dataclass(frozen=True)
class PipelineConfig:
    """Measurement pipeline settings.

    Exactly one of ``repo_source`` (git URL or local path) and
    ``repo_manifest`` (JSON commit list for synthetic mode) must be set.
    ``rest_seconds=None`` means the backend default (60 s for perf, 0 for
    trace).
    """

    repo_source: Optional[str] = None
    repo_manifest: Optional[str] = None
    trace_manifest: Optional[str] = None
    branch: Optional[str] = None
    commit_range: Union[str, int, None] = None
    granularity: str = "commit"
    repetitions: int = 30
    batch_size: int = 100
    rng_seed: int = 0
    build_command: str = ""
    test_command: str = ""
    energy_backend: str = "perf-rapl"
    thermal_limit_celsius: float = 80.0
    thermal_poll_seconds: float = 5.0
    thermal_sensor: Optional[str] = None
    rest_seconds: Optional[float] = None
    build_workers: int = 1
    workdir: Optional[str] = None
    stability_warmup_samples: int = 5
    stability_probe_samples: int = 30
    stability_z_threshold: float = 3.5
    stability_workload_seconds: float = 1.0
    stability_recheck: bool = False
    schema: int = SCHEMA_VERSION

    @property
    def effective_rest_seconds(self) -> float:
        if self.rest_seconds is not None:
            return self.rest_seconds
        return 0.0 if self.energy_backend == "trace" else 60.0

    @property
    def synthetic(self) -> bool:
        return self.repo_manifest is not None

    def validate(self) -> "PipelineConfig":
        _check_schema(self.schema)
        if (self.repo_source is None) == (self.repo_manifest is None):
            raise ConfigInvalid("repo_source", "exactly one of repo_source / repo_manifest must be set")
        _check_choice("granularity", self.granularity, GRANULARITIES)
        _check_choice("energy_backend", self.energy_backend, BACKENDS)
        if self.energy_backend == "trace" and self.trace_manifest is None:
            raise ConfigInvalid("trace_manifest", "required when energy_backend is trace")
        _check_int("repetitions", self.repetitions, minimum=2)
        _check_int("batch_size", self.batch_size, minimum=1)
        _check_int("build_workers", self.build_workers, minimum=1)
        _check_int("rng_seed", self.rng_seed, minimum=0)
        if self.rng_seed > UINT64_MAX:
            raise ConfigInvalid("rng_seed", "must fit in 64 unsigned bits")
        _check_positive("thermal_limit_celsius", self.thermal_limit_celsius)
        _check_positive("thermal_poll_seconds", self.thermal_poll_seconds)
        if self.rest_seconds is not None:
            _check_real("rest_seconds", self.rest_seconds)
            if self.rest_seconds < 0:
                raise ConfigInvalid("rest_seconds", "must be >= 0")
        _check_int("stability_warmup_samples", self.stability_warmup_samples, minimum=1)
        _check_int("stability_probe_samples", self.stability_probe_samples, minimum=1)
        _check_positive("stability_z_threshold", self.stability_z_threshold)
        _check_positive("stability_workload_seconds", self.stability_workload_seconds)
        cr = self.commit_range
        if isinstance(cr, bool):
            raise ConfigInvalid("commit_range", "must be 'old..new' or a positive integer")
        if isinstance(cr, int) and cr < 1:
            raise ConfigInvalid("commit_range", "max-count must be >= 1")
        if isinstance(cr, str) and ".." not in cr:
            raise ConfigInvalid("commit_range", "ref range must look like 'old..new'")
        return self


@dataclass(frozen=True)
class AnalysisConfig:
    """Thresholds and transformations for regression detection and reporting.

    Threshold tuples are the category cut points, e.g. Cohen's d
    ``(0.2, 0.5, 0.8)`` separates negligible/small/medium/large. Relative
    and practical thresholds are fractions of the baseline aggregate.
    ``changepoint_penalty`` is ``"bic"`` or a fixed positive float.
    """

    significance_alpha: float = 0.05
    cohens_d_thresholds: tuple[float, float, float] = (0.2, 0.5, 0.8)
    percent_change_thresholds: tuple[float, float] = (0.05, 0.10)
    practical_thresholds: tuple[float, float] = (0.05, 0.10)
    context_tags: tuple[str, ...] = ("performance", "memory", "benchmark")
    outlier_window: int = 20
    outlier_window_mode: str = "centered"
    tukey_multiplier: float = 1.5
    max_transient_outliers: int = 2
    aggregation: str = "median"
    normality_alpha: float = 0.05
    exclude_non_normal: bool = True
    bootstrap_resamples: int = 10000
    bootstrap_seed: int = 0
    changepoint_penalty: Union[str, float] = "bic"
    changepoint_min_size: int = 2
    cusum_mode: str = "deviation"
    plots: tuple[str, ...] = PLOTS
    report_max_comparisons: int = 10
    schema: int = SCHEMA_VERSION

    def validate(self) -> "AnalysisConfig":
        _check_schema(self.schema)
        _check_open_unit("significance_alpha", self.significance_alpha)
        _check_open_unit("normality_alpha", self.normality_alpha)
        _check_increasing("cohens_d_thresholds", self.cohens_d_thresholds, 3, fraction=False)
        _check_increasing("percent_change_thresholds", self.percent_change_thresholds, 2, fraction=True)
        _check_increasing("practical_thresholds", self.practical_thresholds, 2, fraction=True)
        for tag in self.context_tags:
            if not isinstance(tag, str) or not tag or tag != tag.lower():
                raise ConfigInvalid("context_tags", f"tags must be non-empty lowercase strings, got {tag!r}")
        _check_int("outlier_window", self.outlier_window, minimum=1)
        _check_choice("outlier_window_mode", self.outlier_window_mode, WINDOW_MODES)
        _check_positive("tukey_multiplier", self.tukey_multiplier)
        _check_int("max_transient_outliers", self.max_transient_outliers, minimum=0)
        _check_choice("aggregation", self.aggregation, AGGREGATIONS)
        if not isinstance(self.exclude_non_normal, bool):
            raise ConfigInvalid("exclude_non_normal", "must be a boolean")
        _check_int("bootstrap_resamples", self.bootstrap_resamples, minimum=1)
        _check_int("bootstrap_seed", self.bootstrap_seed, minimum=0)
        pen = self.changepoint_penalty
        if isinstance(pen, str):
            if pen != "bic":
                raise ConfigInvalid("changepoint_penalty", "must be 'bic' or {fixed: value}")
        else:
            _check_positive("changepoint_penalty", pen)
        _check_int("changepoint_min_size", self.changepoint_min_size, minimum=1)
        _check_choice("cusum_mode", self.cusum_mode, CUSUM_MODES)
        for p in self.plots:
            _check_choice("plots", p, PLOTS)
        _check_int("report_max_comparisons", self.report_max_comparisons, minimum=0)
        return self


# --- validation helpers -------------------------------------------------

def _check_schema(value):
    if value != SCHEMA_VERSION:
        raise ConfigInvalid("schema", f"unsupported schema version {value!r} (expected {SCHEMA_VERSION})")


def _check_choice(key, value, choices):
    if value not in choices:
        raise ConfigInvalid(key, f"{value!r} not in {list(choices)}")


def _check_int(key, value, minimum):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigInvalid(key, f"must be an integer, got {value!r}")
    if value < minimum:
        raise ConfigInvalid(key, f"must be >= {minimum}, got {value}")


def _check_real(key, value):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigInvalid(key, f"must be a finite number, got {value!r}")


def _check_positive(key, value):
    _check_real(key, value)
    if value <= 0:
        raise ConfigInvalid(key, f"must be > 0, got {value}")


def _check_open_unit(key, value):
    _check_real(key, value)
    if not 0 < value < 1:
        raise ConfigInvalid(key, f"must lie in (0, 1), got {value}")


def _check_increasing(key, values, length, fraction):
    if len(values) != length:
        raise ConfigInvalid(key, f"expected {length} cut points, got {len(values)}")
    for v in values:
        if fraction:
            _check_open_unit(key, v)
        else:
            _check_positive(key, v)
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ConfigInvalid(key, f"cut points must be strictly increasing, got {list(values)}")


# --- (de)serialization ----------------------------------------------------

def _read_mapping(path: str | os.PathLike) -> dict:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigSyntax(f"{path}: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigSyntax(f"{path}: top level must be a mapping")
    return data


def _known_keys(cls, data: dict) -> None:
    names = {f.name for f in fields(cls)}
    for key in data:
        if key not in names:
            raise ConfigInvalid(str(key), "unknown key")


def _as_float(key, value):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigInvalid(key, f"must be a number, got {value!r}")
    return float(value)


def pipeline_from_dict(data: dict, base_dir: str | os.PathLike | None = None) -> PipelineConfig:
    data = dict(data)
    _known_keys(PipelineConfig, data)
    for key in ("thermal_limit_celsius", "thermal_poll_seconds", "stability_z_threshold",
                "stability_workload_seconds"):
        if key in data:
            data[key] = _as_float(key, data[key])
    if data.get("rest_seconds") is not None:
        data["rest_seconds"] = _as_float("rest_seconds", data["rest_seconds"])
    if base_dir is not None:
        for key in _PATH_KEYS:
            if data.get(key) is not None:
                data[key] = str((Path(base_dir) / os.path.expanduser(str(data[key]))).resolve())
        src = data.get("repo_source")
        if src is not None and "://" not in str(src) and not str(src).startswith("git@"):
            data["repo_source"] = str((Path(base_dir) / os.path.expanduser(str(src))).resolve())
    return PipelineConfig(**data).validate()


def analysis_from_dict(data: dict) -> AnalysisConfig:
    data = dict(data)
    _known_keys(AnalysisConfig, data)
    for key in ("cohens_d_thresholds", "percent_change_thresholds", "practical_thresholds"):
        if key in data:
            if not isinstance(data[key], (list, tuple)):
                raise ConfigInvalid(key, "must be a list of numbers")
            data[key] = tuple(_as_float(key, v) for v in data[key])
    for key in ("significance_alpha", "normality_alpha", "tukey_multiplier"):
        if key in data:
            data[key] = _as_float(key, data[key])
    for key in ("context_tags", "plots"):
        if key in data:
            if not isinstance(data[key], (list, tuple)):
                raise ConfigInvalid(key, "must be a list")
            data[key] = tuple(data[key])
    if "changepoint_penalty" in data:
        pen = data["changepoint_penalty"]
        if isinstance(pen, dict):
            if set(pen) != {"fixed"}:
                raise ConfigInvalid("changepoint_penalty", "mapping form must be {fixed: value}")
            data["changepoint_penalty"] = _as_float("changepoint_penalty", pen["fixed"])
        elif not isinstance(pen, str):
            data["changepoint_penalty"] = _as_float("changepoint_penalty", pen)
    return AnalysisConfig(**data).validate()


def load_pipeline_config(path: str | os.PathLike) -> PipelineConfig:
    """Read and validate a pipeline document; relative paths resolve against its directory."""
    data = _read_mapping(path)
    return pipeline_from_dict(data, base_dir=Path(path).resolve().parent)


def load_analysis_config(path: str | os.PathLike) -> AnalysisConfig:
    return analysis_from_dict(_read_mapping(path))


def pipeline_to_dict(cfg: PipelineConfig) -> dict:
    d = asdict(cfg)
    schema = d.pop("schema")
    return {"schema": schema, **d}


def analysis_to_dict(cfg: AnalysisConfig) -> dict:
    d = asdict(cfg)
    schema = d.pop("schema")
    for key, value in d.items():
        if isinstance(value, tuple):
            d[key] = list(value)
    if not isinstance(cfg.changepoint_penalty, str):
        d["changepoint_penalty"] = {"fixed": cfg.changepoint_penalty}
    return {"schema": schema, **d}


def save_pipeline_config(cfg: PipelineConfig, path: str | os.PathLike) -> None:
    _write_yaml(pipeline_to_dict(cfg), path)


def save_analysis_config(cfg: AnalysisConfig, path: str | os.PathLike) -> None:
    _write_yaml(analysis_to_dict(cfg), path)


def _write_yaml(data: dict, path) -> None:
    Path(path).write_text(yaml.safe_dump(data, sort_keys=False), encoding="utf-8")


def with_overrides(cfg, **changes: Any):
    """Return a validated copy of ``cfg`` with ``changes`` applied."""
    return replace(cfg, **changes).validate()
