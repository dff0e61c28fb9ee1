from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from energyreg.config import (
    AnalysisConfig,
    PipelineConfig,
    load_analysis_config,
    load_pipeline_config,
    save_analysis_config,
    save_pipeline_config,
    with_overrides,
)
from energyreg.errors import ConfigInvalid, ConfigSyntax


def write(tmp_path, text, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_empty_analysis_document_gives_defaults(tmp_path):
    cfg = load_analysis_config(write(tmp_path, ""))
    assert cfg == AnalysisConfig()
    assert cfg.significance_alpha == 0.05
    assert cfg.cohens_d_thresholds == (0.2, 0.5, 0.8)
    assert cfg.percent_change_thresholds == (0.05, 0.10)
    assert cfg.practical_thresholds == (0.05, 0.10)
    assert cfg.tukey_multiplier == 1.5
    assert cfg.context_tags == ("performance", "memory", "benchmark")


def test_pipeline_paths_resolve_against_config_dir(tmp_path):
    (tmp_path / "sub").mkdir()
    p = write(tmp_path / "sub", "schema: 1\nrepo_manifest: commits.json\nenergy_backend: trace\n"
                                "trace_manifest: ../trace.json\n")
    cfg = load_pipeline_config(p)
    assert cfg.repo_manifest == str((tmp_path / "sub" / "commits.json").resolve())
    assert cfg.trace_manifest == str((tmp_path / "trace.json").resolve())
    assert cfg.effective_rest_seconds == 0.0 and cfg.synthetic


def test_perf_defaults():
    cfg = PipelineConfig(repo_source="https://example.invalid/repo.git").validate()
    assert cfg.repo_source.startswith("https://")
    assert cfg.repetitions == 30 and cfg.batch_size == 100
    assert cfg.effective_rest_seconds == 60.0
    assert cfg.thermal_limit_celsius == 80


@pytest.mark.parametrize("text,key", [
    ("repo_manifest: a.json\nrepo_source: b\n", "repo_source"),
    ("{}", "repo_source"),
    ("repo_manifest: a.json\nenergy_backend: trace\n", "trace_manifest"),
    ("repo_manifest: a.json\nrepetitions: 1\n", "repetitions"),
    ("repo_manifest: a.json\nenergy_backend: wattmeter\n", "energy_backend"),
    ("repo_manifest: a.json\ncommit_range: main\n", "commit_range"),
    ("repo_manifest: a.json\nschema: 2\n", "schema"),
    ("repo_manifest: a.json\nrepetitons: 5\n", "repetitons"),
])
def test_pipeline_invalid(tmp_path, text, key):
    with pytest.raises(ConfigInvalid) as info:
        load_pipeline_config(write(tmp_path, text))
    assert info.value.key == key


@pytest.mark.parametrize("text,key", [
    ("significance_alpha: 1.5\n", "significance_alpha"),
    ("cohens_d_thresholds: [0.5, 0.2, 0.8]\n", "cohens_d_thresholds"),
    ("percent_change_thresholds: [0.05]\n", "percent_change_thresholds"),
    ("context_tags: [Memory]\n", "context_tags"),
    ("aggregation: mode\n", "aggregation"),
    ("changepoint_penalty: aic\n", "changepoint_penalty"),
    ("plots: [pie]\n", "plots"),
    ("max_transient_outliers: -1\n", "max_transient_outliers"),
])
def test_analysis_invalid(tmp_path, text, key):
    with pytest.raises(ConfigInvalid) as info:
        load_analysis_config(write(tmp_path, text))
    assert info.value.key == key


def test_syntax_error_and_missing_file(tmp_path):
    with pytest.raises(ConfigSyntax):
        load_analysis_config(write(tmp_path, "a: [1, 2\n"))
    with pytest.raises(ConfigSyntax):
        load_analysis_config(write(tmp_path, "- 1\n- 2\n"))
    with pytest.raises(FileNotFoundError):
        load_analysis_config(tmp_path / "absent.yaml")


def test_fixed_penalty_forms(tmp_path):
    assert load_analysis_config(write(tmp_path, "changepoint_penalty: {fixed: 3}\n")).changepoint_penalty == 3.0
    assert load_analysis_config(write(tmp_path, "changepoint_penalty: 2.5\n")).changepoint_penalty == 2.5


@settings(max_examples=40, deadline=None)
@given(alpha=st.floats(0.001, 0.2), window=st.integers(1, 50), tags=st.lists(
    st.text("abcdefghij", min_size=1, max_size=8), max_size=4),
    penalty=st.one_of(st.just("bic"), st.floats(0.1, 100)))
def test_analysis_round_trip(tmp_path_factory, alpha, window, tags, penalty):
    cfg = AnalysisConfig(significance_alpha=alpha, outlier_window=window, context_tags=tuple(tags),
                         changepoint_penalty=penalty).validate()
    path = tmp_path_factory.mktemp("rt") / "a.yaml"
    save_analysis_config(cfg, path)
    assert load_analysis_config(path) == cfg


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**64 - 1), reps=st.integers(2, 60),
       rng_range=st.one_of(st.none(), st.integers(1, 500), st.just("v1.0..main")))
def test_pipeline_round_trip(tmp_path_factory, seed, reps, rng_range):
    d = tmp_path_factory.mktemp("rt")
    cfg = PipelineConfig(repo_manifest=str(d / "c.json"), energy_backend="trace",
                         trace_manifest=str(d / "t.json"), rng_seed=seed, repetitions=reps,
                         commit_range=rng_range).validate()
    save_pipeline_config(cfg, d / "p.yaml")
    assert load_pipeline_config(d / "p.yaml") == cfg


def test_with_overrides_validates():
    cfg = AnalysisConfig()
    assert with_overrides(cfg, aggregation="mean").aggregation == "mean"
    with pytest.raises(ConfigInvalid):
        with_overrides(cfg, aggregation="max")
