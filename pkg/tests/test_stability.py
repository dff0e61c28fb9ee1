import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from energyreg.config import PipelineConfig
from energyreg.errors import BackendUnavailable, MadDegenerate
from energyreg.stability import (
    MODIFIED_Z_CONSTANT,
    RaplProbe,
    TraceProbe,
    degenerate_scores,
    format_report,
    modified_z_scores,
    verify_stability,
)

CFG = PipelineConfig(repo_manifest="unused.json", energy_backend="trace", trace_manifest="t.json")


def test_modified_z_hand_computed():
    base = [10.0, 11.0, 12.0, 13.0, 14.0]  # median 12, MAD 1
    assert modified_z_scores([12.0, 14.0, 8.0], base) == pytest.approx(
        [0.0, 2 * MODIFIED_Z_CONSTANT, -4 * MODIFIED_Z_CONSTANT])


def test_modified_z_errors():
    with pytest.raises(ValueError):
        modified_z_scores([1.0], [])
    with pytest.raises(MadDegenerate):
        modified_z_scores([1.0], [2.0, 2.0, 2.0, 3.0, 4.0][:3])


def test_degenerate_scores():
    assert degenerate_scores([5.0, 6.0, 4.0], [5.0] * 5) == [0.0, math.inf, -math.inf]


@given(st.lists(st.floats(1, 1e3), min_size=5, max_size=5), st.floats(0.1, 10), st.floats(-100, 100))
def test_modified_z_affine_invariant(base, scale, shift):
    b = np.asarray(base)
    if np.median(np.abs(b - np.median(b))) < 1e-6:
        return
    x = list(b * 1.3)
    z1 = modified_z_scores(x, b)
    z2 = modified_z_scores([v * scale + shift for v in x], b * scale + shift)
    assert z1 == pytest.approx(z2, rel=1e-6, abs=1e-6)


def test_trace_probe_cumulative():
    assert list(TraceProbe([1.0, 2.0, 3.0], start=10).readings()) == [10, 11, 13, 16]


def test_constant_probe_is_stable():
    report = verify_stability(TraceProbe([4.0] * 35), CFG)
    assert report.stable and report.mad_degenerate
    assert report.probe_scores == (0.0,) * 30
    assert len(report.baseline_samples) == 5
    assert "verdict: stable" in format_report(report)


def test_noisy_probe_stable_and_spike_unstable():
    # a five-sample MAD is itself noisy, so use a bounded pattern
    deltas = [9.9, 10.0, 10.1, 10.0, 9.95] + [10.0, 10.05, 9.95] * 10
    assert verify_stability(TraceProbe(deltas), CFG).stable
    deltas[5 + 7] = 100.0
    report = verify_stability(TraceProbe(deltas), CFG)
    assert report.verdict == "unstable"
    assert report.first_violation_index == 7
    assert len(report.probe_scores) == 8 and abs(report.probe_scores[-1]) > 3.5
    assert "<-- exceeds" in format_report(report)


def test_probe_exhaustion():
    with pytest.raises(BackendUnavailable):
        verify_stability(TraceProbe([1.0] * 10), CFG)


def test_rapl_probe_wraparound(tmp_path):
    counter = tmp_path / "energy_uj"
    (tmp_path / "max_energy_range_uj").write_text("1000000\n")
    values = iter([900000, 100000, 300000])
    counter.write_text("800000\n")
    probe = RaplProbe(str(counter), workload_seconds=0.0)
    it = probe.readings()
    assert next(it) == pytest.approx(0.8)
    out = []
    for v in values:
        counter.write_text(f"{v}\n")
        out.append(next(it))
    assert out == pytest.approx([0.9, 1.1, 1.3])


def test_rapl_probe_missing_counter(tmp_path):
    with pytest.raises(BackendUnavailable):
        RaplProbe(str(tmp_path / "nope"))
