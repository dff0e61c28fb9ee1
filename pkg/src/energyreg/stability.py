"""Host stability verification with the modified z-score.

The probe yields *cumulative* energy readings; successive differences are
the analysed samples. A baseline of warm-up deltas fixes the median and
MAD; each probe delta is then scored against it, and the first score whose
magnitude exceeds the threshold halts the check as unstable.
"""

from __future__ import annotations

import logging
import math
import os
import time
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import BackendUnavailable, MadDegenerate
from .model import StabilityReport

log = logging.getLogger(__name__)

MODIFIED_Z_CONSTANT = 0.6745


def modified_z_scores(samples: Sequence[float], baseline: Sequence[float]) -> list[float]:
    """Score each sample against the baseline median and MAD.

    Raises:
        ValueError: empty baseline.
        MadDegenerate: the baseline MAD is zero.
    """
    base = np.asarray(baseline, dtype=float)
    if base.size == 0:
        raise ValueError("baseline must be non-empty")
    med = float(np.median(base))
    mad = float(np.median(np.abs(base - med)))
    if mad == 0.0:
        raise MadDegenerate(f"baseline MAD is zero (median {med})")
    x = np.asarray(samples, dtype=float)
    return [float(z) for z in MODIFIED_Z_CONSTANT * (x - med) / mad]


def degenerate_scores(samples: Sequence[float], baseline: Sequence[float]) -> list[float]:
    """Fallback scores for a zero-MAD baseline: 0 on the median, inf elsewhere."""
    med = float(np.median(np.asarray(baseline, dtype=float)))
    return [0.0 if x == med else math.copysign(math.inf, x - med) for x in samples]


# --- probes -------------------------------------------------------------

class TraceProbe:
    """Replays recorded per-interval energy deltas as cumulative readings."""

    def __init__(self, deltas: Iterable[float], start: float = 0.0):
        self._deltas = [float(d) for d in deltas]
        self._start = start

    def readings(self) -> Iterator[float]:
        total = self._start
        yield total
        for d in self._deltas:
            total += d
            yield total


def _busy_loop(seconds: float) -> None:
    end = time.perf_counter() + seconds
    x = 0
    while time.perf_counter() < end:
        for i in range(2000):
            x += i * i


class RaplProbe:
    """Reads the package RAPL counter around a fixed busy-loop workload."""

    def __init__(self, counter_path: str | None = None, workload_seconds: float = 1.0):
        self.path = counter_path or find_rapl_counter()
        if self.path is None or not os.access(self.path, os.R_OK):
            raise BackendUnavailable("no readable RAPL energy_uj counter under /sys/class/powercap")
        self.workload_seconds = workload_seconds
        max_path = Path(self.path).with_name("max_energy_range_uj")
        self._wrap = int(max_path.read_text()) if max_path.exists() else None

    def _read_joules(self) -> float:
        try:
            return int(Path(self.path).read_text().strip()) / 1e6
        except OSError as exc:
            raise BackendUnavailable(f"cannot read {self.path}: {exc}") from exc

    def readings(self) -> Iterator[float]:
        offset = 0.0
        last = self._read_joules()
        yield last
        while True:
            _busy_loop(self.workload_seconds)
            now = self._read_joules()
            if now < last and self._wrap:
                # counter wrapped around max_energy_range_uj
                offset += self._wrap / 1e6
            last = now
            yield now + offset


def find_rapl_counter() -> str | None:
    root = Path("/sys/class/powercap")
    if not root.is_dir():
        return None
    for candidate in sorted(root.glob("intel-rapl:*")):
        name = candidate / "name"
        counter = candidate / "energy_uj"
        if counter.exists() and name.exists() and name.read_text().strip().startswith("package"):
            return str(counter)
    return None


# --- verification -------------------------------------------------------

def verify_stability(probe, cfg) -> StabilityReport:
    """Run the warm-up + probe protocol against ``probe``.

    ``probe.readings()`` must yield cumulative energy values; ``cfg`` is a
    PipelineConfig supplying sample counts and the z threshold. With a
    zero-MAD baseline, a probe delta equal to the baseline median scores 0
    and any other value is an immediate violation.
    """
    warmup = cfg.stability_warmup_samples
    nprobe = cfg.stability_probe_samples
    threshold = cfg.stability_z_threshold

    it = iter(probe.readings())
    try:
        prev = next(it)
    except StopIteration:
        raise BackendUnavailable("stability probe produced no readings")

    def next_delta() -> float:
        nonlocal prev
        try:
            cur = next(it)
        except StopIteration:
            raise BackendUnavailable("stability probe ran out of readings")
        d, prev = cur - prev, cur
        return d

    baseline = [next_delta() for _ in range(warmup)]
    try:
        modified_z_scores([], baseline)
        degenerate = False
    except MadDegenerate:
        log.warning("stability baseline has zero MAD; any deviation counts as unstable")
        degenerate = True

    probe_samples: list[float] = []
    scores: list[float] = []
    violation = None
    for i in range(nprobe):
        x = next_delta()
        probe_samples.append(x)
        z = (degenerate_scores if degenerate else modified_z_scores)([x], baseline)[0]
        scores.append(z)
        if abs(z) > threshold:
            violation = i
            break

    return StabilityReport(
        baseline_samples=tuple(baseline),
        probe_samples=tuple(probe_samples),
        probe_scores=tuple(scores),
        verdict="unstable" if violation is not None else "stable",
        threshold=threshold,
        first_violation_index=violation,
        mad_degenerate=degenerate,
    )


def format_report(report: StabilityReport) -> str:
    lines = [
        f"baseline deltas (J): {', '.join(f'{x:.4f}' for x in report.baseline_samples)}",
        f"{'idx':>4}  {'delta_J':>12}  {'z':>10}",
    ]
    for i, (x, z) in enumerate(zip(report.probe_samples, report.probe_scores)):
        mark = "  <-- exceeds" if abs(z) > report.threshold else ""
        lines.append(f"{i:>4}  {x:>12.4f}  {z:>10.4f}{mark}")
    lines.append(f"verdict: {report.verdict} (threshold {report.threshold})")
    return "\n".join(lines)
