"""Energy backends, clocks and temperature sensors.

``PerfBackend`` wraps the test command in ``perf stat`` reading the RAPL
package domain. ``TraceBackend`` replays a JSON manifest and never runs a
process, which makes full campaigns reproducible on any host.

Trace manifest layout::

    {
      "<commit_id>": [{"energy_joules": 12.5, "duration_seconds": 3.0}, ...],
      "<commit_id>": {"mean_joules": 100.0, "sd_joules": 1.0,
                      "duration_seconds": 3.0, "runs": [...]},
      "@stability": [1.0, 1.0, ...],     # optional probe deltas (J)
      "@thermal": [40.0]                 # optional sensor sequence (C)
    }

Runs beyond the listed ones are drawn from a normal distribution around
the commit's mean/sd, seeded per ``(seed, commit, run)``.
"""

from __future__ import annotations

import json
import logging
import os
import shutil
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Iterator, Optional

import numpy as np

from ..errors import BackendError, BackendUnavailable
from ..rng import derive_seed

log = logging.getLogger(__name__)

TRACE_EPOCH = datetime(2000, 1, 1, tzinfo=timezone.utc)
PERF_EVENT = "power/energy-pkg/"


# --- clocks -------------------------------------------------------------

class RealClock:
    def now(self) -> datetime:
        return datetime.now(timezone.utc)

    def sleep(self, seconds: float) -> None:
        if seconds > 0:
            time.sleep(seconds)

    def advance(self, seconds: float) -> None:
        """Real time advances on its own."""


class VirtualClock:
    """Deterministic clock for trace campaigns; sleeping just moves time forward."""

    def __init__(self, start: datetime = TRACE_EPOCH):
        self._t = start

    def now(self) -> datetime:
        return self._t

    def sleep(self, seconds: float) -> None:
        self.advance(seconds)

    def advance(self, seconds: float) -> None:
        if seconds > 0:
            self._t += timedelta(seconds=seconds)

    def set_at_least(self, t: datetime) -> None:
        if t > self._t:
            self._t = t


# --- sensors ------------------------------------------------------------

class TraceSensor:
    """Replays a temperature sequence; the last value repeats forever."""

    def __init__(self, readings=(40.0,)):
        self._readings = [float(r) for r in readings] or [40.0]
        self._i = 0

    def read(self) -> float:
        value = self._readings[min(self._i, len(self._readings) - 1)]
        self._i += 1
        return value


class SysfsSensor:
    """Reads a millidegree thermal file such as ``/sys/class/thermal/thermal_zone0/temp``."""

    def __init__(self, path: str):
        self.path = path

    def read(self) -> float:
        return int(Path(self.path).read_text().strip()) / 1000.0


def find_thermal_zone() -> Optional[str]:
    root = Path("/sys/class/thermal")
    zones = sorted(root.glob("thermal_zone*")) if root.is_dir() else []
    for zone in zones:
        try:
            if (zone / "type").read_text().strip() == "x86_pkg_temp":
                return str(zone / "temp")
        except OSError:
            continue
    return str(zones[0] / "temp") if zones else None


# --- measurement results --------------------------------------------------

@dataclass(frozen=True)
class RunResult:
    energy_joules: float
    duration_seconds: float
    exit_status: int


class TraceBackend:
    kind = "trace"

    def __init__(self, manifest: dict, seed: int = 0, test_ok: Optional[dict] = None):
        self.seed = seed
        self.test_ok = test_ok or {}
        self.entries = {k: v for k, v in manifest.items() if not k.startswith("@")}
        self.stability_deltas = manifest.get("@stability")
        self.thermal = manifest.get("@thermal")

    @classmethod
    def from_file(cls, path: str, seed: int = 0, test_ok: Optional[dict] = None) -> "TraceBackend":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise BackendUnavailable(f"cannot read trace manifest {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise BackendUnavailable(f"trace manifest {path} must be a JSON object")
        return cls(data, seed, test_ok)

    def check(self) -> None:
        """Trace replay needs no host support."""

    def sensor(self):
        return TraceSensor(self.thermal or (40.0,))

    def stability_probe(self, cfg):
        from ..stability import TraceProbe

        deltas = self.stability_deltas
        if deltas is None:
            deltas = [1.0]
        needed = cfg.stability_warmup_samples + cfg.stability_probe_samples
        # pad by repeating the last delta so short traces stay usable
        deltas = list(deltas) + [deltas[-1]] * max(0, needed - len(deltas))
        return TraceProbe(deltas)

    def _lookup(self, commit_id: str, run_index: int) -> tuple[float, float, Optional[int]]:
        entry = self.entries.get(commit_id)
        if entry is None:
            raise BackendError(f"trace manifest has no entry for {commit_id}")
        if isinstance(entry, list):
            runs, mean, sd, duration = entry, None, None, None
        else:
            runs = entry.get("runs", [])
            mean, sd = entry.get("mean_joules"), entry.get("sd_joules", 0.0)
            duration = entry.get("duration_seconds")
        if run_index < len(runs):
            run = runs[run_index]
            return (float(run["energy_joules"]), float(run.get("duration_seconds", duration or 1.0)),
                    run.get("exit_status"))
        if mean is None:
            if not runs:
                raise BackendError(f"trace entry for {commit_id} has no runs and no mean")
            listed = np.array([float(r["energy_joules"]) for r in runs])
            mean = float(listed.mean())
            sd = float(listed.std(ddof=1)) if listed.size > 1 else 0.0
            duration = float(np.mean([float(r.get("duration_seconds", 1.0)) for r in runs]))
        rng = np.random.default_rng(derive_seed(self.seed, commit_id, run_index))
        energy = max(0.0, float(rng.normal(mean, sd))) if sd else float(mean)
        return energy, float(duration or 1.0), None

    def measure(self, commit_id: str, run_index: int, command: str = "", cwd=None) -> RunResult:
        energy, duration, status = self._lookup(commit_id, run_index)
        if status is None:
            status = 0 if self.test_ok.get(commit_id, True) else 1
        return RunResult(energy, duration, int(status))


def parse_perf_output(text: str, event: str = PERF_EVENT) -> float:
    """Extract joules for ``event`` from ``perf stat -x`` (or plain) output.

    Raises:
        BackendError: the event line is missing or not counted.
    """
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#") or event not in line:
            continue
        fields = line.split(";") if ";" in line else line.split()
        raw = fields[0].replace(",", "")
        try:
            return float(raw)
        except ValueError:
            raise BackendError(f"perf could not count {event}: {line!r}")
    raise BackendError(f"no {event} line in perf output")


class PerfBackend:
    kind = "perf-rapl"

    def __init__(self, event: str = PERF_EVENT, perf: str = "perf"):
        self.event = event
        self.perf = perf
        self.check()

    def check(self) -> None:
        if not sys.platform.startswith("linux"):
            raise BackendUnavailable("backend unavailable: perf-rapl requires Linux")
        if shutil.which(self.perf) is None:
            raise BackendUnavailable("backend unavailable: perf not found on PATH")
        paranoid = Path("/proc/sys/kernel/perf_event_paranoid")
        if os.geteuid() != 0 and paranoid.exists():
            try:
                level = int(paranoid.read_text().strip())
            except ValueError:
                level = 2
            if level > 0:
                log.warning("perf_event_paranoid=%d; system-wide RAPL events may need root", level)

    def command(self, test_command: str, output: str) -> list[str]:
        return [self.perf, "stat", "-e", self.event, "-x", ";", "--output", output,
                "--", "sh", "-c", test_command]

    def sensor(self, path: Optional[str] = None):
        path = path or find_thermal_zone()
        return SysfsSensor(path) if path else None

    def stability_probe(self, cfg):
        from ..stability import RaplProbe

        return RaplProbe(workload_seconds=cfg.stability_workload_seconds)

    def measure(self, commit_id: str, run_index: int, command: str = "", cwd=None) -> RunResult:
        fd, out = tempfile.mkstemp(prefix="energyreg-perf-", suffix=".csv")
        os.close(fd)
        try:
            t0 = time.perf_counter()
            proc = subprocess.run(self.command(command, out), cwd=cwd,
                                  stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL)
            duration = time.perf_counter() - t0
            energy = parse_perf_output(Path(out).read_text())
        except OSError as exc:
            raise BackendError(f"perf invocation failed: {exc}") from exc
        finally:
            Path(out).unlink(missing_ok=True)
        return RunResult(energy, max(duration, 1e-9), proc.returncode)


def make_backend(cfg, test_ok: Optional[dict] = None):
    if cfg.energy_backend == "trace":
        return TraceBackend.from_file(cfg.trace_manifest, cfg.rng_seed, test_ok)
    return PerfBackend()
