"""Campaign execution: builds, measured test runs, raw CSV and manifest.

The raw CSV is append-only and flushed after every row, so an interrupted
campaign can be resumed by replaying it: tasks already present are
skipped. Builds within a batch may fan out to worker threads; the
measurement slot is a lock held by exactly one task at a time.
"""

from __future__ import annotations

import csv
import json
import logging
import subprocess
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from ..config import pipeline_to_dict
from ..errors import BackendError, BuildFailed, EnergyRegError
from ..model import SCHEMA_VERSION, CommitRef, MeasurementSample, format_ts, parse_ts
from .backends import RealClock, SysfsSensor, VirtualClock, make_backend
from .plan import CampaignPlan, plan_batches
from .repo import GitRepo, ManifestRepo, collect_commits, open_repo

log = logging.getLogger(__name__)

RAW_HEADER = ["commit_id", "run_index", "energy_joules", "duration_seconds", "exit_status",
              "temp_before_c", "temp_after_c", "wall_clock_start"]
RAW_CSV = "raw.csv"
CAMPAIGN_JSON = "campaign.json"
BUILD_MARKER = ".energyreg-build-ok"


# --- raw CSV --------------------------------------------------------------

def _fmt_opt(x: Optional[float]) -> str:
    return "" if x is None else repr(float(x))


def sample_to_row(s: MeasurementSample) -> list[str]:
    return [s.commit_id, str(s.run_index), repr(float(s.energy_joules)),
            repr(float(s.duration_seconds)), str(s.exit_status),
            _fmt_opt(s.temp_before_celsius), _fmt_opt(s.temp_after_celsius),
            format_ts(s.wall_clock_start)]


def row_to_sample(row: dict) -> MeasurementSample:
    def opt(key):
        v = row.get(key, "")
        return float(v) if v not in ("", None) else None

    return MeasurementSample(
        commit_id=row["commit_id"],
        run_index=int(row["run_index"]),
        energy_joules=float(row["energy_joules"]),
        duration_seconds=float(row["duration_seconds"]),
        exit_status=int(row["exit_status"]),
        temp_before_celsius=opt("temp_before_c"),
        temp_after_celsius=opt("temp_after_c"),
        wall_clock_start=parse_ts(row["wall_clock_start"]),
    )


def read_raw_csv(path, strict: bool = False) -> tuple[list[MeasurementSample], list[str]]:
    """Parse a raw results file; malformed rows are skipped and reported."""
    samples, problems = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != RAW_HEADER:
            raise EnergyRegError(f"{path}: unexpected header {reader.fieldnames}")
        for lineno, row in enumerate(reader, start=2):
            try:
                samples.append(row_to_sample(row))
            except (KeyError, TypeError, ValueError) as exc:
                if strict:
                    raise
                problems.append(f"line {lineno}: {exc}")
    return samples, problems


def _repair_raw_csv(path: Path) -> list[MeasurementSample]:
    """Drop a torn final line and malformed rows before appending on resume."""
    text = path.read_text(encoding="utf-8")
    if text and not text.endswith("\n"):
        log.warning("dropping incomplete final line of %s", path)
        text = text[: text.rfind("\n") + 1]
        path.write_text(text, encoding="utf-8")
    if not text:
        return []
    samples, problems = read_raw_csv(path)
    if problems:
        for p in problems:
            log.warning("ignoring malformed raw row (%s)", p)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(RAW_HEADER)
            w.writerows(sample_to_row(s) for s in samples)
    return samples


class RawWriter:
    def __init__(self, path: Path, append: bool):
        exists = path.exists() and path.stat().st_size > 0
        self._fh = open(path, "a" if append else "w", newline="", encoding="utf-8")
        self._w = csv.writer(self._fh, lineterminator="\n")
        if not (append and exists):
            self._w.writerow(RAW_HEADER)
            self._fh.flush()

    def write(self, sample: MeasurementSample) -> None:
        self._w.writerow(sample_to_row(sample))
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()


# --- thermal guard ----------------------------------------------------------

def thermal_guard_wait(cfg, sensor, clock=None, notes: Optional[list] = None) -> float:
    """Block until the sensor reads at or below ``thermal_limit_celsius``.

    Returns the total time waited. An unreadable or missing sensor disables
    the guard with a warning (appended to ``notes`` when given).
    """
    clock = clock or RealClock()

    def disabled(reason):
        msg = f"thermal guard disabled: {reason}"
        log.warning(msg)
        if notes is not None and msg not in notes:
            notes.append(msg)
        return 0.0

    if sensor is None:
        return disabled("no temperature sensor")
    waited = 0.0
    while True:
        try:
            temp = sensor.read()
        except (OSError, ValueError) as exc:
            return disabled(str(exc))
        if temp <= cfg.thermal_limit_celsius:
            return waited
        log.info("temperature %.1f C above %.1f C, pausing", temp, cfg.thermal_limit_celsius)
        clock.sleep(cfg.thermal_poll_seconds)
        waited += cfg.thermal_poll_seconds


def _read_temp(sensor) -> Optional[float]:
    if sensor is None:
        return None
    try:
        return float(sensor.read())
    except (OSError, ValueError):
        return None


# --- build ----------------------------------------------------------------

def expand_template(template: str, commit: CommitRef, worktree) -> str:
    return (template.replace("{commit}", commit.id)
            .replace("{short_id}", commit.short_id)
            .replace("{worktree}", str(worktree)))


def build_commit(commit: CommitRef, cfg, workdir, repo=None) -> bool:
    """Build ``commit`` in its own worktree under ``workdir``.

    Trace campaigns skip the build (honouring a manifest ``build_ok: false``).
    A successful build leaves a marker so later runs reuse it.

    Raises:
        BuildFailed: the build command exited non-zero.
    """
    if cfg.energy_backend == "trace":
        if isinstance(repo, ManifestRepo) and not repo.build_ok.get(commit.id, True):
            raise BuildFailed(commit.id, 1)
        return True
    workdir = Path(workdir)
    tree = worktree_path(workdir, commit)
    if isinstance(repo, GitRepo):
        repo.add_worktree(commit.id, tree)
    else:
        tree.mkdir(parents=True, exist_ok=True)
    marker = tree / BUILD_MARKER
    if marker.exists():
        return True
    logs = workdir / "logs"
    logs.mkdir(parents=True, exist_ok=True)
    log_path = logs / f"{commit.id}.build.log"
    if cfg.build_command:
        with open(log_path, "w", encoding="utf-8") as fh:
            proc = subprocess.run(expand_template(cfg.build_command, commit, tree), shell=True,
                                  cwd=tree, stdout=fh, stderr=subprocess.STDOUT)
        if proc.returncode != 0:
            raise BuildFailed(commit.id, proc.returncode, str(log_path))
    marker.write_text(commit.id + "\n")
    return True


def worktree_path(workdir: Path, commit: CommitRef) -> Path:
    return Path(workdir) / "worktrees" / commit.id


# --- measure --------------------------------------------------------------

_MEASUREMENT_SLOT = threading.Lock()


def measure_task(task, backend, cfg, commit: Optional[CommitRef] = None, *, sensor=None,
                 clock=None, workdir=None, notes: Optional[list] = None) -> MeasurementSample:
    """Run one test-suite execution under the backend and record it.

    Waits on the thermal guard first and rests ``rest_seconds`` afterwards.

    Raises:
        BackendError: the backend could not produce an energy reading.
    """
    commit_id, run_index = task
    clock = clock or RealClock()
    with _MEASUREMENT_SLOT:
        thermal_guard_wait(cfg, sensor, clock, notes)
        before = _read_temp(sensor)
        start = clock.now()
        cwd = None
        command = cfg.test_command
        if commit is not None and workdir is not None and cfg.energy_backend != "trace":
            cwd = worktree_path(Path(workdir), commit)
            command = expand_template(command, commit, cwd)
        result = backend.measure(commit_id, run_index, command, cwd)
        clock.advance(result.duration_seconds)
        after = _read_temp(sensor)
        sample = MeasurementSample(commit_id, run_index, result.energy_joules,
                                   result.duration_seconds, result.exit_status,
                                   before, after, start)
        clock.sleep(cfg.effective_rest_seconds)
    return sample


# --- campaign -------------------------------------------------------------

@dataclass
class CampaignResult:
    raw_csv: Path
    manifest: Path
    plan: CampaignPlan
    commits: list[CommitRef]
    new_measurements: int = 0
    excluded: dict[str, str] = field(default_factory=dict)
    errors: list[str] = field(default_factory=list)


def write_campaign_manifest(path: Path, cfg, plan: CampaignPlan, commits, excluded, errors,
                            notes) -> None:
    doc = {
        "schema": SCHEMA_VERSION,
        "rng_seed": cfg.rng_seed,
        "repetitions": cfg.repetitions,
        "plan_hash": plan.digest(),
        "tasks": len(plan.tasks),
        "batch_boundaries": list(plan.batch_boundaries),
        "pipeline_config": pipeline_to_dict(cfg),
        "commits": [c.to_json() for c in commits],
        "excluded": dict(sorted(excluded.items())),
        "errors": errors,
        "notes": notes,
    }
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def read_campaign_manifest(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def run_campaign(cfg, backend=None, out_dir=".", *, resume: bool = False, repo=None,
                 commits=None, sensor=None, clock=None, stability_check=None) -> CampaignResult:
    """Execute the full plan, appending each sample to ``out_dir/raw.csv``.

    With ``resume`` the existing CSV is replayed and completed tasks are
    skipped; otherwise it is overwritten. Individual build and test failures
    are recorded and the campaign carries on. ``stability_check``, when
    given, is called between batches (mid-campaign re-verification).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    repo = repo or open_repo(cfg)
    commits = commits or collect_commits(repo, cfg)
    by_id = {c.id: c for c in commits}
    order = {c.id: i for i, c in enumerate(commits)}
    if backend is None:
        test_ok = repo.test_ok if isinstance(repo, ManifestRepo) else None
        backend = make_backend(cfg, test_ok)
    if clock is None:
        clock = VirtualClock() if cfg.energy_backend == "trace" else RealClock()
    if sensor is None:
        if cfg.energy_backend == "trace":
            sensor = backend.sensor()
        elif cfg.thermal_sensor:
            sensor = SysfsSensor(cfg.thermal_sensor)
        else:
            sensor = backend.sensor()
    workdir = Path(cfg.workdir or out / "work")

    plan = plan_batches(commits, cfg)
    raw_path = out / RAW_CSV
    manifest_path = out / CAMPAIGN_JSON

    done: dict[tuple[str, int], MeasurementSample] = {}
    if resume and raw_path.exists():
        previous = _repair_raw_csv(raw_path)
        done = {(s.commit_id, s.run_index): s for s in previous}
        if manifest_path.exists():
            old = read_campaign_manifest(manifest_path)
            if old.get("plan_hash") != plan.digest():
                log.warning("plan differs from the interrupted campaign; completed tasks still reused")
    excluded: dict[str, str] = {}
    errors: list[str] = []
    notes: list[str] = []
    if resume and manifest_path.exists():
        old = read_campaign_manifest(manifest_path)
        excluded.update(old.get("excluded", {}))
        errors.extend(old.get("errors", []))
        notes.extend(old.get("notes", []))
    write_campaign_manifest(manifest_path, cfg, plan, commits, excluded, errors, notes)

    result = CampaignResult(raw_path, manifest_path, plan, list(commits), excluded=excluded,
                            errors=errors)
    writer = RawWriter(raw_path, append=resume)
    try:
        for b, batch in enumerate(plan.batches()):
            if b and stability_check is not None:
                report = stability_check()
                if not report.stable:
                    msg = f"stability re-check before batch {b} reported unstable"
                    log.warning(msg)
                    notes.append(msg)
            pending = [t for t in batch if t not in done]
            to_build = sorted({cid for cid, _ in pending if cid not in excluded},
                              key=order.__getitem__)
            _build_all(to_build, by_id, cfg, workdir, repo, excluded, errors)
            for task in batch:
                cid, run = task
                if task in done:
                    prev = done[task]
                    if isinstance(clock, VirtualClock):
                        clock.set_at_least(prev.wall_clock_start)
                        clock.advance(prev.duration_seconds)
                        clock.sleep(cfg.effective_rest_seconds)
                    continue
                if cid in excluded:
                    continue
                try:
                    sample = measure_task(task, backend, cfg, by_id[cid], sensor=sensor,
                                          clock=clock, workdir=workdir, notes=notes)
                except BackendError as exc:
                    errors.append(f"{cid}:{run}: {exc}")
                    log.error("measurement %s run %d failed: %s", cid[:7], run, exc)
                    continue
                writer.write(sample)
                result.new_measurements += 1
    finally:
        writer.close()
        write_campaign_manifest(manifest_path, cfg, plan, commits, excluded, errors, notes)
    return result


def _build_all(commit_ids, by_id, cfg, workdir, repo, excluded, errors) -> None:
    def one(cid):
        try:
            build_commit(by_id[cid], cfg, workdir, repo)
            return cid, None
        except BuildFailed as exc:
            return cid, f"build failed (exit {exc.returncode})"
        except EnergyRegError as exc:
            return cid, f"build failed ({exc})"

    if cfg.build_workers > 1 and len(commit_ids) > 1:
        with ThreadPoolExecutor(max_workers=cfg.build_workers) as pool:
            outcomes = list(pool.map(one, commit_ids))
    else:
        outcomes = [one(cid) for cid in commit_ids]
    for cid, reason in outcomes:
        if reason:
            excluded[cid] = reason
            errors.append(f"{cid}: {reason}")
            log.warning("excluding %s: %s", cid[:7], reason)
