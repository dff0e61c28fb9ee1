"""Command line entry point: ``energyreg {stability,measure,analyze,report,run}``.

Exit codes: 0 success, 1 configuration or backend problem, 2 unstable
host, 3 no usable data, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import logging
import shutil
import sys
from pathlib import Path

from .analysis import analyze, write_bundles
from .campaign import collect_commits, open_repo, plan_batches, read_raw_csv, run_campaign
from .campaign.backends import PerfBackend, TraceBackend
from .campaign.repo import ManifestRepo
from .campaign.runner import CAMPAIGN_JSON, RAW_CSV, read_campaign_manifest
from .config import AnalysisConfig, load_analysis_config, load_pipeline_config, with_overrides
from .errors import (
    BackendUnavailable,
    ConfigError,
    EmptyHistory,
    EnergyRegError,
    ReportIOError,
    RepoError,
)
from .model import CommitRef
from .report import render_from_bundles
from .stability import format_report, verify_stability

log = logging.getLogger("energyreg")

EXIT_OK, EXIT_CONFIG, EXIT_UNSTABLE, EXIT_NO_DATA, EXIT_IO = 0, 1, 2, 3, 4
DEFAULT_OUT = "energyreg-out"


class CliExit(Exception):
    def __init__(self, code: int, message: str = ""):
        super().__init__(message)
        self.code = code
        self.message = message


# --- helpers --------------------------------------------------------------

def _pipeline(args):
    if not args.config:
        raise CliExit(EXIT_CONFIG, "--config is required")
    try:
        cfg = load_pipeline_config(args.config)
        if getattr(args, "seed", None) is not None:
            cfg = with_overrides(cfg, rng_seed=args.seed)
    except FileNotFoundError:
        raise CliExit(EXIT_CONFIG, f"config file not found: {args.config}")
    except ConfigError as exc:
        raise CliExit(EXIT_CONFIG, f"invalid pipeline config: {exc}")
    return cfg


def _analysis(args):
    if not args.analysis_config:
        return AnalysisConfig()
    try:
        return load_analysis_config(args.analysis_config)
    except FileNotFoundError:
        raise CliExit(EXIT_CONFIG, f"analysis config not found: {args.analysis_config}")
    except ConfigError as exc:
        raise CliExit(EXIT_CONFIG, f"invalid analysis config: {exc}")


def _backend_and_repo(cfg):
    """Fail fast on an unusable backend, before any repository work."""
    try:
        if cfg.energy_backend == "perf-rapl":
            backend = PerfBackend()
            repo = open_repo(cfg)
        else:
            repo = open_repo(cfg)
            test_ok = repo.test_ok if isinstance(repo, ManifestRepo) else None
            backend = TraceBackend.from_file(cfg.trace_manifest, cfg.rng_seed, test_ok)
    except BackendUnavailable as exc:
        raise CliExit(EXIT_CONFIG, str(exc))
    except RepoError as exc:
        raise CliExit(EXIT_CONFIG, f"repository error: {exc}")
    return backend, repo


def _stability(cfg, backend) -> bool:
    try:
        report = verify_stability(backend.stability_probe(cfg), cfg)
    except BackendUnavailable as exc:
        msg = str(exc)
        if not msg.startswith("backend unavailable"):
            msg = f"backend unavailable: {msg}"
        raise CliExit(EXIT_CONFIG, msg)
    print(format_report(report))
    return report.stable


# --- phases -----------------------------------------------------------------

def cmd_stability(args) -> int:
    cfg = _pipeline(args)
    backend, _ = _backend_and_repo(cfg)
    return EXIT_OK if _stability(cfg, backend) else EXIT_UNSTABLE


def _measure(cfg, args, out: Path, backend, repo) -> int:
    try:
        commits = collect_commits(repo, cfg)
    except EmptyHistory as exc:
        raise CliExit(EXIT_NO_DATA, str(exc))
    except RepoError as exc:
        raise CliExit(EXIT_CONFIG, f"repository error: {exc}")
    if args.dry_run:
        plan = plan_batches(commits, cfg)
        short = {c.id: c.short_id for c in commits}
        for b, batch in enumerate(plan.batches()):
            print(f"# batch {b} ({len(batch)} tasks)")
            for cid, run in batch:
                print(f"{short[cid]}\t{run}")
        return EXIT_OK
    if not args.skip_stability and not _stability(cfg, backend):
        return EXIT_UNSTABLE
    recheck = None
    if cfg.stability_recheck:
        recheck = lambda: verify_stability(backend.stability_probe(cfg), cfg)  # noqa: E731
    try:
        result = run_campaign(cfg, backend, out, resume=args.resume, repo=repo, commits=commits,
                              stability_check=recheck)
    except OSError as exc:
        raise CliExit(EXIT_IO, f"I/O error: {exc}")
    for err in result.errors:
        log.warning(err)
    samples, _ = read_raw_csv(result.raw_csv)
    log.info("%d new measurements, %d rows total", result.new_measurements, len(samples))
    return EXIT_OK if samples else EXIT_NO_DATA


def cmd_measure(args) -> int:
    cfg = _pipeline(args)
    backend, repo = _backend_and_repo(cfg)
    return _measure(cfg, args, Path(args.out or DEFAULT_OUT), backend, repo)


def _print_significant(events) -> None:
    sig = [e for e in events if e.level >= 1]
    print(f"{'commit':<9} {'baseline':<9} {'level':>5} {'direction':<11} {'m_b (J)':>10} "
          f"{'m_t (J)':>10} {'dJ (J)':>9} {'d%':>7} {'p':>9} {'d':>7}  tags")
    for e in sig:
        print(f"{e.test[:7]:<9} {e.baseline[:7]:<9} {e.level:>5} {e.direction:<11} {e.m_b:>10.2f} "
              f"{e.m_t:>10.2f} {e.delta_j:>9.2f} {e.percent_change:>7.2%} {e.p_value:>9.2e} "
              f"{e.cohens_d:>7.3f}  {','.join(e.matched_tags)}")
    print(f"{len(sig)} significant changes")


def _analyze(cfg, raw: Path, out: Path) -> int:
    if not raw.exists():
        raise CliExit(EXIT_NO_DATA, f"raw results not found: {raw}")
    try:
        samples, problems = read_raw_csv(raw)
    except EnergyRegError as exc:
        raise CliExit(EXIT_NO_DATA, str(exc))
    for p in problems:
        log.warning("skipping malformed row: %s", p)
    manifest = raw.parent / CAMPAIGN_JSON
    commits, excluded = [], {}
    if manifest.exists():
        doc = read_campaign_manifest(manifest)
        commits = [CommitRef.from_json(c) for c in doc.get("commits", [])]
        excluded = doc.get("excluded", {})
    else:
        log.warning("no %s next to %s; commit order falls back to ids", CAMPAIGN_JSON, raw)
    dists, detection = analyze(samples, commits, cfg, excluded)
    if not any(d.samples for d in dists):
        raise CliExit(EXIT_NO_DATA, "no usable commits in raw results")
    try:
        write_bundles(out, dists, detection, cfg, raw_csv=str(raw))
        if manifest.exists() and manifest.resolve() != (out / CAMPAIGN_JSON).resolve():
            shutil.copyfile(manifest, out / CAMPAIGN_JSON)
    except (ReportIOError, OSError) as exc:
        raise CliExit(EXIT_IO, str(exc))
    _print_significant(detection.events)
    return EXIT_OK


def cmd_analyze(args) -> int:
    cfg = _analysis(args)
    out = Path(args.out) if args.out else None
    raw = Path(args.raw) if args.raw else (out or Path(DEFAULT_OUT)) / RAW_CSV
    return _analyze(cfg, raw, out or raw.parent)


def _report(bundles: Path) -> int:
    try:
        path = render_from_bundles(bundles)
    except ReportIOError as exc:
        raise CliExit(EXIT_IO, str(exc))
    print(path)
    return EXIT_OK


def cmd_report(args) -> int:
    return _report(Path(args.bundles or args.out or DEFAULT_OUT))


def cmd_run(args) -> int:
    pipeline = _pipeline(args)
    analysis = _analysis(args)
    out = Path(args.out or DEFAULT_OUT)
    backend, repo = _backend_and_repo(pipeline)
    code = _measure(pipeline, args, out, backend, repo)
    if code != EXIT_OK or args.dry_run:
        return code
    code = _analyze(analysis, out / RAW_CSV, out)
    if code != EXIT_OK:
        return code
    return _report(out)


# --- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="energyreg", description=__doc__.splitlines()[0])
    parser.add_argument("--verbose", "-v", action="count", default=0,
                        help="more logging on stderr (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, pipeline=False, analysis=False, measure=False):
        p.add_argument("--verbose", "-v", action="count", default=argparse.SUPPRESS)
        p.add_argument("--out", help=f"output directory (default {DEFAULT_OUT})")
        if pipeline:
            p.add_argument("--config", help="pipeline configuration file")
            p.add_argument("--seed", type=int, help="override the pipeline rng_seed")
        if analysis:
            p.add_argument("--analysis-config", help="analysis configuration file")
        if measure:
            p.add_argument("--resume", action="store_true", help="skip tasks already in raw.csv")
            p.add_argument("--dry-run", action="store_true", help="print the shuffled plan and exit")
            p.add_argument("--skip-stability", action="store_true", help="skip the stability gate")

    p = sub.add_parser("stability", help="verify the host is in a stable energy state")
    common(p, pipeline=True)
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("measure", help="run the measurement campaign")
    common(p, pipeline=True, measure=True)
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("analyze", help="detect and classify energy changes")
    common(p, analysis=True)
    p.add_argument("raw", nargs="?", help="raw results CSV (default <out>/raw.csv)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("report", help="render index.html from the JSON bundles")
    common(p)
    p.add_argument("bundles", nargs="?", help="bundle directory (default --out)")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("run", help="stability, measure, analyze and report in one go")
    common(p, pipeline=True, analysis=True, measure=True)
    p.set_defaults(func=cmd_run)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except CliExit as exc:
        if exc.message:
            print(f"energyreg: {exc.message}", file=sys.stderr)
        return exc.code
    except EnergyRegError as exc:
        print(f"energyreg: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
