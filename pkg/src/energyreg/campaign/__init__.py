"""Measurement campaign: commit collection, scheduling, builds and energy runs."""

from .backends import PerfBackend, TraceBackend, TraceSensor, VirtualClock, make_backend, parse_perf_output
from .plan import CampaignPlan, plan_batches
from .repo import GitRepo, ManifestRepo, collect_commits, open_repo
from .runner import (
    RAW_HEADER,
    CampaignResult,
    build_commit,
    measure_task,
    read_raw_csv,
    run_campaign,
    thermal_guard_wait,
)

__all__ = [
    "CampaignPlan", "CampaignResult", "GitRepo", "ManifestRepo", "PerfBackend", "RAW_HEADER",
    "TraceBackend", "TraceSensor", "VirtualClock", "build_commit", "collect_commits",
    "make_backend", "measure_task", "open_repo", "parse_perf_output", "plan_batches",
    "read_raw_csv", "run_campaign", "thermal_guard_wait",
]
