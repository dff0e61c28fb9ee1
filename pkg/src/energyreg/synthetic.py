"""Write self-contained synthetic campaigns (commit manifest, trace, configs).

Used by the demos and tests to drive the pipeline without git or RAPL.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Optional, Sequence

from .config import AnalysisConfig, PipelineConfig, save_analysis_config, save_pipeline_config
from .model import format_ts

START = datetime(2024, 1, 1, tzinfo=timezone.utc)


@dataclass(frozen=True)
class SyntheticCampaign:
    root: Path
    pipeline_config: Path
    analysis_config: Path
    commit_ids: list[str]


def commit_id(i: int) -> str:
    """Stable 40-hex id for synthetic commit ``i``."""
    return hashlib.sha1(f"synthetic-commit-{i}".encode()).hexdigest()


def step_means(n: int, base: float = 100.0, step_at: Optional[int] = None,
               step: float = 0.15) -> list[float]:
    """Flat mean profile with an optional relative step starting at ``step_at``."""
    return [base * (1 + step) if step_at is not None and i >= step_at else base for i in range(n)]


def write_synthetic_campaign(root, means: Sequence[float], *, sd_fraction: float = 0.01,
                             messages: Optional[Sequence[str]] = None,
                             test_ok: Optional[Sequence[bool]] = None,
                             stability: Optional[Sequence[float]] = None,
                             repetitions: int = 30, batch_size: int = 100, rng_seed: int = 0,
                             analysis: Optional[AnalysisConfig] = None,
                             duration_seconds: float = 2.0) -> SyntheticCampaign:
    """Lay out one commit per entry of ``means`` with Gaussian run noise.

    Run energies are drawn by the trace backend from
    ``N(mean, sd_fraction * mean)``, keyed on the pipeline seed.
    """
    root = Path(root).resolve()
    root.mkdir(parents=True, exist_ok=True)
    ids = [commit_id(i) for i in range(len(means))]
    entries, trace = [], {}
    for i, (cid, mean) in enumerate(zip(ids, means)):
        entries.append({
            "id": cid,
            "date": format_ts(START + timedelta(hours=i)),
            "message": messages[i] if messages else f"change {i}",
            "test_ok": bool(test_ok[i]) if test_ok else True,
        })
        trace[cid] = {"mean_joules": float(mean), "sd_joules": float(mean) * sd_fraction,
                      "duration_seconds": duration_seconds}
    trace["@stability"] = list(stability) if stability is not None else [5.0]
    (root / "commits.json").write_text(json.dumps(entries, indent=1) + "\n", encoding="utf-8")
    (root / "trace.json").write_text(json.dumps(trace, indent=1) + "\n", encoding="utf-8")
    pipeline = PipelineConfig(repo_manifest=str(root / "commits.json"),
                              trace_manifest=str(root / "trace.json"), energy_backend="trace",
                              repetitions=repetitions, batch_size=batch_size, rng_seed=rng_seed,
                              workdir=str(root / "work"))
    save_pipeline_config(pipeline, root / "pipeline.yaml")
    save_analysis_config(analysis or AnalysisConfig(), root / "analysis.yaml")
    return SyntheticCampaign(root, root / "pipeline.yaml", root / "analysis.yaml", ids)
