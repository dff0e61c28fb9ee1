"""Measurement campaign over a synthetic commit history.

A commit manifest plus a trace manifest stand in for a git repository and a
RAPL counter. The scheduler shuffles (commit, run) tasks inside each batch;
results stream to raw.csv, and an interrupted campaign resumes where it
stopped.
"""

# %%
import tempfile
from pathlib import Path

from energyreg.campaign import collect_commits, open_repo, plan_batches, read_raw_csv, run_campaign
from energyreg.config import load_pipeline_config
from energyreg.synthetic import step_means, write_synthetic_campaign

root = Path(tempfile.mkdtemp(prefix="energyreg-campaign-"))
camp = write_synthetic_campaign(root, step_means(8, step_at=4), repetitions=5, batch_size=3)
cfg = load_pipeline_config(camp.pipeline_config)

# %% The shuffled plan: every run of every commit, interleaved per batch.
commits = collect_commits(open_repo(cfg), cfg)
plan = plan_batches(commits, cfg)
short = {c.id: c.short_id for c in commits}
for b, batch in enumerate(plan.batches()):
    print(f"batch {b}:", " ".join(f"{short[c]}/{r}" for c, r in batch))

# %% Run it. The trace backend uses a virtual clock, so rests cost nothing.
result = run_campaign(cfg, out_dir=root / "out")
samples, _ = read_raw_csv(result.raw_csv)
print(f"{len(samples)} samples written to {result.raw_csv}")
print(result.raw_csv.read_text().splitlines()[:3])

# %% Resuming a finished campaign measures nothing new.
again = run_campaign(cfg, out_dir=root / "out", resume=True)
print("new measurements on resume:", again.new_measurements)
