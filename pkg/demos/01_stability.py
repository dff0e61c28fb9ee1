"""Host stability check with the modified z-score protocol.

Five warm-up energy deltas form the baseline; up to thirty probe deltas are
scored against it and the first score above 3.5 marks the host unstable.
The trace probe below replays scripted deltas, so no RAPL counter is needed.
"""

# %%
from energyreg.config import PipelineConfig
from energyreg.stability import TraceProbe, format_report, modified_z_scores, verify_stability

cfg = PipelineConfig(repo_manifest="unused.json")

# %% A quiet host: small wobble around 5 J per probe interval.
quiet = [4.9, 5.0, 5.1, 5.0, 4.95] * 7
report = verify_stability(TraceProbe(quiet), cfg)
print(format_report(report))

# %% A background job kicks in at probe 12 and draws ten times the energy.
noisy = quiet[:5 + 12] + [50.0] + quiet[:20]
report = verify_stability(TraceProbe(noisy), cfg)
print(format_report(report))
print("first violation at probe", report.first_violation_index)

# %% The scores themselves are plain numpy work.
print(modified_z_scores([5.0, 5.2, 6.0], [4.9, 5.0, 5.1, 5.0, 4.95]))
