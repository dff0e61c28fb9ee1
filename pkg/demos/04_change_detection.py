"""Change detection: per-commit levels plus series-wide views.

Each commit is classified against the nearest earlier eligible commit on
five non-cumulative levels. Transient outliers are dropped first, and PELT
and CUSUM summarise the whole aggregate series.
"""

# %%
import numpy as np

from energyreg.config import AnalysisConfig
from energyreg.detection import classify_samples, cusum, detect_change_points, match_context_tags
from energyreg.stats import filter_transient_outliers

cfg = AnalysisConfig()
z = np.linspace(-1.5, 1.5, 31)

# %% One pair of commits, step by step.
event = classify_samples(100 + z, 112 + z, "Speed up parser benchmark", cfg)
print("levels satisfied:", event.level_satisfied)
print(f"level {event.level} {event.direction}: dJ {event.delta_j:.2f} J ({event.dj_category}), "
      f"d% {event.percent_change:.1%} ({event.pc_category}), d {event.cohens_d:.2f} ({event.d_category})")
print("tags:", match_context_tags("Reduce memory use in the benchmark harness", cfg.context_tags))

# %% A one-commit spike is a transient outlier; a sustained shift is not.
series = [100, 101, 99, 100, 160, 100, 101, 99, 120, 121, 119, 120, 121]
flags = filter_transient_outliers([(f"c{i}", float(v)) for i, v in enumerate(series)], cfg)
print("transient:", [f.commit_id for f in flags if f.transient_outlier])

# %% PELT finds the level shift, CUSUM shows the drift it causes.
clean = [v for v, f in zip(series, flags) if not f.transient_outlier]
print("change points:", detect_change_points(clean, cfg))
print("cusum:", np.round(cusum(clean), 1).tolist())
