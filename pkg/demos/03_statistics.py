"""Statistics used to compare two commits' energy distributions.

Shapiro-Wilk screens each commit for normality, Welch's t-test decides
significance, Cohen's d gives the effect size, and the median-based relative
and absolute differences carry the practical reading.
"""

# %%
import numpy as np

from energyreg.stats import (
    bootstrap_diff,
    cohens_d,
    practical_significance,
    relative_change,
    shapiro_wilk,
    welch_t_test,
)

rng = np.random.default_rng(2)
baseline = rng.normal(135.0, 1.5, 30)
candidate = rng.normal(113.5, 1.5, 30)

# %% Normality: a Gaussian sample passes, a two-level sample does not.
print("gaussian W, p =", shapiro_wilk(baseline))
print("bimodal  W, p =", shapiro_wilk(np.r_[np.full(15, 100.0), np.full(15, 105.0)] + rng.normal(0, 0.1, 30)))

# %% Significance and effect size.
t, df, p = welch_t_test(baseline, candidate)
print(f"Welch t = {t:.2f}, df = {df:.1f}, p = {p:.2e}")
print("Cohen's d:", cohens_d(baseline, candidate))

# %% Practical readings on the medians.
m_b, m_t = float(np.median(baseline)), float(np.median(candidate))
print(relative_change(m_b, m_t))
print(practical_significance(m_b, m_t))

# %% Bootstrap interval for the median difference.
boot = bootstrap_diff(baseline, candidate, seed=0, resamples=2000)
print("95% CI of median difference (J):", boot.ci95)
