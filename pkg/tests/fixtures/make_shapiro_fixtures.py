"""Regenerate ``shapiro_fixtures.json``: 20 pinned samples with scipy reference W and p.

Run from the repository root::

    python tests/fixtures/make_shapiro_fixtures.py
"""

import json
from pathlib import Path

import numpy as np
from scipy import stats

OUT = Path(__file__).with_name("shapiro_fixtures.json")


def main():
    rng = np.random.default_rng(7)
    shapes = ["normal", "lognormal", "uniform", "exponential", "bimodal"]
    fixtures = []
    for k, n in enumerate(np.linspace(10, 50, 20).round().astype(int)):
        shape = shapes[k % len(shapes)]
        if shape == "normal":
            x = rng.normal(640.0, 12.0, n)
        elif shape == "lognormal":
            x = 100.0 * rng.lognormal(0.0, 0.4, n)
        elif shape == "uniform":
            x = rng.uniform(90.0, 110.0, n)
        elif shape == "exponential":
            x = 50.0 + rng.exponential(5.0, n)
        else:
            x = np.concatenate([rng.normal(100, 1, n // 2), rng.normal(106, 1, n - n // 2)])
        x = np.round(x, 6)
        res = stats.shapiro(x)
        fixtures.append({"n": int(n), "shape": shape, "sample": x.tolist(),
                         "w": float(res.statistic), "p": float(res.pvalue)})
    OUT.write_text(json.dumps({"reference": "scipy.stats.shapiro", "fixtures": fixtures}, indent=1) + "\n")


if __name__ == "__main__":
    main()
