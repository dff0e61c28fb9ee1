"""End-to-end exit criteria, each at its stated tolerance and time budget.

Every test records one ``PASS/FAIL criterion N`` line via the ``criterion``
fixture; the lines are repeated in the terminal summary.
"""

import itertools
import json
import math
import shutil
from fractions import Fraction
from pathlib import Path

import mpmath
import numpy as np
import pytest
from scipy import stats as sps

from energyreg.campaign import run_campaign
from energyreg.campaign.backends import TraceBackend
from energyreg.cli import main
from energyreg.config import AnalysisConfig, load_pipeline_config
from energyreg.detection import bic_penalty, classify_samples, detect_change_points, pelt
from energyreg.stability import verify_stability
from energyreg.stats import (
    cohens_d,
    filter_transient_outliers,
    shapiro_wilk,
    transient_outlier_flags,
    welch_t_test,
)
from energyreg.synthetic import step_means, write_synthetic_campaign

pytestmark = pytest.mark.acceptance

FIXTURES = Path(__file__).parent / "fixtures"
CFG = AnalysisConfig()


def symmetric(center, sd=1.0, n=61):
    z = sps.norm.ppf((np.arange(1, n + 1) - 0.5) / n)
    return center + sd * z


# --- 1 -------------------------------------------------------------------------

def test_criterion_1_classification_fixtures(criterion):
    with criterion(1, "classification fixtures", limit_s=1.0) as c:
        e = classify_samples(symmetric(644.05), symmetric(651.97), "Add benchmark for parser", CFG)
        assert e.m_b == pytest.approx(644.05, abs=1e-2) and e.m_t == pytest.approx(651.97, abs=1e-2)
        assert e.level == 5 and e.level_satisfied[0] and e.level_satisfied[4]
        assert e.pc_category == "minor" and e.dj_category == "info"
        assert list(e.matched_tags) == ["benchmark"]

        e = classify_samples(symmetric(135.07), symmetric(113.51), "refactor", CFG)
        assert e.percent_change == pytest.approx(0.1596, abs=1e-4)
        assert e.pc_category == "major" and e.direction == "improvement"

        e = classify_samples(symmetric(1338.64), symmetric(588.52), "refactor", CFG)
        assert e.delta_j == pytest.approx(-750.12, abs=1e-2)
        assert e.dj_category == "info" and e.direction == "improvement"
        c.detail = "levels 5 / major / -750.12 J info"


# --- 2 -------------------------------------------------------------------------

def _mp_two_sided(t, df):
    mpmath.mp.dps = 60
    df, t = mpmath.mpf(df), mpmath.mpf(t)
    return float(mpmath.betainc(df / 2, mpmath.mpf(1) / 2, 0, df / (df + t * t), regularized=True))


def _closed_form_d(a, b):
    """Cohen's d from exact rational moments; only the final sqrt is inexact."""
    a, b = [Fraction(x) for x in a], [Fraction(x) for x in b]
    ma, mb = sum(a) / len(a), sum(b) / len(b)
    ssa = sum((x - ma) ** 2 for x in a)
    ssb = sum((x - mb) ** 2 for x in b)
    pooled = (ssa + ssb) / (len(a) + len(b) - 2)
    return float(mb - ma) / math.sqrt(pooled)


def test_criterion_2_statistical_oracles(criterion):
    with criterion(2, "statistical oracle agreement", limit_s=5.0) as c:
        doc = json.loads((FIXTURES / "shapiro_fixtures.json").read_text())
        fixtures = doc["fixtures"]
        assert len(fixtures) == 20 and min(f["n"] for f in fixtures) == 10
        assert max(f["n"] for f in fixtures) == 50
        worst_w = worst_p = 0.0
        for f in fixtures:
            w, p = shapiro_wilk(f["sample"])
            live = sps.shapiro(f["sample"])
            for ref_w, ref_p in ((f["w"], f["p"]), (live.statistic, live.pvalue)):
                worst_w = max(worst_w, abs(w - ref_w))
                worst_p = max(worst_p, abs(p - ref_p))
        assert worst_w <= 1e-4 and worst_p <= 1e-3

        rng = np.random.default_rng(20)
        worst_welch = 0.0
        for _ in range(20):
            a = rng.normal(100, rng.uniform(0.5, 5), rng.integers(2, 40))
            b = rng.normal(100 + rng.uniform(-4, 4), rng.uniform(0.5, 5), rng.integers(2, 40))
            t, df, p = welch_t_test(a, b)
            worst_welch = max(worst_welch, abs(p - _mp_two_sided(t, df)))
        assert worst_welch <= 1e-9

        cases = [
            ([1, 2, 3, 4, 5], [3, 4, 5, 6, 7]),
            ([2, 4, 6], [1, 2, 3, 4, 5]),
            ([10, 10.5, 11], [12, 12.25, 13, 14]),
            ([0.1, 0.2, 0.4, 0.8], [0.3, 0.3, 0.9]),
            ([100, 101], [99, 103, 104, 98, 100]),
        ]
        worst_d = 0.0
        for a, b in cases:
            worst_d = max(worst_d, abs(cohens_d(a, b).d - _closed_form_d(a, b)))
        assert cohens_d([1, 2, 3, 4, 5], [3, 4, 5, 6, 7]).d == pytest.approx(2 / math.sqrt(2.5),
                                                                           abs=1e-12)
        assert worst_d <= 1e-12
        c.detail = (f"max |dW|={worst_w:.1e} |dp|={worst_p:.1e} welch={worst_welch:.1e} "
                    f"d={worst_d:.1e}")


# --- 3 -------------------------------------------------------------------------

N_COMMITS, STEP_AT = 50, 25
# exclude_non_normal and the outlier filter stay off here; see the README
GATE_ANALYSIS = AnalysisConfig(exclude_non_normal=False, max_transient_outliers=0,
                               bootstrap_resamples=100)


def _planted_run(tmp_path, seed):
    root = tmp_path / f"seed{seed}"
    camp = write_synthetic_campaign(root, step_means(N_COMMITS, step_at=STEP_AT, step=0.15),
                                    sd_fraction=0.01, rng_seed=seed, analysis=GATE_ANALYSIS)
    out = root / "out"
    code = main(["run", "--config", str(camp.pipeline_config), "--analysis-config",
                 str(camp.analysis_config), "--out", str(out), "--skip-stability"])
    assert code == 0
    events = json.loads((out / "events.json").read_text())["events"]
    return camp.commit_ids[STEP_AT], events


def test_criterion_3_planted_regression(tmp_path, criterion, capsys):
    with criterion(3, "planted regression end to end", limit_s=60.0) as c:
        seeds = 200
        hits, null_flags, null_total = 0, 0, 0
        for seed in range(seeds):
            step_id, events = _planted_run(tmp_path, seed)
            for e in events:
                if e["test"] == step_id:
                    if seed < 100 and e["level"] >= 3 and e["direction"] == "regression":
                        hits += 1
                else:
                    null_total += 1
                    null_flags += e["level"] >= 1
            shutil.rmtree(tmp_path / f"seed{seed}")
        capsys.readouterr()
        lo, hi = sps.binom.interval(0.95, null_total, 0.05)
        rate = null_flags / null_total
        assert hits == 100, f"step flagged at level >= 3 in {hits}/100 seeds"
        assert lo <= null_flags <= hi, f"null rate {rate:.4f} ({null_flags}/{null_total}) " \
                                       f"outside [{lo / null_total:.4f}, {hi / null_total:.4f}]"
        c.detail = (f"step hits 100/100, null rate {null_flags}/{null_total} = {rate:.4f} "
                    f"in [{lo / null_total:.4f}, {hi / null_total:.4f}]")


# --- 4 -------------------------------------------------------------------------

def _brute_force_flags(rows, window, max_run, k=1.5):
    """Independent Tukey-window oracle: explicit index lists, numpy quantiles."""
    n_rows, n = rows.shape
    raw = np.zeros((n_rows, n), bool)
    evaluated = np.zeros((n_rows, n), bool)
    for i in range(n):
        lo = i - window // 2
        neighbours = [j for j in range(lo, lo + window) if 0 <= j < n and j != i]
        if len(neighbours) < 4:
            continue
        q1, q3 = np.quantile(rows[:, neighbours], [0.25, 0.75], axis=1, method="linear")
        iqr = q3 - q1
        raw[:, i] = (rows[:, i] < q1 - k * iqr) | (rows[:, i] > q3 + k * iqr)
        evaluated[:, i] = True
    # keep only runs no longer than max_run, found from edges of the padded flat mask
    padded = np.zeros((n_rows, n + 2), np.int8)
    padded[:, 1:-1] = raw
    flat = padded.ravel()
    edges = np.diff(flat)
    starts, ends = np.flatnonzero(edges == 1) + 1, np.flatnonzero(edges == -1) + 1
    short = (ends - starts) <= max_run
    marks = np.zeros(flat.size + 1, np.int64)
    np.add.at(marks, starts[short], 1)
    np.add.at(marks, ends[short], -1)
    keep = np.cumsum(marks)[:-1].astype(bool).reshape(n_rows, n + 2)[:, 1:-1]
    return keep, evaluated


def test_criterion_4_outlier_filter_oracle(criterion):
    with criterion(4, "outlier-filter oracle", limit_s=30.0) as c:
        alphabet = [1.0, 2.0, 10.0]
        checked = 0
        rng = np.random.default_rng(4)
        for n in range(1, 13):
            rows = np.array(list(itertools.product(alphabet, repeat=n)))
            for window, max_run in itertools.product((4, 6), (1, 2)):
                flags, evaluated = transient_outlier_flags(rows, window, 1.5, max_run)
                ref_flags, ref_eval = _brute_force_flags(rows, window, max_run)
                bad = np.flatnonzero((flags != ref_flags).any(axis=1) | (evaluated != ref_eval).any(axis=1))
                assert bad.size == 0, f"n={n} w={window} run={max_run} row {rows[bad[0]].tolist()}"
                checked += rows.shape[0]
                # the public per-series entry point agrees with the vectorised core
                cfg = AnalysisConfig(outlier_window=window, max_transient_outliers=max_run)
                for r in rng.choice(rows.shape[0], min(40, rows.shape[0]), replace=False):
                    out = filter_transient_outliers(list(enumerate(rows[r].tolist())), cfg)
                    assert [f.transient_outlier for f in out] == ref_flags[r].tolist()
        c.detail = f"{checked} series x config combinations"


# --- 5 -------------------------------------------------------------------------

def _optimal_partition(x, penalty, min_size=2):
    """Unpruned optimal partitioning over every admissible last change point."""
    n = len(x)
    best = [math.inf] * (n + 1)
    best[0] = -penalty
    last = [0] * (n + 1)
    for t in range(min_size, n + 1):
        for s in range(0, t - min_size + 1):
            if s != 0 and s < min_size:
                continue
            seg = x[s:t]
            v = best[s] + float(((seg - seg.mean()) ** 2).sum()) + penalty
            if v < best[t] - 1e-9:
                best[t], last[t] = v, s
    cps, t = [], n
    while t > 0:
        if last[t] > 0:
            cps.append(last[t])
        t = last[t]
    return sorted(cps), best[n]


def _objective(x, cps, penalty):
    bounds = [0, *cps, len(x)]
    return sum(float(((x[a:b] - x[a:b].mean()) ** 2).sum()) for a, b in zip(bounds, bounds[1:])) \
        + penalty * len(cps)


def test_criterion_5_changepoint_exactness(criterion):
    with criterion(5, "change-point exactness", limit_s=30.0) as c:
        for seed in range(100):
            rng = np.random.default_rng(seed)
            n = int(rng.integers(4, 41))
            levels = np.repeat(rng.normal(0, 3, 5), -(-n // 5))[:n]
            x = levels + rng.normal(0, 1, n)
            for penalty in (bic_penalty(x), float(rng.uniform(0.5, 20))):
                got = pelt(x, penalty)
                want, cost = _optimal_partition(x, penalty)
                assert got == want, (seed, penalty, got, want)
                assert _objective(x, got, penalty) == pytest.approx(cost, abs=1e-9)
            assert detect_change_points(x, CFG) == pelt(x, bic_penalty(x))
        for k in range(2, 39):
            assert detect_change_points([10.0] * k + [14.0] * (40 - k), CFG) == [k]
        c.detail = "100 series x 2 penalties, steps at 2..38"


# --- 6 -------------------------------------------------------------------------

class _Interrupt(Exception):
    pass


class _StopAfter:
    def __init__(self, inner, k):
        self.inner, self.left = inner, k

    def __getattr__(self, name):
        return getattr(self.inner, name)

    def measure(self, *a, **kw):
        if self.left == 0:
            raise _Interrupt
        self.left -= 1
        return self.inner.measure(*a, **kw)


BUNDLE_FILES = ("raw.csv", "campaign.json", "events.json", "series.json", "summary.json",
                "index.html")


def test_criterion_6_determinism_and_resume(tmp_path, criterion, capsys):
    with criterion(6, "determinism and resumability", limit_s=30.0) as c:
        camp = write_synthetic_campaign(tmp_path / "camp", step_means(20, step_at=10),
                                        rng_seed=11, repetitions=10, batch_size=37)
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert main(["run", "--config", str(camp.pipeline_config), "--analysis-config",
                         str(camp.analysis_config), "--out", str(out)]) == 0
            outs.append(out)
        for f in BUNDLE_FILES:
            assert (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes(), f

        cfg = load_pipeline_config(camp.pipeline_config)
        part = tmp_path / "part"
        backend = TraceBackend.from_file(cfg.trace_manifest, cfg.rng_seed)
        with pytest.raises(_Interrupt):
            run_campaign(cfg, _StopAfter(backend, 77), part)
        assert main(["measure", "--config", str(camp.pipeline_config), "--out", str(part),
                     "--resume", "--skip-stability"]) == 0
        capsys.readouterr()
        assert (part / "raw.csv").read_bytes() == (outs[0] / "raw.csv").read_bytes()
        c.detail = f"{len(BUNDLE_FILES)} artifacts identical, resume after 77/200 tasks"


# --- 7 -------------------------------------------------------------------------

def _probe_report(tmp_path, deltas):
    camp = write_synthetic_campaign(tmp_path, [100.0], stability=deltas)
    cfg = load_pipeline_config(camp.pipeline_config)
    backend = TraceBackend.from_file(cfg.trace_manifest, cfg.rng_seed)
    return verify_stability(backend.stability_probe(cfg), cfg)


def test_criterion_7_stability_protocol(tmp_path, criterion):
    with criterion(7, "stability protocol", limit_s=5.0) as c:
        r = _probe_report(tmp_path / "flat", [5.0])
        assert r.stable and len(r.baseline_samples) == 5
        assert len(r.probe_scores) == 30 and all(z == 0.0 for z in r.probe_scores)

        spike_at = 12
        deltas = [5.0] * (5 + spike_at) + [50.0] + [5.0] * 20
        r = _probe_report(tmp_path / "spike", deltas)
        assert not r.stable and r.first_violation_index == spike_at
        assert abs(r.probe_scores[spike_at]) > 3.5

        # same spike over a baseline with non-zero MAD
        base = [4.9, 5.0, 5.1, 5.0, 4.95]
        deltas = base + [base[i % 5] for i in range(20)] + [50.0] + base * 2
        r = _probe_report(tmp_path / "noisy", deltas)
        assert not r.stable and r.first_violation_index == 20 and not r.mad_degenerate
        assert abs(r.probe_scores[20]) > 3.5
        assert all(abs(z) <= 3.5 for z in r.probe_scores[:20])
        c.detail = f"spike z = {r.probe_scores[20]:.1f}"


# --- 8 -------------------------------------------------------------------------

def test_criterion_8_summary_tallies(tmp_path, criterion, capsys):
    with criterion(8, "summary tallies by recount", limit_s=60.0) as c:
        bundles = tmp_path / "jsoup"
        bundles.mkdir()
        for f in ("events.json", "series.json"):
            shutil.copyfile(FIXTURES / "jsoup_rq1" / f, bundles / f)
        assert main(["report", str(bundles)]) == 0
        capsys.readouterr()
        summary = json.loads((bundles / "summary.json").read_text())
        assert summary["commits"] == 1944
        assert f"{summary['normal_rate']:.2%}" == "92.64%"
        assert summary["significant"] == 216 and summary["regressions"] == 124

        # independent tally straight from the bundle JSON
        series = json.loads((bundles / "series.json").read_text())["commits"]
        events = json.loads((bundles / "events.json").read_text())["events"]
        sig = [e for e in events if e["level"] >= 1]
        assert len(series) == 1944 and sum(1 for s in series if s["is_normal"]) == 1801
        assert len(sig) == 216 and sum(e["direction"] == "regression" for e in sig) == 124
        c.detail = (f"{summary['commits']} commits, {summary['normal_rate']:.2%} normal, "
                    f"{summary['significant']} significant, {summary['regressions']} regressions")
