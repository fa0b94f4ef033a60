"""Acceptance suite: one test per shipped criterion (A1-A7), each printing a
single PASS/FAIL verdict line with its wall-clock time.

Each criterion collects every violated condition before asserting, so a FAIL
names all broken bounds at once. The bounds themselves (tolerances,
correlation floors, significance levels, runtime caps) are the package's
acceptance contract; loosening one here is a contract change, not a test fix.
"""

import math
import time
from fractions import Fraction

import numpy as np
import pytest
import scipy.stats

from helpers import det, random_track, scale_track, shift_track, track_from_boxes
from mutadet.analysis import analyze, compare_suites, correlate
from mutadet.reports import canonical_json
from mutadet.scores import SCORE_KEYS
from mutadet.service import op_analyze, op_simulate
from mutadet.simulator import SceneSpec, mcb_grid, mcd_grid, simulate_dataset
from mutadet.stats import (
    binomial_tail_greater,
    chi_square_upper,
    f_upper,
    kruskal_wallis,
    spearman,
    student_t_two_sided,
)
from mutadet.types import AnalysisConfig, BBox, iou
from mutadet.uncertainty import convex_hull_area, summarize


def _check(failures, ok, message):
    if not ok:
        failures.append(message)


def _finish(label, failures, t0, cap_seconds):
    elapsed = time.perf_counter() - t0
    if elapsed >= cap_seconds:
        failures.append(f"runtime {elapsed:.1f}s over the {cap_seconds}s cap")
    print(f"[{label}] {'PASS' if not failures else 'FAIL'} ({elapsed:.1f}s)")
    assert not failures, f"{label}: " + "; ".join(failures)


def _entropy(probs):
    return -math.fsum(p * math.log(p) for p in probs if p > 0.0)


def test_a1_geometry_and_uncertainty_oracles():
    failures = []
    t0 = time.perf_counter()
    tol = 1e-9

    same = BBox(0.0, 0.0, 2.0, 2.0)
    _check(failures, iou(same, same) == 1.0, "iou of a box with itself is not 1")
    _check(
        failures,
        iou(BBox(0, 0, 1, 1), BBox(2, 2, 3, 3)) == 0.0,
        "iou of disjoint boxes is not 0",
    )
    _check(
        failures,
        abs(iou(BBox(0, 0, 2, 2), BBox(1, 1, 3, 3)) - 1 / 7) <= tol,
        "iou overlap oracle 1/7 missed",
    )
    _check(
        failures,
        abs(convex_hull_area([(0, 0), (1, 0), (1, 1), (0, 1)]) - 1.0) <= tol,
        "unit-square hull area is not 1",
    )

    seven_three = track_from_boxes([(0, 0, 10, 10)] * 10, labels=[0] * 7 + [1] * 3)
    s = summarize(seven_three)
    _check(failures, abs(s.vr - 0.3) <= tol, "variation ratio 7/3 split oracle missed")
    distinct = track_from_boxes([(0, 0, 10, 10)] * 4, labels=[0, 1, 2, 3])
    _check(failures, abs(summarize(distinct).vr - 0.75) <= tol,
           "variation ratio all-distinct oracle missed")

    two_run = track_from_boxes(
        [(0, 0, 10, 10)] * 2, labels=[0, 0], probs=[(0.8, 0.2), (0.6, 0.4)]
    )
    s = summarize(two_run)
    se_oracle = _entropy([0.7, 0.3])
    mi_oracle = se_oracle - (_entropy([0.8, 0.2]) + _entropy([0.6, 0.4])) / 2
    _check(failures, abs(s.se - se_oracle) <= tol, "entropy of the mean oracle missed")
    _check(failures, abs(s.mi - mi_oracle) <= tol, "information-gap oracle missed")
    flip = track_from_boxes(
        [(0, 0, 10, 10)] * 2, labels=[0, 1], probs=[(1.0, 0.0), (0.0, 1.0)]
    )
    _check(failures, abs(summarize(flip).mi - math.log(2)) <= tol,
           "confident-disagreement information gap is not ln 2")

    spread = track_from_boxes([(0, 0, 1, 1), (2, 2, 3, 3)], labels=[0, 0])
    _check(failures, abs(summarize(spread).tv - 4.0) <= tol, "coordinate variance oracle missed")
    slide = track_from_boxes([(0, 5, 8, 9), (1, 5, 8, 9), (2, 5, 8, 9)], labels=[0] * 3)
    _check(failures, abs(summarize(slide).tv - 2 / 3) <= tol,
           "single-coordinate variance oracle missed")

    corner_drift = track_from_boxes(
        [(0, 0, 10, 10), (1, 0, 11, 10), (0, 1, 10, 11)], labels=[0] * 3
    )
    _check(failures, abs(summarize(corner_drift).ps - 2.0) <= tol,
           "corner-hull area oracle missed")
    two_points = track_from_boxes([(0, 0, 10, 10), (5, 5, 15, 15)], labels=[0, 0])
    _check(failures, summarize(two_points).ps == 0.0, "two-run corner hull is not 0")

    rng = np.random.default_rng(20240817)
    sweep_bad = 0
    for _ in range(10_000):
        track = random_track(rng)
        s = summarize(track)
        k = len(track.per_run[next(i for i, d in enumerate(track.per_run) if d)].probs)
        ok = (
            0.0 <= s.vr <= 1.0 - 1.0 / s.n_present + 1e-12
            and 0.0 <= s.mi <= s.se + 1e-9
            and s.se <= math.log(k) + 1e-9
        )
        shifted = summarize(shift_track(track, 37.5, -12.25))
        ok = ok and math.isclose(shifted.tv, s.tv, rel_tol=1e-6, abs_tol=1e-9)
        ok = ok and math.isclose(shifted.ps, s.ps, rel_tol=1e-6, abs_tol=1e-9)
        scaled = summarize(scale_track(track, 2.0))
        ok = ok and scaled.tv == 4.0 * s.tv and scaled.ps == 4.0 * s.ps
        ok = ok and (shifted.vr, shifted.se, shifted.mi) == (s.vr, s.se, s.mi)
        ax, ay, aw, ah = rng.uniform(0, 100, 2).tolist() + rng.uniform(0.1, 50, 2).tolist()
        bx, by, bw, bh = rng.uniform(0, 100, 2).tolist() + rng.uniform(0.1, 50, 2).tolist()
        a = BBox(ax, ay, ax + aw, ay + ah)
        b = BBox(bx, by, bx + bw, by + bh)
        ok = ok and iou(a, b) == iou(b, a) and iou(a, a) == 1.0
        sweep_bad += not ok
    _check(failures, sweep_bad == 0, f"{sweep_bad}/10000 random tracks broke a property")

    _finish("A1 geometry/uncertainty oracles", failures, t0, 30)


def test_a2_statistics_oracles():
    failures = []
    t0 = time.perf_counter()

    kw = kruskal_wallis([[1, 2, 3], [4, 5, 6], [7, 8, 9]])
    _check(failures, abs(kw.statistic - 7.2) <= 1e-9, f"rank statistic {kw.statistic} != 7.2")
    _check(failures, abs(kw.p_value - math.exp(-3.6)) <= 1e-6,
           f"rank p {kw.p_value} not within 1e-6 of exp(-3.6)")
    _check(failures, abs(kw.effect - 13 / 15) <= 1e-4, f"rank effect {kw.effect} != 0.8667")

    sp = spearman([1, 2, 3, 4, 5], [1, 3, 2, 5, 4])
    _check(failures, abs(sp.statistic - 0.8) <= 1e-12, f"rank correlation {sp.statistic} != 0.8")
    t_oracle = 0.8 * math.sqrt(3 / (1 - 0.64))
    p_oracle = 2 * scipy.stats.t.sf(t_oracle, 3)
    _check(failures, abs(sp.p_value - p_oracle) <= 1e-3,
           f"rank-correlation p {sp.p_value} vs t-tail oracle {p_oracle}")

    binom_bad = []
    for k, n, p0 in [
        (1, 10, 0.05), (2, 30, 0.05), (5, 30, 0.05), (30, 30, 0.05),
        (3, 100, 0.01), (7, 50, 0.1), (25, 50, 0.5), (49, 50, 0.9),
        (1, 2, 0.3), (11, 12, 0.6),
    ]:
        q = Fraction(p0)
        exact = sum(
            Fraction(math.comb(n, i)) * q**i * (1 - q) ** (n - i) for i in range(k, n + 1)
        )
        got = binomial_tail_greater(k, n, p0)
        if abs(got - float(exact)) > 1e-10 * float(exact):
            binom_bad.append((k, n, p0))
    _check(failures, not binom_bad, f"binomial tail off at {binom_bad}")

    rng = np.random.default_rng(7)
    grid_bad = 0
    for _ in range(70):
        df = rng.integers(1, 40)
        x = float(rng.uniform(0.01, 3.0) * df)
        grid_bad += abs(chi_square_upper(x, int(df)) - scipy.stats.chi2.sf(x, df)) > 1e-10
    for _ in range(70):
        df = rng.integers(1, 40)
        t = float(rng.uniform(-6.0, 6.0))
        grid_bad += abs(student_t_two_sided(t, int(df)) - 2 * scipy.stats.t.sf(abs(t), df)) > 1e-10
    for _ in range(60):
        d1, d2 = rng.integers(1, 30), rng.integers(1, 30)
        f = float(rng.uniform(0.05, 8.0))
        grid_bad += abs(f_upper(f, int(d1), int(d2)) - scipy.stats.f.sf(f, d1, d2)) > 1e-10
    _check(failures, grid_bad == 0, f"{grid_bad}/200 tail-grid points off by more than 1e-10")

    _finish("A2 statistics oracles", failures, t0, 30)


def test_a3_identity_mutant_scores_nothing():
    failures = []
    t0 = time.perf_counter()

    spec = SceneSpec(n_images=100, objects_min=1, objects_max=5, seed=3)
    _, records = simulate_dataset(spec, [None], 30)
    report = analyze(records, config=AnalysisConfig(n_runs=30))
    row = report["suites"]["all"]["mutants"][0]

    for key in SCORE_KEYS:
        value = row["scores"][key]
        if key.startswith("ua_") and key.endswith(("_miss", "_ghost")):
            _check(failures, value is None, f"{key} = {value!r}, expected absent")
        else:
            _check(failures, value == 0.0, f"{key} = {value!r}, expected exactly 0.0")
    for criterion, verdict in row["kills"].items():
        _check(failures, verdict["killed"] is False, f"identity mutant killed under {criterion}")
        _check(failures, verdict["min_p_value"] == 1.0,
               f"{criterion} min p {verdict['min_p_value']} != 1.0")
    _check(failures, report["suites"]["all"]["aggregate"] == row["scores"],
           "single-mutant aggregate differs from the row")

    _finish("A3 identity mutant", failures, t0, 60)


def test_a4_dropout_rate_trend():
    failures = []
    t0 = time.perf_counter()

    for seed in range(5):
        spec = SceneSpec(n_images=150, objects_min=1, objects_max=5, seed=seed)
        _, records = simulate_dataset(spec, list(mcd_grid()), 30)
        report = analyze(records, config=AnalysisConfig(n_runs=30))
        rows = {
            r["score_key"]: r
            for r in correlate(report, "mcd", keys=["iou_ms", "obj_ms_miss"])["rows"]
        }
        overlap = rows["iou_ms"]
        _check(failures, overlap["status"] == "ok" and overlap["statistic"] >= 0.95,
               f"seed {seed}: overlap-score correlation {overlap.get('statistic')} < 0.95")
        _check(failures, overlap.get("p_value", 1.0) < 0.01,
               f"seed {seed}: overlap-score p {overlap.get('p_value')} >= 0.01")
        miss = rows["obj_ms_miss"]
        _check(failures, miss["status"] == "ok" and miss["statistic"] >= 0.90,
               f"seed {seed}: miss-score correlation {miss.get('statistic')} < 0.90")

    _finish("A4 dropout-rate trend", failures, t0, 300)


def test_a5_dropblock_grid_trend():
    failures = []
    t0 = time.perf_counter()

    spec = SceneSpec(n_images=100, objects_min=1, objects_max=5, seed=0)
    _, records = simulate_dataset(spec, list(mcb_grid()), 20)
    report = analyze(records, config=AnalysisConfig(n_runs=20))
    row = correlate(report, "mcb", keys=["iou_ms"])["rows"][0]
    _check(failures, row["status"] == "ok", f"grid correlation not computable: {row}")
    _check(failures, row.get("effect", 0.0) >= 0.90,
           f"joint correlation {row.get('effect')} < 0.90")
    _check(failures, row.get("p_value", 1.0) < 0.01, f"F-test p {row.get('p_value')} >= 0.01")

    _finish("A5 dropblock-grid trend", failures, t0, 600)


def test_a6_suite_difficulty_discriminability():
    failures = []
    t0 = time.perf_counter()

    passing = 0
    outcomes = []
    for seed in range(5):
        records = []
        for prefix, lo, hi in (("low", 1, 3), ("high", 10, 12)):
            spec = SceneSpec(
                n_images=30, objects_min=lo, objects_max=hi, seed=seed, image_prefix=prefix
            )
            _, recs = simulate_dataset(spec, list(mcd_grid()), 10)
            records.extend(recs)
        suites = {r.image_id: r.image_id.split("_")[0] for r in records}
        report = analyze(records, config=AnalysisConfig(n_runs=10), suites=suites)
        row = compare_suites(report, keys=["obj_ms_miss"])["rows"][0]
        ok = row["status"] == "ok" and row["p_value"] < 0.01 and row["effect"] >= 0.14
        passing += ok
        outcomes.append(f"seed {seed}: p={row.get('p_value')} effect={row.get('effect')}")
    _check(failures, passing >= 4, f"only {passing}/5 seeds discriminate; " + "; ".join(outcomes))

    _finish("A6 suite discriminability", failures, t0, 300)


def test_a7_pipeline_determinism():
    failures = []
    t0 = time.perf_counter()

    outputs = []
    for _ in range(2):
        data = op_simulate(images=6, objects_min=1, objects_max=4, seed=41, runs=4, grid="full")
        report = op_analyze(
            [data["records"]], ground_truth_text=data["ground_truth"], config={"alpha": "0.01"}
        )
        outputs.append((data["records"], data["ground_truth"], canonical_json(report)))
    _check(failures, outputs[0][0] == outputs[1][0], "simulated records differ between runs")
    _check(failures, outputs[0][1] == outputs[1][1], "ground truth differs between runs")
    _check(failures, outputs[0][2] == outputs[1][2], "canonical reports are not byte-identical")

    _finish("A7 pipeline determinism", failures, t0, 60)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v", "-s"]))
