"""Acceptance criteria, one test each.

Every test prints a single ``PASS``/``FAIL`` line with the measured value,
visible even under output capture.
"""

import json
import time

import numpy as np
import pytest

from dscp.bench import config_from_dict, relative_spread, run_benchmark, sensitivity_sweep
from dscp.carbon import Forecaster, RiskPolicy, bundled_scenario, plan_cost, simulate, solve_window
from dscp.cli import main
from dscp.clustering import silhouette_score, soft_dtw
from dscp.conformal import ACIState, MethodConfig, build_store, conformal_quantiles, cp_interval, dscp_predict_many
from dscp.core import make_supervised
from dscp.error_engine import adaptive_merge, build_step_sets, ks_two_sample
from dscp.predictors import PredictorSpec, fit
from dscp.synth import ScenarioSpec, generate
from oracles import brute_window, dtw_classic, ks_d_direct, ks_series_p, order_stat_quantiles, silhouette_direct

pytestmark = pytest.mark.slow


@pytest.fixture
def report(capsys):
    def emit(name, passed, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
    return emit


def by_method(reports):
    return {(r.method, r.alpha): r for r in reports}


def test_coverage_guarantee(report):
    start = time.perf_counter()
    cfg = config_from_dict({"scenario": "exchangeable_ar1", "length": 10_000, "scenario_params": {"phi": 0.5, "sigma": 1.0},
                            "split": [0.5, 0.25, 0.25], "a": 8, "b": 6, "ar_order": 1,
                            "methods": ["cp", "dscp"], "alpha": [0.05, 0.1, 0.15]})
    reports = run_benchmark(cfg).reports
    elapsed = time.perf_counter() - start
    worst = max(abs(r.delta_cov) for r in reports)
    windows = min(r.n_windows for r in reports)
    passed = worst <= 3.0 and windows >= 2000 and elapsed < 120
    report("coverage guarantee", passed, f"max |dcov| {worst:.2f} pp over {windows} windows in {elapsed:.1f}s")
    assert passed


def test_dual_splitting_wins_on_composite(report):
    cfg = config_from_dict({"scenario": "composite", "length": 4800, "split": [0.5, 0.25, 0.25], "a": 24, "b": 12,
                            "predictor": "seasonal_naive", "period": 24, "methods": ["cp", "dscp"], "alpha": [0.1]})
    got = by_method(run_benchmark(cfg).reports)
    ratio = got["dscp", 0.1].winkler / got["cp", 0.1].winkler
    report("dual splitting on composite", ratio <= 0.9, f"winkler ratio dscp/cp {ratio:.3f}")
    assert ratio <= 0.9


def test_asymmetry_under_bias(report):
    rng = np.random.default_rng(5)
    m, b, c = 3000, 6, 2.0
    truth = rng.normal(0, 1, (m, b)) + rng.normal(0, 3, (m, 1))
    noise_free = truth - rng.normal(0, 1, (m, b))
    pred = noise_free + c
    # errors are truth - biased prediction, centred at -c
    errors = truth - pred
    calib, test = slice(0, 1000), slice(1000, m)
    store = build_store(np.arange(1000), pred[calib], errors[calib], MethodConfig("dscp", 0.1))
    ivs = dscp_predict_many(store, pred[test], 0.1)
    mid = np.mean([(iv.lower + iv.upper) / 2 - p for iv, p in zip(ivs, pred[test])])
    dscp_width = np.mean([iv.width.mean() for iv in ivs])
    cp_width = cp_interval(errors[calib], pred[1000], 0.1).width.mean()
    passed = abs(mid + c) <= 0.15 and cp_width >= 1.1 * dscp_width
    report("asymmetry", passed, f"midpoint offset {mid:+.3f}, cp/dscp width {cp_width / dscp_width:.2f}")
    assert passed


def merge_boundary(seed):
    # period 12, night on positions 0..5 and day on 6..11 of each cycle
    spec = ScenarioSpec("periodic_heteroscedastic", 12 * 300, seed, {"period": 12, "day_start": 6})
    frame = generate(spec).frame
    pred = fit(PredictorSpec("seasonal_naive", {"period": 12}), frame, 12, 12)
    sup = make_supervised(frame, 12, 12)
    aligned = (sup.positions + 1) % 12 == 0
    E = sup.truths[aligned] - pred.predict_many(sup.inputs[aligned])
    merged = adaptive_merge(0.05, build_step_sets(E))
    return merged.partition[1][0] + 1 if len(merged.partition) > 1 else None


def test_adaptive_merge_boundary(report):
    boundaries = [merge_boundary(seed) for seed in range(50)]
    hits = sum(b is not None and abs(b - 7) <= 1 for b in boundaries)
    report("adaptive merge boundary", hits >= 45, f"boundary at step 7 +/- 1 in {hits}/50 runs")
    assert hits >= 45


def test_oracle_equivalences(report):
    rng = np.random.default_rng(99)
    q_ok = 0
    for _ in range(1000):
        E = rng.normal(size=int(rng.integers(1, 60))).round(int(rng.integers(0, 3)))
        alpha = float(rng.choice([0.01, 0.05, 0.1, 0.2, 0.5]))
        q_ok += conformal_quantiles(E, alpha) == order_stat_quantiles(E.tolist(), alpha)
    ks_gap = 0.0
    for _ in range(200):
        A = rng.normal(size=int(rng.integers(5, 80)))
        B = rng.normal(0.3, 1, size=int(rng.integers(5, 80)))
        _, p = ks_two_sample(A, B)
        ks_gap = max(ks_gap, abs(p - ks_series_p(ks_d_direct(A, B), len(A), len(B))))
    dtw_gap = 0.0
    for _ in range(100):
        x, y = rng.normal(size=int(rng.integers(2, 12))), rng.normal(size=int(rng.integers(2, 12)))
        dtw_gap = max(dtw_gap, abs(soft_dtw(x, y, 0.001) - dtw_classic(x, y)))
    sil_gap = 0.0
    for _ in range(100):
        X = rng.normal(size=(int(rng.integers(4, 40)), 3))
        labels = rng.integers(0, int(rng.integers(2, 5)), len(X))
        if len(np.unique(labels)) < 2:
            labels[:2] = [0, 1]
        sil_gap = max(sil_gap, abs(silhouette_score(X, labels) - silhouette_direct(X, labels)))
    passed = q_ok == 1000 and ks_gap <= 1e-9 and dtw_gap <= 1e-3 and sil_gap <= 1e-9
    report("oracle equivalences", passed,
           f"quantiles {q_ok}/1000 exact, ks {ks_gap:.1e}, soft-dtw {dtw_gap:.1e}, silhouette {sil_gap:.1e}")
    assert passed


def test_aci_long_run_coverage(report):
    rng = np.random.default_rng(17)
    state = ACIState(rng.normal(size=(500, 1)), 0.1, 0.01)
    hits = []
    for y in rng.normal(size=10_000):
        covered = bool(state.interval([0.0]).covers([y])[0])
        hits.append(covered)
        state.update([covered])
    cov = float(np.mean(hits))
    report("ACI long-run coverage", abs(cov - 0.9) <= 0.015, f"coverage {cov:.4f}")
    assert abs(cov - 0.9) <= 0.015


def test_horizon_robustness(report):
    cfg = config_from_dict({"scenario": "periodic_heteroscedastic", "length": 3000, "split": [0.5, 0.25, 0.25],
                            "a": 24, "ar_order": 3, "methods": ["dscp", "per_step_cp"], "alpha": [0.1]})
    results = sensitivity_sweep(cfg, [6, 12, 18, 24, 30])
    spread = {m: relative_spread([by_method(r)[m, 0.1].winkler for r in results.values()])
              for m in ("dscp", "per_step_cp")}
    passed = spread["dscp"] <= spread["per_step_cp"]
    report("horizon robustness", passed,
           f"relative spread dscp {spread['dscp']:.3f} vs per_step_cp {spread['per_step_cp']:.3f}")
    assert passed


def test_scheduler_optimality(report):
    worst = 0.0
    for seed in range(200):
        rng = np.random.default_rng(seed)
        renewable = rng.integers(0, 8, 3).astype(float)
        running = rng.integers(0, 3, 3).astype(float)
        load = rng.integers(0, 4, 3).astype(float)
        backlog = float(rng.integers(0, 2))
        prices = rng.uniform(0.5, 10, 3)
        gamma = float(rng.uniform(0.5, 1.0))
        p_max = float(prices.max() * rng.uniform(1.0, 3.0))
        plan = solve_window(renewable, load, backlog, prices, gamma, p_max, running)
        cost = plan_cost(plan, prices, renewable, running, gamma, p_max)
        worst = max(worst, abs(cost - brute_window(renewable, load, backlog, prices, gamma, p_max, running)))
    report("scheduler optimality", worst <= 1e-9, f"max gap to enumeration {worst:.1e} on 200 instances")
    assert worst <= 1e-9


def test_case_study_direction(report):
    scenario = bundled_scenario()
    history = 2 * len(scenario) // 3
    e = {kind: simulate(scenario, Forecaster(kind, scenario, history, 12), RiskPolicy(0.25), n=11,
                        start=history).emissions
         for kind in ("none_cp", "dscp", "perfect")}
    passed = e["dscp"] <= e["none_cp"] and e["perfect"] <= min(e["dscp"], e["none_cp"])
    margin = (e["none_cp"] - e["dscp"]) / e["none_cp"]
    report("case-study direction", passed,
           f"kg CO2 none_cp {e['none_cp']:.1f}, dscp {e['dscp']:.1f} ({margin:.1%} lower), perfect {e['perfect']:.1f}")
    assert passed


def test_determinism(report, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"scenario": "composite", "length": 1500, "a": 24, "b": 12, "predictor": "seasonal_naive",
                               "period": 24, "methods": ["cp", "per_step_cp", "dscp", "enbpi", "aci"]}))
    for name in ("one", "two"):
        assert main(["evaluate", "--config", str(cfg), "--out-dir", str(tmp_path / name)]) == 0
    same = (tmp_path / "one" / "report.csv").read_bytes() == (tmp_path / "two" / "report.csv").read_bytes()
    report("determinism", same, "report.csv byte-identical across two evaluate runs" if same else "reports differ")
    assert same
