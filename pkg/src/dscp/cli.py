"""Command-line entry point: ``dscp <subcommand> ...``.

Subcommands
-----------
synth      write a synthetic series CSV plus a ground-truth JSON sidecar
calibrate  fit the point predictor and build a DSCP calibration store
predict    DSCP intervals for every forecast origin in a series
evaluate   run the benchmark and write report.csv / report.json / intervals.csv
sweep      rerun the benchmark over several horizons and write sweep.csv
simulate   carbon-aware scheduling simulation
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from dscp import carbon
from dscp.bench import chronological_split, load_config, load_frame, run_benchmark, sensitivity_sweep
from dscp.conformal import dscp_assign, dscp_calibrate, dscp_predict_many
from dscp.core import CalibrationStore, read_csv
from dscp.errors import DSCPError, InvalidConfig
from dscp.predictors import Predictor, fit
from dscp.synth import KINDS, ScenarioSpec, generate, write_scenario

log = logging.getLogger("dscp")

SIMULATE_KEYS = {
    "lambda_risk", "alpha", "window_n", "gamma", "carbon_intensity", "strategy", "forecaster",
    "history", "a", "seed", "task_duration", "n_machines", "theta", "N_max",
}


def _param(text: str):
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    try:
        return key, json.loads(value)
    except json.JSONDecodeError:
        return key, value


def cmd_synth(args) -> None:
    spec = ScenarioSpec(args.kind, args.length, args.seed, dict(args.param or []))
    truth = args.truth or str(Path(args.out).with_suffix(".truth.json"))
    write_scenario(generate(spec), args.out, truth)
    print(f"wrote {args.out} and {truth}")


def cmd_calibrate(args) -> None:
    cfg = load_config(args.config)
    parts = chronological_split(load_frame(cfg), cfg.split)
    predictor = fit(cfg.predictor, parts.train, cfg.a, cfg.b)
    store = dscp_calibrate(predictor, parts.calib, cfg.method_config("dscp"), cfg.a, cfg.b, cfg.seed)
    config = {**store.config, "a": cfg.a, "b": cfg.b, "predictor": predictor.to_dict()}
    store = dataclasses.replace(store, config=config)
    store.save(args.out)
    print(f"wrote {args.out}: {len(store.anchors)} windows, k={store.k}")


def cmd_predict(args) -> None:
    store = CalibrationStore.load(args.store)
    if "predictor" not in store.config:
        raise InvalidConfig(f"{args.store} has no embedded predictor; create it with 'dscp calibrate'")
    predictor = Predictor.from_dict(store.config["predictor"])
    a, b = predictor.a, predictor.b
    frame = read_csv(args.data)
    y = np.asarray(frame.target, dtype=float)
    if y.size < a:
        raise InvalidConfig(f"series has {y.size} points, fewer than the input length a={a}")
    ends = np.arange(a - 1, y.size)
    if args.last:
        ends = ends[-1:]
    blocks = np.array([y[t - a + 1:t + 1] for t in ends])
    preds = predictor.predict_many(blocks)
    labels = dscp_assign(store, preds)
    stride = int(frame.stride or 1)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("method", "alpha", "anchor", "step", "lower", "pred", "upper", "truth"))
        for alpha in args.alpha:
            ivs = dscp_predict_many(store, preds, alpha, frame.timestamps[ends], labels)
            for t, iv in zip(ends, ivs):
                for j in range(b):
                    truth = repr(float(y[t + 1 + j])) if t + 1 + j < y.size else ""
                    writer.writerow(["dscp", repr(alpha), int(iv.anchor), j + 1, repr(float(iv.lower[j])),
                                     repr(float(iv.pred[j])), repr(float(iv.upper[j])), truth])
    print(f"wrote {args.out}: {len(ends)} origins x {b} steps, stride {stride}")


def cmd_evaluate(args) -> None:
    cfg = load_config(args.config)
    if args.out_dir:
        cfg.out_dir = args.out_dir
    if cfg.out_dir is None:
        raise InvalidConfig("set out_dir in the config or pass --out-dir")
    result = run_benchmark(cfg)
    for r in result.reports:
        print(f"{r.method:12s} alpha={r.alpha:<5g} dcov={r.delta_cov:+.2f} width={r.pi_width:.4g} winkler={r.winkler:.4g}")


def cmd_sweep(args) -> None:
    cfg = load_config(args.config)
    if args.out_dir:
        cfg.out_dir = args.out_dir
    results = sensitivity_sweep(cfg, args.horizons)
    for b, reports in results.items():
        for r in reports:
            print(f"b={b:<3d} {r.method:12s} alpha={r.alpha:<5g} winkler={r.winkler:.4g}")


def cmd_simulate(args) -> None:
    doc = {}
    if args.config:
        doc = json.loads(Path(args.config).read_text())
        unknown = set(doc) - SIMULATE_KEYS
        if unknown:
            raise InvalidConfig(f"unknown simulate config keys: {sorted(unknown)}")
    gamma = float(doc.get("gamma", 0.95))
    intensity = float(doc.get("carbon_intensity", 0.4))
    if args.scenario:
        scenario = carbon.read_scenario_csv(args.scenario, gamma, intensity)
    else:
        base = carbon.bundled_scenario(seed=int(doc.get("seed", 0)))
        scenario = dataclasses.replace(base, gamma=gamma, carbon_intensity=intensity)
    n = int(doc.get("window_n", 11))
    history = int(doc.get("history", (2 * len(scenario)) // 3))
    forecaster = carbon.Forecaster(
        doc.get("forecaster", "dscp"), scenario, history, n + 1, alpha=float(doc.get("alpha", 0.1)),
        a=int(doc.get("a", 24)), theta=float(doc.get("theta", 0.05)), N_max=int(doc.get("N_max", 6)),
        seed=int(doc.get("seed", 0)),
    )
    policy = carbon.RiskPolicy(float(doc.get("lambda_risk", 0.25)))
    result = carbon.simulate(scenario, forecaster, policy, doc.get("strategy", "first_fit"), n, start=history,
                             task_duration=int(doc.get("task_duration", 1)),
                             n_machines=int(doc.get("n_machines", 8)))
    meta = {"forecaster": forecaster.kind, "lambda_risk": policy.lambda_risk, "window_n": n,
            "strategy": doc.get("strategy", "first_fit"), "start": history}
    carbon.write_simulation(result, args.out_dir, meta)
    print(f"emissions {result.emissions:.2f} kg CO2 ({forecaster.kind}); wrote {args.out_dir}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dscp", description="Dual-splitting conformal intervals for multi-step forecasts.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic series")
    p.add_argument("--kind", choices=KINDS, required=True)
    p.add_argument("--length", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--param", type=_param, action="append", metavar="KEY=VALUE",
                   help="generator parameter; VALUE is parsed as JSON when possible")
    p.add_argument("--out", required=True)
    p.add_argument("--truth", help="sidecar path (default: <out>.truth.json)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("calibrate", help="fit the predictor and build a calibration store")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("predict", help="intervals from a calibration store")
    p.add_argument("--store", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--alpha", type=float, nargs="+", default=[0.1])
    p.add_argument("--last", action="store_true", help="only the final forecast origin")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="benchmark every configured method")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="horizon sensitivity sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--horizons", type=int, nargs="+", default=[6, 12, 18, 24, 30])
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="carbon-aware scheduling simulation")
    p.add_argument("--scenario", help="CSV with t, renewable_kw, load_kw, price (default: bundled scenario)")
    p.add_argument("--config")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except (DSCPError, OSError) as exc:
        print(f"dscp {args.command}: {exc}", file=sys.stderr)
        return 2
    return 0
