"""Benchmark orchestration: split, fit, calibrate, evaluate, report.

A run splits the series chronologically into train / calibration / test,
fits one point predictor on the training part, calibrates every interval
method on the calibration part and scores it on the test part. Windows are
built inside each part, so no truth block crosses a split boundary.

Updating methods (``enbpi``, ``aci`` and ``dscp`` with ``dscp_update``) walk
the test windows in time order and learn from a window only once its last
truth step has been observed, i.e. ``b`` anchors later.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np

from dscp.conformal import (
    ACIState,
    EnbPIState,
    MethodConfig,
    abs_quantile,
    build_store,
    dscp_assign,
    dscp_predict_many,
    dscp_update,
    enbpi_style_update,
)
from dscp.core import SeriesFrame, make_supervised, read_csv, validate_frame
from dscp.errors import InvalidConfig
from dscp.metrics import evaluate, write_reports_csv, write_reports_json
from dscp.predictors import Predictor, PredictorSpec, fit
from dscp.synth import ScenarioSpec, generate

log = logging.getLogger(__name__)

INTERVAL_FIELDS = ("method", "alpha", "anchor", "step", "lower", "pred", "upper", "truth")

CONFIG_KEYS = {
    "data", "scenario", "length", "scenario_seed", "scenario_params", "split", "a", "b", "methods",
    "alpha", "theta", "gamma_aci", "N_max", "gamma_dtw", "seed", "out_dir", "recluster_every",
    "enbpi_capacity", "predictor", "period", "ar_order", "ridge", "bias", "dscp_update", "quantile",
}


@dataclass
class RunConfig:
    """Everything one benchmark run needs.

    Exactly one of ``data`` (CSV path) and ``scenario`` (a
    :class:`~dscp.synth.ScenarioSpec`) must be given.
    """

    data: Optional[str] = None
    scenario: Optional[ScenarioSpec] = None
    split: tuple = (0.7, 0.15, 0.15)
    a: int = 24
    b: int = 12
    methods: tuple = ("cp", "dscp")
    alphas: tuple = (0.05, 0.1, 0.15)
    seed: int = 0
    out_dir: Optional[str] = None
    predictor: PredictorSpec = field(default_factory=lambda: PredictorSpec("linear_ar", {"order": 2}))
    theta: float = 0.05
    N_max: int = 6
    gamma_dtw: float = 1.0
    gamma_aci: float = 0.01
    recluster_every: int = 0
    enbpi_capacity: Optional[int] = None
    dscp_update: bool = False
    quantile: str = "conservative"

    def __post_init__(self):
        if (self.data is None) == (self.scenario is None):
            raise InvalidConfig("give exactly one of 'data' and 'scenario'")
        self.split = tuple(float(f) for f in self.split)
        if len(self.split) != 3 or min(self.split) <= 0 or abs(sum(self.split) - 1) > 1e-9:
            raise InvalidConfig(f"split fractions must be three positive numbers summing to 1, got {self.split}")
        if int(self.a) < 1 or int(self.b) < 1:
            raise InvalidConfig("a and b must be >= 1")
        self.alphas = tuple(float(x) for x in np.atleast_1d(self.alphas))
        if not all(0 < x < 1 for x in self.alphas):
            raise InvalidConfig("every alpha must lie in (0, 1)")
        self.methods = tuple(self.methods)
        for m in self.methods:
            self.method_config(m)

    def method_config(self, method: str, alpha: Optional[float] = None) -> MethodConfig:
        alpha = self.alphas[0] if alpha is None else alpha
        if method == "dscp":
            return MethodConfig("dscp", alpha, theta=self.theta, N_max=self.N_max, gamma_dtw=self.gamma_dtw,
                                recluster_every=self.recluster_every, quantile=self.quantile,
                                dscp_update=self.dscp_update)
        if method == "aci":
            return MethodConfig("aci", alpha, gamma_aci=self.gamma_aci, quantile=self.quantile)
        if method in ("enbpi", "enbpi_style"):
            return MethodConfig("enbpi", alpha, enbpi_capacity=self.enbpi_capacity, quantile=self.quantile)
        return MethodConfig(method, alpha, quantile=self.quantile)


def config_from_dict(doc: dict) -> RunConfig:
    """Build a RunConfig from the flat key/value config document."""
    unknown = set(doc) - CONFIG_KEYS
    if unknown:
        raise InvalidConfig(f"unknown config keys: {sorted(unknown)}")
    scenario = None
    if doc.get("scenario") is not None:
        scenario = ScenarioSpec(doc["scenario"], int(doc.get("length", 2000)), int(doc.get("scenario_seed", 0)),
                                dict(doc.get("scenario_params", {})))
    kind = doc.get("predictor", "linear_ar")
    if kind == "seasonal_naive":
        pspec = PredictorSpec(kind, {"period": int(doc.get("period", 1)), "bias": float(doc.get("bias", 0.0))})
    else:
        params = {"order": int(doc.get("ar_order", 2)), "bias": float(doc.get("bias", 0.0))}
        if "ridge" in doc:
            params["ridge"] = float(doc["ridge"])
        pspec = PredictorSpec(kind, params)
    kwargs = {}
    for key in ("a", "b", "seed", "N_max", "recluster_every"):
        if key in doc:
            kwargs[key] = int(doc[key])
    for key in ("theta", "gamma_dtw", "gamma_aci"):
        if key in doc:
            kwargs[key] = float(doc[key])
    if doc.get("enbpi_capacity") is not None:
        kwargs["enbpi_capacity"] = int(doc["enbpi_capacity"])
    if "alpha" in doc:
        kwargs["alphas"] = tuple(np.atleast_1d(doc["alpha"]).tolist())
    if "methods" in doc:
        kwargs["methods"] = tuple(np.atleast_1d(doc["methods"]).tolist())
    if "split" in doc:
        kwargs["split"] = tuple(doc["split"])
    for key in ("out_dir", "quantile"):
        if key in doc:
            kwargs[key] = doc[key]
    if "dscp_update" in doc:
        kwargs["dscp_update"] = bool(doc["dscp_update"])
    return RunConfig(data=doc.get("data"), scenario=scenario, predictor=pspec, **kwargs)


def load_config(path) -> RunConfig:
    with open(path) as fh:
        doc = json.load(fh)
    cfg = config_from_dict(doc)
    if cfg.data is not None and not Path(cfg.data).is_absolute():
        cfg.data = str(Path(path).parent / cfg.data)
    return cfg


def load_frame(cfg: RunConfig) -> SeriesFrame:
    if cfg.data is not None:
        return read_csv(cfg.data)
    return generate(cfg.scenario).frame


def split_bounds(n: int, split) -> tuple:
    """Frame positions ``(train_end, calib_end)``; parts are ``[0, te)``, ``[te, ce)``, ``[ce, n)``."""
    train_end = int(round(n * split[0]))
    calib_end = train_end + int(round(n * split[1]))
    return train_end, calib_end


class Split(NamedTuple):
    train: SeriesFrame
    calib: SeriesFrame
    test: SeriesFrame


def chronological_split(frame: SeriesFrame, split) -> Split:
    frame = validate_frame(frame)
    te, ce = split_bounds(len(frame), split)
    return Split(frame.slice(0, te), frame.slice(te, ce), frame.slice(ce, len(frame)))


def check_no_leakage(parts: Split) -> None:
    """Every training step precedes every calibration step, which precede every test step."""
    if not (parts.train.timestamps[-1] < parts.calib.timestamps[0]
            and parts.calib.timestamps[-1] < parts.test.timestamps[0]):
        raise InvalidConfig("train, calibration and test parts overlap in time")


class BenchmarkResult(NamedTuple):
    reports: list
    intervals: list
    store: object
    predictor: Predictor


def _delayed(n: int, b: int):
    """Yield ``(i, ready)`` where ``ready`` lists windows fully observed before window ``i``."""
    done = 0
    for i in range(n):
        ready = list(range(done, max(done, i - b + 1)))
        done = max(done, i - b + 1)
        yield i, ready


def _evaluate_method(method: str, cfg: RunConfig, calib_err, calib_sup, calib_pred, test_sup, test_pred, seed):
    """Return ``{alpha: (lower, upper)}`` for one method over all test windows."""
    b = test_pred.shape[1]
    out = {}
    if method == "cp":
        for alpha in cfg.alphas:
            q = abs_quantile(calib_err, alpha, cfg.quantile == "interpolated")
            out[alpha] = (test_pred - q, test_pred + q)
    elif method == "per_step_cp":
        for alpha in cfg.alphas:
            q = np.array([abs_quantile(calib_err[:, j], alpha, cfg.quantile == "interpolated") for j in range(b)])
            out[alpha] = (test_pred - q, test_pred + q)
    elif method == "dscp":
        mcfg = cfg.method_config("dscp")
        store = build_store(calib_sup.anchors, calib_pred, calib_err, mcfg, seed)
        if not cfg.dscp_update:
            labels = dscp_assign(store, test_pred)
            for alpha in cfg.alphas:
                ivs = dscp_predict_many(store, test_pred, alpha, test_sup.anchors, labels)
                out[alpha] = (np.array([iv.lower for iv in ivs]), np.array([iv.upper for iv in ivs]))
        else:
            for alpha in cfg.alphas:
                lower, upper = np.empty_like(test_pred), np.empty_like(test_pred)
                current = store
                for i, ready in _delayed(len(test_pred), b):
                    for r in ready:
                        current = dscp_update(current, (test_pred[r]), test_sup.truths[r])
                    iv = dscp_predict_many(current, test_pred[i:i + 1], alpha)[0]
                    lower[i], upper[i] = iv.lower, iv.upper
                out[alpha] = (lower, upper)
        return out, store
    elif method == "enbpi":
        for alpha in cfg.alphas:
            state = EnbPIState.from_calibration(calib_err, cfg.enbpi_capacity)
            lower, upper = np.empty_like(test_pred), np.empty_like(test_pred)
            for i, ready in _delayed(len(test_pred), b):
                for r in ready:
                    state = enbpi_style_update(state, test_sup.truths[r], test_pred[r])
                q = abs_quantile(state.errors(), alpha)
                lower[i], upper[i] = test_pred[i] - q, test_pred[i] + q
            out[alpha] = (lower, upper)
    elif method == "aci":
        for alpha in cfg.alphas:
            state = ACIState(calib_err, alpha, cfg.gamma_aci)
            lower, upper = np.empty_like(test_pred), np.empty_like(test_pred)
            for i, ready in _delayed(len(test_pred), b):
                for r in ready:
                    state.update((lower[r] <= test_sup.truths[r]) & (test_sup.truths[r] <= upper[r]))
                iv = state.interval(test_pred[i])
                lower[i], upper[i] = iv.lower, iv.upper
            out[alpha] = (lower, upper)
    else:
        raise InvalidConfig(f"unknown method {method!r}")
    return out, None


def run_benchmark(cfg: RunConfig, frame: Optional[SeriesFrame] = None) -> BenchmarkResult:
    """Evaluate every configured (method, alpha) pair on the test split.

    Writes ``report.csv``, ``report.json`` and ``intervals.csv`` to
    ``cfg.out_dir`` when set. If a method fails, the reports finished so far
    are written before the error propagates.
    """
    frame = load_frame(cfg) if frame is None else validate_frame(frame)
    parts = chronological_split(frame, cfg.split)
    a, b = int(cfg.a), int(cfg.b)
    predictor = fit(cfg.predictor, parts.train, a, b)
    calib_sup = make_supervised(parts.calib, a, b)
    test_sup = make_supervised(parts.test, a, b)
    check_no_leakage(parts)
    calib_pred = predictor.predict_many(calib_sup.inputs)
    calib_err = calib_sup.truths - calib_pred
    test_pred = predictor.predict_many(test_sup.inputs)

    reports, rows, store = [], [], None
    try:
        for method in cfg.methods:
            name = cfg.method_config(method).label
            log.info("evaluating %s on %d test windows", name, len(test_pred))
            bounds, st = _evaluate_method(method, cfg, calib_err, calib_sup, calib_pred, test_sup, test_pred, cfg.seed)
            store = st if st is not None else store
            for alpha in cfg.alphas:
                lower, upper = bounds[alpha]
                reports.append(evaluate(name, (lower, upper), test_sup.truths, alpha))
                rows.extend(_interval_rows(name, alpha, test_sup.anchors, lower, test_pred, upper, test_sup.truths))
    finally:
        if cfg.out_dir is not None:
            write_outputs(cfg.out_dir, reports, rows)
    return BenchmarkResult(reports, rows, store, predictor)


def _interval_rows(name, alpha, anchors, lower, pred, upper, truths):
    m, b = pred.shape
    return [
        (name, alpha, int(anchors[i]), j + 1, lower[i, j], pred[i, j], upper[i, j], truths[i, j])
        for i in range(m)
        for j in range(b)
    ]


def write_outputs(out_dir, reports, rows) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_reports_csv(reports, out / "report.csv")
    write_reports_json(reports, out / "report.json")
    write_interval_rows(rows, out / "intervals.csv")


def write_interval_rows(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(INTERVAL_FIELDS)
        for name, alpha, anchor, step, lo, pr, up, tr in rows:
            writer.writerow([name, repr(float(alpha)), anchor, step, repr(float(lo)), repr(float(pr)),
                             repr(float(up)), repr(float(tr))])


def sensitivity_sweep(cfg: RunConfig, horizons, frame: Optional[SeriesFrame] = None) -> dict:
    """Rerun the benchmark for each horizon ``b`` with everything else fixed.

    Returns ``{b: [EvalReport, ...]}``. With ``cfg.out_dir`` set, a long-format
    ``sweep.csv`` keyed by (method, b, alpha) is written there.
    """
    frame = load_frame(cfg) if frame is None else frame
    results = {}
    for b in horizons:
        sub = RunConfig(**{**_fields(cfg), "b": int(b), "out_dir": None})
        results[int(b)] = run_benchmark(sub, frame).reports
    if cfg.out_dir is not None:
        Path(cfg.out_dir).mkdir(parents=True, exist_ok=True)
        write_reports_csv([r for b in results for r in results[b]], Path(cfg.out_dir) / "sweep.csv")
    return results


def _fields(cfg: RunConfig) -> dict:
    return {f: getattr(cfg, f) for f in cfg.__dataclass_fields__}


def relative_spread(values) -> float:
    """``(max - min) / mean`` of a set of positive scores."""
    values = np.asarray(values, dtype=float)
    return float((values.max() - values.min()) / values.mean())
