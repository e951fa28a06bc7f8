"""Conformal interval constructors for multi-step forecasts.

``dscp_*`` functions implement dual-splitting conformal prediction: signed
calibration errors are grouped by forecast-window cluster and, within a
cluster, by runs of steps whose error distributions agree. The remaining
functions are the baselines it is compared against: pooled split CP on
absolute errors, an error-pool-updating variant (``enbpi_style``), adaptive
miscoverage (ACI), and per-step split CP.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from dscp.clustering import assign_labels, self_cluster
from dscp.core import (
    CalibrationStore,
    ForecastWindow,
    IntervalSeries,
    SeriesFrame,
    make_supervised,
    validate_frame,
)
from dscp.error_engine import adaptive_merge, build_step_sets
from dscp.errors import EmptySet, HorizonMismatch, InvalidConfig, ShapeMismatch, TooShort

METHODS = ("dscp", "cp", "enbpi", "aci", "per_step_cp")
ACI_EPS = 1e-4
# guards ceil/floor of (n+1)*level against binary representation noise
_INDEX_TOL = 1e-9

DEFAULTS = {"theta": 0.05, "N_max": 6, "gamma_aci": 0.01, "gamma_dtw": 1.0}
_METHOD_KEYS = {
    "dscp": ("theta", "N_max", "gamma_dtw", "recluster_every"),
    "aci": ("gamma_aci",),
    "enbpi": ("enbpi_capacity",),
    "cp": (),
    "per_step_cp": (),
}


@dataclass(frozen=True)
class MethodConfig:
    """Interval method and its parameters.

    Method-specific fields left as ``None`` get defaults for the method that
    uses them; setting one for another method is an error.
    """

    method: str
    alpha: float = 0.1
    theta: Optional[float] = None
    gamma_aci: Optional[float] = None
    N_max: Optional[int] = None
    gamma_dtw: Optional[float] = None
    recluster_every: Optional[int] = None
    enbpi_capacity: Optional[int] = None
    quantile: str = "conservative"
    dscp_update: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise InvalidConfig(f"unknown method {self.method!r}; expected one of {METHODS}")
        if not 0.0 < self.alpha < 1.0:
            raise InvalidConfig(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.quantile not in ("conservative", "interpolated"):
            raise InvalidConfig(f"unknown quantile convention {self.quantile!r}")
        allowed = _METHOD_KEYS[self.method]
        for key in ("theta", "gamma_aci", "N_max", "gamma_dtw", "recluster_every", "enbpi_capacity"):
            value = getattr(self, key)
            if value is not None and key not in allowed:
                raise InvalidConfig(f"{key} does not apply to method {self.method!r}")
            if value is None and key in allowed:
                object.__setattr__(self, key, DEFAULTS.get(key, 0 if key == "recluster_every" else None))
        if self.method == "dscp":
            if not 0.0 < self.theta <= 1.0:
                raise InvalidConfig("theta must lie in (0, 1]")
            if int(self.N_max) < 1:
                raise InvalidConfig("N_max must be >= 1")
            if self.gamma_dtw <= 0:
                raise InvalidConfig("gamma_dtw must be > 0")
        if self.method == "aci" and self.gamma_aci <= 0:
            raise InvalidConfig("gamma_aci must be > 0")
        if self.dscp_update and self.method != "dscp":
            raise InvalidConfig("dscp_update applies to method 'dscp' only")

    @property
    def label(self) -> str:
        return "enbpi_style" if self.method == "enbpi" else self.method


# ---------------------------------------------------------------- quantiles


def _upper_rank(n: int, level: float) -> int:
    return min(max(math.ceil((n + 1) * level - _INDEX_TOL), 1), n)


def _lower_rank(n: int, level: float) -> int:
    return min(max(math.floor((n + 1) * level + _INDEX_TOL), 1), n)


def conformal_quantiles(E, alpha: float, interpolated: bool = False) -> tuple:
    """Lower and upper error quantiles of a signed error multiset.

    Conservative order statistics: the upper value is the
    ``ceil((n+1)(1-alpha/2))``-th smallest (capped at the maximum), the lower
    the ``floor((n+1)alpha/2)``-th smallest (at least the minimum).
    ``interpolated=True`` uses linear interpolation instead; it carries no
    finite-sample guarantee and exists for parity experiments.
    """
    E = np.sort(np.asarray(E, dtype=float).ravel())
    if E.size == 0:
        raise EmptySet("cannot take quantiles of an empty error set")
    if interpolated:
        lo, hi = np.quantile(E, [alpha / 2, 1 - alpha / 2])
        return float(lo), float(hi)
    n = E.size
    return float(E[_lower_rank(n, alpha / 2) - 1]), float(E[_upper_rank(n, 1 - alpha / 2) - 1])


def abs_quantile(E_abs, alpha: float, interpolated: bool = False) -> float:
    """``ceil((n+1)(1-alpha))``-th smallest absolute error (capped at the maximum)."""
    E_abs = np.sort(np.abs(np.asarray(E_abs, dtype=float).ravel()))
    if E_abs.size == 0:
        raise EmptySet("cannot take quantiles of an empty error set")
    if interpolated:
        return float(np.quantile(E_abs, 1 - alpha))
    return float(E_abs[_upper_rank(E_abs.size, 1 - alpha) - 1])


def _error_matrix(source) -> np.ndarray:
    if isinstance(source, CalibrationStore):
        return source.errors
    if isinstance(source, np.ndarray):
        return np.atleast_2d(source)
    if len(source) == 0:
        raise EmptySet("no calibration records")
    return np.array([r.errors for r in source], dtype=float)


def _window_values(window) -> tuple:
    if isinstance(window, ForecastWindow):
        return window.anchor, window.values
    return 0, np.asarray(window, dtype=float)


# --------------------------------------------------------------------- DSCP


def build_store(anchors, windows, errors, cfg: MethodConfig, seed: int = 0) -> CalibrationStore:
    """Cluster calibration windows and merge per-step error sets within each cluster."""
    windows = np.atleast_2d(np.asarray(windows, dtype=float))
    errors = np.atleast_2d(np.asarray(errors, dtype=float))
    order = np.argsort(np.asarray(anchors), kind="stable")
    anchors, windows, errors = np.asarray(anchors)[order], windows[order], errors[order]
    model = self_cluster(windows, int(cfg.N_max), seed)
    merged = tuple(
        adaptive_merge(cfg.theta, build_step_sets(errors[model.labels == c])) for c in range(model.k)
    )
    snapshot = {
        "theta": cfg.theta,
        "N_max": int(cfg.N_max),
        "alpha": cfg.alpha,
        "gamma_dtw": cfg.gamma_dtw,
        "seed": int(seed),
        "recluster_every": int(cfg.recluster_every),
        "quantile": cfg.quantile,
        "ks_pvalue": "asymptotic",
    }
    return CalibrationStore(
        anchors=anchors,
        windows=windows,
        errors=errors,
        labels=model.labels,
        centroids=model.centroids,
        merged=merged,
        silhouette=model.silhouette,
        config=snapshot,
    )


def dscp_calibrate(pred, calib: SeriesFrame, cfg: MethodConfig, a: int, b: int, seed: int = 0) -> CalibrationStore:
    """Forecast every calibration window, then cluster and merge its signed errors."""
    calib = validate_frame(calib)
    if len(calib) < a + b + 3:
        raise TooShort(f"calibration frame yields fewer than 4 windows (length {len(calib)}, a={a}, b={b})")
    sup = make_supervised(calib, a, b)
    preds = pred.predict_many(sup.inputs)
    if preds.shape[1] != b:
        raise HorizonMismatch(f"predictor horizon {preds.shape[1]} != b = {b}")
    return build_store(sup.anchors, preds, sup.truths - preds, cfg, seed)


def _cluster_quantiles(store: CalibrationStore, alpha: float) -> tuple:
    interp = store.config.get("quantile") == "interpolated"
    k, b = store.k, store.horizon
    lo, hi = np.zeros((k, b)), np.zeros((k, b))
    empty = np.zeros(k, dtype=bool)
    for c, ms in enumerate(store.merged):
        if any(p.size == 0 for p in ms.pools):
            empty[c] = True
            continue
        for r, (start, end) in enumerate(ms.partition):
            lo[c, start:end + 1], hi[c, start:end + 1] = conformal_quantiles(ms.pools[r], alpha, interp)
    if empty.any():
        pooled = [conformal_quantiles(store.errors[:, j], alpha, interp) for j in range(b)]
        lo[empty] = [q[0] for q in pooled]
        hi[empty] = [q[1] for q in pooled]
    return lo, hi, empty


def dscp_assign(store: CalibrationStore, windows) -> np.ndarray:
    """Cluster labels for a batch of forecast windows."""
    W = np.atleast_2d(np.asarray(windows, dtype=float))
    if W.shape[1] != store.horizon:
        raise HorizonMismatch(f"window horizon {W.shape[1]} != store horizon {store.horizon}")
    return assign_labels(W, store.windows, store.labels, store.smallest_cluster_size, store.k,
                         float(store.config.get("gamma_dtw", 1.0)))


def dscp_predict_many(store: CalibrationStore, windows, alpha: float, anchors=None, labels=None) -> list:
    """Intervals for a batch of forecast windows (rows of an (m, b) array).

    Pass ``labels`` from :func:`dscp_assign` to reuse one cluster assignment
    across several alphas.
    """
    W = np.atleast_2d(np.asarray(windows, dtype=float))
    if labels is None:
        labels = dscp_assign(store, W)
    lo, hi, empty = _cluster_quantiles(store, alpha)
    anchors = range(len(W)) if anchors is None else anchors
    return [
        IntervalSeries(int(t), w + lo[c], w + hi[c], alpha, pred=w, flagged=bool(empty[c]))
        for t, w, c in zip(anchors, W, labels)
    ]


def dscp_predict(store: CalibrationStore, window, alpha: float) -> IntervalSeries:
    """Interval for one window: ``forecast + (q_lo, q_hi)`` of its cluster's merged sets.

    Bounds are asymmetric whenever the signed errors are. If the assigned
    cluster has no errors, all clusters' errors are pooled per step and the
    interval is flagged.
    """
    anchor, values = _window_values(window)
    return dscp_predict_many(store, values[None, :], alpha, [anchor])[0]


def dscp_update(store: CalibrationStore, window, truth) -> CalibrationStore:
    """Return a new store with one more observed window; the input store is untouched.

    The window is assigned to a cluster, its signed errors join that cluster,
    and only that cluster's steps are re-merged. With ``recluster_every > 0``
    the whole store is re-clustered after every that-many updates.
    """
    anchor, values = _window_values(window)
    truth = np.asarray(truth, dtype=float)
    if values.size != store.horizon or truth.shape != values.shape:
        raise HorizonMismatch(f"window/truth horizon must equal store horizon {store.horizon}")
    cfg = store.config
    label = int(assign_labels(values[None, :], store.windows, store.labels, store.smallest_cluster_size,
                              store.k, float(cfg.get("gamma_dtw", 1.0)))[0])
    anchors = np.append(store.anchors, anchor)
    windows = np.vstack([store.windows, values])
    errors = np.vstack([store.errors, truth - values])
    labels = np.append(store.labels, label)
    n_updates = store.n_updates + 1

    every = int(cfg.get("recluster_every", 0))
    if every > 0 and n_updates % every == 0:
        mcfg = MethodConfig("dscp", alpha=cfg.get("alpha", 0.1), theta=cfg["theta"], N_max=cfg["N_max"],
                            gamma_dtw=cfg.get("gamma_dtw", 1.0), recluster_every=every,
                            quantile=cfg.get("quantile", "conservative"))
        return replace(build_store(anchors, windows, errors, mcfg, cfg.get("seed", 0)), n_updates=n_updates)

    order = np.argsort(anchors, kind="stable")
    anchors, windows, errors, labels = anchors[order], windows[order], errors[order], labels[order]
    merged = list(store.merged)
    merged[label] = adaptive_merge(cfg["theta"], build_step_sets(errors[labels == label]))
    centroids = store.centroids.copy()
    centroids[label] = windows[labels == label].mean(0)
    return replace(store, anchors=anchors, windows=windows, errors=errors, labels=labels,
                   centroids=centroids, merged=tuple(merged), n_updates=n_updates)


# ---------------------------------------------------------------- baselines


def cp_interval(source, window, alpha: float, interpolated: bool = False) -> IntervalSeries:
    """Symmetric split-CP interval: forecast +/- one quantile of all pooled |errors|."""
    anchor, values = _window_values(window)
    q = abs_quantile(_error_matrix(source), alpha, interpolated)
    return IntervalSeries(anchor, values - q, values + q, alpha, pred=values)


def per_step_cp_interval(source, window, alpha: float, interpolated: bool = False) -> IntervalSeries:
    """Split CP with a separate |error| pool per forecast step."""
    anchor, values = _window_values(window)
    E = _error_matrix(source)
    if E.size == 0:
        raise EmptySet("no calibration errors")
    if E.shape[1] != values.size:
        raise HorizonMismatch(f"error horizon {E.shape[1]} != window horizon {values.size}")
    q = np.array([abs_quantile(E[:, j], alpha, interpolated) for j in range(values.size)])
    return IntervalSeries(anchor, values - q, values + q, alpha, pred=values)


class EnbPIState:
    """Sliding pool of absolute errors, refreshed as truths arrive.

    Only the error-pool updating is modelled (no bootstrap ensemble).
    ``capacity=None`` keeps the pool at its initial size.
    """

    def __init__(self, initial=(), capacity: Optional[int] = None):
        initial = np.abs(np.asarray(initial, dtype=float).ravel())
        cap = initial.size if capacity is None else int(capacity)
        if cap < 1:
            raise InvalidConfig("EnbPI pool capacity must be >= 1")
        self.capacity = cap
        self.pool = deque(initial.tolist()[-cap:], maxlen=cap)

    @classmethod
    def from_calibration(cls, source, capacity: Optional[int] = None) -> "EnbPIState":
        # row-major: window by window, steps in order
        return cls(_error_matrix(source).ravel(), capacity)

    def errors(self) -> np.ndarray:
        return np.fromiter(self.pool, dtype=float, count=len(self.pool))

    def interval(self, window, alpha: float) -> IntervalSeries:
        return cp_interval(self.errors()[None, :], window, alpha)


def enbpi_style_update(state: EnbPIState, truth, interval) -> EnbPIState:
    """Push the absolute errors of a realised window into a copy of the pool."""
    pred = interval.pred if isinstance(interval, IntervalSeries) else np.asarray(interval, dtype=float)
    if pred is None:
        pred = (interval.lower + interval.upper) / 2
    truth = np.asarray(truth, dtype=float)
    if truth.shape != np.shape(pred):
        raise ShapeMismatch("truth and forecast shapes differ")
    new = EnbPIState.__new__(EnbPIState)
    new.capacity = state.capacity
    new.pool = deque(state.pool, maxlen=state.capacity)
    new.pool.extend(np.abs(truth - pred).tolist())
    return new


def aci_step(alpha_t: float, alpha_target: float, gamma: float, covered: bool) -> float:
    """One adaptive-miscoverage update: ``alpha_t + gamma * (alpha - err_t)``."""
    if gamma <= 0:
        raise ValueError("gamma must be > 0")
    err = 0.0 if covered else 1.0
    return alpha_t + gamma * (alpha_target - err)


def aci_lookup_alpha(alpha_t: float) -> float:
    """Clamp a running miscoverage into the usable range for quantile lookup."""
    return min(max(alpha_t, ACI_EPS), 1.0 - ACI_EPS)


class ACIState:
    """Running miscoverage shared by all steps of a window.

    Each realised step is one update, so the long-run target is pointwise
    coverage.
    """

    def __init__(self, source, alpha: float, gamma: float):
        self.errors = _error_matrix(source)
        self.alpha = alpha
        self.gamma = gamma
        self.alpha_t = alpha
        self.history = [alpha]

    def interval(self, window) -> IntervalSeries:
        anchor, values = _window_values(window)
        q = abs_quantile(self.errors, aci_lookup_alpha(self.alpha_t))
        return IntervalSeries(anchor, values - q, values + q, self.alpha, pred=values)

    def update(self, covered) -> float:
        for c in np.atleast_1d(covered):
            self.alpha_t = aci_step(self.alpha_t, self.alpha, self.gamma, bool(c))
        self.history.append(self.alpha_t)
        return self.alpha_t
