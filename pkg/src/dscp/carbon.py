"""Rolling-horizon carbon-aware scheduling driven by interval forecasts.

At every step ``tau`` the scheduler forecasts renewable supply and arriving
load for steps ``tau..tau+n``, turns the intervals into point estimates via
a :class:`RiskPolicy`, solves the window allocation problem, and commits
only the allocation for ``tau``. Brown energy is then accounted against the
realised renewable supply.

The window problem minimises ``sum_k phi_k * P_k * gamma**(k - tau) +
deferred * P_max * gamma**n`` subject to all forecast load plus carried
backlog being either allocated inside the window or deferred, where
``phi_k = max(alloc_k + running_k - renewable_k, 0)``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np

from dscp.conformal import MethodConfig, build_store, dscp_assign, dscp_predict_many
from dscp.core import SeriesFrame, make_supervised
from dscp.errors import InfeasiblePlan, InvalidConfig, Misaligned
from dscp.predictors import PredictorSpec, fit

BALANCE_TOL = 1e-9
STRATEGIES = ("first_fit", "round_robin")
FORECASTERS = ("none_cp", "dscp", "perfect")


@dataclass(frozen=True)
class EnergyScenario:
    """True traces for one site, one value per step (kW; steps of ``step_hours``)."""

    renewable: np.ndarray
    load: np.ndarray
    price: np.ndarray
    gamma: float = 0.95
    carbon_intensity: float = 0.4
    step_hours: float = 1.0

    def __post_init__(self):
        arrays = [np.array(x, dtype=float) for x in (self.renewable, self.load, self.price)]
        if len({a.shape for a in arrays}) != 1 or arrays[0].ndim != 1:
            raise Misaligned("renewable, load and price traces must be 1-d and equally long")
        if any(np.any(a < 0) for a in arrays[:2]) or np.any(arrays[2] <= 0):
            raise InvalidConfig("traces must be nonnegative and prices positive")
        if not 0 < self.gamma <= 1:
            raise InvalidConfig("gamma must lie in (0, 1]")
        for name, arr in zip(("renewable", "load", "price"), arrays):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return self.load.size

    @property
    def p_max(self) -> float:
        return float(self.price.max())


@dataclass(frozen=True)
class RiskPolicy:
    """Blend weight between interval bounds; 0 is most conservative, 1 most aggressive."""

    lambda_risk: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.lambda_risk <= 1.0:
            raise InvalidConfig("lambda_risk must lie in [0, 1]")


@dataclass(frozen=True)
class SchedulePlan:
    allocations: np.ndarray
    deferred: float
    backlog: float
    load_forecast: np.ndarray = field(default=None)

    @property
    def demand(self) -> float:
        return float(np.sum(self.load_forecast)) + self.backlog

    def imbalance(self) -> float:
        return float(np.sum(self.allocations)) + self.deferred - self.demand


def brown_energy(W_D, W_L, W_Re_hat):
    """Brown power drawn when allocated plus running load exceeds renewables."""
    return np.maximum(np.asarray(W_D) + np.asarray(W_L) - np.asarray(W_Re_hat), 0.0)


def plan_cost(plan: SchedulePlan, prices, renewable_estimates, running_load=None, gamma: float = 1.0,
              p_max: Optional[float] = None) -> float:
    """Discounted brown-energy cost of a window plan plus the deferral penalty.

    ``p_max`` is the scenario-wide highest price; it defaults to the window
    maximum.
    """
    prices = np.asarray(prices, dtype=float)
    alloc = np.asarray(plan.allocations, dtype=float)
    if plan.load_forecast is not None:
        scale = max(1.0, abs(plan.demand))
        if abs(plan.imbalance()) > BALANCE_TOL * scale:
            raise InfeasiblePlan(f"plan is out of balance by {plan.imbalance():.3g}")
    if np.any(alloc < -BALANCE_TOL) or plan.deferred < -BALANCE_TOL:
        raise InfeasiblePlan("allocations and deferral must be nonnegative")
    running = np.zeros_like(alloc) if running_load is None else np.asarray(running_load, dtype=float)
    n = alloc.size - 1
    discount = gamma ** np.arange(alloc.size)
    p_max = float(prices.max()) if p_max is None else float(p_max)
    phi = brown_energy(alloc, running, renewable_estimates)
    return float(np.sum(phi * prices * discount) + plan.deferred * p_max * gamma**n)


def effective_forecast(renewable_interval, load_interval, policy: RiskPolicy) -> tuple:
    """Point estimates from intervals: renewable from the lower bound up, load from the upper bound down."""
    r_lo, r_hi = (np.asarray(x, dtype=float) for x in _bounds(renewable_interval))
    l_lo, l_hi = (np.asarray(x, dtype=float) for x in _bounds(load_interval))
    if r_lo.shape != l_lo.shape:
        raise Misaligned("renewable and load intervals cover different horizons")
    lam = policy.lambda_risk
    renewable = np.maximum(r_lo + lam * (r_hi - r_lo), 0.0)
    load = np.maximum(l_hi - lam * (l_hi - l_lo), 0.0)
    return renewable, load


def _bounds(interval):
    if hasattr(interval, "lower"):
        return interval.lower, interval.upper
    lo, hi = interval
    return lo, hi


def solve_window(renewable, load, backlog: float, prices, gamma: float, p_max: Optional[float] = None,
                 running=None) -> SchedulePlan:
    """Cost-minimal allocation of forecast load plus backlog over one window.

    Free renewable headroom is filled first (earliest step first), then the
    remainder goes to the cheapest discounted brown slot; it is deferred
    past the window only if ``p_max * gamma**n`` is strictly cheaper than
    every in-window brown slot.
    """
    renewable = np.asarray(renewable, dtype=float)
    load = np.asarray(load, dtype=float)
    prices = np.asarray(prices, dtype=float)
    if not renewable.shape == load.shape == prices.shape or renewable.size < 1:
        raise Misaligned("window inputs must share one non-empty horizon")
    running = np.zeros_like(load) if running is None else np.asarray(running, dtype=float)
    p_max = float(prices.max()) if p_max is None else float(p_max)
    n = load.size - 1
    remaining = float(load.sum()) + float(backlog)
    alloc = np.zeros_like(load)

    headroom = np.maximum(renewable - running, 0.0)
    for k in range(load.size):
        take = min(headroom[k], remaining)
        alloc[k] = take
        remaining -= take
        if remaining <= 0:
            break

    deferred = 0.0
    if remaining > 0:
        unit = prices * gamma ** np.arange(load.size)
        k = int(np.argmin(unit))
        if p_max * gamma**n < unit[k]:
            deferred = remaining
        else:
            alloc[k] += remaining
    return SchedulePlan(alloc, deferred, float(backlog), load)


# ------------------------------------------------------------- forecasters


class IntervalTable(NamedTuple):
    """Per-start-step forecast intervals, shape (n_steps, horizon)."""

    lower: np.ndarray
    upper: np.ndarray


def _series_frame(values) -> SeriesFrame:
    return SeriesFrame(np.arange(len(values)), np.asarray(values, dtype=float))


class Forecaster:
    """Produces renewable and load intervals for windows starting at given steps.

    ``kind`` is ``none_cp`` (degenerate intervals at the point forecast),
    ``dscp`` (conformal intervals) or ``perfect`` (degenerate intervals at the
    truth). Predictors are fitted on ``[0, history_end // 2)`` and DSCP is
    calibrated on ``[history_end // 2, history_end)``.
    """

    def __init__(self, kind: str, scenario: EnergyScenario, history_end: int, horizon: int, alpha: float = 0.1,
                 a: int = 24, predictor: Optional[PredictorSpec] = None, theta: float = 0.05, N_max: int = 6,
                 seed: int = 0):
        if kind not in FORECASTERS:
            raise InvalidConfig(f"unknown forecaster {kind!r}; expected one of {FORECASTERS}")
        self.kind = kind
        self.scenario = scenario
        self.horizon = int(horizon)
        self.alpha = alpha
        self.a = int(a)
        self.models = {}
        if kind == "perfect":
            return
        predictor = predictor or PredictorSpec("seasonal_naive", {"period": min(24, self.a)})
        split = history_end // 2
        for name in ("renewable", "load"):
            series = getattr(scenario, name)
            pred = fit(predictor, _series_frame(series[:split]), self.a, self.horizon)
            store = None
            if kind == "dscp":
                sup = make_supervised(_series_frame(series[split:history_end]), self.a, self.horizon)
                preds = pred.predict_many(sup.inputs)
                cfg = MethodConfig("dscp", alpha, theta=theta, N_max=N_max)
                store = build_store(sup.anchors, preds, sup.truths - preds, cfg, seed)
            self.models[name] = (pred, store)

    def table(self, name: str, starts) -> IntervalTable:
        starts = np.asarray(starts, dtype=int)
        series = getattr(self.scenario, name)
        if self.kind == "perfect":
            idx = starts[:, None] + np.arange(self.horizon)[None, :]
            truth = series[np.minimum(idx, series.size - 1)]
            return IntervalTable(truth.copy(), truth.copy())
        if starts.min() < self.a:
            raise InvalidConfig("forecast starts need a full input window of history")
        pred, store = self.models[name]
        blocks = np.array([series[s - self.a:s] for s in starts])
        points = pred.predict_many(blocks)
        if store is None:
            return IntervalTable(points, points.copy())
        labels = dscp_assign(store, points)
        ivs = dscp_predict_many(store, points, self.alpha, labels=labels)
        return IntervalTable(np.array([iv.lower for iv in ivs]), np.array([iv.upper for iv in ivs]))


# -------------------------------------------------------------- simulation


class SimulationResult(NamedTuple):
    """``brown_kwh`` counts realised brown energy only; ``settled_kwh`` is the
    end-of-run backlog charged as brown. ``emissions`` includes both."""

    emissions: float
    brown_kwh: float
    settled_kwh: float
    committed: float
    arrived: float
    final_backlog: float
    log: list
    machines: np.ndarray


LOG_FIELDS = ("tau", "committed", "backlog", "phi_true", "emissions_cum")


def pack(committed: float, strategy: str, n_machines: int, capacity: float, task_size: float, cursor: int = 0):
    """Split one step's committed load into tasks and place them on machines.

    ``first_fit`` fills machines in fixed order; ``round_robin`` places tasks
    cyclically starting at ``cursor``. Returns per-machine load and the next
    cursor. Load that fits nowhere lands on the least-loaded machine.
    """
    if strategy not in STRATEGIES:
        raise InvalidConfig(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
    loads = np.zeros(n_machines)
    left = float(committed)
    while left > 1e-12:
        task = min(task_size, left)
        if strategy == "first_fit":
            fits = np.flatnonzero(loads + task <= capacity + 1e-12)
            m = int(fits[0]) if fits.size else int(loads.argmin())
        else:
            m = cursor % n_machines
            cursor += 1
        loads[m] += task
        left -= task
    return loads, cursor


def simulate(scenario: EnergyScenario, forecaster: Forecaster, policy: RiskPolicy, strategy: str = "first_fit",
             n: int = 11, start: Optional[int] = None, stop: Optional[int] = None, task_duration: int = 1,
             n_machines: int = 8, machine_capacity: Optional[float] = None, task_size: float = 5.0,
             settle_backlog: bool = True) -> SimulationResult:
    """Rolling-horizon simulation over steps ``start..stop-1``.

    Each step plans ``n + 1`` steps ahead, commits at most the backlog plus
    this step's arrivals, and charges brown energy against the true
    renewable supply. Committed work keeps drawing power for
    ``task_duration`` steps. With ``settle_backlog`` any work still queued at
    the end is charged as brown energy, so forecasters cannot look better by
    leaving work undone.
    """
    if strategy not in STRATEGIES:
        raise InvalidConfig(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
    if forecaster.horizon != n + 1:
        raise InvalidConfig(f"forecaster horizon {forecaster.horizon} != window length n + 1 = {n + 1}")
    start = forecaster.a if start is None else int(start)
    stop = len(scenario) - n if stop is None else int(stop)
    if stop <= start:
        raise InvalidConfig("scenario too short for one window")
    if machine_capacity is None:
        machine_capacity = float(2.0 * scenario.load.max() * task_duration / n_machines) or 1.0

    steps = np.arange(start, stop)
    tables = {name: forecaster.table(name, steps) for name in ("renewable", "load")}
    running = np.zeros(len(scenario) + n + task_duration + 1)
    machines = np.zeros((steps.size, n_machines))
    backlog = arrived = committed_total = brown_total = 0.0
    emissions = 0.0
    cursor = 0
    log = []
    for i, tau in enumerate(steps):
        renewable_iv = (tables["renewable"].lower[i], tables["renewable"].upper[i])
        load_iv = (tables["load"].lower[i], tables["load"].upper[i])
        ren_hat, load_hat = effective_forecast(renewable_iv, load_iv, policy)
        window = slice(tau, tau + n + 1)
        plan = solve_window(ren_hat, load_hat, backlog, scenario.price[window], scenario.gamma, scenario.p_max,
                            running[window])
        available = backlog + scenario.load[tau]
        arrived += scenario.load[tau]
        commit = min(float(plan.allocations[0]), available)
        running[tau:tau + task_duration] += commit
        phi = float(brown_energy(0.0, running[tau], scenario.renewable[tau]))
        brown_total += phi * scenario.step_hours
        emissions += phi * scenario.step_hours * scenario.carbon_intensity
        backlog = available - commit
        committed_total += commit
        machines[i], cursor = pack(commit, strategy, n_machines, machine_capacity, task_size, cursor)
        log.append((int(tau), commit, backlog, phi, emissions))

    settled = 0.0
    if settle_backlog and backlog > 0:
        settled = backlog * scenario.step_hours
        emissions += settled * scenario.carbon_intensity
    return SimulationResult(emissions, brown_total, settled, committed_total, arrived, backlog, log, machines)


def write_simulation(result: SimulationResult, out_dir, meta: Optional[dict] = None) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    doc = {
        "emissions_kg": result.emissions,
        "brown_kwh": result.brown_kwh,
        "settled_kwh": result.settled_kwh,
        "committed_kw_steps": result.committed,
        "arrived_kw_steps": result.arrived,
        "final_backlog": result.final_backlog,
        **(meta or {}),
    }
    with open(out / "emissions.json", "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
    with open(out / "schedule_log.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LOG_FIELDS)
        for tau, commit, backlog, phi, cum in result.log:
            writer.writerow([tau, repr(float(commit)), repr(float(backlog)), repr(float(phi)), repr(float(cum))])


def read_scenario_csv(path, gamma: float = 0.95, carbon_intensity: float = 0.4) -> EnergyScenario:
    """Load ``t, renewable_kw, load_kw, price`` columns."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    cols = {c: np.array([float(r[c]) for r in rows]) for c in ("renewable_kw", "load_kw", "price")}
    ts = np.array([int(r["t"]) for r in rows])
    if np.any(np.diff(ts) <= 0):
        raise InvalidConfig(f"{path}: t must be strictly increasing")
    return EnergyScenario(cols["renewable_kw"], cols["load_kw"], cols["price"], gamma, carbon_intensity)


def write_scenario_csv(scenario: EnergyScenario, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "renewable_kw", "load_kw", "price"])
        for t in range(len(scenario)):
            writer.writerow([t, repr(float(scenario.renewable[t])), repr(float(scenario.load[t])),
                             repr(float(scenario.price[t]))])


def bundled_scenario(days: int = 60, seed: int = 0) -> EnergyScenario:
    """Hourly solar-powered site with cloudy-day variability and time-of-use prices.

    Daily solar peak ~ 250 kW scaled by a per-day cloudiness factor; load
    averages ~ 30 kW with a daytime bump; prices dip at midday and peak in
    the evening.
    """
    rng = np.random.default_rng(seed)
    hours = np.arange(days * 24)
    hod = hours % 24
    daylight = np.clip(np.sin(np.pi * (hod - 6) / 12), 0.0, None)
    cloud = np.repeat(rng.uniform(0.35, 1.0, days), 24)
    solar = 250.0 * daylight * cloud * np.clip(1 + 0.15 * rng.standard_normal(hours.size), 0.2, None)
    load = 30.0 + 8.0 * np.sin(2 * np.pi * (hod - 9) / 24) + 4.0 * rng.standard_normal(hours.size)
    price = np.select([hod < 7, hod < 10, hod < 16, hod < 21], [0.16, 0.20, 0.12, 0.30], 0.18)
    price = price * (1 + 0.05 * rng.uniform(-1, 1, hours.size))
    return EnergyScenario(np.maximum(solar, 0.0), np.maximum(load, 0.0), price, gamma=0.95, carbon_intensity=0.4)
