"""Seeded synthetic series with known regimes and noise levels.

Kinds
-----
periodic_heteroscedastic
    Solar-like daily bump with noise ``day_sigma`` by day and ``night_sigma``
    by night.
two_regime
    A sinusoid whose amplitude and noise alternate between two regimes in
    fixed-length blocks.
composite
    ``two_regime`` block structure on top of the ``periodic_heteroscedastic``
    day/night profile.
variance_shift
    Sinusoid plus noise whose standard deviation jumps at ``shift_at``.
exchangeable_ar1
    Stationary Gaussian AR(1).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from dscp.core import SeriesFrame, validate_frame, write_csv
from dscp.errors import InvalidSpec

KINDS = ("periodic_heteroscedastic", "two_regime", "composite", "variance_shift", "exchangeable_ar1")

_DEFAULTS = {
    "periodic_heteroscedastic": dict(period=24, day_fraction=0.5, day_start=0, amplitude=10.0,
                                     day_sigma=2.0, night_sigma=0.01, level=0.0),
    "two_regime": dict(period=24, amplitudes=[1.0, 10.0], sigmas=[0.1, 1.0], block_length=120, level=0.0),
    "composite": dict(period=24, day_fraction=0.5, day_start=0, amplitudes=[2.0, 10.0], sigmas=[0.3, 2.0],
                      night_sigma=0.01, block_length=120, level=0.0),
    "variance_shift": dict(period=24, amplitude=5.0, sigma_before=1.0, sigma_after=3.0, shift_at=None, level=0.0),
    "exchangeable_ar1": dict(phi=0.5, sigma=1.0, mean=0.0),
}


@dataclass(frozen=True)
class ScenarioSpec:
    kind: str
    length: int = 2000
    seed: int = 0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidSpec(f"unknown scenario kind {self.kind!r}; expected one of {KINDS}")
        if int(self.length) < 64:
            raise InvalidSpec("scenario length must be >= 64")
        unknown = set(self.params) - set(_DEFAULTS[self.kind])
        if unknown:
            raise InvalidSpec(f"unknown parameters for {self.kind}: {sorted(unknown)}")
        merged = {**_DEFAULTS[self.kind], **self.params}
        for key, value in merged.items():
            if "sigma" in key:
                vals = np.atleast_1d(value)
                if not np.all(vals > 0):
                    raise InvalidSpec(f"{key} must be > 0")
        if "period" in merged and int(merged["period"]) < 1:
            raise InvalidSpec("period must be >= 1")
        if "day_fraction" in merged and not 0 < merged["day_fraction"] <= 1:
            raise InvalidSpec("day_fraction must lie in (0, 1]")
        if "phi" in merged and not abs(merged["phi"]) < 1:
            raise InvalidSpec("AR(1) phi must satisfy |phi| < 1")
        object.__setattr__(self, "params", merged)


class Scenario(NamedTuple):
    """A generated frame with its ground truth.

    ``signal`` is the noise-free mean, ``sigma`` the per-step noise standard
    deviation, ``regime`` the regime label (0 when there is only one) and
    ``is_day`` the daylight indicator (all True for kinds without nights).
    """

    frame: SeriesFrame
    signal: np.ndarray
    sigma: np.ndarray
    regime: np.ndarray
    is_day: np.ndarray

    def truth_dict(self) -> dict:
        return {
            "t": np.asarray(self.frame.timestamps).tolist(),
            "signal": self.signal.tolist(),
            "sigma": self.sigma.tolist(),
            "regime": self.regime.tolist(),
            "is_day": self.is_day.astype(int).tolist(),
        }


def _daylight(t: np.ndarray, period: int, day_fraction: float, day_start: int):
    phase = (t - day_start) % period
    day_len = day_fraction * period
    is_day = phase < day_len
    profile = np.where(is_day, np.sin(np.pi * (phase + 0.5) / day_len), 0.0)
    return is_day, profile


def generate(spec: ScenarioSpec) -> Scenario:
    """Deterministic for a fixed spec (including seed)."""
    p = spec.params
    n = int(spec.length)
    rng = np.random.default_rng(spec.seed)
    t = np.arange(n)
    eps = rng.standard_normal(n)
    regime = np.zeros(n, dtype=np.int64)
    is_day = np.ones(n, dtype=bool)

    if spec.kind == "exchangeable_ar1":
        phi, sigma = float(p["phi"]), float(p["sigma"])
        y = np.empty(n)
        y[0] = eps[0] * sigma / np.sqrt(1 - phi * phi)
        for i in range(1, n):
            y[i] = phi * y[i - 1] + sigma * eps[i]
        signal = np.zeros(n)
        sig = np.full(n, sigma)
        y = y + float(p["mean"])
        signal = signal + float(p["mean"])
    elif spec.kind == "variance_shift":
        period = int(p["period"])
        shift = n // 2 if p["shift_at"] is None else int(p["shift_at"])
        signal = p["level"] + p["amplitude"] * np.sin(2 * np.pi * t / period)
        sig = np.where(t < shift, p["sigma_before"], p["sigma_after"]).astype(float)
        regime = (t >= shift).astype(np.int64)
        y = signal + sig * eps
    elif spec.kind == "periodic_heteroscedastic":
        is_day, profile = _daylight(t, int(p["period"]), float(p["day_fraction"]), int(p["day_start"]))
        signal = p["level"] + p["amplitude"] * profile
        sig = np.where(is_day, p["day_sigma"], p["night_sigma"]).astype(float)
        y = signal + sig * eps
    else:
        period = int(p["period"])
        regime = (t // int(p["block_length"])) % 2
        amps = np.asarray(p["amplitudes"], dtype=float)
        sigmas = np.asarray(p["sigmas"], dtype=float)
        if amps.shape != (2,) or sigmas.shape != (2,):
            raise InvalidSpec("two amplitudes and two sigmas are required")
        if spec.kind == "two_regime":
            profile = np.sin(2 * np.pi * t / period)
            sig = sigmas[regime]
        else:
            is_day, profile = _daylight(t, period, float(p["day_fraction"]), int(p["day_start"]))
            sig = np.where(is_day, sigmas[regime], float(p["night_sigma"]))
        signal = p["level"] + amps[regime] * profile
        y = signal + sig * eps

    frame = validate_frame(SeriesFrame(t, y))
    return Scenario(frame, np.asarray(signal, dtype=float), np.asarray(sig, dtype=float), regime, is_day)


def write_scenario(scenario: Scenario, csv_path, truth_path) -> None:
    """CSV in the ingestion schema plus a JSON sidecar with ground truth."""
    write_csv(scenario.frame, csv_path)
    with open(truth_path, "w") as fh:
        json.dump(scenario.truth_dict(), fh)
