"""Interval forecast metrics: coverage deviation, mean width and Winkler score.

All metrics are pointwise averages over every (window, step) pair.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass

import numpy as np

from dscp.errors import EmptyInput, Misaligned


@dataclass(frozen=True)
class EvalReport:
    method: str
    alpha: float
    delta_cov: float
    pi_width: float
    winkler: float
    n_windows: int
    n_points: int
    horizon: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


REPORT_FIELDS = ("method", "alpha", "horizon", "delta_cov", "pi_width", "winkler", "n_windows", "n_points")


def _bounds(intervals):
    if isinstance(intervals, tuple) and len(intervals) == 2:
        lower, upper = (np.atleast_2d(np.asarray(x, dtype=float)) for x in intervals)
    else:
        if len(intervals) == 0:
            raise EmptyInput("no intervals")
        lower = np.array([iv.lower for iv in intervals])
        upper = np.array([iv.upper for iv in intervals])
    if lower.shape != upper.shape:
        raise Misaligned("lower and upper bounds differ in shape")
    return lower, upper


def _aligned(intervals, truths):
    lower, upper = _bounds(intervals)
    truths = np.asarray(truths, dtype=float).reshape(lower.shape) if np.size(truths) == lower.size else None
    if truths is None:
        raise Misaligned("truths do not align with the intervals")
    return lower, upper, truths


def coverage(intervals, truths) -> float:
    lower, upper, y = _aligned(intervals, truths)
    return float(((lower <= y) & (y <= upper)).mean())


def delta_cov(intervals, truths, alpha: float) -> float:
    """Empirical pointwise coverage minus ``1 - alpha``, in percentage points."""
    return 100.0 * (coverage(intervals, truths) - (1.0 - alpha))


def pi_width(intervals) -> float:
    lower, upper = _bounds(intervals)
    if lower.size == 0:
        raise EmptyInput("no interval points")
    return float((upper - lower).mean())


def winkler_scores(lower, upper, y, alpha: float) -> np.ndarray:
    """Pointwise Winkler interval score: width plus ``2/alpha`` times any miss distance."""
    width = upper - lower
    below = np.maximum(lower - y, 0.0)
    above = np.maximum(y - upper, 0.0)
    return width + (2.0 / alpha) * (below + above)


def winkler(intervals, truths, alpha: float) -> float:
    lower, upper, y = _aligned(intervals, truths)
    return float(winkler_scores(lower, upper, y, alpha).mean())


def evaluate(method: str, intervals, truths, alpha: float) -> EvalReport:
    lower, upper, y = _aligned(intervals, truths)
    return EvalReport(
        method=method,
        alpha=alpha,
        delta_cov=delta_cov((lower, upper), y, alpha),
        pi_width=pi_width((lower, upper)),
        winkler=winkler((lower, upper), y, alpha),
        n_windows=lower.shape[0],
        n_points=lower.size,
        horizon=lower.shape[1],
    )


def write_reports_csv(reports, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REPORT_FIELDS)
        for r in reports:
            writer.writerow([_fmt(getattr(r, f)) for f in REPORT_FIELDS])


def write_reports_json(reports, path) -> None:
    with open(path, "w") as fh:
        json.dump([r.to_dict() for r in reports], fh, indent=1, sort_keys=True)
        fh.write("\n")


def _fmt(value):
    return repr(float(value)) if isinstance(value, float) else value
