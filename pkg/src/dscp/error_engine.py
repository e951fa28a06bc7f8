"""Signed errors, two-sample KS testing, and adaptive merging of per-step error sets."""

from __future__ import annotations

import math

import numpy as np

from dscp.core import ErrorRecord, ForecastWindow, MergedErrorSets, StepErrorSets
from dscp.errors import EmptyCluster, EmptySample, HorizonMismatch, ShapeMismatch

__all__ = [
    "MergedErrorSets",
    "StepErrorSets",
    "adaptive_merge",
    "build_step_sets",
    "kolmogorov_sf",
    "ks_statistic",
    "ks_two_sample",
    "signed_errors",
]

KS_TERM_TOL = 1e-12
# Q(lambda) differs from 1 by less than 1e-80 below this point
_KS_FLAT = 0.1


def signed_errors(truth, window: ForecastWindow) -> ErrorRecord:
    """``truth - forecast`` per step; over-forecasts give negative errors."""
    truth = np.asarray(truth, dtype=float)
    if truth.shape != window.values.shape:
        raise ShapeMismatch(f"truth shape {truth.shape} != forecast shape {window.values.shape}")
    return ErrorRecord(window, truth - window.values)


def ks_statistic(A, B) -> float:
    """Largest ECDF gap, with both ECDFs evaluated at every pooled sample point."""
    A = np.sort(np.asarray(A, dtype=float).ravel())
    B = np.sort(np.asarray(B, dtype=float).ravel())
    if A.size == 0 or B.size == 0:
        raise EmptySample("KS test needs two non-empty samples")
    pooled = np.concatenate([A, B])
    cdf_a = np.searchsorted(A, pooled, side="right") / A.size
    cdf_b = np.searchsorted(B, pooled, side="right") / B.size
    return float(np.abs(cdf_a - cdf_b).max())


def kolmogorov_sf(lam: float) -> float:
    """Asymptotic Kolmogorov survival function ``2 * sum (-1)^(k-1) exp(-2 k^2 lam^2)``.

    The series stops once a term drops below 1e-12; the result is clamped
    to [0, 1].
    """
    if lam < _KS_FLAT:
        return 1.0
    kmax = int(math.ceil(math.sqrt(-math.log(KS_TERM_TOL) / (2.0 * lam * lam)))) + 1
    k = np.arange(1, kmax + 1)
    terms = np.exp(-2.0 * k * k * lam * lam)
    terms = terms[: np.searchsorted(-terms, -KS_TERM_TOL, side="right")]
    signs = np.where(k[: terms.size] % 2 == 1, 1.0, -1.0)
    return float(min(1.0, max(0.0, 2.0 * (signs * terms).sum())))


def ks_two_sample(A, B) -> tuple:
    """Two-sample Kolmogorov-Smirnov test.

    Returns
    -------
    (D, p) : tuple of float
        The statistic and its asymptotic p-value.
    """
    D = ks_statistic(A, B)
    n, m = np.size(A), np.size(B)
    lam = D * math.sqrt(n * m / (n + m))
    return D, kolmogorov_sf(lam)


def build_step_sets(records) -> StepErrorSets:
    """Column-wise collection of the errors of one cluster's records."""
    if len(records) == 0:
        raise EmptyCluster("cannot build error sets for an empty cluster")
    if isinstance(records, np.ndarray):
        E = np.atleast_2d(records)
    else:
        horizons = {len(r.errors) for r in records}
        if len(horizons) != 1:
            raise HorizonMismatch(f"records disagree in horizon: {sorted(horizons)}")
        E = np.array([r.errors for r in records], dtype=float)
    return StepErrorSets(tuple(E.T))


def adaptive_merge(theta: float, sets: StepErrorSets) -> MergedErrorSets:
    """Sweep steps left to right, absorbing the next step while its errors look alike.

    The current range's accumulated multiset is KS-tested against the next
    step's multiset; ``p > theta`` absorbs that step, otherwise the range is
    closed and a new one opens. Every step, including the last, ends up in
    exactly one range.
    """
    if not 0.0 < theta <= 1.0:
        raise ValueError(f"theta must lie in (0, 1], got {theta}")
    per_step = sets.per_step
    if any(s.size == 0 for s in per_step):
        raise EmptySample("every per-step error set must be non-empty")
    partition, pools = [], []
    start, current = 0, per_step[0]
    for j in range(1, len(per_step)):
        _, p = ks_two_sample(current, per_step[j])
        if p > theta:
            current = np.concatenate([current, per_step[j]])
        else:
            partition.append((start, j - 1))
            pools.append(current)
            start, current = j, per_step[j]
    partition.append((start, len(per_step) - 1))
    pools.append(current)
    return MergedErrorSets(tuple(partition), tuple(pools))
