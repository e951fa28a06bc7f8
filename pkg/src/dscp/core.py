"""Domain types, frame validation, supervised windowing and store persistence."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, NamedTuple, Optional, Sequence

import numpy as np

from dscp.errors import (
    DSCPError,
    IrregularSampling,
    NonFinite,
    NonMonotoneTime,
    RaggedFeatures,
    ShapeMismatch,
    TooShort,
)

SCHEMA_VERSION = 1


def _frozen(arr, dtype=float) -> np.ndarray:
    out = np.array(arr, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class SeriesFrame:
    """A regularly sampled univariate target with optional feature vectors.

    Parameters
    ----------
    timestamps : sequence of int
        Strictly increasing, uniformly spaced time indices (integer steps or
        epoch seconds).
    target : sequence of float
        Observed values ``y_t``; same length as ``timestamps``.
    features : sequence of sequences, optional
        One feature vector per step. Only predictors may consume these.
    stride : int, optional
        Declared spacing. Inferred from the first two timestamps if omitted.
    """

    timestamps: Any
    target: Any
    features: Any = None
    stride: Optional[int] = None

    def __len__(self) -> int:
        return len(self.target)

    def slice(self, start: int, stop: int) -> "SeriesFrame":
        feats = None if self.features is None else self.features[start:stop]
        return SeriesFrame(self.timestamps[start:stop], self.target[start:stop], feats, self.stride)


@dataclass(frozen=True)
class ForecastWindow:
    """A b-step point forecast anchored at the last input step."""

    anchor: int
    values: np.ndarray

    def __post_init__(self):
        values = _frozen(self.values)
        if values.ndim != 1 or values.size == 0:
            raise ShapeMismatch("forecast values must be a non-empty 1-d vector")
        if not np.all(np.isfinite(values)):
            raise NonFinite("forecast values must be finite")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "anchor", int(self.anchor))

    @property
    def horizon(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class ErrorRecord:
    """Signed per-step errors ``truth - forecast`` for one window."""

    window: ForecastWindow
    errors: np.ndarray
    cluster: Optional[int] = None

    def __post_init__(self):
        errors = _frozen(self.errors)
        if errors.shape != (self.window.horizon,):
            raise ShapeMismatch("errors length must equal the window horizon")
        object.__setattr__(self, "errors", errors)


@dataclass(frozen=True)
class IntervalSeries:
    """Per-step prediction bounds for one forecast window.

    ``flagged`` marks intervals built from a fallback error pool (for
    instance when the assigned cluster holds no errors).
    """

    anchor: int
    lower: np.ndarray
    upper: np.ndarray
    alpha: float
    pred: Optional[np.ndarray] = None
    flagged: bool = False

    def __post_init__(self):
        lower, upper = _frozen(self.lower), _frozen(self.upper)
        if lower.shape != upper.shape or lower.ndim != 1:
            raise ShapeMismatch("lower and upper must be 1-d vectors of equal length")
        if np.any(lower > upper):
            raise DSCPError("interval lower bound exceeds upper bound")
        if not 0.0 < self.alpha < 1.0:
            raise DSCPError(f"alpha must lie in (0, 1), got {self.alpha}")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        if self.pred is not None:
            object.__setattr__(self, "pred", _frozen(self.pred))

    @property
    def horizon(self) -> int:
        return self.lower.size

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def covers(self, truth) -> np.ndarray:
        truth = np.asarray(truth, dtype=float)
        return (self.lower <= truth) & (truth <= self.upper)


@dataclass(frozen=True)
class StepErrorSets:
    """Per-step signed error multisets of one cluster (step ``j`` is ``per_step[j]``)."""

    per_step: tuple

    def __post_init__(self):
        sets = tuple(_frozen(s) for s in self.per_step)
        if not sets:
            raise DSCPError("at least one step is required")
        object.__setattr__(self, "per_step", sets)

    @property
    def horizon(self) -> int:
        return len(self.per_step)


@dataclass(frozen=True)
class MergedErrorSets:
    """Contiguous step ranges with one pooled multiset per range.

    ``partition`` holds 0-based inclusive ``(start, end)`` ranges covering
    ``0..b-1`` in order; ``pools[r]`` is the merged multiset of range ``r``.
    """

    partition: tuple
    pools: tuple

    def __post_init__(self):
        partition = tuple((int(s), int(e)) for s, e in self.partition)
        pools = tuple(_frozen(p) for p in self.pools)
        if len(partition) != len(pools) or not partition:
            raise DSCPError("partition and pools must be non-empty and aligned")
        expected = 0
        for start, end in partition:
            if start != expected or end < start:
                raise DSCPError(f"partition {partition} is not contiguous from step 0")
            expected = end + 1
        object.__setattr__(self, "partition", partition)
        object.__setattr__(self, "pools", pools)

    @property
    def horizon(self) -> int:
        return self.partition[-1][1] + 1

    @property
    def boundaries(self) -> list:
        """0-based first step of every range after the first."""
        return [start for start, _ in self.partition[1:]]

    def range_of(self, step: int) -> int:
        for r, (start, end) in enumerate(self.partition):
            if start <= step <= end:
                return r
        raise IndexError(step)

    def step_set(self, step: int) -> np.ndarray:
        """Merged multiset consulted at 0-based ``step``."""
        return self.pools[self.range_of(step)]

    @property
    def per_step(self) -> tuple:
        return tuple(self.step_set(j) for j in range(self.horizon))


@dataclass(frozen=True)
class CalibrationStore:
    """Everything needed to build DSCP intervals for new forecast windows.

    Windows are kept in anchor order, which breaks similarity ties during
    cluster assignment. Cluster labels are 0-based.
    """

    anchors: np.ndarray
    windows: np.ndarray
    errors: np.ndarray
    labels: np.ndarray
    centroids: np.ndarray
    merged: tuple
    silhouette: Optional[float] = None
    config: dict = field(default_factory=dict)
    n_updates: int = 0

    def __post_init__(self):
        object.__setattr__(self, "anchors", _frozen(self.anchors, dtype=np.int64))
        object.__setattr__(self, "windows", _frozen(np.atleast_2d(self.windows)))
        object.__setattr__(self, "errors", _frozen(np.atleast_2d(self.errors)))
        object.__setattr__(self, "labels", _frozen(self.labels, dtype=np.int64))
        object.__setattr__(self, "centroids", _frozen(np.atleast_2d(self.centroids)))
        object.__setattr__(self, "merged", tuple(self.merged))
        object.__setattr__(self, "config", dict(self.config))
        m, b = self.windows.shape
        if self.errors.shape != (m, b) or self.anchors.shape != (m,) or self.labels.shape != (m,):
            raise ShapeMismatch("windows, errors, anchors and labels disagree in shape")
        if self.centroids.shape != (self.k, b):
            raise ShapeMismatch("centroids must be (k, b)")
        if self.labels.min() < 0 or self.labels.max() >= self.k:
            raise DSCPError("labels must lie in 0..k-1")
        if len(self.merged) != self.k or any(ms.horizon != b for ms in self.merged):
            raise DSCPError("one merged error set per cluster, each covering the horizon")

    @property
    def k(self) -> int:
        return len(self.centroids)

    @property
    def horizon(self) -> int:
        return self.windows.shape[1]

    @property
    def cluster_sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k)

    @property
    def smallest_cluster_size(self) -> int:
        return int(self.cluster_sizes.min())

    def records(self, cluster: Optional[int] = None) -> list:
        """ErrorRecords, optionally restricted to one cluster."""
        idx = range(len(self.anchors)) if cluster is None else np.flatnonzero(self.labels == cluster)
        return [
            ErrorRecord(ForecastWindow(self.anchors[i], self.windows[i]), self.errors[i], int(self.labels[i]))
            for i in idx
        ]

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "dscp_calibration_store",
            "horizon": self.horizon,
            "k": self.k,
            "smallest_cluster_size": self.smallest_cluster_size,
            "silhouette": self.silhouette,
            "n_updates": self.n_updates,
            "config": self.config,
            "anchors": self.anchors.tolist(),
            "windows": self.windows.tolist(),
            "errors": self.errors.tolist(),
            "labels": self.labels.tolist(),
            "centroids": self.centroids.tolist(),
            "merged": [
                {"partition": [list(r) for r in ms.partition], "pools": [p.tolist() for p in ms.pools]}
                for ms in self.merged
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "CalibrationStore":
        version = doc.get("schema_version")
        if version != SCHEMA_VERSION:
            raise DSCPError(f"unsupported calibration store schema_version {version!r}")
        b = int(doc["horizon"])
        merged = tuple(
            MergedErrorSets(tuple(tuple(r) for r in ms["partition"]), tuple(ms["pools"]))
            for ms in doc["merged"]
        )
        return cls(
            anchors=doc["anchors"],
            windows=np.array(doc["windows"], dtype=float).reshape(-1, b),
            errors=np.array(doc["errors"], dtype=float).reshape(-1, b),
            labels=doc["labels"],
            centroids=np.array(doc["centroids"], dtype=float).reshape(-1, b),
            merged=merged,
            silhouette=doc.get("silhouette"),
            config=doc.get("config", {}),
            n_updates=int(doc.get("n_updates", 0)),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "CalibrationStore":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path) -> "CalibrationStore":
        return cls.loads(Path(path).read_text())


def stores_equal(a: CalibrationStore, b: CalibrationStore) -> bool:
    """Field-wise equality (numpy-aware)."""
    return a.to_dict() == b.to_dict()


def validate_frame(frame: SeriesFrame) -> SeriesFrame:
    """Check frame invariants and return a normalized copy.

    Raises
    ------
    NonMonotoneTime
        Timestamps are not strictly increasing.
    IrregularSampling
        Spacing is not uniform or disagrees with the declared stride.
    RaggedFeatures
        Feature vectors differ in dimension or count.
    NonFinite
        The target holds NaN or inf.
    """
    ts = np.asarray(frame.timestamps)
    if ts.ndim != 1:
        raise ShapeMismatch("timestamps must be 1-d")
    if ts.size and not np.issubdtype(ts.dtype, np.integer):
        if not np.all(np.equal(np.mod(ts.astype(float), 1), 0)):
            raise NonMonotoneTime("timestamps must be integers")
        ts = ts.astype(np.int64)
    target = np.asarray(frame.target, dtype=float)
    if target.shape != ts.shape:
        raise ShapeMismatch(f"target length {target.size} != timestamps length {ts.size}")
    if not np.all(np.isfinite(target)):
        raise NonFinite("target contains NaN or inf")

    diffs = np.diff(ts)
    if np.any(diffs <= 0):
        raise NonMonotoneTime("timestamps must be strictly increasing")
    stride = frame.stride
    if stride is None:
        stride = int(diffs[0]) if diffs.size else 1
    if np.any(diffs != stride):
        raise IrregularSampling(f"timestamps are not uniformly spaced at stride {stride}")

    features = None
    if frame.features is not None:
        rows = list(frame.features)
        if len(rows) != ts.size:
            raise RaggedFeatures("one feature vector per timestamp is required")
        dims = {len(np.atleast_1d(r)) for r in rows}
        if len(dims) > 1:
            raise RaggedFeatures(f"feature vectors have differing dimensions {sorted(dims)}")
        features = np.array([np.atleast_1d(r) for r in rows], dtype=float).reshape(ts.size, -1)
        features.setflags(write=False)

    ts = np.array(ts, dtype=np.int64)
    ts.setflags(write=False)
    target.setflags(write=False)
    return SeriesFrame(ts, target, features, int(stride))


class Supervised(NamedTuple):
    """Windowed view of a frame.

    ``positions[i]`` is the frame position of the last input step of pair
    ``i``; ``inputs[i]`` spans positions ``t-a+1..t`` and ``truths[i]`` spans
    ``t+1..t+b``.
    """

    positions: np.ndarray
    anchors: np.ndarray
    inputs: np.ndarray
    truths: np.ndarray


def make_supervised(frame: SeriesFrame, a: int, b: int) -> Supervised:
    """Every fully contained (input block, truth block) pair, in time order."""
    if a < 1 or b < 1:
        raise DSCPError("a and b must be >= 1")
    n = len(frame)
    if n < a + b:
        raise TooShort(f"frame of length {n} is shorter than a + b = {a + b}")
    y = np.asarray(frame.target, dtype=float)
    count = n - a - b + 1
    windows = np.lib.stride_tricks.sliding_window_view(y, a + b)[:count]
    positions = np.arange(a - 1, a - 1 + count)
    anchors = np.asarray(frame.timestamps)[positions].astype(np.int64)
    return Supervised(positions, anchors, windows[:, :a].copy(), windows[:, a:].copy())


def read_csv(path) -> SeriesFrame:
    """Load a frame from the CSV ingestion schema.

    The header must name either ``t`` (integer steps) or ``timestamp``
    (ISO-8601, converted to epoch seconds), plus ``y`` and optionally
    ``f1..fn``. Empty cells are rejected.
    """
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        rows = list(reader)
    if "y" not in header:
        raise DSCPError(f"{path}: missing 'y' column")
    if "t" in header:
        time_col, parse_time = "t", int
    elif "timestamp" in header:
        time_col, parse_time = "timestamp", _iso_to_epoch
    else:
        raise DSCPError(f"{path}: need a 't' or 'timestamp' column")
    feature_cols = sorted((c for c in header if c.startswith("f") and c[1:].isdigit()), key=lambda c: int(c[1:]))

    ts, ys, feats = [], [], []
    for lineno, row in enumerate(rows, start=2):
        cells = [row[time_col], row["y"]] + [row[c] for c in feature_cols]
        if any(c is None or c.strip() == "" for c in cells):
            raise NonFinite(f"{path}:{lineno}: empty cell (gaps are not imputed)")
        ts.append(parse_time(row[time_col]))
        ys.append(float(row["y"]))
        if feature_cols:
            feats.append([float(row[c]) for c in feature_cols])
    return validate_frame(SeriesFrame(ts, ys, feats if feature_cols else None))


def write_csv(frame: SeriesFrame, path) -> None:
    frame = validate_frame(frame)
    n_feat = 0 if frame.features is None else frame.features.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "y"] + [f"f{i + 1}" for i in range(n_feat)])
        for i in range(len(frame)):
            row = [int(frame.timestamps[i]), repr(float(frame.target[i]))]
            if n_feat:
                row += [repr(float(v)) for v in frame.features[i]]
            writer.writerow(row)


def _iso_to_epoch(text: str) -> int:
    stamp = datetime.fromisoformat(text.strip().replace("Z", "+00:00"))
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=timezone.utc)
    seconds = stamp.timestamp()
    if not math.isclose(seconds, round(seconds)):
        raise IrregularSampling(f"sub-second timestamp {text!r}")
    return int(round(seconds))


def as_windows(values: Sequence, anchors: Optional[Sequence] = None) -> list:
    """Wrap an (m, b) array as ForecastWindows."""
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if anchors is None:
        anchors = range(len(values))
    return [ForecastWindow(t, v) for t, v in zip(anchors, values)]
