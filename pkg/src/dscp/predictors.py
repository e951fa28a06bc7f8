"""Point predictors producing b-step forecast windows.

Two kinds are provided:

* ``seasonal_naive`` replays the last ``period`` observed values.
* ``linear_ar`` is an AR(q) model with intercept, fitted by (ridge) least
  squares on lagged targets and rolled out recursively.

Feature columns of a :class:`~dscp.core.SeriesFrame` are ignored by both.
Either kind accepts an additive ``bias`` that is added to every forecast;
it exists to study deliberately biased forecasters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from dscp.core import ForecastWindow, SeriesFrame, validate_frame
from dscp.errors import InvalidSpec, ShapeMismatch, SingularFit, TooShort

KINDS = ("seasonal_naive", "linear_ar")
DEFAULT_RIDGE = 1e-6


@dataclass(frozen=True)
class PredictorSpec:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidSpec(f"unknown predictor kind {self.kind!r}; expected one of {KINDS}")
        params = dict(self.params)
        if self.kind == "seasonal_naive":
            params.setdefault("period", 1)
            if int(params["period"]) < 1:
                raise InvalidSpec("period must be >= 1")
        else:
            params.setdefault("order", 1)
            params.setdefault("ridge", DEFAULT_RIDGE)
            if int(params["order"]) < 1:
                raise InvalidSpec("AR order must be >= 1")
            ridge = float(params["ridge"])
            if not np.isfinite(ridge) or ridge < 0:
                raise InvalidSpec("ridge penalty must be finite and >= 0")
        params.setdefault("bias", 0.0)
        object.__setattr__(self, "params", params)


class Predictor:
    """A fitted predictor. Immutable; ``predict`` is reentrant."""

    def __init__(self, spec: PredictorSpec, a: int, b: int, coef=None, intercept: float = 0.0):
        self.spec = spec
        self.a = int(a)
        self.b = int(b)
        self.bias = float(spec.params["bias"])
        self.coef = None if coef is None else np.array(coef, dtype=float)
        self.intercept = float(intercept)
        if self.coef is not None:
            self.coef.setflags(write=False)

    def __repr__(self):
        return f"Predictor(kind={self.spec.kind!r}, a={self.a}, b={self.b})"

    def _check(self, block: np.ndarray) -> np.ndarray:
        block = np.asarray(block, dtype=float)
        if block.shape[-1] != self.a:
            raise ShapeMismatch(f"input block spans {block.shape[-1]} steps, expected a = {self.a}")
        return block

    def predict(self, block, anchor: int = 0) -> ForecastWindow:
        """Forecast the next ``b`` steps from one input block of ``a`` values."""
        block = self._check(block)
        if block.ndim != 1:
            raise ShapeMismatch("predict expects a single 1-d input block")
        return ForecastWindow(anchor, self.predict_many(block[None, :])[0])

    def predict_many(self, blocks) -> np.ndarray:
        """Vectorised forecasts for an (m, a) array of input blocks -> (m, b)."""
        blocks = self._check(np.atleast_2d(blocks))
        if self.spec.kind == "seasonal_naive":
            p = int(self.spec.params["period"])
            idx = self.a - p + (np.arange(self.b) % p)
            out = blocks[:, idx]
        else:
            q = self.coef.size
            hist = blocks[:, self.a - q:].copy()
            out = np.empty((blocks.shape[0], self.b))
            # coef[i] multiplies lag i+1; hist[:, -1] is the most recent value
            lags = self.coef[::-1]
            for j in range(self.b):
                nxt = self.intercept + hist @ lags
                out[:, j] = nxt
                hist = np.column_stack([hist[:, 1:], nxt]) if q > 1 else nxt[:, None]
        return out + self.bias

    def to_dict(self) -> dict:
        return {
            "kind": self.spec.kind,
            "params": self.spec.params,
            "a": self.a,
            "b": self.b,
            "coef": None if self.coef is None else self.coef.tolist(),
            "intercept": self.intercept,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Predictor":
        return cls(PredictorSpec(doc["kind"], doc["params"]), doc["a"], doc["b"], doc["coef"], doc["intercept"])


def fit(spec: PredictorSpec, train: SeriesFrame, a: int, b: int) -> Predictor:
    """Fit a predictor on a training frame.

    Raises
    ------
    TooShort
        The frame cannot support the requested model.
    SingularFit
        ``linear_ar`` with ``ridge=0`` on a rank-deficient design.
    """
    train = validate_frame(train)
    y = np.asarray(train.target, dtype=float)
    if spec.kind == "seasonal_naive":
        p = int(spec.params["period"])
        if p > a:
            raise InvalidSpec(f"seasonal period {p} exceeds input window a = {a}")
        if y.size < p + b:
            raise TooShort(f"seasonal_naive needs at least period + b = {p + b} points")
        return Predictor(spec, a, b)

    q = int(spec.params["order"])
    if q > a:
        raise InvalidSpec(f"AR order {q} exceeds input window a = {a}")
    n_rows = y.size - q
    if n_rows < q + b + 1:
        raise TooShort(f"linear_ar(q={q}) needs at least {2 * q + b + 1} points, got {y.size}")
    lagged = np.lib.stride_tricks.sliding_window_view(y, q + 1)
    # column i holds lag i+1
    design = np.column_stack([np.ones(n_rows), lagged[:, q - 1::-1]])
    response = lagged[:, q]
    ridge = float(spec.params["ridge"])
    if ridge > 0:
        penalty = np.sqrt(ridge) * np.eye(q + 1)[1:]
        design = np.vstack([design, penalty])
        response = np.concatenate([response, np.zeros(q)])
    beta, _, rank, _ = np.linalg.lstsq(design, response, rcond=None)
    if rank < q + 1:
        raise SingularFit(f"AR({q}) design has rank {rank} < {q + 1}; supply ridge > 0")
    return Predictor(spec, a, b, coef=beta[1:], intercept=beta[0])
