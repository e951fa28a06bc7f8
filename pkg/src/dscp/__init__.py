"""Dual-splitting conformal prediction intervals for multi-step forecasts.

Forecast windows are grouped by shape (vertical split) and per-step signed
errors are merged across statistically indistinguishable steps (horizontal
split); intervals come from quantiles of the merged sets.
"""

from dscp.conformal import (
    ACIState,
    EnbPIState,
    MethodConfig,
    build_store,
    conformal_quantiles,
    cp_interval,
    dscp_calibrate,
    dscp_predict,
    dscp_predict_many,
    dscp_update,
    per_step_cp_interval,
)
from dscp.core import (
    CalibrationStore,
    ErrorRecord,
    ForecastWindow,
    IntervalSeries,
    SeriesFrame,
    make_supervised,
    read_csv,
    write_csv,
)
from dscp.errors import DSCPError
from dscp.metrics import EvalReport, evaluate
from dscp.predictors import Predictor, PredictorSpec, fit

__version__ = "0.1.0"

__all__ = [
    "ACIState",
    "CalibrationStore",
    "DSCPError",
    "EnbPIState",
    "ErrorRecord",
    "EvalReport",
    "ForecastWindow",
    "IntervalSeries",
    "MethodConfig",
    "Predictor",
    "PredictorSpec",
    "SeriesFrame",
    "build_store",
    "conformal_quantiles",
    "cp_interval",
    "dscp_calibrate",
    "dscp_predict",
    "dscp_predict_many",
    "dscp_update",
    "evaluate",
    "fit",
    "make_supervised",
    "per_step_cp_interval",
    "read_csv",
    "write_csv",
]
