"""Point predictors."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dscp.core import SeriesFrame
from dscp.errors import InvalidSpec, ShapeMismatch, SingularFit, TooShort
from dscp.predictors import Predictor, PredictorSpec, fit


def frame(y):
    return SeriesFrame(np.arange(len(y)), np.asarray(y, dtype=float))


class TestSeasonalNaive:
    def test_replays_period_four(self):
        pred = fit(PredictorSpec("seasonal_naive", {"period": 4}), frame([1, 2, 3, 4, 1, 2, 3, 4]), 4, 4)
        np.testing.assert_array_equal(pred.predict([1, 2, 3, 4]).values, [1, 2, 3, 4])

    def test_period_two_tail(self):
        pred = fit(PredictorSpec("seasonal_naive", {"period": 2}), frame(np.arange(10.0)), 2, 3)
        np.testing.assert_array_equal(pred.predict([7, 9]).values, [7, 9, 7])

    def test_period_longer_than_input_rejected(self):
        with pytest.raises(InvalidSpec):
            fit(PredictorSpec("seasonal_naive", {"period": 5}), frame(np.arange(20.0)), 4, 2)

    @given(c=st.floats(-1e3, 1e3), seed=st.integers(0, 100))
    def test_translation_equivariance(self, c, seed):
        y = np.random.default_rng(seed).normal(size=12)
        pred = fit(PredictorSpec("seasonal_naive", {"period": 3}), frame(y), 6, 4)
        np.testing.assert_allclose(pred.predict(y[-6:] + c).values, pred.predict(y[-6:]).values + c, atol=1e-9)


class TestLinearAR:
    def ar1(self, n=40, x0=64.0):
        return x0 * 0.5 ** np.arange(n)

    def test_recovers_coefficient(self):
        pred = fit(PredictorSpec("linear_ar", {"order": 1, "ridge": 0.0}), frame(self.ar1(30, 1.0)), 1, 2)
        assert abs(pred.coef[0] - 0.5) < 1e-9

    def test_constant_series_is_singular(self):
        with pytest.raises(SingularFit):
            fit(PredictorSpec("linear_ar", {"order": 2, "ridge": 0.0}), frame(np.ones(50)), 2, 2)

    def test_default_ridge_handles_constant_series(self):
        pred = fit(PredictorSpec("linear_ar", {"order": 2}), frame(np.ones(50)), 2, 2)
        np.testing.assert_allclose(pred.predict([1.0, 1.0]).values, [1.0, 1.0], atol=1e-4)

    def test_explicit_recursion(self):
        pred = Predictor(PredictorSpec("linear_ar", {"order": 1}), 1, 2, coef=[0.5], intercept=0.0)
        np.testing.assert_allclose(pred.predict([8.0]).values, [4.0, 2.0])

    def test_matches_analytic_rollout(self):
        pred = fit(PredictorSpec("linear_ar", {"order": 1, "ridge": 0.0}), frame(self.ar1(30, 1.0)), 3, 5)
        out = pred.predict([4.0, 2.0, 1.0]).values
        np.testing.assert_allclose(out, 0.5 ** np.arange(1, 6), atol=1e-6)

    def test_order_two_coefficient_order(self):
        # y_t = 0.6 y_{t-1} - 0.2 y_{t-2}
        y = [1.0, 2.0]
        for _ in range(60):
            y.append(0.6 * y[-1] - 0.2 * y[-2])
        pred = fit(PredictorSpec("linear_ar", {"order": 2, "ridge": 0.0}), frame(y), 2, 1)
        np.testing.assert_allclose(pred.coef, [0.6, -0.2], atol=1e-8)
        assert pred.predict([2.0, 3.0]).values[0] == pytest.approx(0.6 * 3.0 - 0.2 * 2.0)

    def test_too_short(self):
        with pytest.raises(TooShort):
            fit(PredictorSpec("linear_ar", {"order": 3}), frame(np.arange(6.0)), 3, 2)


class TestPredictor:
    def test_wrong_input_length(self):
        pred = fit(PredictorSpec("seasonal_naive", {"period": 2}), frame(np.arange(10.0)), 2, 3)
        with pytest.raises(ShapeMismatch):
            pred.predict([1.0, 2.0, 3.0])

    def test_bias_shifts_forecast(self):
        base = fit(PredictorSpec("seasonal_naive", {"period": 2}), frame(np.arange(10.0)), 2, 3)
        biased = fit(PredictorSpec("seasonal_naive", {"period": 2, "bias": 2.0}), frame(np.arange(10.0)), 2, 3)
        np.testing.assert_allclose(biased.predict([1, 2]).values, base.predict([1, 2]).values + 2.0)

    def test_deterministic_and_serializable(self):
        y = np.random.default_rng(3).normal(size=200)
        spec = PredictorSpec("linear_ar", {"order": 3})
        p1, p2 = fit(spec, frame(y), 8, 4), fit(spec, frame(y), 8, 4)
        blocks = np.lib.stride_tricks.sliding_window_view(y, 8)
        assert np.array_equal(p1.predict_many(blocks), p2.predict_many(blocks))
        p3 = Predictor.from_dict(p1.to_dict())
        assert np.array_equal(p1.predict_many(blocks), p3.predict_many(blocks))

    def test_unknown_kind(self):
        with pytest.raises(InvalidSpec):
            PredictorSpec("lstm", {})
