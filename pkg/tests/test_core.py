"""Frames, supervised windows, interval records and the calibration store."""

import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dscp.conformal import MethodConfig, build_store
from dscp.core import (
    SCHEMA_VERSION,
    CalibrationStore,
    ForecastWindow,
    IntervalSeries,
    SeriesFrame,
    make_supervised,
    read_csv,
    stores_equal,
    validate_frame,
    write_csv,
)
from dscp.errors import (
    DSCPError,
    IrregularSampling,
    NonFinite,
    NonMonotoneTime,
    RaggedFeatures,
    ShapeMismatch,
    TooShort,
)


def small_store(seed=0, m=40, b=4):
    rng = np.random.default_rng(seed)
    windows = np.concatenate([rng.normal(0, 1, (m // 2, b)), rng.normal(8, 1, (m - m // 2, b))])
    errors = rng.normal(0, 1, (m, b))
    return build_store(np.arange(m), windows, errors, MethodConfig("dscp", 0.1), seed)


class TestSeriesFrame:
    def test_well_formed_input_is_accepted(self):
        frame = validate_frame(SeriesFrame([0, 1, 2], [1.0, 2.0, 3.0]))
        assert len(frame) == 3
        assert frame.stride == 1

    def test_decreasing_time_rejected(self):
        with pytest.raises(NonMonotoneTime):
            validate_frame(SeriesFrame([0, 2, 1], [1.0, 2.0, 3.0]))

    def test_nan_target_rejected(self):
        with pytest.raises(NonFinite):
            validate_frame(SeriesFrame([0, 1], [1.0, np.nan]))

    def test_gap_rejected(self):
        with pytest.raises(IrregularSampling):
            validate_frame(SeriesFrame([0, 1, 3], [1.0, 2.0, 3.0]))

    def test_ragged_features_rejected(self):
        with pytest.raises(RaggedFeatures):
            validate_frame(SeriesFrame([0, 1], [1.0, 2.0], [[1.0, 2.0], [3.0]]))

    def test_frame_is_read_only(self):
        frame = validate_frame(SeriesFrame([0, 1, 2], [1.0, 2.0, 3.0]))
        with pytest.raises(ValueError):
            frame.target[0] = 5.0


class TestMakeSupervised:
    def test_pair_count(self):
        sup = make_supervised(SeriesFrame(np.arange(10), np.arange(10.0)), 3, 2)
        assert len(sup.inputs) == 6

    def test_boundary_single_pair(self):
        sup = make_supervised(SeriesFrame(np.arange(5), np.arange(5.0)), 3, 2)
        assert len(sup.inputs) == 1
        np.testing.assert_array_equal(sup.inputs[0], [0, 1, 2])
        np.testing.assert_array_equal(sup.truths[0], [3, 4])
        assert sup.anchors[0] == 2

    def test_too_short(self):
        with pytest.raises(TooShort):
            make_supervised(SeriesFrame(np.arange(4), np.arange(4.0)), 3, 2)

    @given(n=st.integers(2, 60), a=st.integers(1, 10), b=st.integers(1, 10))
    def test_indices_stay_in_range(self, n, a, b):
        y = np.arange(float(n))
        frame = SeriesFrame(np.arange(n), y)
        if n < a + b:
            with pytest.raises(TooShort):
                make_supervised(frame, a, b)
            return
        sup = make_supervised(frame, a, b)
        assert len(sup.inputs) == n - a - b + 1
        # values equal positions, so the last truth value is the largest index touched
        assert sup.truths.max() <= n - 1
        assert sup.inputs.min() >= 0
        np.testing.assert_array_equal(sup.inputs[:, -1], sup.positions)
        np.testing.assert_array_equal(sup.truths[:, 0], sup.positions + 1)


class TestRecords:
    def test_forecast_window_rejects_nonfinite(self):
        with pytest.raises(NonFinite):
            ForecastWindow(0, [1.0, np.inf])

    def test_interval_requires_ordered_bounds(self):
        with pytest.raises(DSCPError):
            IntervalSeries(0, [1.0, 2.0], [0.0, 3.0], 0.1)

    def test_interval_width_and_cover(self):
        iv = IntervalSeries(0, [0.0, 1.0], [2.0, 1.0], 0.1)
        np.testing.assert_array_equal(iv.width, [2.0, 0.0])
        np.testing.assert_array_equal(iv.covers([1.0, 2.0]), [True, False])


class TestCalibrationStore:
    def test_round_trip_is_field_identical(self):
        store = small_store()
        again = CalibrationStore.loads(store.dumps())
        assert stores_equal(store, again)
        assert again.k == store.k and again.horizon == store.horizon

    @pytest.mark.parametrize("seed", range(5))
    def test_round_trip_many_seeds(self, seed, tmp_path):
        store = small_store(seed, m=30 + seed, b=3 + seed % 3)
        store.save(tmp_path / "s.json")
        assert stores_equal(store, CalibrationStore.load(tmp_path / "s.json"))

    def test_schema_version_present_and_checked(self):
        doc = small_store().to_dict()
        assert doc["schema_version"] == SCHEMA_VERSION
        doc["schema_version"] = SCHEMA_VERSION + 1
        with pytest.raises(DSCPError):
            CalibrationStore.from_dict(doc)

    def test_shape_mismatch(self):
        store = small_store()
        with pytest.raises(ShapeMismatch):
            CalibrationStore(store.anchors[:-1], store.windows, store.errors, store.labels,
                             store.centroids, store.merged)

    def test_serialized_form_is_json(self):
        doc = json.loads(small_store().dumps())
        assert doc["kind"] == "dscp_calibration_store"


class TestCSV:
    def test_round_trip(self, tmp_path):
        frame = SeriesFrame(np.arange(5), [0.1, 0.2, 0.3, 0.4, 0.5], np.arange(10.0).reshape(5, 2))
        write_csv(frame, tmp_path / "f.csv")
        back = read_csv(tmp_path / "f.csv")
        np.testing.assert_array_equal(back.target, frame.target)
        np.testing.assert_array_equal(back.features, frame.features)

    def test_iso_timestamps(self, tmp_path):
        path = tmp_path / "iso.csv"
        path.write_text("timestamp,y\n2024-01-01T00:00:00,1\n2024-01-01T01:00:00,2\n2024-01-01T02:00:00,3\n")
        frame = read_csv(path)
        assert frame.stride == 3600

    def test_empty_cell_rejected(self, tmp_path):
        path = tmp_path / "gap.csv"
        path.write_text("t,y\n0,1\n1,\n2,3\n")
        with pytest.raises(NonFinite):
            read_csv(path)
