import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from leakcast.errors import DataError
from leakcast.series import (RECORD_DOWNSAMPLE_FACTOR, RECORD_LENGTH, FaultThreshold, SplitSpec,
                             TimeSeries, downsample, fault_alarm, ingest_csv, make_windows,
                             synthetic_leakage, train_test_split, window_count, write_csv)


def test_timeseries_rejects_nonfinite():
    with pytest.raises(DataError):
        TimeSeries(np.array([1.0, np.nan]))
    with pytest.raises((DataError, ValueError)):
        TimeSeries(np.array([1.0, 2.0]), dt=0.0)


def test_timeseries_values_are_read_only():
    s = TimeSeries(np.arange(4.0))
    with pytest.raises(ValueError):
        s.values[0] = 9.0


def test_ingest_reads_named_column(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("time,current\n0,0.1\n1,0.2\n2,0.15\n")
    s = ingest_csv(p, "current", dt=0.5)
    np.testing.assert_array_equal(s.values, [0.1, 0.2, 0.15])
    assert s.dt == 0.5 and s.unit == "A"


def test_ingest_custom_delimiter(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("a;b\n1;2\n3;4\n")
    np.testing.assert_array_equal(ingest_csv(p, "b", delimiter=";").values, [2, 4])


def test_ingest_reports_bad_row(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("current\n0.1\nabc\n")
    with pytest.raises(DataError, match="row 2"):
        ingest_csv(p, "current")


def test_ingest_missing_column_and_file(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("current\n0.1\n")
    with pytest.raises(DataError, match="not found"):
        ingest_csv(p, "voltage")
    with pytest.raises(DataError):
        ingest_csv(tmp_path / "missing.csv", "current")


def test_write_then_ingest_roundtrip(tmp_path):
    vals = np.random.default_rng(0).random(17)
    write_csv(tmp_path / "o.csv", {"t": np.arange(17), "v": vals})
    np.testing.assert_array_equal(ingest_csv(tmp_path / "o.csv", "v").values, vals)


def test_downsample_block_mean():
    s = downsample(TimeSeries(np.array([1.0, 2.0, 3.0, 4.0])), 2)
    np.testing.assert_array_equal(s.values, [1.5, 3.5])
    assert s.dt == 2.0


def test_downsample_decimate_and_identity():
    s = TimeSeries(np.arange(7.0))
    np.testing.assert_array_equal(downsample(s, 3, "decimate").values, [0.0, 3.0])
    np.testing.assert_array_equal(downsample(s, 1).values, s.values)


def test_downsample_record_length():
    s = TimeSeries(np.zeros(RECORD_LENGTH))
    assert len(downsample(s, RECORD_DOWNSAMPLE_FACTOR)) == 968


@given(st.integers(1, 12), st.integers(1, 20), st.integers(0, 2**31))
def test_downsample_preserves_mean(factor, blocks, seed):
    vals = np.random.default_rng(seed).normal(size=factor * blocks)
    out = downsample(TimeSeries(vals), factor)
    assert abs(out.values.mean() - vals.mean()) < 1e-12


def test_split_proportions():
    tr, te = train_test_split(TimeSeries(np.arange(100.0)), SplitSpec(1, 1, 0.2))
    assert (len(tr), len(te)) == (80, 20)
    tr, te = train_test_split(TimeSeries(np.arange(968.0)), SplitSpec(1, 1, 0.1))
    assert (len(tr), len(te)) == (872, 96)


def test_split_infeasible():
    with pytest.raises(DataError):
        train_test_split(TimeSeries(np.arange(10.0)), SplitSpec(8, 5, 0.2))


@given(st.integers(10, 300), st.floats(0.05, 0.5))
def test_split_concatenation_is_identity(n, frac):
    s = TimeSeries(np.arange(float(n)))
    spec = SplitSpec(1, 1, frac)
    try:
        tr, te = train_test_split(s, spec)
    except DataError:
        return
    np.testing.assert_array_equal(np.concatenate([tr.values, te.values]), s.values)
    assert len(te) == math.floor(n * frac)


def test_windows_enumeration():
    X, Y = make_windows(TimeSeries(np.arange(1.0, 6.0)), 2, 1)
    np.testing.assert_array_equal(X, [[1, 2], [2, 3], [3, 4]])
    np.testing.assert_array_equal(Y, [[3], [4], [5]])


def test_windows_record_count_and_errors():
    X, _ = make_windows(TimeSeries(np.zeros(968)), 20, 20)
    assert len(X) == 929
    with pytest.raises(ValueError):
        make_windows(TimeSeries(np.zeros(10)), 2, 0)


def test_window_count_exhaustive():
    for n in range(1, 51):
        s = TimeSeries(np.arange(float(n)))
        for k in range(1, n + 1):
            for h in range(1, n - k + 1):
                X, _ = make_windows(s, k, h)
                assert len(X) == window_count(n, k, h) == n - k - h + 1


def test_fault_alarm():
    thr = FaultThreshold(0.2)
    assert fault_alarm([0.1, 0.19, 0.21], thr) == 2
    assert fault_alarm([0.1, 0.1], thr) is None
    assert fault_alarm([0.2], thr) is None


def test_synthetic_surrogate_shape():
    s = synthetic_leakage(seed=3)
    assert len(s) == RECORD_LENGTH
    assert np.all(s.values > 0)
    d = downsample(s, 100).values
    # rising trend: last decile well above the first
    assert d[-97:].mean() > d[:97].mean() + 0.05
    np.testing.assert_array_equal(synthetic_leakage(1000, seed=3).values, synthetic_leakage(1000, seed=3).values)
