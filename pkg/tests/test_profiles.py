from datetime import datetime

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridtrade.profiles import (
    AlignmentError,
    ParseError,
    ProfileError,
    ScenarioData,
    SpacingError,
    TimeSeries,
    align,
    load_profile_csv,
    synthesize_profiles,
    synthesize_wholesale_price,
    write_profile_csv,
)

T0 = datetime(2017, 1, 1)


def _write(tmp_path, text, name="p.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_parse_two_rows(tmp_path):
    path = _write(tmp_path, "timestamp,value\n2017-01-01T00:00:00,1.5\n2017-01-01T00:30:00,2.0\n")
    ts = load_profile_csv(path)
    assert ts.step_minutes == 30
    assert ts.values.tolist() == [1.5, 2.0]
    assert ts.start == T0


def test_parse_gap_is_spacing_error(tmp_path):
    path = _write(tmp_path, "timestamp,value\n2017-01-01T00:00:00,1\n2017-01-01T00:30:00,1\n"
                            "2017-01-01T02:00:00,1\n")
    with pytest.raises(SpacingError):
        load_profile_csv(path)


def test_parse_negative_power(tmp_path):
    path = _write(tmp_path, "timestamp,value\n2017-01-01T00:00:00,-0.3\n")
    with pytest.raises(ProfileError):
        load_profile_csv(path)


def test_negative_price_is_allowed(tmp_path):
    path = _write(tmp_path, "timestamp,value\n2017-01-01T00:00:00,-0.3\n")
    assert load_profile_csv(path, "price").values[0] == -0.3


def test_parse_error_reports_line(tmp_path):
    path = _write(tmp_path, "timestamp,value\n2017-01-01T00:00:00,1\n2017-01-01T00:30:00,abc\n")
    with pytest.raises(ParseError) as info:
        load_profile_csv(path)
    assert info.value.line == 3


def test_parse_bad_header(tmp_path):
    with pytest.raises(ParseError):
        load_profile_csv(_write(tmp_path, "time,kw\n2017-01-01T00:00:00,1\n"))


def test_parse_decreasing_timestamps(tmp_path):
    path = _write(tmp_path, "timestamp,value\n2017-01-01T01:00:00,1\n2017-01-01T00:30:00,1\n")
    with pytest.raises(SpacingError):
        load_profile_csv(path)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.0, 1e4, allow_nan=False), min_size=1, max_size=30))
def test_csv_round_trip(tmp_path_factory, values):
    path = tmp_path_factory.mktemp("rt") / "series.csv"
    ts = TimeSeries(T0, values, 30, "power")
    write_profile_csv(ts, path)
    back = load_profile_csv(path)
    assert back == ts
    assert np.allclose(back.values, values, rtol=0, atol=1e-9)


def test_synth_deterministic():
    a = synthesize_profiles(7, 1, "solar")
    b = synthesize_profiles(7, 1, "solar")
    assert a == b


def test_synth_solar_dark_at_night():
    ts = synthesize_profiles(7, 1, "solar")
    assert np.all(ts.values[:12] == 0.0)   # 00:00-06:00
    assert np.all(ts.values[36:] == 0.0)   # after 18:00
    assert ts.values.sum() > 0


def test_synth_load_length_and_sign():
    ts = synthesize_profiles(7, 2, "load")
    assert len(ts) == 96
    assert np.all(ts.values >= 0)


def test_synth_load_has_evening_peak():
    ts = synthesize_profiles(1, 5, "load")
    daily = ts.values.reshape(5, 48).mean(axis=0)
    assert daily[38] > daily[6]  # 19:00 above 03:00


def test_synth_rejects_zero_days():
    with pytest.raises(ValueError):
        synthesize_profiles(1, 0, "load")


def test_wholesale_positive():
    ts = synthesize_wholesale_price(3, 2)
    assert ts.kind == "price" and len(ts) == 96 and np.all(ts.values > 0)


def _data(*series):
    return ScenarioData(tuple(series[:-1]), tuple(series[:-1]), series[-1], 0.05, 0.03)


def test_align_truncates_to_min_length():
    a = TimeSeries(T0, np.ones(100))
    b = TimeSeries(T0, np.ones(96))
    p = TimeSeries(T0, np.ones(96), kind="price")
    out = align(_data(a, b, p))
    assert {len(s) for s in out.all_series()} == {96}


def test_align_step_mismatch():
    a = TimeSeries(T0, np.ones(4), 30)
    b = TimeSeries(T0, np.ones(4), 60, kind="price")
    with pytest.raises(AlignmentError):
        align(_data(a, b))


def test_align_start_mismatch():
    a = TimeSeries(T0, np.ones(4))
    b = TimeSeries(datetime(2017, 1, 2), np.ones(4), kind="price")
    with pytest.raises(AlignmentError):
        align(_data(a, b))


def test_align_idempotent():
    a = TimeSeries(T0, np.arange(10.0))
    p = TimeSeries(T0, np.ones(8), kind="price")
    once = align(_data(a, p))
    twice = align(once)
    assert [s for s in once.all_series()] == [s for s in twice.all_series()]


def test_series_is_read_only():
    ts = TimeSeries(T0, [1.0, 2.0])
    with pytest.raises(ValueError):
        ts.values[0] = 5.0
