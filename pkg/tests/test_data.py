import numpy as np
import pytest

from lagforecast.data import SEASONAL_PROFILE, generate_synthetic, ingest_csv, write_series_csv
from lagforecast.errors import GapError, NonMonotoneError, ParseError


def _write(tmp_path, text):
    p = tmp_path / "s.csv"
    p.write_text(text, encoding="utf-8")
    return p


def test_ingest_two_rows(tmp_path):
    s = ingest_csv(_write(tmp_path, "month,value\n1948-01,10.5\n1948-02,0.0\n"))
    assert len(s) == 2 and s.period == 12 and s.start_label == "1948-01"
    np.testing.assert_array_equal(s.values, [10.5, 0.0])


def test_ingest_gap(tmp_path):
    with pytest.raises(GapError, match="1948-02"):
        ingest_csv(_write(tmp_path, "month,value\n1948-01,1\n1948-03,2\n"))


def test_ingest_non_monotone(tmp_path):
    with pytest.raises(NonMonotoneError):
        ingest_csv(_write(tmp_path, "month,value\n1948-02,1\n1948-01,2\n"))


def test_ingest_bad_value_has_row(tmp_path):
    with pytest.raises(ParseError, match="row 3"):
        ingest_csv(_write(tmp_path, "month,value\n1948-01,1\n1948-02,abc\n"))


def test_ingest_bad_month_and_header(tmp_path):
    with pytest.raises(ParseError, match="row 2"):
        ingest_csv(_write(tmp_path, "month,value\n1948-13,1\n"))
    with pytest.raises(ParseError, match="row 1"):
        ingest_csv(_write(tmp_path, "date,rain\n1948-01,1\n"))


def test_csv_roundtrip(tmp_path):
    s = generate_synthetic("seasonal-ar", 30, 1, start="1999-11")
    write_series_csv(s, tmp_path / "x.csv")
    back = ingest_csv(tmp_path / "x.csv")
    np.testing.assert_array_equal(back.values, s.values)
    assert back.start_label == "1999-11"


def test_synthetic_deterministic():
    for kind in ("seasonal-ar", "sine", "random-walk"):
        a, b = generate_synthetic(kind, 100, 3), generate_synthetic(kind, 100, 3)
        np.testing.assert_array_equal(a.values, b.values)
        assert not np.array_equal(a.values, generate_synthetic(kind, 100, 4).values)


def test_seasonal_ar_non_negative():
    assert np.all(generate_synthetic("seasonal-ar", 1200, 0).values >= 0)


def test_seasonal_means_recovered():
    y = generate_synthetic("seasonal-ar", 1200, 21).values.reshape(-1, 12)
    means = y.mean(axis=0)
    se = y.std(axis=0, ddof=1) / np.sqrt(len(y))
    assert np.all(np.abs(means - SEASONAL_PROFILE) < 3 * se)


def test_synthetic_length_check():
    with pytest.raises(ValueError):
        generate_synthetic("sine", 23, 0)
