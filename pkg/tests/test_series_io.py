import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vgnet.series_io import (
    ParseError,
    TimeSeries,
    load_dataset,
    parse_ucr_tsv,
    write_ucr_tsv,
    znormalize,
)


def write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def test_parse_basic_line(tmp_path):
    p = write_lines(tmp_path / "a.tsv", ["1\t0.5\t0.7\t0.2"])
    series = parse_ucr_tsv(p)
    assert len(series) == 1
    assert series[0].label == 1
    np.testing.assert_allclose(series[0].values, [0.5, 0.7, 0.2])


def test_parse_negative_label(tmp_path):
    p = write_lines(tmp_path / "a.tsv", ["-1\t1.0\t1.0"])
    ts = parse_ucr_tsv(p)[0]
    assert ts.label == -1
    np.testing.assert_allclose(ts.values, [1.0, 1.0])


def test_parse_rejects_nan_with_position(tmp_path):
    p = write_lines(tmp_path / "a.tsv", ["2\tNaN\t0.1"])
    with pytest.raises(ParseError) as err:
        parse_ucr_tsv(p)
    assert err.value.line == 1
    assert err.value.column == 2


def test_parse_rejects_non_numeric_token(tmp_path):
    p = write_lines(tmp_path / "a.tsv", ["1\t0.5\t0.2", "3\t0.1\tbogus"])
    with pytest.raises(ParseError) as err:
        parse_ucr_tsv(p)
    assert err.value.line == 2
    assert err.value.column == 3


def test_parse_rejects_short_line(tmp_path):
    p = write_lines(tmp_path / "a.tsv", ["1\t0.5"])
    with pytest.raises(ParseError) as err:
        parse_ucr_tsv(p)
    assert err.value.line == 1


def test_parse_skips_blank_lines_and_warns_on_mixed_lengths(tmp_path):
    p = write_lines(tmp_path / "a.tsv", ["1\t1\t2\t3", "", "2\t1\t2"])
    with pytest.warns(UserWarning, match="mixed series lengths"):
        series = parse_ucr_tsv(p)
    assert [ts.values.size for ts in series] == [3, 2]


def test_parse_missing_file(tmp_path):
    with pytest.raises(OSError):
        parse_ucr_tsv(tmp_path / "nope.tsv")


def test_load_dataset_densifies_sorted(tmp_path):
    tr = write_lines(tmp_path / "D_TRAIN.tsv", ["-1\t1\t2", "1\t3\t4"])
    te = write_lines(tmp_path / "D_TEST.tsv", ["1\t5\t6", "-1\t0\t1"])
    ds = load_dataset(tr, te, "D")
    assert ds.num_classes == 2
    assert ds.label_map == {-1: 0, 1: 1}
    assert [ts.label for ts in ds.train] == [0, 1]
    assert [ts.label for ts in ds.test] == [1, 0]


def test_load_dataset_empty_split_is_error(tmp_path):
    tr = write_lines(tmp_path / "D_TRAIN.tsv", ["1\t1\t2", "2\t3\t4"])
    te = tmp_path / "D_TEST.tsv"
    te.write_text("")
    with pytest.raises(ValueError, match="empty split"):
        load_dataset(tr, te, "D")


def test_roundtrip_exact(tmp_path):
    src = write_lines(tmp_path / "a.tsv",
                      ["1\t0.1\t-2.5e-3\t7", "-1\t3.14159265358979\t1e-12"])
    with pytest.warns(UserWarning):
        first = parse_ucr_tsv(src)
    out = tmp_path / "b.tsv"
    write_ucr_tsv(out, first)
    with pytest.warns(UserWarning):
        second = parse_ucr_tsv(out)
    for a, b in zip(first, second):
        assert a.label == b.label
        assert np.array_equal(a.values, b.values)


finite_floats = st.floats(min_value=-1e9, max_value=1e9,
                          allow_nan=False, allow_infinity=False)


@given(st.lists(st.tuples(st.integers(-5, 5),
                          st.lists(finite_floats, min_size=2, max_size=12)),
                min_size=1, max_size=8))
def test_roundtrip_property(tmp_path_factory, rows):
    tmp = tmp_path_factory.mktemp("rt")
    series = [TimeSeries(id=i, label=lab, values=np.array(vals))
              for i, (lab, vals) in enumerate(rows)]
    path = tmp / "x.tsv"
    write_ucr_tsv(path, series)
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # mixed lengths are fine here
        parsed = parse_ucr_tsv(path)
    assert len(parsed) == len(series)
    for a, b in zip(series, parsed):
        assert a.label == b.label
        assert np.array_equal(a.values, b.values)


def test_znormalize_two_points():
    out = znormalize(TimeSeries(0, 0, np.array([1.0, 3.0])))
    np.testing.assert_allclose(out.values, [-1.0, 1.0])


def test_znormalize_constant_guard():
    out = znormalize(TimeSeries(0, 0, np.array([5.0, 5.0, 5.0])))
    np.testing.assert_array_equal(out.values, [0.0, 0.0, 0.0])


def test_znormalize_three_points():
    # mean 2, population std sqrt(8/3)
    expected = (np.array([0.0, 2.0, 4.0]) - 2.0) / np.sqrt(8.0 / 3.0)
    out = znormalize(TimeSeries(0, 0, np.array([0.0, 2.0, 4.0])))
    np.testing.assert_allclose(out.values, expected)
    np.testing.assert_allclose(out.values, [-1.2247, 0.0, 1.2247], atol=1e-4)


@given(st.lists(st.floats(min_value=-1e6, max_value=1e6,
                          allow_nan=False, allow_infinity=False),
                min_size=2, max_size=40))
def test_znormalize_idempotent(vals):
    ts = TimeSeries(0, 0, np.asarray(vals, dtype=np.float64))
    once = znormalize(ts)
    twice = znormalize(once)
    np.testing.assert_allclose(twice.values, once.values, atol=1e-12)
