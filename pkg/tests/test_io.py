import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lpdvoretzky.errors import ParseError
from lpdvoretzky.io import (
    dumps_csv,
    dumps_json,
    format_float,
    load_matrix_csv,
    loads_csv,
    read_csv,
    read_json,
    save_matrix_csv,
    write_csv,
    write_json,
)

finite = st.floats(allow_nan=False, allow_infinity=False)
cell = st.one_of(finite, st.integers(-10**12, 10**12), st.booleans(),
                 st.sampled_from(["p-mean", "median", "greedy-farthest-point"]))


@given(finite)
def test_format_float_roundtrip(x):
    s = format_float(x)
    assert float(s) == x
    assert any(c in s for c in ".e")


def test_format_float_special():
    assert format_float(1.0) == "1.0"
    assert format_float(1e300) == "1.0000000000000001e+300"
    assert format_float(3) == "3.0"
    assert format_float(float("inf")) == "inf"


@given(st.lists(st.fixed_dictionaries({"a": cell, "b": cell, "c": finite}), max_size=8))
def test_csv_roundtrip(rows):
    meta = {"seed": 3, "command": "x", "params": {"eps": [0.1, 0.2]}}
    m, back = loads_csv(dumps_csv(rows, ["a", "b", "c"], meta))
    assert m == meta
    assert back == rows
    for r0, r1 in zip(rows, back):
        for k in r0:
            assert type(r0[k]) is type(r1[k])


json_val = st.recursive(
    st.one_of(st.none(), st.booleans(), finite, st.integers(-10**15, 10**15), st.text(max_size=5)),
    lambda inner: st.one_of(st.lists(inner, max_size=4),
                            st.dictionaries(st.text(max_size=4), inner, max_size=4)),
    max_leaves=20,
)


@given(json_val)
def test_json_roundtrip(x):
    assert json.loads(dumps_json(x)) == x


def test_json_numpy_values(tmp_path):
    rec = {"a": np.float64(0.1), "b": np.arange(3), "c": np.bool_(True), "d": (1, 2.5)}
    path = tmp_path / "r.json"
    write_json(path, rec)
    assert read_json(path) == {"a": 0.1, "b": [0, 1, 2], "c": True, "d": [1, 2.5]}
    assert dumps_json(rec) == path.read_text()


def test_read_json_names_line(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "a": 1,\n  "b": \n}\n')
    with pytest.raises(ParseError, match="line 4"):
        read_json(path)


def test_csv_file_roundtrip(tmp_path):
    rows = [{"eps": 0.1, "count": 5, "censored": True}, {"eps": 1 / 3, "count": 0, "censored": False}]
    path = tmp_path / "t.csv"
    write_csv(path, rows, ["eps", "count", "censored"], {"seed": 1})
    meta, back = read_csv(path)
    assert back == rows and meta == {"seed": 1}
    assert path.read_text().splitlines()[0].startswith("# meta: ")


def test_csv_ragged_row_names_line():
    text = "a,b\n1,2\n3\n"
    with pytest.raises(ParseError, match="line 3"):
        loads_csv(text)


def test_csv_no_header():
    with pytest.raises(ParseError):
        loads_csv("# only a comment\n")


def test_matrix_formats(tmp_path):
    A = np.array([[1.0, -2.5], [1 / 3, 4e-20]])
    p1 = tmp_path / "a.csv"
    save_matrix_csv(p1, A)
    assert np.array_equal(load_matrix_csv(p1), A)
    p2 = tmp_path / "b.txt"
    p2.write_text("x y\n1 2\n3   4\n")
    assert np.array_equal(load_matrix_csv(p2), [[1, 2], [3, 4]])


@pytest.mark.parametrize("text,line", [("1,2\n3,x\n", 2), ("1,2\n3,4\n5\n", 3)])
def test_matrix_parse_errors(tmp_path, text, line):
    p = tmp_path / "m.csv"
    p.write_text(text)
    with pytest.raises(ParseError, match=f"line {line}"):
        load_matrix_csv(p)


def test_matrix_empty(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("\n")
    with pytest.raises(ParseError):
        load_matrix_csv(p)
