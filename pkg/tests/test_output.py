import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bcgain.output import config_hash, dumps, fmt, read_csv, to_csv, write_manifest


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_fmt_round_trips(x):
    assert float(fmt(x)) == x


def test_fmt_special():
    assert fmt(math.nan) == "NaN"
    assert fmt(math.inf) == "Infinity" and fmt(-math.inf) == "-Infinity"


def test_dumps_arrays_and_numpy_scalars():
    text = dumps({"a": np.eye(2), "b": np.float64(0.1), "c": np.int64(3), "d": True, "e": None})
    back = json.loads(text)
    assert back == {"a": [[1.0, 0.0], [0.0, 1.0]], "b": 0.1, "c": 3, "d": True, "e": None}


def test_csv_round_trip():
    text = to_csv(["name", "x"], [["CO", 0.1], ["SU", 1 / 3]])
    assert "\r" not in text
    header, rows = read_csv(text)
    assert header == ["name", "x"] and rows == [["CO", 0.1], ["SU", 1 / 3]]


def test_config_hash_key_order():
    assert config_hash({"a": 1, "b": [1, 2]}) == config_hash({"b": [1, 2], "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})


def test_manifest_fields(tmp_path):
    f = tmp_path / "x.csv"
    f.write_text("a\n1\n")
    path = write_manifest(tmp_path, "demo", {"k": 1}, 7, [f], "numpy")
    man = json.loads(path.read_text())
    assert man["seed"] == 7 and man["command"] == "demo" and man["backend"] == "numpy"
    assert man["config_hash"] == config_hash({"k": 1})
    assert "x.csv" in json.dumps(man["files"])
