import json
import math

import numpy as np
from iapi import Box, SublevelSet, ValueFunction, monomial_basis
from iapi.serialize import (
    fmt_float,
    region_descriptor,
    to_json,
)


def test_fmt_float_round_trips():
    values = [0.1, 1.0 / 3.0, math.pi, 1e-300, 12345.6789, 2.0 ** -52, 5.0]
    for v in values + [-v for v in values]:
        assert float(fmt_float(v)) == v


def test_to_json_is_valid_json():
    payload = {
        "name": "x",
        "flag": True,
        "none": None,
        "ints": [1, 2, 3],
        "floats": [0.1, 2.5e-8],
        "nested": {"a": [1.0]},
    }
    text = to_json(payload)
    assert json.loads(text) == payload


def test_to_json_float_precision():
    third = 1.0 / 3.0
    assert fmt_float(third) in to_json({"v": third})
    assert json.loads(to_json({"v": third}))["v"] == third


def test_numpy_values_serialize():
    text = to_json({"arr": np.array([1.5, 2.5]), "n": np.int64(3), "x": np.float64(0.25)})
    assert json.loads(text) == {"arr": [1.5, 2.5], "n": 3, "x": 0.25}


def test_region_descriptor_nested():
    box = Box(np.array([-1.0]), np.array([1.0]))
    v = ValueFunction(monomial_basis(1), np.array([2.5]))
    sub = SublevelSet(v, 2.5, parent=box)
    desc = region_descriptor(SublevelSet(v, 2.0, parent=sub))
    assert desc["kind"] == "sublevel"
    assert desc["parent"]["kind"] == "sublevel"
    assert desc["parent"]["parent"]["kind"] == "box"


def test_serialization_deterministic():
    payload = {"a": [0.1, 0.2, 0.30000000000000004], "b": {"c": 1e-17}}
    assert to_json(payload) == to_json(payload)
