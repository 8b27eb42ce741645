import random

import pytest
from hypothesis import given, settings, strategies as st

from agentic_control.parsing import (
    ParseFailure, format_float_array, parse_bool, parse_float_array, parse_path,
)

from fuzz import bool_case, float_array_case


def test_float_array_examples():
    assert parse_float_array("The answer is [0.25, 0.1, 305.2, 304.8]", 4) == [0.25, 0.1, 305.2, 304.8]
    assert parse_float_array("first [1,2] then final: [0.3, 0.0]", 2) == [0.3, 0.0]
    with pytest.raises(ParseFailure) as err:
        parse_float_array("no numbers here", 2)
    assert err.value.raw == "no numbers here"


def test_float_array_length_filter():
    assert parse_float_array("[1, 2, 3] and [4, 5]", 3) == [1.0, 2.0, 3.0]
    with pytest.raises(ParseFailure):
        parse_float_array("[1, 2, 3]", 2)


def test_float_array_code_fence_and_exponent():
    text = "```json\n[1e-3, -2.5E+2]\n```"
    assert parse_float_array(text, 2) == [0.001, -250.0]


def test_bool_examples():
    assert parse_bool("True") is True
    assert parse_bool("The check fails, so: False") is False
    with pytest.raises(ParseFailure):
        parse_bool("maybe")
    assert parse_bool("Untrue. Falsehood. true") is True


def test_path_examples():
    assert parse_path("True\n[0, 1, 2]") == [0, 1, 2]
    assert parse_path("try [0, 2] no wait [0, 1, 2, 0]") == [0, 1, 2, 0]
    assert parse_path("[0.5, 1] then [3]") == [3]
    with pytest.raises(ParseFailure):
        parse_path("[] nothing")


def test_float_array_fuzz():
    rng = random.Random(2024)
    for _ in range(1000):
        text, n, target = float_array_case(rng)
        assert parse_float_array(text, n) == target, text


def test_bool_fuzz():
    rng = random.Random(7)
    for _ in range(1000):
        text, value = bool_case(rng)
        assert parse_bool(text) is value, text


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=8))
def test_format_parse_round_trip(values):
    assert parse_float_array(format_float_array(values), len(values)) == values


def test_format_digits():
    assert format_float_array([0.123456, 2.0], digits=3) == "[0.123, 2]"
