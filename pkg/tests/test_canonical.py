import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from groundforge.canonical import (
    canonical_bytes,
    content_hash,
    dumps_canonical,
    quantize,
    sha256_hex,
)


def test_sorted_keys_and_compact_layout():
    assert dumps_canonical({"b": 1, "a": [2, 3]}) == '{"a":[2,3],"b":1}'


def test_floats_capped_at_nine_significant_digits():
    assert dumps_canonical(1 / 3) == "0.333333333"
    assert dumps_canonical(0.7) == "0.7"
    assert dumps_canonical(1234567891.0) == "1.23456789e+09"


def test_bools_not_confused_with_ints():
    assert dumps_canonical({"flag": True, "n": 1}) == '{"flag":true,"n":1}'


def test_numpy_scalars_coerced():
    assert dumps_canonical([np.int64(3), np.float64(0.5)]) == "[3,0.5]"


def test_rejects_non_finite():
    with pytest.raises(ValueError):
        dumps_canonical(float("nan"))
    with pytest.raises(ValueError):
        dumps_canonical({"x": math.inf})


def test_rejects_unknown_types():
    with pytest.raises(TypeError):
        dumps_canonical({"x": object()})
    with pytest.raises(TypeError):
        dumps_canonical({1: "non-string key"})


@given(st.floats(allow_nan=False, allow_infinity=False, width=64))
def test_float_canonicalization_is_idempotent(x):
    once = dumps_canonical(x)
    again = dumps_canonical(json.loads(once))
    assert once == again


@given(
    st.recursive(
        st.one_of(
            st.none(),
            st.booleans(),
            st.integers(min_value=-(2**53), max_value=2**53),
            st.floats(allow_nan=False, allow_infinity=False, width=64),
            st.text(max_size=20),
        ),
        lambda children: st.one_of(
            st.lists(children, max_size=4),
            st.dictionaries(st.text(max_size=8), children, max_size=4),
        ),
        max_leaves=20,
    )
)
def test_quantize_is_a_fixed_point(payload):
    q = quantize(payload)
    assert quantize(q) == q
    assert canonical_bytes(q) == canonical_bytes(payload)


def test_content_hash_matches_manual_digest():
    payload = {"role": "detect", "payload": {"phrase": "a dog"}}
    assert content_hash(payload) == sha256_hex(canonical_bytes(payload))


@given(st.lists(st.floats(0.0, 1.0, allow_nan=False), min_size=2, max_size=12))
def test_quantization_preserves_ordering(values):
    # sorted wire payloads (e.g. detector confidences) must stay sorted
    # after the 9-significant-digit cap
    ordered = sorted(values, reverse=True)
    quantized = quantize(ordered)
    assert quantized == sorted(quantized, reverse=True)
