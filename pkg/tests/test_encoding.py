import json

import hypothesis.strategies as st
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis.extra.numpy import arrays

from blockswarm.encoding import (
    BlockSpec,
    EncodingConfig,
    InvalidSpecError,
    decode,
    encode,
    round_half_away,
)

ENC = EncodingConfig()


def test_defaults():
    assert (ENC.max_layers, ENC.growth_lower, ENC.growth_upper) == (16, 12, 32)
    assert ENC.special_value == 11


def test_all_disabled_is_repaired():
    assert decode(np.full(16, 11.0), ENC).growth_rates == (12,)


def test_rounding_and_disable():
    pos = [24.4, 11.2, 31.6] + [11.0] * 13
    assert decode(pos, ENC).growth_rates == (24, 32)


def test_identity_on_integral_values():
    pos = np.arange(12, 28, dtype=float)
    spec = decode(pos, ENC)
    assert spec.growth_rates == tuple(range(12, 28))
    assert len(spec) == 16


def test_ties_round_away_from_zero():
    assert round_half_away(11.5) == 12
    assert round_half_away(12.5) == 13
    assert decode([11.5] + [0.0] * 15, ENC).growth_rates == (12,)
    assert decode([11.49] + [0.0] * 15, ENC).growth_rates == (12,)  # repaired, not enabled


def test_out_of_range_values_are_clamped():
    pos = [-50.0, 99.0] + [11.0] * 14
    assert decode(pos, ENC).growth_rates == (32,)


def test_encode_definition():
    cfg = EncodingConfig(max_layers=4)
    np.testing.assert_array_equal(encode(BlockSpec((12, 32)), cfg), [12.0, 32.0, 11.0, 11.0])


def test_encode_rejects_too_long():
    with pytest.raises(InvalidSpecError):
        encode(BlockSpec(tuple([12] * 17)), ENC)


def test_encode_rejects_out_of_range_growth():
    with pytest.raises(InvalidSpecError):
        encode(BlockSpec((12, 40)), ENC)


def test_decode_rejects_wrong_length():
    with pytest.raises(InvalidSpecError):
        decode([12.0] * 15, ENC)


def test_round_trip_random_specs():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        L = rng.integers(1, 17)
        spec = BlockSpec(tuple(rng.integers(12, 33, size=L)))
        assert decode(encode(spec, ENC), ENC) == spec


def test_json_round_trip():
    spec = BlockSpec((12, 20, 32))
    assert BlockSpec.from_json(spec.to_json()) == spec
    assert json.loads(spec.to_json()) == [12, 20, 32]
    with pytest.raises(InvalidSpecError):
        BlockSpec.from_json('[12, "x"]')


@st.composite
def specs(draw):
    rates = draw(st.lists(st.integers(12, 32), min_size=1, max_size=16))
    return BlockSpec(tuple(rates))


@given(specs())
def test_round_trip_property(spec):
    assert decode(encode(spec, ENC), ENC) == spec


@given(arrays(np.float64, 16, elements=st.floats(-1e6, 1e6)))
def test_decode_is_total(pos):
    spec = decode(pos, ENC)
    assert 1 <= len(spec) <= 16
    spec.validate(ENC)


@given(arrays(np.float64, 16, elements=st.floats(0, 40)))
def test_encode_decode_idempotent_on_image(pos):
    spec = decode(pos, ENC)
    assert decode(encode(spec, ENC), ENC) == spec


@settings(max_examples=200)
@given(
    arrays(np.float64, 16, elements=st.floats(11, 32)),
    st.integers(0, 15),
    st.floats(11.5, 32),
)
def test_enabling_a_layer_keeps_the_others(pos, k, value):
    """Raising a disabled slot above the threshold inserts one layer and removes none."""
    pos = pos.copy()
    pos[k] = 11.0
    before = decode(pos, ENC)
    raised = pos.copy()
    raised[k] = value
    after = decode(raised, ENC)
    enabled_before = [round_half_away(x) for x in pos if round_half_away(x) > 11]
    if not enabled_before:
        # the all-disabled repair is replaced by the real layer
        assert len(after) == 1
        return
    assert len(after) == len(before) + 1
    rest = list(after.growth_rates)
    rest.pop(sum(1 for x in pos[:k] if round_half_away(x) > 11))
    assert tuple(rest) == before.growth_rates
