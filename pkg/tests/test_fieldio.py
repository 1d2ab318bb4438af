import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from elmorrey.errors import FormatError
from elmorrey.fieldio import HEADER_SIZE, MAGIC, decode_field, encode_field, read_field, sample_path, write_field
from elmorrey.grid import Grid3, ScalarField, TensorField, VectorField


@given(st.sampled_from([ScalarField, VectorField, TensorField]), st.floats(0.5, 20.0), st.integers(0, 2**31))
def test_round_trip_is_bit_exact(kind, box, seed):
    g = Grid3(16, box)
    lead = {ScalarField: (), VectorField: (3,), TensorField: (3, 3)}[kind]
    data = np.random.default_rng(seed).standard_normal(lead + g.shape)
    f = kind(g, data)
    back = decode_field(encode_field(f))
    assert type(back) is kind
    assert back.grid == g
    assert np.array_equal(back.data, f.data)


def test_file_round_trip(tmp_path):
    g = Grid3(16, math.pi)
    f = ScalarField(g, np.arange(16**3, dtype=float).reshape(g.shape))
    p = write_field(tmp_path / "a.elf3", f)
    raw = p.read_bytes()
    assert raw[:4] == MAGIC
    assert len(raw) == HEADER_SIZE + 8 * 16**3
    assert np.array_equal(read_field(p).data, f.data)


def test_rejects_bad_magic_and_truncation():
    g = Grid3(16, 1.0)
    raw = encode_field(ScalarField(g, np.zeros(g.shape)))
    with pytest.raises(FormatError):
        decode_field(b"XXXX" + raw[4:])
    with pytest.raises(FormatError):
        decode_field(raw[:-8])
    with pytest.raises(FormatError):
        decode_field(raw[:10])


def test_shipped_bump_sample():
    f = read_field(sample_path())
    assert isinstance(f, ScalarField)
    assert f.grid == Grid3(32, 4.0)
    with pytest.raises(FileNotFoundError):
        sample_path("missing.elf3")
