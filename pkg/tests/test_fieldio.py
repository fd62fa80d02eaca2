import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fracgrad.errors import ValidationError
from fracgrad.fieldio import read_field, read_mask, write_field, write_mask
from fracgrad.grid import GridSpec, ScalarField


@settings(max_examples=25, deadline=None)
@given(vals=arrays(np.float64, 64, elements=st.floats(allow_nan=False, allow_infinity=False)), L=st.floats(0.1, 10))
def test_field_roundtrip_bit_identical(tmp_path_factory, vals, L):
    spec = GridSpec(2, 8, L)
    f = ScalarField(spec, vals)
    path = tmp_path_factory.mktemp("io") / "f.fsf"
    write_field(path, f)
    g = read_field(path)
    assert g.spec == spec
    assert g.values.tobytes() == f.values.tobytes()


def test_field_layout(tmp_path):
    spec = GridSpec(1, 8, 2.0)
    f = ScalarField(spec, np.arange(8.0))
    write_field(tmp_path / "a.fsf", f)
    raw = (tmp_path / "a.fsf").read_bytes()
    assert raw[:4] == b"FSF1"
    assert int.from_bytes(raw[4:8], "little") == 1
    assert int.from_bytes(raw[8:12], "little") == 8
    assert np.frombuffer(raw[12:20], "<f8")[0] == 2.0
    assert np.array_equal(np.frombuffer(raw[20:], "<f8"), np.arange(8.0))


def test_mask_roundtrip(tmp_path):
    spec = GridSpec(2, 8)
    m = np.zeros((8, 8), dtype=bool)
    m[2:5, 3] = True
    write_mask(tmp_path / "m.fsm", spec, m)
    assert (tmp_path / "m.fsm").read_bytes()[:4] == b"FSM1"
    spec2, back = read_mask(tmp_path / "m.fsm")
    assert spec2 == spec and np.array_equal(back, m)


def test_bad_magic_and_truncation(tmp_path):
    spec = GridSpec(1, 8)
    write_field(tmp_path / "f.fsf", ScalarField.zeros(spec))
    data = (tmp_path / "f.fsf").read_bytes()
    (tmp_path / "bad.fsf").write_bytes(b"XXXX" + data[4:])
    (tmp_path / "short.fsf").write_bytes(data[:-8])
    with pytest.raises(ValidationError):
        read_field(tmp_path / "bad.fsf")
    with pytest.raises(ValidationError):
        read_field(tmp_path / "short.fsf")
    with pytest.raises(ValidationError):
        read_mask(tmp_path / "f.fsf")
