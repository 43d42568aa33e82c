import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sann.vecio import DvecError, read_dvec, write_dvec


def test_layout(tmp_path):
    path = tmp_path / "a.dvec"
    write_dvec(path, [[1.0, 2.0], [3.0, -0.5]])
    raw = path.read_bytes()
    assert raw == struct.pack("<Idd", 2, 1.0, 2.0) + struct.pack("<Idd", 2, 3.0, -0.5)
    np.testing.assert_array_equal(read_dvec(path), [[1.0, 2.0], [3.0, -0.5]])


def test_errors(tmp_path):
    bad = tmp_path / "b.dvec"
    bad.write_bytes(struct.pack("<Idd", 2, 1.0, 2.0) + struct.pack("<Id", 1, 3.0) + b"\0" * 8)
    with pytest.raises(DvecError):
        read_dvec(bad)
    bad.write_bytes(struct.pack("<Id", 2, 1.0))
    with pytest.raises(DvecError):
        read_dvec(bad)
    empty = tmp_path / "e.dvec"
    empty.write_bytes(b"")
    assert read_dvec(empty).shape == (0, 0)


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 8), st.integers(1, 8)),
              elements=st.floats(allow_nan=False, width=64)))
def test_round_trip(tmp_path_factory, X):
    path = tmp_path_factory.mktemp("v") / "x.dvec"
    write_dvec(path, X)
    np.testing.assert_array_equal(read_dvec(path), X)
