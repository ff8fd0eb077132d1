import numpy as np
import pytest
from hypothesis import given, strategies as st

from macrojumps.hilbert import (BELL_LABELS, SpaceSpec, bell_block, bell_transform, dim,
                                exchange_operator, flat_index, state_vector, unflat_index)


def test_dimension():
    assert dim(SpaceSpec(2)) == 27
    assert SpaceSpec(3).dim == 36


def test_bad_truncation():
    with pytest.raises(ValueError):
        SpaceSpec(-1)


def test_index_photon_major():
    spec = SpaceSpec(2)
    assert flat_index(0, 0, 0, spec) == 0
    assert flat_index(0, 0, 1, spec) == 9
    assert flat_index(2, 1, 0, spec) == 7


@given(st.integers(0, 2), st.integers(0, 2), st.integers(0, 4))
def test_index_roundtrip(j, k, n):
    spec = SpaceSpec(4)
    assert unflat_index(flat_index(j, k, n, spec), spec) == (j, k, n)


def test_index_out_of_range():
    with pytest.raises(IndexError):
        flat_index(0, 0, 3, SpaceSpec(2))
    with pytest.raises(IndexError):
        flat_index(3, 0, 0, SpaceSpec(2))


def test_bell_block_unitary():
    u = bell_block()
    assert np.allclose(u.conj().T @ u, np.eye(9), atol=1e-14)


def test_bell_transform_unitary():
    u = bell_transform(SpaceSpec(2))
    assert np.allclose(u.conj().T @ u, np.eye(27), atol=1e-14)


def test_antisymmetric_state():
    spec = SpaceSpec(1)
    a = state_vector("a01,0", spec)
    expected = np.zeros(18, dtype=complex)
    expected[flat_index(0, 1, 0, spec)] = 1 / np.sqrt(2)
    expected[flat_index(1, 0, 0, spec)] = -1 / np.sqrt(2)
    assert np.allclose(a, expected)


@pytest.mark.parametrize("label", BELL_LABELS)
def test_exchange_parity(label):
    spec = SpaceSpec(1)
    v = state_vector(f"{label},1", spec)
    sign = -1 if label.startswith("a") else 1
    assert np.allclose(exchange_operator(spec) @ v, sign * v)


def test_bell_basis_labels():
    spec = SpaceSpec(1)
    v = state_vector("|s12,1>", spec, basis="bell")
    assert np.isclose(abs(v[9 + BELL_LABELS.index("s12")]), 1.0)


def test_bad_label():
    with pytest.raises(ValueError):
        state_vector("x01,0", SpaceSpec(1))
    with pytest.raises(ValueError):
        state_vector("01,5", SpaceSpec(1))
