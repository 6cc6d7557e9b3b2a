import numpy as np
import pytest
from hypothesis import given, strategies as st

from saddlesim.core import (DiagMatrix, RngStream, StateVector, gaussian_vector,
                            psd_sqrt, psd_sqrt_stacked)
from saddlesim.errors import InvalidDimension, NotPSD, NotSymmetric


def test_state_vector_round_trip():
    z = np.array([1.0, -2.0, 3.0, 4.0])
    s = StateVector.from_z(z)
    assert s.d == 2
    np.testing.assert_array_equal(s.x, [1.0, -2.0])
    np.testing.assert_array_equal(s.y, [3.0, 4.0])
    np.testing.assert_array_equal(s.z, z)


def test_state_vector_rejects_odd_length():
    with pytest.raises(InvalidDimension):
        StateVector.from_z(np.array([1.0, 2.0, 3.0]))
    with pytest.raises(InvalidDimension):
        StateVector(np.array([1.0, 2.0]), np.array([3.0]))


def test_state_vector_is_finite():
    assert StateVector.from_z(np.array([0.0, 1.0])).is_finite()
    assert not StateVector.from_z(np.array([np.inf, 1.0])).is_finite()
    assert not StateVector.from_z(np.array([np.nan, 1.0])).is_finite()


def test_diag_matrix_psd_flag():
    m = DiagMatrix.of(2.0, 3, psd=True)
    np.testing.assert_array_equal(m.dense(), 2.0 * np.eye(3))
    with pytest.raises(NotPSD):
        DiagMatrix.of(-1.0, 2, psd=True)


def test_rng_stream_is_deterministic():
    a = RngStream(42, 3).standard_normal(16)
    b = RngStream(42, 3).standard_normal(16)
    np.testing.assert_array_equal(a, b)
    c = RngStream(42, 4).standard_normal(16)
    assert not np.array_equal(a, c)


def test_gaussian_vector_scale_zero():
    rng = RngStream(0)
    np.testing.assert_array_equal(gaussian_vector(rng, 4, 0.0), np.zeros(4))


@given(st.integers(0, 2 ** 31 - 1), st.integers(2, 6))
def test_psd_sqrt_reconstructs(seed, n):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, n))
    m = a @ a.T
    r = psd_sqrt(m)
    assert np.max(np.abs(r @ r.T - m)) < 1e-8 * max(1.0, np.max(np.abs(m)))


def test_psd_sqrt_rejects_bad_input():
    with pytest.raises(NotSymmetric):
        psd_sqrt(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(NotPSD):
        psd_sqrt(np.array([[1.0, 0.0], [0.0, -1.0]]))


def test_psd_sqrt_stacked_matches_loop():
    rng = np.random.default_rng(9)
    a = rng.normal(size=(5, 3, 3))
    ms = a @ np.swapaxes(a, -1, -2)
    stacked = psd_sqrt_stacked(ms)
    for k in range(5):
        np.testing.assert_allclose(stacked[k] @ stacked[k].T, ms[k], atol=1e-10)
