import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpsqkd import jones
from dpsqkd.exceptions import UndefinedInputError

M = jones.faraday_mirror()
I2 = np.eye(2)

finite = st.floats(-10, 10, allow_nan=False)
complexes = st.builds(complex, finite, finite)
matrices = st.lists(complexes, min_size=4, max_size=4).map(
    lambda z: np.array(z, dtype=complex).reshape(2, 2))
vectors = st.lists(complexes, min_size=2, max_size=2).map(lambda z: np.array(z, dtype=complex))


def test_faraday_mirror_examples():
    assert np.array_equal(M @ jones.jones_vector(1, 0), [0, -1])
    assert np.array_equal(M @ M, -I2)
    assert np.array_equal(M.T, -M)
    assert np.array_equal(jones.adjoint(M), -M)


def test_plain_mirror_examples():
    P = jones.plain_mirror()
    assert np.array_equal(P @ jones.jones_vector(1, 0), [1, 0])
    assert jones.det(P) == 1
    t = 0.3
    A = np.diag([np.exp(1j * t), np.exp(-1j * t)])
    np.testing.assert_allclose(jones.round_trip(A, P),
                               np.diag([np.exp(2j * t), np.exp(-2j * t)]), atol=1e-15)


def test_plain_mirror_does_not_compensate():
    A = np.diag([np.exp(0.3j), np.exp(-0.3j)])
    rt = jones.round_trip(A, jones.plain_mirror())
    # not a multiple of the identity: diagonal entries differ
    assert abs(rt[0, 0] - rt[1, 1]) > 0.5


def test_haar_samples_are_special_unitary(rng):
    us = jones.haar_su2(rng, 1000)
    err = jones.adjoint(us) @ us - I2
    assert np.abs(err).max() <= 1e-12
    assert np.abs(jones.det(us) - 1).max() <= 1e-12


def test_haar_single_sample_shape(rng):
    u = jones.haar_su2(rng)
    assert u.shape == (2, 2)
    assert jones.is_unitary(u)


def test_haar_first_entry_uniform(rng):
    # |U11|^2 is uniform on [0, 1] under the Haar measure
    us = jones.haar_su2(rng, 100_000)
    p = np.abs(us[:, 0, 0]) ** 2
    assert abs(p.mean() - 0.5) <= 0.01
    assert abs(p.var() - 1 / 12) <= 0.005


def test_round_trip_examples(rng):
    np.testing.assert_array_equal(jones.round_trip(I2, M), M)
    for u in jones.haar_su2(rng, 200):
        direct = np.transpose(u) @ M @ u
        assert np.abs(jones.round_trip(u, M) - M).max() <= 1e-12
        assert np.abs(direct - M).max() <= 1e-12
    A = np.diag([0.5, 2.0])
    np.testing.assert_allclose(jones.round_trip(A, M), jones.det(A) * M, atol=1e-12)


def test_faraday_theorem_random_matrices(rng):
    A = rng.normal(size=(1000, 2, 2)) + 1j * rng.normal(size=(1000, 2, 2))
    lhs = jones.round_trip(A, M)
    rhs = jones.det(A)[:, None, None] * M
    assert np.abs(lhs - rhs).max() <= 1e-12


@given(matrices)
def test_faraday_theorem_property(A):
    assert np.abs(jones.round_trip(A, M) - jones.det(A) * M).max() <= 1e-12


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1))
def test_unitarity_closure(seed):
    rng = np.random.default_rng(seed)
    a, b, c = jones.haar_su2(rng, 3)
    assert jones.is_unitary(a @ b @ jones.adjoint(c))
    assert jones.is_unitary(jones.phase(a, 1.7) @ M)


def test_visibility_examples():
    v = jones.jones_vector(0.3 - 0.2j, 1.1j)
    assert jones.visibility(v, v) == pytest.approx(1.0)
    assert jones.visibility(jones.jones_vector(1, 0), jones.jones_vector(0, 1)) == 0.0
    diag = jones.jones_vector(1, 1) / np.sqrt(2)
    assert jones.visibility(jones.jones_vector(1, 0), diag) == pytest.approx(0.70711, abs=1e-5)


def test_visibility_of_zero_vectors_is_undefined():
    z = np.zeros(2, complex)
    with pytest.raises(UndefinedInputError):
        jones.visibility(z, z)


@given(vectors, vectors)
def test_visibility_bounds(u, v):
    if jones.norm2(u) + jones.norm2(v) == 0:
        return
    assert 0.0 <= jones.visibility(u, v) <= 1.0


def test_su2_rotation_and_projection(rng):
    r = jones.su2_rotation(0.4, (0, 0, 1))
    np.testing.assert_allclose(r, np.diag([np.exp(-0.2j), np.exp(0.2j)]), atol=1e-15)
    noisy = jones.haar_su2(rng) + 1e-6 * rng.normal(size=(2, 2))
    p = jones.nearest_su2(noisy)
    assert jones.is_unitary(p)
    assert abs(jones.det(p) - 1) <= 1e-12
