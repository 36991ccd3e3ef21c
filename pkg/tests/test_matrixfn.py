import numpy as np
import pytest
from hypothesis import given, strategies as st

from callias import matrixfn
from callias.verify import random_gapped_hermitian


@given(st.integers(0, 2**32 - 1), st.integers(1, 8), st.floats(0.1, 1.0))
def test_sign_routes_agree(seed, dim, gap):
    rng = np.random.default_rng(seed)
    a = random_gapped_hermitian(rng, dim, gap)
    s1 = matrixfn.sign_spectral(a, 0.9 * gap)
    s2 = matrixfn.sign_integral(a, (0.9 * gap) ** 2)
    assert np.abs(s1 - s2).max() < 1e-7
    assert np.abs(s1 @ s1 - np.eye(dim)).max() < 1e-8
    assert np.abs(s1 @ matrixfn.abs_matrix(a) - a).max() < 1e-8
    assert np.abs(s1 @ a - a @ s1).max() < 1e-8


def test_sign_of_diagonal():
    a = np.diag([2.0, -0.5, 3.0])
    assert np.allclose(matrixfn.sign_spectral(a, 0.1), np.diag([1.0, -1.0, 1.0]))
    assert np.allclose(matrixfn.sign_integral(a, 0.25), np.diag([1.0, -1.0, 1.0]))


def test_sign_integral_non_hermitian_similar():
    # similarity transforms commute with the integral representation
    rng = np.random.default_rng(3)
    d = np.diag([1.5, -2.0, 0.7])
    t = np.eye(3) + 0.1 * rng.standard_normal((3, 3))
    a = t @ d @ np.linalg.inv(t)
    s = matrixfn.sign_integral(a, 0.4)
    assert np.abs(s - t @ np.sign(d) @ np.linalg.inv(t)).max() < 1e-8


def test_gap_error():
    with pytest.raises(matrixfn.GapError) as info:
        matrixfn.sign_spectral(np.diag([1.0, 1e-3]), 0.1)
    assert info.value.min_abs_eig == pytest.approx(1e-3)
    with pytest.raises(matrixfn.GapError):
        matrixfn.sign_integral(np.diag([1.0, 0.0]), 0.5)


def test_rejects_non_hermitian_and_nonsquare():
    with pytest.raises(ValueError):
        matrixfn.sign_spectral(np.array([[0.0, 1.0], [0.0, 0.0]]), 0.1)
    with pytest.raises(ValueError):
        matrixfn.sign_integral(np.ones((2, 3)), 1.0)


def test_fd_derivative_order():
    f = lambda x: np.array([[np.sin(x[0]) * x[1]]])
    x = np.array([0.3, 2.0])
    assert matrixfn.fd_derivative(f, x, 0)[0, 0] == pytest.approx(np.cos(0.3) * 2.0, rel=1e-9)


@given(st.integers(0, 2**32 - 1))
def test_frechet_derivative_matches_difference(seed):
    rng = np.random.default_rng(seed)
    a = random_gapped_hermitian(rng, 4, 0.5)
    e = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    e = e + e.conj().T
    h = 1e-6
    fd = (matrixfn.batched_sign(a + h * e) - matrixfn.batched_sign(a - h * e)) / (2 * h)
    assert np.abs(fd - matrixfn.sign_frechet(a, e)).max() < 1e-5


def test_batched_sign_stack():
    rng = np.random.default_rng(0)
    stack = np.stack([random_gapped_hermitian(rng, 3, 0.3) for _ in range(5)])
    out = matrixfn.batched_sign(stack)
    for a, s in zip(stack, out):
        assert np.allclose(s, matrixfn.sign_spectral(a, 0.2))
