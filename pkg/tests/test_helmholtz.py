import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from callias import helmholtz as H

# independent oracles evaluated once with mpmath (30 digits) and frozen
E5_MU1_R1 = 0.0093184951042930755606  # (2 pi)^{-5/2} K_{3/2}(1)
DIAG_N5_M4 = 0.00026385724906858794647  # (2pi)^-5 |S^4| int r^4/(r^2+1)^4 dr
E3_COMPLEX = 0.0500340487304597309161 - 0.0165009913688409401525j  # mu = 1+i, r = 0.7


@given(st.floats(1e-3, 1e2), st.floats(1e-2, 30.0))
def test_three_dimensional_closed_form(mu, r):
    val = H.kernel_eval(H.GreenKernel(3, mu), r)
    assert val == pytest.approx(math.exp(-math.sqrt(mu) * r) / (4 * math.pi * r), rel=1e-10)


def test_frozen_values():
    assert H.kernel_eval(H.GreenKernel(5, 1.0), 1.0) == pytest.approx(E5_MU1_R1, rel=1e-13)
    assert H.kernel_eval(H.GreenKernel(3, 1 + 1j), 0.7) == pytest.approx(E3_COMPLEX, rel=1e-13)
    assert H.resolvent_power_diagonal(5, 4, 0.0) == pytest.approx(DIAG_N5_M4, rel=1e-13)


@pytest.mark.parametrize("n", [3, 5, 7, 9])
@pytest.mark.parametrize("mu", [0.2, 1.0, 5.0, 2 - 1j])
def test_bessel_route(n, mu):
    k = H.GreenKernel(n, mu)
    r = np.geomspace(0.05, 8, 25)
    assert np.allclose(H.kernel_eval(k, r), H.kernel_bessel(k, r), rtol=1e-12, atol=0)


def test_laplace_limit():
    assert H.kernel_eval(H.GreenKernel(3, 0.0), 2.0) == pytest.approx(1 / (8 * math.pi), rel=1e-14)
    small = H.kernel_eval(H.GreenKernel(5, 1e-12), 1.5)
    assert small == pytest.approx(H.kernel_eval(H.GreenKernel(5, 0.0), 1.5), rel=1e-5)


@pytest.mark.parametrize("n", [3, 5, 7])
def test_ode_residual(n):
    assert H.helmholtz_residual(H.GreenKernel(n, 1.3), np.linspace(0.5, 4, 8)).max() < 1e-6


def test_derivative_envelope_is_radial_derivative():
    k = H.GreenKernel(5, 0.8)
    r = np.linspace(0.5, 3, 7)
    h = 1e-5
    fd = (H.kernel_eval(k, r + h) - H.kernel_eval(k, r - h)) / (2 * h)
    assert np.allclose(H.q_mu(k, r), np.abs(fd), rtol=1e-8)


@given(st.floats(0.05, 5.0), st.floats(-1.4, 1.4), st.floats(0.05, 10.0), st.sampled_from([3, 5, 7]))
def test_pointwise_bounds(mod, arg, r, n):
    v = H.bound_violations(n, [mod * np.exp(1j * arg)], [r])
    assert v["kernel_positive"] > 0
    for key in ("kernel_argument", "kernel_shift", "deriv_argument", "deriv_shift"):
        assert v[key] <= 1e-12


def test_resolvent_diagonal_closed_form_and_quadrature():
    exact = H.resolvent_power_diagonal(3, 3, 0.0)
    assert exact == pytest.approx(1 / (32 * math.pi), abs=1e-10)
    assert H.resolvent_power_diagonal(3, 3, 0.0, method="quad") == pytest.approx(exact, abs=1e-10)
    z = 0.4 + 0.3j
    assert H.resolvent_power_diagonal(3, 3, z) == pytest.approx(
        H.resolvent_power_diagonal(3, 3, z, method="quad"), rel=1e-9)


@given(st.floats(0.0, 10.0))
def test_resolvent_diagonal_scaling(z):
    assert H.resolvent_power_diagonal(3, 3, z) * (1 + z) ** 1.5 == pytest.approx(1 / (32 * math.pi), rel=1e-12)


def test_resolvent_diagonal_divergent():
    with pytest.raises(ValueError):
        H.resolvent_power_diagonal(3, 1.5)


@pytest.mark.parametrize("n", [3, 5])
def test_diagonal_envelope(n):
    for mu in (1.0, 3.0):
        m = (n + 3) / 2
        assert H.resolvent_power_diagonal(n, m, mu - 1) <= H.diagonal_envelope(n, m, mu) * (1 + 1e-14)


@pytest.mark.parametrize("ineq", H.INEQUALITIES)
def test_inequalities(ineq):
    rep = H.verify_inequality(ineq, samples=30, seed=1)
    assert rep.passed, rep.as_text()


def test_yukawa_symbol_three_dimensions():
    rho = np.array([0.5, 1.0, 3.0])
    # Fourier transform of exp(-mu r)/r in R^3 is 4 pi/(rho^2 + mu^2)
    assert np.allclose(H.yukawa_symbol(3, 1, 1.0, rho), 4 * np.pi / (rho**2 + 1.0), rtol=1e-6)


def test_ball_convolution_positive():
    val = H.ball_convolution(1.0, 0.5, np.array([0.1, 0.0, 0.0]), np.array([-0.2, 0.1, 0.0]))
    assert val > 0 and np.isfinite(val)
