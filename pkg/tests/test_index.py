import math
import time

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from callias import index, potential as P


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_sphere_area(n):
    assert index.sphere_area(n) == pytest.approx([2 * math.pi, 4 * math.pi, 2 * math.pi**2,
                                                   8 * math.pi**2 / 3][n - 2])


def test_sphere_moment_against_quadrature_oracle():
    # int_{S^2} x^2 z^2 in spherical coordinates by 2D adaptive quadrature
    f = lambda ph, th: (np.sin(th) * np.cos(ph)) ** 2 * np.cos(th) ** 2 * np.sin(th)
    val, _ = integrate.dblquad(f, 0, np.pi, 0, 2 * np.pi)
    assert index.sphere_moment(3, [2, 0, 2]) == pytest.approx(val, rel=1e-10)
    assert index.sphere_moment(3, [2, 0, 2]) == pytest.approx(4 * math.pi / 15, rel=1e-14)


@given(st.sampled_from([3, 5]), st.data())
def test_sphere_rule_exact_for_polynomials(n, data):
    degree = 11
    rule = index.sphere_rule(n, degree)
    powers = data.draw(st.lists(st.integers(0, 4), min_size=n, max_size=n).filter(lambda p: sum(p) <= degree))
    vals = np.prod(rule.nodes ** np.array(powers), axis=-1)
    assert rule.integrate(vals) == pytest.approx(index.sphere_moment(n, powers), abs=1e-13)


def test_sphere_rule_nodes_on_sphere():
    rule = index.sphere_rule(5, 9)
    assert np.allclose(np.linalg.norm(rule.nodes, axis=-1), 1.0)
    assert rule.weights.sum() == pytest.approx(index.sphere_area(5))


@given(st.integers(0, 2**32 - 1), st.sampled_from([3, 5]))
def test_epsilon_sum_routes_agree(seed, n):
    rng = np.random.default_rng(seed)
    d = 2
    jac = rng.standard_normal((4, n, d, d)) + 1j * rng.standard_normal((4, n, d, d))
    u = rng.standard_normal((4, d, d)) + 1j * rng.standard_normal((4, d, d))
    x = rng.standard_normal((4, n))
    assert np.allclose(index.surface_density(u, jac, x), index.surface_density_permutations(u, jac, x),
                       atol=1e-10)
    assert np.allclose(index.m_density_from_jacobian(jac), index.m_density_permutations(jac), atol=1e-10)


def test_prefactor_values():
    assert index.prefactor(3) == pytest.approx(1j / (8 * math.pi))
    assert index.prefactor(5) == pytest.approx(-1 / (2 * 64 * math.pi**2))
    assert index.c_n(3) == pytest.approx(1j / (16 * math.pi))
    with pytest.raises(ValueError):
        index.prefactor(4)


def test_hedgehog_index_exact_plateau():
    t0 = time.perf_counter()
    res = index.callias_index(P.hedgehog())
    assert time.perf_counter() - t0 < 5
    assert res.converged and res.method == "plateau"
    assert abs(res.index_real + 1) < 1e-6 and res.imag_residual < 1e-9


@pytest.mark.parametrize("name, expected", [("anti_hedgehog", 1), ("constant_unitary", 0),
                                            ("rotated_constant", 0), ("winding_m", -2)])
def test_builtin_indices(name, expected):
    res = index.callias_index(P.builtin(name))
    assert abs(res.index_real - expected) < 1e-6


@pytest.mark.parametrize("ell", [1, 2])
def test_block_embedding_index_and_note(ell):
    res = index.callias_index(P.block_embed(P.hedgehog(), ell))
    assert abs(res.index_real + 1) < 1e-6
    assert "generalized Witten (non-Fredholm embedding)" in res.notes


def test_five_dimensional_hedgehog():
    res = index.callias_index(P.hedgehog(n=5), rule=index.sphere_rule(5, 9))
    assert abs(res.index_real - 1) < 1e-6


def test_smoothed_sign_index():
    res = index.callias_index(P.smoothed_sign(P.hedgehog(), 1.0), radii=[3, 4, 6, 8])
    assert abs(res.index_real + 1) < 1e-6


def test_volume_route_matches_surface_route():
    u = P.smoothed_sign(P.hedgehog(), 1.0)
    vol = index.volume_index(u, 2.0, breaks=[0.25, 0.5, 1.0])
    surf = index.surface_value(u, 2.0, index.sphere_rule(3))
    assert abs(vol - surf) < 1e-6


def test_fixture_epsilon_trace():
    assert index.m_density(P.local_24i(), np.zeros(3)) == pytest.approx(24j, abs=1e-12)


def test_hedgehog_density_vanishes_away_from_origin():
    rng = np.random.default_rng(0)
    x = rng.uniform(-5, 5, (100, 3))
    x = x[np.linalg.norm(x, axis=-1) >= 1]
    assert np.abs(index.m_density(P.hedgehog(), x)).max() < 1e-9


def test_invariance_under_reflection_and_rotation():
    u = P.hedgehog()
    assert index.invariance_check(u, index.reflection(3, 1)).difference < 1e-5
    assert index.invariance_check(u, index.rotation(3, seed=4)).difference < 1e-5
    assert index.scaling_check(u, 2.5) < 1e-5


def test_chain_rule_under_inversion():
    u = P.smoothed_sign(P.hedgehog(), 1.0)
    rng = np.random.default_rng(2)
    x = rng.uniform(0.3, 0.9, (10, 3))
    scale = np.abs(index.m_density(u, index.inversion_map(x))).max()
    assert index.chain_rule_check(u, index.inversion_map, index.inversion_jacobian, x) < 1e-6 * scale
    assert index.chain_rule_check(u, index.inversion_map, index.inversion_jacobian, x, method="exact") < 1e-12


def test_richardson_extrapolation_of_synthetic_tail():
    radii = np.array([2.0, 4.0, 8.0])
    vals = -1 + 0.3 / radii + 0.1 / radii**2 + 0j
    ext, method, ok = index._extrapolate(radii, vals, index.PLATEAU_TOL)
    assert method == "richardson" and not ok
    assert ext == pytest.approx(-1, abs=1e-12)


def test_rejects_bad_schedules():
    with pytest.raises(ValueError):
        index.callias_index(P.hedgehog(), radii=[])
    with pytest.raises(ValueError):
        index.callias_index(P.hedgehog(n=2))


def test_text_and_csv_output():
    res = index.callias_index(P.hedgehog())
    assert "index: -1.000000000000" in index.format_text(res)
    assert index.format_csv(res).splitlines()[0] == "radius,re,im"
