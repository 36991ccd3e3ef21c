import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from callias import matrixfn, potential as P

UNIT_POTENTIALS = ["hedgehog", "anti_hedgehog", "constant_unitary", "rotated_constant", "winding_m"]


def _points(seed, count=20, lo=1.0, hi=10.0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((count, 3))
    return x / np.linalg.norm(x, axis=-1, keepdims=True) * rng.uniform(lo, hi, (count, 1))


@pytest.mark.parametrize("name", UNIT_POTENTIALS)
def test_unitary_and_hermitian_outside_ball(name):
    p = P.builtin(name)
    vals = p.eval(_points(0, lo=max(p.gap_radius, 1.0) + 0.1))
    eye = np.eye(p.d)
    assert np.abs(vals - np.swapaxes(vals.conj(), -1, -2)).max() < 1e-12
    assert np.abs(vals @ vals - eye).max() < 1e-10


@pytest.mark.parametrize("name", UNIT_POTENTIALS + ["appendix_b"])
def test_analytic_derivative_matches_fd(name):
    p = P.builtin(name)
    x = _points(1, count=8, lo=0.5, hi=6.0)
    for j in range(p.n):
        fd = np.stack([matrixfn.fd_derivative(p.eval, xi, j, 1e-4) for xi in x])
        assert np.abs(p.derivative(x, j) - fd).max() < 1e-7


def test_hedgehog_values():
    p = P.hedgehog()
    x = np.array([0.0, 0.0, 2.0])
    assert np.allclose(p.eval(x), np.diag([1.0, -1.0]))
    assert np.allclose(P.hedgehog(sign=-1).eval(x), -np.diag([1.0, -1.0]))


def test_block_embedding_layout():
    base = P.hedgehog()
    p = P.block_embed(base, 2)
    x = np.array([0.3, -1.2, 2.0])
    v = p.eval(x)
    assert v.shape == (4, 4) and p.null_block == 2
    assert np.allclose(v[:2, :2], 0) and np.allclose(v[2:, 2:], base.eval(x))


def test_classification():
    assert P.classify(P.builtin("constant_unitary")).klass == "admissible"
    assert P.classify(P.builtin("rotated_constant")).klass == "admissible"
    assert P.classify(P.builtin("hedgehog")).klass in ("callias_admissible", "admissible")
    assert P.classify(P.builtin("appendix_b")).klass in ("general_C2", "fails")


def test_smoothed_sign_properties():
    u = P.smoothed_sign(P.hedgehog(), 1.0)
    far = _points(2, lo=2.5, hi=8.0)
    assert np.abs(u.eval(far) - P.hedgehog().eval(far)).max() < 1e-12
    near = _points(3, lo=0.01, hi=0.45)
    assert np.abs(u.eval(near)).max() < 1e-12


def test_mollify_reproduces_constants():
    c = P.builtin("constant_unitary")
    m = P.mollify(c, 0.5, nodes_per_axis=6)
    x = _points(4, count=5)
    assert np.abs(m.eval(x) - c.eval(x)).max() < 1e-12


def test_parse_params():
    assert P.parse_params("l=2, base=hedgehog, s=0.5") == {"l": 2, "base": "hedgehog", "s": 0.5}
    with pytest.raises(ValueError):
        P.parse_params("oops")


def test_spec_text_named_and_table(tmp_path):
    named = P.parse_spec_text("name = hedgehog\nlabel = hh\n")
    assert named.label == "hh" and named.n == 3
    table = P.parse_spec_text("n = 3\nd = 2\nentry 1 1 = x3/r\nentry 2 2 = -x3/r\n"
                              "entry 1 2 = (x1 - 1j*x2)/r\nentry 2 1 = (x1 + 1j*x2)/r\n")
    x = np.array([[0.4, -0.3, 1.7]])
    assert np.abs(table.eval(x) - P.hedgehog().eval(x)).max() < 1e-12
    path = tmp_path / "h.txt"
    path.write_text("name = anti_hedgehog\n")
    assert P.load_potential(path).label.startswith("anti")


def test_grid_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    pts = rng.standard_normal((7, 3))
    mats = rng.standard_normal((7, 2, 2)) + 1j * rng.standard_normal((7, 2, 2))
    path = tmp_path / "g.bin"
    P.write_grid(path, pts, mats)
    raw = path.read_bytes()
    assert P.GRID_HEADER.unpack(raw[:24]) == (3, 2, 7)
    p2, m2 = P.read_grid(path)
    assert np.array_equal(p2, pts) and np.array_equal(m2, mats)


def test_grid_potential_interpolates(tmp_path):
    h = P.hedgehog()
    rng = np.random.default_rng(5)
    pts = rng.uniform(-3, 3, (400, 3))
    g = P.grid_potential(pts, h.eval(pts))
    assert np.abs(g.eval(pts[:10]) - h.eval(pts[:10])).max() < 1e-8


@given(st.floats(0.0, 5.0), st.floats(0.1, 2.0), st.floats(0.1, 2.0), st.floats(0.5, 10.0))
def test_cutoff_properties(r1, t1, t2, gap):
    r2 = r1 + t1 + t2 + gap
    props = P.cutoff_properties(r1, r2, t1, t2, m=801)
    assert props["min"] >= 0.0 and props["max"] <= 1.0 + 1e-12
    assert props["plateau_defect"] <= 1e-12
    assert props["outside_max"] == 0.0
    assert props["deriv_max"] <= props["deriv_bound"] * (1 + 1e-9)


def test_cutoff_requires_ordering():
    with pytest.raises(ValueError):
        P.psi_cutoff(0.5, 0.0, 1.0, 0.6, 0.6)


def test_cutoff_derivative_matches_fd():
    s = np.linspace(-0.5, 4.5, 301)
    h = 1e-6
    fd = (P.psi_cutoff_vec(s + h, 0, 4, 1, 1.5) - P.psi_cutoff_vec(s - h, 0, 4, 1, 1.5)) / (2 * h)
    assert np.abs(fd - P.psi_cutoff_deriv_vec(s, 0, 4, 1, 1.5)).max() < 1e-7
    fd2 = (P.psi_cutoff_deriv_vec(s + h, 0, 4, 1, 1.5) - P.psi_cutoff_deriv_vec(s - h, 0, 4, 1, 1.5)) / (2 * h)
    assert np.abs(fd2 - P.psi_cutoff_second_deriv_vec(s, 0, 4, 1, 1.5)).max() < 1e-6


def test_shell_radii_and_first_volume_shell():
    assert [float(P.shell_radius(k)) for k in range(2, 6)] == [2.0, 6.0, 14.0, 30.0]
    assert P.first_volume_shell() == 3
    assert not P.box_inside_shell(2)


@pytest.mark.parametrize("k", [3, 4, 10, 25, 40])
def test_shell_volume_normalization(k):
    assert P.shell_volume(k) * 36.0**3 / 2.0 ** (3 * k) == pytest.approx(1.0, rel=1e-12)


def test_shell_volume_sampled_agrees():
    for k in (3, 5):
        assert P.shell_volume_sampled(k) == pytest.approx(P.shell_volume(k), rel=1e-12)


def test_shell_bump_support_and_gradient():
    rng = np.random.default_rng(7)
    k = 4
    x = rng.uniform(-5, 40, (5000, 3))
    nz = np.any(P.shell_xi(x, k) != 0, axis=-1)
    assert nz.any() and not np.any(nz & ~P.in_shell_region(x, k))
    lo, hi = P.shell_box(k)
    pts = rng.uniform(lo, hi, (200, 3))
    pts = pts[P.in_inner_region(pts, k)]
    assert len(pts) > 0
    coef = P.counterexample().jacobian(pts)
    rk1 = float(P.shell_radius(k + 1))
    expected = k ** (-1 / 3) / rk1
    assert np.allclose(coef[:, 0], expected * np.array([[0, 1], [1, 0]]))


def test_partial_sums_grow_by_fixed_increment_per_doubling():
    k0 = P.first_volume_shell()
    base = math.log(2) / 36**3
    incs = [P.doubling_increment(K, k0) / base for K in (40, 80, 160)]
    assert all(0.98 < v < 1.0 for v in incs)
    assert incs[0] < incs[1] < incs[2]


def test_lower_bound_terms_frozen():
    terms = P.lower_bound_terms(3, 4)
    # (1/k) 2^{3k} / (2^k - 2)^3 / 36^3 at k = 3, 4
    assert terms == pytest.approx([(1 / 3) * 512 / 216 / 36**3, (1 / 4) * 4096 / 2744 / 36**3], rel=1e-14)


def test_shell_diagnostics_records():
    d = P.appendix_b_diagnostics(12)
    assert d["k0"] == 3
    for rec in d["shells"]:
        if rec.k >= 3:
            assert rec.coefficient_times_r_k1_k13 == pytest.approx(1.0, abs=1e-12)
            assert rec.volume_normalized == pytest.approx(1.0, abs=1e-12)
