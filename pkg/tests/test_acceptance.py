"""Acceptance criteria, one printed pass/fail line each, at the stated tolerances."""

import math
import time

import numpy as np
import pytest

from callias import cli, helmholtz, index, potential as P, verify, witten


@pytest.fixture
def report(capsys):
    def emit(number, ok, text):
        with capsys.disabled():
            print(f"\ncriterion {number:2d}: {'PASS' if ok else 'FAIL'}  {text}")
        assert ok, text

    return emit


def test_criterion_01_hedgehog_index(report, capsys):
    t0 = time.perf_counter()
    code = cli.main(["index", "--potential", "hedgehog", "--format", "json-lines"])
    elapsed = time.perf_counter() - t0
    out = capsys.readouterr().out
    import json
    summary = json.loads(out.splitlines()[-1])
    err = abs(summary["index"] + 1)
    ok = code == 0 and err < 1e-6 and summary["imag_residual"] < 1e-9 and elapsed < 5
    report(1, ok, f"hedgehog index {summary['index']:+.12f}, |err| {err:.1e}, "
                  f"|Im| {summary['imag_residual']:.1e}, {elapsed:.2f} s")


def test_criterion_02_admissible_gives_zero(report):
    vals = {name: index.callias_index(P.builtin(name)).index_real for name in ("constant_unitary", "rotated_constant")}
    ok = all(abs(v) < 1e-6 for v in vals.values())
    report(2, ok, ", ".join(f"{k} {v:+.2e}" for k, v in vals.items()))


def test_criterion_03_parity_and_invariance(report):
    anti = index.callias_index(P.builtin("anti_hedgehog")).index_real
    u = P.hedgehog()
    refl = index.invariance_check(u, index.reflection(3, 0)).difference
    rot = index.invariance_check(u, index.rotation(3, seed=1)).difference
    scale = index.scaling_check(u, 3.0)
    ok = abs(anti - 1) < 1e-6 and max(refl, rot, scale) < 1e-5
    report(3, ok, f"anti-hedgehog {anti:+.10f}; reflection {refl:.1e}, rotation {rot:.1e}, scaling {scale:.1e}")


def test_criterion_04_block_embedding(report):
    res = [index.callias_index(P.block_embed(P.hedgehog(), ell)) for ell in (1, 2)]
    ok = all(abs(r.index_real + 1) < 1e-6 and "generalized Witten (non-Fredholm embedding)" in r.notes for r in res)
    report(4, ok, ", ".join(f"l={ell}: {r.index_real:+.10f}" for ell, r in zip((1, 2), res)))


def test_criterion_05_clifford_suite(report):
    t0 = time.perf_counter()
    checks = [c for c in verify.clifford_suite(8, trace_dims=(3, 5, 7)) if not c.name.startswith(("fixture", "hedgehog"))]
    elapsed = time.perf_counter() - t0
    worst = max(c.value for c in checks)
    ok = verify.all_passed(checks) and elapsed < 10
    report(5, ok, f"{len(checks)} checks for n=2..8, worst deviation {worst:.1e}, {elapsed:.2f} s")


def test_criterion_06_non_cancellation_fixture(report):
    checks = verify.fixture_checks(points=100)
    report(6, verify.all_passed(checks), "; ".join(f"{c.name} {c.value:.1e}" for c in checks))


def test_criterion_07_sign_function(report):
    checks = verify.sign_suite(count=100)
    report(7, verify.all_passed(checks), "; ".join(f"{c.name} {c.value:.1e}" for c in checks))


def test_criterion_08_green_kernel(report):
    checks = verify.kernels_suite(points=200)
    want = ("n=3 kernel", "kernel positive", "kernel argument", "kernel shift", "deriv argument",
            "deriv shift", "diagonal (n=3", "diagonal closed form")
    picked = [c for c in checks if c.name.startswith(want)]
    ok = verify.all_passed(checks) and len(picked) >= 8
    d = helmholtz.resolvent_power_diagonal(3, 3, 0.0)
    report(8, ok, f"{len(checks)} kernel checks; closed form dev {picked[0].value:.1e}; "
                  f"diagonal {d:.12f} vs 1/(32 pi) {1 / (32 * math.pi):.12f}")


def test_criterion_09_resolvent_identities(report):
    checks = verify.identities_suite(instances=50)
    failed = [c.name for c in checks if c.passed is False]
    report(9, not failed, f"{sum(c.passed is True for c in checks)} identity checks on 50 instances each"
                          + (f"; failed: {failed}" if failed else ""))


def test_criterion_10_lattice_cross_check(report):
    target = -(2.0 ** -1.5)
    t0 = time.perf_counter()
    vals = {}
    times = {}
    for level in (0, 1, 2):
        s = time.perf_counter()
        lat, radii = witten.lattice_for_level(P.hedgehog(), level)
        vals[level] = witten.witten_trace(lat, radii, [1.0]).f_curve[1.0][0]
        times[level] = time.perf_counter() - s
    errs = [abs(vals[k] - target) for k in (0, 1, 2)]
    lat, radii = witten.lattice_for_level(P.builtin("constant_unitary"), 1)
    const = witten.witten_trace(lat, radii, [0.5, 1.0])
    const_zero = all(v == 0 for _, _, v in const.values)
    even = witten.even_dimension_analog()
    ok = (abs(vals[1] - (-0.354)) <= 0.07 and errs[0] > errs[1] > errs[2] and const_zero and even <= 1e-9
          and times[1] < 600)
    report(10, ok, f"f(1) levels 0/1/2: {vals[0]:+.5f} {vals[1]:+.5f} {vals[2]:+.5f} "
                   f"(errors {errs[0]:.4f} {errs[1]:.4f} {errs[2]:.4f}); constant zero {const_zero}; "
                   f"even analog {even:.1e}; level 1 {times[1]:.0f} s, total {time.perf_counter() - t0:.0f} s")


def test_criterion_11_shell_counterexample(report):
    checks = verify.counterexample_suite(k_max=40)
    shell = [c for c in checks if c.passed is not None and "0.9 (8/36^3) ln 2" not in c.name]
    growth = [c for c in checks if "0.9 (8/36^3) ln 2" in c.name]
    k0 = next(c.value for c in checks if c.name.startswith("first shell"))
    ok = verify.all_passed(shell) and verify.all_passed(growth)
    report(11, ok, f"k0={k0:.0f}; shell, cutoff and volume facts {'pass' if verify.all_passed(shell) else 'FAIL'}; "
                   + "; ".join(f"{c.name.split(' >=')[0]} = {c.value:.4e} vs {c.tolerance:.4e}" for c in growth))
