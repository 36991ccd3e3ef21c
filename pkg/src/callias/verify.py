"""Verification suites shared by the command line and the acceptance tests.

Every suite returns a list of :class:`Check` records. ``passed`` is ``None``
for informational lines, which never affect the exit status.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import clifford, helmholtz, index, matrixfn, potential, smooth, witten

SUITES = ("clifford", "sign", "identities", "kernels", "counterexample")


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool | None
    value: float
    tolerance: float
    detail: str = ""

    @property
    def status(self) -> str:
        if self.passed is None:
            return "info"
        return "pass" if self.passed else "FAIL"

    def as_dict(self) -> dict:
        return {"check": self.name, "status": self.status, "value": float(self.value),
                "tolerance": float(self.tolerance), "detail": self.detail}


def _le(name: str, value: float, tol: float, detail: str = "") -> Check:
    value = float(value)
    return Check(name, bool(np.isfinite(value) and value <= tol), value, tol, detail)


def _ge(name: str, value: float, threshold: float, detail: str = "") -> Check:
    value = float(value)
    return Check(name, bool(value >= threshold), value, threshold, detail)


def _info(name: str, value: float, detail: str = "") -> Check:
    return Check(name, None, float(value), float("nan"), detail)


def all_passed(checks) -> bool:
    return all(c.passed is not False for c in checks)


# ---------------------------------------------------------------------------
# Dirac algebra


def clifford_suite(n_max: int = 8, trace_dims=None) -> list[Check]:
    """Algebra relations for ``2 <= n <= n_max`` and full-tuple traces for odd ``n``."""
    out = []
    for n in range(2, n_max + 1):
        rep = clifford.build_algebra(n).check()
        out.append(_le(f"algebra n={n}", max(rep.values()), clifford.ALGEBRA_TOL,
                       ", ".join(f"{k}={v:.1e}" for k, v in sorted(rep.items()))))
    odd = [n for n in range(3, n_max + 1, 2)] if trace_dims is None else list(trace_dims)
    for n in odd:
        alg = clifford.build_algebra(n)
        target = clifford.full_trace_constant(n)
        worst = 0.0
        for perm, sgn in clifford.signed_permutations(n):
            val = clifford.gamma_trace(alg, [p + 1 for p in perm])
            worst = max(worst, abs(val - sgn * target))
        out.append(_le(f"full trace n={n}", worst, clifford.ALGEBRA_TOL,
                       f"{math.factorial(n)} permutations, constant {target:.6g}"))
        worst = 0.0
        for length in range(1, n, 2):
            for idx in itertools.combinations(range(1, n + 1), length):
                worst = max(worst, abs(clifford.gamma_trace(alg, idx)))
        out.append(_le(f"short odd traces n={n}", worst, clifford.ALGEBRA_TOL))
    out.extend(fixture_checks())
    return out


def fixture_checks(points: int = 100, seed: int = 0) -> list[Check]:
    """Epsilon-sum trace of the three-matrix fixture and the hedgehog density."""
    val = index.m_density(potential.local_24i(), np.zeros(3))
    out = [_le("fixture epsilon trace = 24i", abs(val - 24j), 1e-12, f"value {complex(val):.12g}")]
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((points, 3))
    dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
    x = dirs * rng.uniform(1.0, 10.0, size=(points, 1))
    dens = index.m_density(potential.hedgehog(), x)
    out.append(_le("hedgehog density outside unit ball", np.abs(dens).max(), 1e-9, f"{points} points"))
    return out


# ---------------------------------------------------------------------------
# matrix sign


def random_gapped_hermitian(rng, dim: int, gap: float) -> np.ndarray:
    q, _ = np.linalg.qr(witten.random_complex(rng, dim, dim))
    lam = rng.choice([-1.0, 1.0], size=dim) * rng.uniform(gap, 3.0, size=dim)
    return (q * lam) @ q.conj().T


def sign_suite(count: int = 100, seed: int = 0) -> list[Check]:
    rng = np.random.default_rng(seed)
    dev = square = polar = 0.0
    for _ in range(count):
        dim = int(rng.integers(2, 9))
        gap = float(rng.uniform(0.2, 1.0))
        a = random_gapped_hermitian(rng, dim, gap)
        s_spec = matrixfn.sign_spectral(a, 0.9 * gap)
        s_int = matrixfn.sign_integral(a, (0.9 * gap) ** 2)
        dev = max(dev, np.abs(s_spec - s_int).max())
        square = max(square, np.abs(s_spec @ s_spec - np.eye(dim)).max())
        polar = max(polar, np.abs(s_spec @ matrixfn.abs_matrix(a) - a).max())
    out = [
        _le("integral vs spectral", dev, 1e-7, f"{count} matrices"),
        _le("sgn^2 = I", square, 1e-8),
        _le("sgn |A| = A", polar, 1e-8),
    ]
    try:
        matrixfn.sign_spectral(np.diag([1.0, 0.0, -1.0]), 0.5)
        raised = False
    except matrixfn.GapError:
        raised = True
    out.append(Check("gap error on singular matrix", raised, float(raised), 1.0))
    return out


# ---------------------------------------------------------------------------
# resolvent identities


def _random_z(rng) -> complex:
    return complex(rng.uniform(0.1, 2.0), rng.uniform(-1.0, 1.0))


def identities_suite(instances: int = 50, seed: int = 0) -> list[Check]:
    rng = np.random.default_rng(seed)
    m, base = 4, 5
    worst = normal = additive = 0.0
    for _ in range(instances):
        l = witten.random_complex(rng, m * base, m * base)
        z = _random_z(rng)
        worst = max(worst, witten.check_witten_identity(l, z, m))
        q, _ = np.linalg.qr(witten.random_complex(rng, m * base, m * base))
        nrm = (q * witten.random_complex(rng, m * base)) @ q.conj().T
        normal = max(normal, np.abs(witten.witten_regularization(nrm, z, m)).max())
        l1 = witten.random_complex(rng, 2 * 3, 2 * 3)
        l2 = witten.random_complex(rng, 2 * 4, 2 * 4)
        full = np.zeros((2, 7, 2, 7), complex)
        full[:, :3, :, :3] = l1.reshape(2, 3, 2, 3)
        full[:, 3:, :, 3:] = l2.reshape(2, 4, 2, 4)
        b = witten.witten_regularization(full.reshape(14, 14), z, 2)
        parts = (witten.witten_regularization(l1, z, 2), witten.witten_regularization(l2, z, 2))
        additive = max(additive, abs(np.trace(b) - np.trace(parts[0]) - np.trace(parts[1])))
    out = [
        _le("commutator form of regularization", worst, 1e-9, f"{instances} instances"),
        _le("normal operator gives zero", normal, 1e-9),
        _le("additivity over direct sums", additive, 1e-9),
    ]
    cyc = 0.0
    for _ in range(instances):
        a = witten.random_complex(rng, 3 * 5, 3 * 5)
        b = witten.random_complex(rng, 3, 3)
        cyc = max(cyc, witten.check_internal_trace_cyclicity(a, b, 3))
    out.append(_le("internal trace cyclicity (scalar entries)", cyc, 1e-12))
    out.append(_ge("internal trace cyclicity fails for matrix entries", witten.cyclicity_counterexample(), 1e-3))

    neu = 0.0
    for i in range(instances):
        lat = witten.toy_lattice(npts=16, seed=seed + i)
        res = witten.check_neumann_expansion(lat, _random_z(rng), n_terms=int(rng.integers(0, 4)))
        neu = max(neu, res.remainder_residual, res.alternate_residual, res.sum_residual)
    out.append(_le("Neumann expansion, exact remainder", neu, 1e-9, f"{instances} lattices"))
    const = witten.toy_lattice(npts=16, angle=0.7)
    res = witten.check_neumann_expansion(const, 1.0, n_terms=0)
    out.append(_le("constant potential: commutator vanishes", np.abs(const.commutator).max(), 1e-12))
    out.append(_le("constant potential: difference equals series", res.series_residual, 1e-12))

    printed = sym1 = sym = 0.0
    higher_printed = 0.0
    for i in range(instances):
        c = witten.resolvent_commutator_check(n=1, modes=32, mu=float(rng.uniform(0.5, 3.0)), seed=seed + i)
        printed = max(printed, c.printed_residual)
        sym1 = max(sym1, c.symmetrized_residual, c.scalar_residual)
    for i in range(instances):
        n = 2 + i % 2
        modes = 8 if n == 2 else 4
        c = witten.resolvent_commutator_check(n=n, modes=modes, mu=float(rng.uniform(0.5, 3.0)),
                                              bandwidth=1, seed=seed + i)
        sym = max(sym, c.symmetrized_residual, c.scalar_residual)
        higher_printed = max(higher_printed, c.printed_residual)
    out.append(_le("resolvent commutator, n=1 product form", printed, 1e-6, f"{instances} instances, 32 modes"))
    out.append(_le("resolvent commutator, n=1 symmetrized form", sym1, 1e-6))
    out.append(_le("resolvent commutator, n=2,3 symmetrized form", sym, 1e-6, f"{instances} instances"))
    out.append(_info("resolvent commutator, n=2,3 product form residual", higher_printed,
                     "the form with (Q Psi) Q does not hold once gammas anticommute"))

    tr_err, norm_err = -np.inf, -np.inf
    for z in (1e-2, 1e-3, 1e-4):
        tr, nrm = witten.vogt_counterexample(z, int(50 / z))
        tr_err = max(tr_err, abs(tr - 1) / z)
        norm_err = max(norm_err, abs(nrm - z) / z)
    out.append(_le("trace-one family: |trace - 1| <= z", tr_err, 1.0, "z = 1e-2, 1e-3, 1e-4"))
    out.append(_le("trace-one family: norm = z", norm_err, 1e-12))
    closed = max(abs(witten.vogt_counterexample(z, 500)[0] - witten.vogt_closed_form(z, 500))
                 for z in (0.01, 0.1, 1.0, 0.3 + 0.2j))
    out.append(_le("trace-one family: closed form", closed, 1e-12))
    return out


# ---------------------------------------------------------------------------
# Helmholtz kernels


def kernels_suite(points: int = 200, seed: int = 0) -> list[Check]:
    rng = np.random.default_rng(seed)
    out = []
    mus = np.concatenate([np.geomspace(1e-3, 1e2, 12), [0.5 + 0.5j, 2 - 1j, 1 + 3j]])
    rs = np.geomspace(1e-2, 20.0, 40)
    worst = 0.0
    for mu in mus:
        k = helmholtz.GreenKernel(3, complex(mu))
        s = helmholtz.principal_sqrt(complex(mu))
        ref = np.exp(-s * rs) / (4 * np.pi * rs)
        worst = max(worst, float(np.max(np.abs(helmholtz.kernel_eval(k, rs) - ref) / np.abs(ref))))
    out.append(_le("n=3 kernel vs exp(-sqrt(mu) r)/(4 pi r)", worst, 1e-10, f"{len(mus)}x{len(rs)} grid"))
    worst = 0.0
    for n in (5, 7, 9):
        for mu in (0.1, 1.0, 4.0, 1 + 1j):
            k = helmholtz.GreenKernel(n, complex(mu))
            rr = np.geomspace(0.05, 10.0, 30)
            ref = helmholtz.kernel_bessel(k, rr)
            worst = max(worst, float(np.max(np.abs(helmholtz.kernel_eval(k, rr) - ref) / np.abs(ref))))
    out.append(_le("n=5,7,9 kernel vs Bessel route", worst, 1e-10))
    lap = helmholtz.kernel_eval(helmholtz.GreenKernel(3, 0.0), 2.0)
    out.append(_le("mu -> 0 limit at r=2", abs(lap - 1 / (8 * np.pi)), 1e-14))
    worst = 0.0
    for n in (3, 5, 7):
        for mu in (0.3, 2.0, 1 + 0.5j):
            k = helmholtz.GreenKernel(n, complex(mu))
            rr = np.linspace(0.3, 6.0, 20)
            h = 1e-4 * rr
            fd = (helmholtz.kernel_eval(k, rr + h) - helmholtz.kernel_eval(k, rr - h)) / (2 * h)
            d = helmholtz.kernel_deriv(k, rr)
            worst = max(worst, float(np.max(np.abs(fd - d) / np.abs(d))))
    out.append(_le("radial derivative vs finite differences", worst, 1e-6))
    worst = 0.0
    for n in (3, 5, 7):
        for mu in (0.3, 2.0):
            worst = max(worst, float(np.max(helmholtz.helmholtz_residual(helmholtz.GreenKernel(n, mu),
                                                                           np.linspace(0.5, 5, 10)))))
    out.append(_le("Helmholtz ODE residual", worst, 1e-6))

    for n in (3, 5):
        mu_s = rng.uniform(0.05, 5.0, points) * np.exp(1j * rng.uniform(-1.4, 1.4, points))
        r_s = rng.uniform(0.05, 10.0, points)
        viol = {}
        for mu, r in zip(mu_s, r_s):
            v = helmholtz.bound_violations(n, [mu], [r])
            for key, val in v.items():
                viol[key] = min(viol.get(key, np.inf), val) if key == "kernel_positive" else \
                    max(viol.get(key, -np.inf), val)
        out.append(_ge(f"kernel positive n={n}", viol.pop("kernel_positive"), 0.0, f"{points} samples"))
        for key, val in sorted(viol.items()):
            out.append(_le(f"{key.replace('_', ' ')} bound n={n}", val, 1e-12, f"{points} samples"))

    exact = helmholtz.resolvent_power_diagonal(3, 3, 0.0)
    quad = helmholtz.resolvent_power_diagonal(3, 3, 0.0, method="quad")
    out.append(_le("diagonal (n=3, m=3, z=0) = 1/(32 pi)", abs(exact - 1 / (32 * np.pi)), 1e-10))
    out.append(_le("diagonal closed form vs quadrature", abs(quad - exact), 1e-10))
    worst = 0.0
    for z in np.linspace(0.0, 4.0, 10):
        val = helmholtz.resolvent_power_diagonal(3, 3, z)
        worst = max(worst, abs(val * (1 + z) ** 1.5 - exact))
    out.append(_le("diagonal scaling (1+z)^(n/2-m)", worst, 1e-12, "10 values of z"))
    worst = -np.inf
    for n in (3, 5):
        for m in ((n + 3) / 2, (n + 5) / 2):
            for mu in (1.0, 2.0, 5.0):
                val = helmholtz.resolvent_power_diagonal(n, m, mu - 1)
                worst = max(worst, val - helmholtz.diagonal_envelope(n, m, mu))
    out.append(_le("diagonal envelope", worst, 1e-14))

    for ineq in helmholtz.INEQUALITIES:
        rep = helmholtz.verify_inequality(ineq, samples=50, seed=seed)
        consts = ", ".join(f"{k}={v:.4g}" for k, v in rep.constants.items())
        out.append(_le(ineq, rep.max_violation, 0.0, consts))
    return out


# ---------------------------------------------------------------------------
# shell counterexample


def _second_deriv_sup(m: int = 200001) -> float:
    return float(np.abs(smooth.step_deriv(np.linspace(0, 1, m), 2)).max())


def cutoff_checks(params, m: int = 4001) -> list[Check]:
    """Sampled range, plateau, support and derivative bounds of the cutoffs."""
    d2 = _second_deriv_sup()
    worst = {"range": 0.0, "plateau": 0.0, "support": 0.0, "first": -np.inf, "second": -np.inf}
    for r1, r2, t1, t2 in params:
        p = potential.cutoff_properties(r1, r2, t1, t2, m)
        worst["range"] = max(worst["range"], -p["min"], p["max"] - 1.0)
        worst["plateau"] = max(worst["plateau"], p["plateau_defect"])
        worst["support"] = max(worst["support"], p["outside_max"])
        s = np.concatenate([np.linspace(r1, r1 + t1, m), np.linspace(r2 - t2, r2, m)])
        dv = np.abs(potential.psi_cutoff_deriv(s, r1, r2, t1, t2))
        worst["first"] = max(worst["first"], float((dv - p["deriv_bound"]).max() / p["deriv_bound"]))
        s = np.linspace(r1 - t1, r2 + t2, 4 * m)
        bound = d2 * max(1 / t1**2, 1 / t2**2)
        dd = np.abs(potential.psi_cutoff_second_deriv_vec(s, r1, r2, t1, t2))
        worst["second"] = max(worst["second"], float((dd - bound).max() / bound))
    return [
        _le("cutoff range within [0, 1]", worst["range"], 1e-12),
        _le("cutoff equals 1 on plateau", worst["plateau"], 1e-12),
        _le("cutoff vanishes outside support", worst["support"], 0.0),
        _le("cutoff first derivative bound", worst["first"], 1e-9, f"d1={smooth.STEP_DERIV_SUP:.6f}"),
        _le("cutoff second derivative bound", worst["second"], 1e-6, f"d2={d2:.6f}"),
    ]


def shell_support_check(ks, samples: int = 4000, seed: int = 0) -> Check:
    """Nonzero bumps only on their shell region."""
    rng = np.random.default_rng(seed)
    bad = hits = 0
    for k in ks:
        rk, rk1 = float(potential.shell_radius(k)), float(potential.shell_radius(k + 1))
        pts = rng.uniform(-0.1 * rk1, 1.2 * rk1, size=(samples, 3))
        pts[: samples // 2] = rng.uniform(0.9 * rk, 1.05 * rk1, size=(samples // 2, 3))
        xi = potential.shell_xi(pts, k)
        nz = np.any(xi != 0, axis=-1)
        hits += int(nz.sum())
        bad += int(np.count_nonzero(nz & ~potential.in_shell_region(pts, k)))
    return Check("bumps vanish off their shell region", bad == 0 and hits > 0, float(bad), 0.0,
                 f"{hits} nonzero samples")


def shell_gradient_checks(ks, samples: int = 64, seed: int = 0) -> list[Check]:
    """On the inner region ``d_l xi_{k,j} = delta_{lj} / r_{k+1}``, by finite differences."""
    rng = np.random.default_rng(seed)
    scaled = literal = 0.0
    count = 0
    for k in ks:
        lo, hi = potential.shell_box(k)
        rk1 = float(potential.shell_radius(k + 1))
        pts = rng.uniform(lo, hi, size=(samples * 8, 3))
        pts = pts[potential.in_inner_region(pts, k)][:samples]
        for x in pts:
            h = 1e-4 * 2.0**k
            jac = np.stack([matrixfn.fd_derivative(lambda y: potential.shell_xi(y, k), x, ell, h)
                            for ell in range(3)], axis=0)
            scaled = max(scaled, float(np.abs(rk1 * jac - np.eye(3)).max()))
            literal = max(literal, float(np.abs(jac - np.eye(3)).max()))
            count += 1
    return [
        _le("inner-region gradient r_{k+1} d_l xi_{k,j} = delta_lj", scaled, 1e-8, f"{count} samples"),
        _info("inner-region gradient without the 1/r_{k+1} factor", literal,
              "d_l xi_{k,j} = delta_lj read literally is off by 1/r_{k+1}"),
    ]


def counterexample_suite(k_max: int = 40, seed: int = 0) -> list[Check]:
    diag = potential.appendix_b_diagnostics(k_max, seed=seed)
    k0 = diag["k0"]
    out = [_info("first shell with cube inside the shell (k0)", k0)]
    recs = [r for r in diag["shells"] if r.k >= k0]
    vol = max(abs(r.volume_normalized - 1.0) for r in recs)
    out.append(_le(f"volume * 36^3 / 2^(3k) = 1 for {k0} <= k <= {k_max}", vol, 1e-9))
    sampled = max(abs(potential.shell_volume_sampled(k) * 36.0**3 / 2.0 ** (3 * k) - 1.0)
                  for k in range(k0, min(k_max, 12) + 1))
    out.append(_le("volume by grid counting", sampled, 1e-9))
    coef = max(abs(r.coefficient_times_r_k1_k13 - 1.0) for r in recs)
    out.append(_le("shell derivative a_k r_{k+1} k^(1/3) = 1", coef, 1e-9))
    out.append(_le("shell derivative is a_k sigma_j", max(r.derivative_residual for r in recs), 1e-12))
    tc = max(abs(r.trace_cubed - 12j * r.derivative_coefficient**3) / r.derivative_coefficient**3 for r in recs)
    out.append(_le("epsilon trace of the shell derivative = 12i a_k^3", tc, 1e-12))

    params = []
    for k in range(2, 13):
        sp = potential.shell_params(k)
        params += [sp["radial"], sp["axial"]]
    params += [(0.0, 1.0, 0.1, 0.2), (-3.0, 5.0, 2.0, 1.0)]
    out.extend(cutoff_checks(params))
    out.append(shell_support_check(range(2, 9), seed=seed))
    out.extend(shell_gradient_checks(range(k0, 9), seed=seed))

    sums = diag["partial_sums"]
    for K in (10, 20, 40):
        if K <= k_max:
            out.append(_info(f"S_{K}", sums[K - k0]))
    threshold = 0.9 * 8.0 / 36.0**3 * math.log(2.0)
    base = math.log(2.0) / 36.0**3
    doublings = (k_max, 2 * k_max, 4 * k_max)
    for K in doublings:
        inc = potential.doubling_increment(K, k0)
        out.append(_ge(f"S_{2 * K} - S_{K} >= 0.9 (8/36^3) ln 2", inc, threshold,
                       f"increment/(ln2/36^3) = {inc / base:.6f}"))
    for K in doublings:
        inc = potential.doubling_increment(K, k0)
        out.append(_info(f"S_{2 * K} - S_{K} in units of ln2/36^3", inc / base,
                         "a fixed positive increment per doubling means the sums diverge"))
        inc_c = potential.doubling_increment(K, k0, corrected=True)
        out.append(_info(f"S_{2 * K} - S_{K} with r_(k+1) terms, in units of ln2/36^3", inc_c / base))
        out.append(_info(f"S_{2 * K} - S_{K} of |tr C^3| vol = 24 vol/(k r_(k+1)^3), in units of ln2/36^3",
                         24.0 * inc_c / base))
    return out


def run_suite(name: str, **kwargs) -> list[Check]:
    funcs = {
        "clifford": clifford_suite,
        "sign": sign_suite,
        "identities": identities_suite,
        "kernels": kernels_suite,
        "counterexample": counterexample_suite,
    }
    if name not in funcs:
        raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    return funcs[name](**kwargs)
