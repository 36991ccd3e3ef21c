"""Helmholtz Green's functions in odd dimensions and the kernel inequalities built on them.

The kernel of ``(-Delta + mu)^{-1}`` on R^n, n = 2*nhat + 1, is the finite sum

    E_n(mu, r) = (1/2) sqrt(mu)^(nhat-1) (2 pi r)^(-nhat) exp(-sqrt(mu) r)
                 * sum_{k<nhat} (nhat+k-1)! / (k! (nhat-k-1)!) (2 sqrt(mu) r)^(-k),

which is e^{-sqrt(mu) r}/(4 pi r) for n = 3.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate, optimize, special

from .index import sphere_area, sphere_rule

INEQUALITIES = ("L11_1_upper", "L11_1_lower", "L11_4_convolution", "T11_7_positivity")


def _coefficients(nhat: int) -> np.ndarray:
    return np.array([
        math.factorial(nhat + k - 1) / (math.factorial(k) * math.factorial(nhat - k - 1))
        for k in range(nhat)
    ])


def principal_sqrt(mu: complex) -> complex:
    """Principal square root; for Re mu > 0 its real part is positive."""
    return complex(np.sqrt(complex(mu)))


@dataclass(frozen=True)
class GreenKernel:
    n: int
    mu: complex

    def __post_init__(self):
        if self.n < 3 or self.n % 2 == 0:
            raise ValueError(f"dimension must be odd and >= 3, got {self.n}")
        if complex(self.mu).real < 0:
            raise ValueError("Re mu must be nonnegative")

    @property
    def nhat(self) -> int:
        return (self.n - 1) // 2


def _check_r(r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("distance must be positive")
    return r


def _laplace_kernel(n: int, r: np.ndarray) -> np.ndarray:
    return 1.0 / ((n - 2) * sphere_area(n) * r ** (n - 2))


def kernel_eval(k: GreenKernel, r):
    """Green's function of ``-Delta + mu`` at distance ``r``.

    ``mu = 0`` falls back to the Laplace kernel ``1/((n-2) w_{n-1} r^{n-2})``.
    """
    r = _check_r(r)
    mu = complex(k.mu)
    if mu == 0:
        return _laplace_kernel(k.n, r)
    if mu.real <= 0:
        raise ValueError("Re mu must be positive")
    nhat = k.nhat
    s = principal_sqrt(mu)
    coef = _coefficients(nhat)
    total = sum(c * (2.0 * s * r) ** (-j) for j, c in enumerate(coef))
    out = 0.5 * s ** (nhat - 1) * (2.0 * np.pi * r) ** (-nhat) * np.exp(-s * r) * total
    if mu.imag == 0:
        return out.real
    return out


def kernel_deriv(k: GreenKernel, r):
    """Radial derivative of :func:`kernel_eval`."""
    r = _check_r(r)
    mu = complex(k.mu)
    nhat = k.nhat
    s = principal_sqrt(mu)
    coef = _coefficients(nhat)
    total = sum(c * (2.0 * s) ** (-j) * r ** (-nhat - j - 1) * (s * r + nhat + j) for j, c in enumerate(coef))
    out = -0.5 * s ** (nhat - 1) * (2.0 * np.pi) ** (-nhat) * np.exp(-s * r) * total
    if mu.imag == 0:
        return out.real
    return out


def kernel_bessel(k: GreenKernel, r):
    """Independent route through the modified Bessel function ``K_{n/2-1}``."""
    r = _check_r(r)
    s = principal_sqrt(k.mu)
    nu = k.n / 2.0 - 1.0
    return (2 * np.pi) ** (-k.n / 2) * (s / r) ** nu * special.kv(nu, s * r)


def q_mu(k: GreenKernel, r):
    """Envelope ``q_mu(r) = |d/dr E_n(mu, r)|`` bounding every partial derivative."""
    return np.abs(kernel_deriv(k, r))


def helmholtz_residual(k: GreenKernel, r, h: float | None = None):
    """FD residual of ``E'' + (n-1)/r E' - mu E`` relative to ``|mu E|``."""
    r = _check_r(r)
    h = 1e-3 * r if h is None else h
    f = lambda t: kernel_eval(k, t)
    d1 = (f(r - 2 * h) - 8 * f(r - h) + 8 * f(r + h) - f(r + 2 * h)) / (12 * h)
    d2 = (-f(r - 2 * h) + 16 * f(r - h) - 30 * f(r) + 16 * f(r + h) - f(r + 2 * h)) / (12 * h * h)
    val = f(r)
    return np.abs(d2 + (k.n - 1) / r * d1 - k.mu * val) / np.abs(k.mu * val)


# ---------------------------------------------------------------------------
# pointwise bounds on the kernel and its derivative


def argument_factor(mu: complex) -> float:
    """``1/sqrt(cos(arg mu))``."""
    return 1.0 / math.sqrt(math.cos(np.angle(mu)))


def bound_violations(n: int, mus: Sequence[complex], radii: Sequence[float]) -> dict:
    """Signed worst violations of the argument and shift bounds for kernel and envelope.

    Each entry is ``max(LHS - RHS) / RHS``; nonpositive values mean the bound holds.
    """
    r = np.asarray(radii, dtype=float)
    nhat = (n - 1) // 2
    out = {"kernel_positive": np.inf, "kernel_argument": -np.inf, "kernel_shift": -np.inf,
           "deriv_argument": -np.inf, "deriv_shift": -np.inf}
    for mu in mus:
        mu = complex(mu)
        k = GreenKernel(n, mu)
        kr = GreenKernel(n, mu.real)
        af = argument_factor(mu)
        lhs = np.abs(kernel_eval(k, r))
        rhs = af ** (nhat - 1) * kernel_eval(kr, r)
        out["kernel_argument"] = max(out["kernel_argument"], float(np.max((lhs - rhs) / rhs)))
        lhs = q_mu(k, r)
        rhs = af ** nhat * q_mu(kr, r)
        out["deriv_argument"] = max(out["deriv_argument"], float(np.max((lhs - rhs) / rhs)))
        m = mu.real
        k4 = GreenKernel(n, m / 4)
        e = np.exp(math.sqrt(m) * r / 2)
        val = kernel_eval(kr, r)
        out["kernel_positive"] = min(out["kernel_positive"], float(np.min(val)))
        rhs = 2.0 ** (nhat - 1) * kernel_eval(k4, r)
        out["kernel_shift"] = max(out["kernel_shift"], float(np.max((e * val - rhs) / rhs)))
        rhs = 2.0 ** nhat * q_mu(k4, r)
        out["deriv_shift"] = max(out["deriv_shift"], float(np.max((e * q_mu(kr, r) - rhs) / rhs)))
    return out


# ---------------------------------------------------------------------------
# diagonal of resolvent powers


def _radial_moment(n: int, m: float, a: complex) -> complex:
    """``int_0^inf r^{n-1} (r^2 + a)^{-m} dr = a^{n/2-m} B(n/2, m-n/2) / 2``."""
    return 0.5 * complex(a) ** (n / 2 - m) * special.beta(n / 2, m - n / 2)


def resolvent_power_diagonal(n: int, m: float, z: complex = 0.0, method: str = "closed") -> complex | float:
    """``(2pi)^{-n} w_{n-1} int_0^inf r^{n-1} (r^2 + 1 + z)^{-m} dr``.

    This is the diagonal value of the kernel of ``(-Delta + 1 + z)^{-m}``.
    ``method`` is ``'closed'`` (Beta function) or ``'quad'`` (adaptive quadrature).
    """
    if m <= n / 2:
        raise ValueError(f"divergent: need m > n/2, got n={n}, m={m}")
    z = complex(z)
    if z.real <= -1:
        raise ValueError("need Re z > -1")
    a = 1.0 + z
    pref = (2 * np.pi) ** (-n) * sphere_area(n)
    if method == "closed":
        val = pref * _radial_moment(n, m, a)
    elif method == "quad":
        f = lambda r: r ** (n - 1) / (r * r + a) ** m
        re = integrate.quad(lambda r: f(r).real, 0, np.inf, epsabs=0, epsrel=1e-10, limit=400)[0]
        im = integrate.quad(lambda r: f(r).imag, 0, np.inf, epsabs=0, epsrel=1e-10, limit=400)[0]
        val = pref * complex(re, im)
    else:
        raise ValueError(f"unknown method {method!r}")
    return val.real if z.imag == 0 else val


def diagonal_constant(n: int) -> float:
    """The constant ``c`` of the diagonal envelope (exponent ``(n+3)/2``)."""
    return float(resolvent_power_diagonal(n, (n + 3) / 2, 0.0))


def diagonal_envelope(n: int, m: float, mu: complex) -> float:
    """``(1/Re mu)^m (sqrt(Re mu))^n c``, valid for ``m >= (n+3)/2``."""
    re = complex(mu).real
    return (1.0 / re) ** m * math.sqrt(re) ** n * diagonal_constant(n)


# ---------------------------------------------------------------------------
# inequality verification


@dataclass
class KernelBoundReport:
    inequality: str
    samples: int
    max_violation: float
    constants: dict = field(default_factory=dict)
    worst_sample: tuple = ()

    @property
    def passed(self) -> bool:
        return self.max_violation <= 0

    def as_text(self) -> str:
        status = "pass" if self.passed else "FAIL"
        consts = ", ".join(f"{k}={v:.6g}" for k, v in self.constants.items())
        return (f"{self.inequality}: {status} samples={self.samples} "
                f"max_violation={self.max_violation:.3e} [{consts}] worst={self.worst_sample}")


def s_mu(n: int, mu: float, r):
    r = _check_r(r)
    return np.exp(-math.sqrt(mu) * r) / r ** (n - 2)


def _grid(rng, count, mu_range, r_range):
    mus = np.exp(rng.uniform(*np.log(mu_range), size=count))
    rs = np.exp(rng.uniform(*np.log(r_range), size=count))
    return mus, rs


def _ratio_fit(ratio_fn, mus, rs):
    """Max ratio on the training grid, polished by a bounded local search around the argmax."""
    vals = ratio_fn(mus, rs)
    i = int(np.argmax(vals))
    best = float(vals[i])
    mu0, r0 = mus[i], rs[i]
    res = optimize.minimize_scalar(lambda lr: -float(ratio_fn(np.array([mu0]), np.array([np.exp(lr)]))[0]),
                                   bounds=(math.log(r0) - 3, math.log(r0) + 3), method="bounded")
    return max(best, -float(res.fun))


def _l11_1(n, lam, upper, train, test):
    def ratio(mus, rs):
        out = np.empty(len(mus))
        for j, (m, r) in enumerate(zip(mus, rs)):
            rm = kernel_eval(GreenKernel(n, m), np.array([r]))[0]
            out[j] = rm / s_mu(n, lam * m, np.array([r]))[0] if upper else s_mu(n, m, np.array([r]))[0] / rm
        return out

    c = _ratio_fit(ratio, *train)
    mus, rs = test
    viol = np.empty(len(mus))
    for j, (m, r) in enumerate(zip(mus, rs)):
        rm = kernel_eval(GreenKernel(n, m), np.array([r]))[0]
        if upper:
            rhs = c * s_mu(n, lam * m, np.array([r]))[0]
            viol[j] = (rm - rhs) / rhs
        else:
            rhs = c * rm
            viol[j] = (s_mu(n, m, np.array([r]))[0] - rhs) / rhs
    w = int(np.argmax(viol))
    return float(viol[w]), c, (float(mus[w]), float(rs[w]))


def ball_convolution(mu: float, tau: float, x, z, radial: int = 48, degree: int = 47) -> float:
    """``int_{B(0,tau)} s_mu(x-y) s_mu(y-z) dy`` in three dimensions.

    The integrand is split by a partition of unity so that each piece is
    singular at one point only, and each piece is integrated in spherical
    coordinates centred at that point (which cancels the singularity).
    """
    x = np.asarray(x, float)
    z = np.asarray(z, float)
    rule = sphere_rule(3, degree)
    g, w = np.polynomial.legendre.leggauss(radial)
    sq = math.sqrt(mu)

    def piece(c, other):
        # rays c + s*omega intersected with the ball
        b = rule.nodes @ c
        disc = b * b - (c @ c - tau * tau)
        total = 0.0
        for om, bw, bb, dd in zip(rule.nodes, rule.weights, b, disc):
            if dd <= 0:
                continue
            lo = max(0.0, -bb - math.sqrt(dd))
            hi = -bb + math.sqrt(dd)
            if hi <= lo:
                continue
            s = 0.5 * (hi - lo) * (g + 1) + lo
            ws = 0.5 * (hi - lo) * w
            y = c[None, :] + s[:, None] * om[None, :]
            d1 = s
            d2 = np.linalg.norm(y - other[None, :], axis=1)
            part = d2 / (d1 + d2)
            # s_mu(d1) * s_mu(d2) * s^2 with the 1/d1 factor absorbed by the Jacobian
            f = np.exp(-sq * (d1 + d2)) * s / d2 * part
            total += bw * float(np.sum(ws * f))
        return total

    return piece(x, z) + piece(z, x)


def _l11_4(tau, mu, pairs):
    n = 3
    const = 2.0 ** (n - 3) * sphere_area(n) * tau * tau
    viol = []
    for x, z in pairs:
        lhs = ball_convolution(mu, tau, x, z)
        rhs = const * s_mu(n, mu, np.array([np.linalg.norm(np.asarray(x) - np.asarray(z))]))[0]
        viol.append((lhs - rhs) / rhs)
    viol = np.array(viol)
    w = int(np.argmax(viol))
    return float(viol[w]), const, w


def radial_symbol(n: int, profile, rho, cutoff: float) -> np.ndarray:
    """Fourier transform of a radial profile: ``(2pi)^{n/2} rho^{1-n/2} int f(r) J_{n/2-1}(rho r) r^{n/2} dr``."""
    nu = n / 2.0 - 1.0
    out = []
    for p in np.atleast_1d(rho):
        breaks = np.linspace(0, cutoff, int(max(8, p * cutoff / np.pi)) + 1)
        val = 0.0
        for a, b in zip(breaks[:-1], breaks[1:]):
            val += integrate.quad(lambda r: profile(r) * special.jv(nu, p * r) * r ** (n / 2),
                                  a, b, epsabs=1e-13, epsrel=1e-11, limit=200)[0]
        out.append((2 * np.pi) ** (n / 2) * p ** (1 - n / 2) * val)
    return np.array(out)


def yukawa_symbol(n: int, k: int, mu: float, rho) -> np.ndarray:
    """Fourier symbol of ``exp(-mu r) / r^k`` (requires ``k < n``)."""
    if not 0 <= k < n:
        raise ValueError("need 0 <= k < n")
    cutoff = 45.0 / mu
    return radial_symbol(n, lambda r: np.exp(-mu * r) / r ** k if r > 0 else 0.0, rho, cutoff)


def verify_inequality(ineq: str, n: int = 3, samples: int = 50, seed: int = 0, lam: float = 0.5,
                      tau: float = 0.5, mu: float = 1.0, k: int = 1,
                      rho: Sequence[float] | None = None) -> KernelBoundReport:
    """Check one of the kernel inequalities on sampled points.

    Constants that are only asserted to exist are fitted on a training grid
    and asserted on an independent test grid.
    """
    rng = np.random.default_rng(seed)
    if ineq in ("L11_1_upper", "L11_1_lower"):
        train = _grid(rng, 4 * samples, (1e-2, 1e2), (1e-2, 1e2))
        test = _grid(rng, samples, (1e-2, 1e2), (1e-2, 1e2))
        viol, c, worst = _l11_1(n, lam, ineq.endswith("upper"), train, test)
        consts = {"c1": c, "lambda": lam} if ineq.endswith("upper") else {"c2": c}
        return KernelBoundReport(ineq, samples, viol, consts, worst)
    if ineq == "L11_4_convolution":
        if n != 3:
            raise ValueError("ball convolution is implemented for n = 3")
        pairs = []
        while len(pairs) < samples:
            x, z = rng.uniform(-2 * tau, 2 * tau, size=(2, 3))
            if np.linalg.norm(x - z) > 1e-2:
                pairs.append((x, z))
        viol, const, w = _l11_4(tau, mu, pairs)
        return KernelBoundReport(ineq, samples, viol, {"bound_const": const, "tau": tau, "mu": mu},
                                 tuple(round(float(v), 4) for v in np.concatenate(pairs[w])))
    if ineq == "T11_7_positivity":
        rho = np.linspace(0.05, 20.0, samples) if rho is None else np.asarray(rho, float)
        sym = yukawa_symbol(n, k, mu, rho)
        w = int(np.argmin(sym))
        return KernelBoundReport(ineq, len(rho), float(-sym[w]), {"k": k, "mu": mu, "min_symbol": float(sym[w])},
                                 (float(rho[w]),))
    raise ValueError(f"unknown inequality {ineq!r}; expected one of {INEQUALITIES}")
