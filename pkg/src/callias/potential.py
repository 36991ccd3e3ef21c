"""Matrix-valued potentials on R^n, their classification and derived constructions.

A :class:`Potential` is a vectorized map from points of shape ``(..., n)`` to
Hermitian matrices of shape ``(..., d, d)``, optionally with analytic first
derivatives. Derivatives fall back to fourth order central differences.
"""

from __future__ import annotations

import ast
import math
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from . import clifford, smooth
from .matrixfn import batched_sign, sign_frechet

Array = np.ndarray
EvalFn = Callable[[Array], Array]
DerivFn = Callable[[Array, int], Array]

HERMITIAN_TOL = 1e-10
FD_EXPONENT = 0.2


def _as_points(x, n: int) -> Array:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != n:
        raise ValueError(f"points must have trailing dimension {n}, got shape {x.shape}")
    return x


def fd_step(x: Array) -> Array:
    """Per-point step ``eps^(1/5) (1 + |x|)`` broadcastable against ``x``."""
    return np.finfo(float).eps ** FD_EXPONENT * (1.0 + np.linalg.norm(x, axis=-1, keepdims=True))


def _fd(func: EvalFn, x: Array, j: int) -> Array:
    h = fd_step(x)
    e = np.zeros_like(x)
    e[..., j] = 1.0
    he = h * e
    hm = h[..., 0][..., None, None]
    return (func(x - 2 * he) - 8 * func(x - he) + 8 * func(x + he) - func(x + 2 * he)) / (12 * hm)


@dataclass(frozen=True)
class Potential:
    """Matrix potential with metadata.

    ``gap_radius`` and ``gap_c`` record ``|Phi(x)| >= gap_c`` for ``|x| > gap_radius``.
    ``sign_type`` marks potentials that are unitary outside ``gap_radius``.
    ``null_block`` counts leading zero rows/columns (block embeddings).
    """

    n: int
    d: int
    func: EvalFn
    deriv: DerivFn | None
    gap_radius: float
    gap_c: float
    label: str
    sign_type: bool = False
    null_block: int = 0
    params: dict = field(default_factory=dict)

    def eval(self, x) -> Array:
        return self.func(_as_points(x, self.n))

    def __call__(self, x) -> Array:
        return self.eval(x)

    def derivative(self, x, j: int) -> Array:
        """``d Phi / d x_j`` with 0-based ``j``."""
        if not 0 <= j < self.n:
            raise ValueError(f"direction {j} out of range for n={self.n}")
        x = _as_points(x, self.n)
        if self.deriv is not None:
            return self.deriv(x, j)
        return _fd(self.func, x, j)

    def fd_derivative(self, x, j: int) -> Array:
        return _fd(self.func, _as_points(x, self.n), j)

    def jacobian(self, x) -> Array:
        """All first derivatives, shape ``(..., n, d, d)``."""
        x = _as_points(x, self.n)
        return np.stack([self.derivative(x, j) for j in range(self.n)], axis=-3)

    def second_derivative(self, x, j: int, k: int) -> Array:
        x = _as_points(x, self.n)
        return _fd(lambda y: self.derivative(y, j), x, k)

    # derived potentials -------------------------------------------------

    def negated(self) -> "Potential":
        deriv = None if self.deriv is None else (lambda x, j: -self.deriv(x, j))
        return replace(self, func=lambda x: -self.func(x), deriv=deriv, label=f"-({self.label})")

    def compose(self, t: Callable[[Array], Array], jac: Callable[[Array], Array], label: str,
                radius_factor: float = 1.0) -> "Potential":
        """``x -> Phi(T(x))`` with Jacobian ``jac(x)[..., k, j] = d T_k / d x_j``."""
        base = self

        def func(x):
            return base.func(t(x))

        def deriv(x, j):
            y = t(x)
            jm = jac(x)
            out = 0
            for k in range(base.n):
                out = out + jm[..., k, j][..., None, None] * base.derivative(y, k)
            return out

        return replace(self, func=func, deriv=deriv, label=label,
                       gap_radius=self.gap_radius * radius_factor)

    def scaled(self, s: float) -> "Potential":
        """``x -> Phi(s x)``."""
        n = self.n
        eye = np.eye(n)
        return self.compose(lambda x: s * x, lambda x: np.broadcast_to(s * eye, x.shape[:-1] + (n, n)),
                            label=f"{self.label}(x*{s:g})", radius_factor=1.0 / s)

    def linear_map(self, m: Array, label: str | None = None) -> "Potential":
        """``x -> Phi(M x)`` for an orthogonal (or any invertible) matrix ``M``."""
        m = np.asarray(m, dtype=float)
        n = self.n
        smin = float(np.linalg.svd(m, compute_uv=False).min())
        return self.compose(lambda x: x @ m.T, lambda x: np.broadcast_to(m, x.shape[:-1] + (n, n)),
                            label=label or f"{self.label}(Mx)", radius_factor=1.0 / smin)


# ---------------------------------------------------------------------------
# builtins


def _gammas(n: int) -> Array:
    return clifford.build_algebra(n).stacked()


def hedgehog(n: int = 3, sign: int = 1) -> Potential:
    """``sign * rho(|x|) sum_j gamma_j x_j/|x|`` with the smooth radial cap ``rho``.

    For ``|x| >= 1`` this is ``sign * sum_j gamma_j x_j/|x|``, unitary with gap 1.
    """
    if n < 2:
        raise ValueError("hedgehog needs n >= 2")
    g = _gammas(n)

    def radial(r):
        small = r < 0.25
        rs = np.where(small, 1.0, r)
        ratio = np.where(small, 1.0, smooth.cap(rs) / rs)
        dratio = np.where(small, 0.0, (smooth.cap_deriv(rs) * rs - smooth.cap(rs)) / rs**2)
        return ratio, dratio, rs

    def func(x):
        r = np.linalg.norm(x, axis=-1)
        ratio, _, _ = radial(r)
        return sign * np.einsum("...j,jab->...ab", x * ratio[..., None], g)

    def deriv(x, k):
        r = np.linalg.norm(x, axis=-1)
        ratio, dratio, rs = radial(r)
        lin = np.einsum("...j,jab->...ab", x, g)
        return sign * (ratio[..., None, None] * g[k] + (dratio * x[..., k] / rs)[..., None, None] * lin)

    name = "hedgehog" if sign > 0 else "anti_hedgehog"
    return Potential(n=n, d=g.shape[1], func=func, deriv=deriv, gap_radius=1.0, gap_c=1.0,
                     label=name if n == 3 else f"{name}(n={n})", sign_type=True,
                     params={"n": n, "sign": sign})


def constant_unitary(matrix: Array | None = None, n: int = 3) -> Potential:
    """Constant Hermitian unitary potential (default ``sigma_3``)."""
    m = clifford.SIGMA3 if matrix is None else np.asarray(matrix, dtype=complex)
    if np.abs(m - m.conj().T).max() > HERMITIAN_TOL or np.abs(m @ m - np.eye(len(m))).max() > 1e-10:
        raise ValueError("constant_unitary needs a Hermitian unitary matrix")
    d = m.shape[0]

    def func(x):
        return np.broadcast_to(m, x.shape[:-1] + (d, d)).copy()

    def deriv(x, j):
        return np.zeros(x.shape[:-1] + (d, d), dtype=complex)

    return Potential(n=n, d=d, func=func, deriv=deriv, gap_radius=0.0, gap_c=1.0,
                     label="constant_unitary", sign_type=True, params={"matrix": m})


def _unit_field_potential(field_fn, jac_fn, n: int, label: str, params: dict) -> Potential:
    """Potential ``w(x) . sigma`` for a unit vector field ``w`` on R^3."""
    pauli = np.array(clifford.PAULI)

    def func(x):
        return np.einsum("...j,jab->...ab", field_fn(x), pauli)

    def deriv(x, k):
        return np.einsum("...j,jab->...ab", jac_fn(x)[..., :, k], pauli)

    return Potential(n=n, d=2, func=func, deriv=deriv, gap_radius=0.0, gap_c=1.0, label=label,
                     sign_type=True, params=params)


def rotated_constant(strength: float = 0.5) -> Potential:
    """Everywhere-unitary ``w(x) . sigma`` with ``w = normalize(e_3 + strength * x/(1+|x|))``.

    For ``strength < 1`` the field stays in the open upper hemisphere, so the
    map to the sphere has degree 0 while the pointwise integrand does not vanish.
    """
    if not 0 <= strength < 1:
        raise ValueError("strength must lie in [0, 1)")

    def raw(x):
        r = np.linalg.norm(x, axis=-1, keepdims=True)
        v = strength * x / (1.0 + r)
        v[..., 2] += 1.0
        return v

    def raw_jac(x):
        r = np.linalg.norm(x, axis=-1)
        rs = np.where(r == 0, 1.0, r)
        eye = np.eye(3)
        q = 1.0 / (1.0 + r)
        outer = x[..., :, None] * x[..., None, :]
        return strength * (q[..., None, None] * eye - (q**2 / rs)[..., None, None] * outer)

    def field_fn(x):
        v = raw(x)
        return v / np.linalg.norm(v, axis=-1, keepdims=True)

    def jac_fn(x):
        v = raw(x)
        nv = np.linalg.norm(v, axis=-1)
        w = v / nv[..., None]
        jv = raw_jac(x)
        proj = np.eye(3) - w[..., :, None] * w[..., None, :]
        return (proj @ jv) / nv[..., None, None]

    return _unit_field_potential(field_fn, jac_fn, 3, "rotated_constant", {"strength": strength})


def winding(m: int = 2) -> Potential:
    """Experimental degree-``m`` generalization in n=3.

    The direction ``(sin t cos(m p), sin t sin(m p), cos t)`` in spherical angles
    ``(t, p)`` of ``x`` is capped radially like the hedgehog. Derivatives use
    finite differences.
    """
    if int(m) != m or m == 0:
        raise ValueError("winding number must be a nonzero integer")
    m = int(m)
    pauli = np.array(clifford.PAULI)

    def func(x):
        r = np.linalg.norm(x, axis=-1)
        rs = np.where(r == 0, 1.0, r)
        s = np.hypot(x[..., 0], x[..., 1])
        ss = np.where(s == 0, 1.0, s)
        zc = (x[..., 0] + 1j * x[..., 1]) / ss
        zm = zc ** m
        w = np.stack([s / rs * zm.real, s / rs * zm.imag, x[..., 2] / rs], axis=-1)
        w = w * smooth.cap(r)[..., None]
        return np.einsum("...j,jab->...ab", w, pauli)

    return Potential(n=3, d=2, func=func, deriv=None, gap_radius=1.0, gap_c=1.0,
                     label=f"winding_{m}", sign_type=True, params={"m": m})


def block_embed(base: Potential, ell: int) -> Potential:
    """``diag(0_ell, base)``: the base potential in the lower right block."""
    if ell < 0:
        raise ValueError("block size must be nonnegative")
    d = base.d + ell

    def pad(a):
        out = np.zeros(a.shape[:-2] + (d, d), dtype=complex)
        out[..., ell:, ell:] = a
        return out

    def func(x):
        return pad(base.func(x))

    def deriv(x, j):
        return pad(base.derivative(x, j))

    return Potential(n=base.n, d=d, func=func, deriv=deriv, gap_radius=base.gap_radius,
                     gap_c=base.gap_c, label=f"block({base.label},l={ell})",
                     sign_type=base.sign_type, null_block=base.null_block + ell,
                     params={"base": base.label, "l": ell})


LOCAL_24I_MATRICES = (
    np.array([[1, 2], [2, 1]], dtype=complex),
    np.array([[1, 2], [2, -1]], dtype=complex),
    np.array([[0, 1j], [-1j, 0]], dtype=complex),
)


def local_24i() -> Potential:
    """Linear potential ``A x_1 + B x_2 + C x_3`` whose epsilon-trace density is 24i.

    Only its derivatives at the origin matter; it is a local fixture.
    """
    mats = np.stack(LOCAL_24I_MATRICES)

    def func(x):
        return np.einsum("...j,jab->...ab", x, mats)

    def deriv(x, j):
        return np.broadcast_to(mats[j], x.shape[:-1] + (2, 2)).copy()

    return Potential(n=3, d=2, func=func, deriv=deriv, gap_radius=math.inf, gap_c=0.0,
                     label="local_24i")


# ---------------------------------------------------------------------------
# cutoff counterexample


def phi1(s):
    return smooth.step(s)


def phi2(s):
    # step down from 1 at s <= 0 to 0 at s >= 1
    return smooth.step(1.0 - np.asarray(s, dtype=float))


def psi_cutoff(s, r1: float, r2: float, t1: float, t2: float):
    """Cutoff equal to 1 on ``[r1+t1, r2-t2]`` and 0 outside ``[r1, r2]``."""
    if not r1 + t1 < r2 - t2:
        raise ValueError("need r1 + t1 < r2 - t2")
    return psi_cutoff_vec(s, r1, r2, t1, t2)


def psi_cutoff_deriv(s, r1: float, r2: float, t1: float, t2: float):
    return psi_cutoff_deriv_vec(s, r1, r2, t1, t2)


def shell_radius(k):
    """``r_k = 2^k - 2``."""
    return 2.0 ** np.asarray(k, dtype=float) - 2.0


def shell_params(k: int) -> dict:
    p = 2.0**k
    rk, rk1 = shell_radius(k), shell_radius(k + 1)
    return {
        "radial": (rk, rk1, p / 2.0, p / 20.0),
        "axial": (rk, rk1, p / 36.0, 17.0 * p / 18.0),
        "rk": float(rk),
        "rk1": float(rk1),
    }


def _shell_index(r: Array) -> Array:
    with np.errstate(divide="ignore"):
        k = np.floor(np.log2(np.maximum(r, 0.0) + 2.0)).astype(int)
    return k


def counterexample(k_max: int = 40, k_min: int = 2) -> Potential:
    """Sum of Pauli matrices plus shell bumps ``k^{-1/3} sum_j sigma_j xi_{k,j}``.

    Shells with ``k_min <= k <= k_max`` are included; ``xi_{k,j}`` lives on the
    shell ``r_k <= |x| <= r_{k+1}`` intersected with ``r_k <= x_j <= r_{k+1}``.
    """
    pauli = np.array(clifford.PAULI)
    base = pauli.sum(axis=0)

    def pieces(x):
        r = np.linalg.norm(x, axis=-1)
        k = _shell_index(r)
        active = (k >= k_min) & (k <= k_max)
        kk = np.where(active, k, k_min)
        p = 2.0**kk
        rk = p - 2.0
        rk1 = 2.0 * p - 2.0
        return r, kk, active, p, rk, rk1

    def xi(x):
        r, kk, active, p, rk, rk1 = pieces(x)
        rad = psi_cutoff_vec(r, rk, rk1, p / 2.0, p / 20.0)
        ax = psi_cutoff_vec(x, rk[..., None], rk1[..., None], (p / 36.0)[..., None],
                            (17.0 * p / 18.0)[..., None])
        coef = np.where(active, kk ** (-1.0 / 3.0) / rk1 * rad, 0.0)
        return coef[..., None] * (x - rk[..., None]) * ax

    def func(x):
        vals = xi(x)
        return base + np.einsum("...j,jab->...ab", vals, pauli)

    def deriv(x, ell):
        r, kk, active, p, rk, rk1 = pieces(x)
        rs = np.where(r == 0, 1.0, r)
        t1r, t2r = p / 2.0, p / 20.0
        rad = psi_cutoff_vec(r, rk, rk1, t1r, t2r)
        drad = psi_cutoff_deriv_vec(r, rk, rk1, t1r, t2r)
        t1a, t2a = (p / 36.0)[..., None], (17.0 * p / 18.0)[..., None]
        ax = psi_cutoff_vec(x, rk[..., None], rk1[..., None], t1a, t2a)
        dax = psi_cutoff_deriv_vec(x, rk[..., None], rk1[..., None], t1a, t2a)
        scale = np.where(active, kk ** (-1.0 / 3.0) / rk1, 0.0)
        lin = (x - rk[..., None]) * ax
        out = (scale * drad * x[..., ell] / rs)[..., None] * lin
        own = scale * rad * (ax[..., ell] + (x[..., ell] - rk) * dax[..., ell])
        out[..., ell] += own
        return np.einsum("...j,jab->...ab", out, pauli)

    return Potential(n=3, d=2, func=func, deriv=deriv, gap_radius=0.0, gap_c=math.sqrt(3.0),
                     label="appendix_b", params={"k_max": k_max, "k_min": k_min})


def psi_cutoff_vec(s, r1, r2, t1, t2):
    s = np.asarray(s, dtype=float)
    return phi1((s - r1) / t1) * phi2((s - (r2 - t2)) / t2)


def psi_cutoff_deriv_vec(s, r1, r2, t1, t2):
    s = np.asarray(s, dtype=float)
    a = (s - r1) / t1
    b = (s - (r2 - t2)) / t2
    return (smooth.step_deriv(a) / t1) * phi2(b) - phi1(a) * (smooth.step_deriv(1.0 - b) / t2)


def psi_cutoff_second_deriv_vec(s, r1, r2, t1, t2):
    s = np.asarray(s, dtype=float)
    a = (s - r1) / t1
    b = (s - (r2 - t2)) / t2
    return (smooth.step_deriv(a, 2) / t1**2 * phi2(b)
            - 2.0 * smooth.step_deriv(a) / t1 * smooth.step_deriv(1.0 - b) / t2
            + phi1(a) * smooth.step_deriv(1.0 - b, 2) / t2**2)


def shell_xi(x, k: int) -> Array:
    """The three shell bumps ``xi_{k,j}(x)``, stacked on the last axis."""
    x = np.asarray(x, dtype=float)
    rad, ax = shell_params(k)["radial"], shell_params(k)["axial"]
    r = np.linalg.norm(x, axis=-1)
    rk, rk1 = float(shell_radius(k)), float(shell_radius(k + 1))
    return (psi_cutoff_vec(r, *rad) / rk1)[..., None] * (x - rk) * psi_cutoff_vec(x, *ax)


def in_shell_region(x, k: int) -> Array:
    """Membership in ``{r_k <= |x| <= r_{k+1}}`` intersected with some slab ``r_k <= x_j <= r_{k+1}``."""
    x = np.asarray(x, dtype=float)
    rk, rk1 = float(shell_radius(k)), float(shell_radius(k + 1))
    r = np.linalg.norm(x, axis=-1)
    slab = np.any((x >= rk) & (x <= rk1), axis=-1)
    return (r >= rk) & (r <= rk1) & slab


def in_inner_region(x, k: int) -> Array:
    """Membership in the region where both cutoffs of shell ``k`` equal one."""
    x = np.asarray(x, dtype=float)
    lo, hi = shell_box(k)
    rlo, rhi = shell_radial_range(k)
    r = np.linalg.norm(x, axis=-1)
    return (r >= rlo) & (r <= rhi) & np.all((x >= lo) & (x <= hi), axis=-1)


BUILTINS = ("hedgehog", "anti_hedgehog", "constant_unitary", "rotated_constant", "winding_m",
            "block_embed", "appendix_b", "local_24i")


def builtin(name: str, **params) -> Potential:
    """Named potentials.

    ``block_embed`` takes ``base`` (a builtin name or Potential) and ``l``.
    """
    if name == "hedgehog":
        return hedgehog(n=int(params.get("n", 3)), sign=1)
    if name == "anti_hedgehog":
        return hedgehog(n=int(params.get("n", 3)), sign=-1)
    if name in ("constant_unitary", "constant"):
        return constant_unitary(params.get("matrix"), n=int(params.get("n", 3)))
    if name == "rotated_constant":
        return rotated_constant(float(params.get("strength", 0.5)))
    if name in ("winding_m", "winding"):
        return winding(int(params.get("m", 2)))
    if name in ("block_embed", "block"):
        base = params.get("base", "hedgehog")
        if isinstance(base, str):
            base = builtin(base)
        ell = params.get("l", params.get("ell", 1))
        return block_embed(base, int(ell))
    if name == "appendix_b":
        return counterexample(int(params.get("k_max", 40)), int(params.get("k_min", 2)))
    if name == "local_24i":
        return local_24i()
    raise ValueError(f"unknown potential {name!r}; choose from {', '.join(BUILTINS)}")


# ---------------------------------------------------------------------------
# derived potentials


def smoothed_sign(p: Potential, tau: float, inner_radius: float | None = None) -> Potential:
    """Sign-type potential ``U = phi(x) sgn(Phi(alpha(x)))``.

    ``alpha(x) = eta(|x|) x/|x|`` retracts the ball ``|x| < R`` onto the shell
    ``R' <= |x| <= R`` where the gap holds (``R' = gap_radius``, ``R = 2 R'``),
    and ``phi`` vanishes on ``B(0, tau/2)`` and equals 1 outside ``B(0, tau)``.
    Then ``U^2 = phi^2 I`` and ``U = sgn(Phi)`` wherever ``|x| >= max(tau, R)``.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    r_in = p.gap_radius if inner_radius is None else inner_radius
    if not np.isfinite(r_in):
        raise ValueError("potential has no gap region")
    r_out = 2.0 * r_in
    retract = r_in > 0

    def eta(r):
        if not retract:
            return r, np.ones_like(r)
        t = (r - r_in) / (r_out - r_in)
        s = smooth.step(t)
        ds = smooth.step_deriv(t) / (r_out - r_in)
        val = r_in + (r - r_in) * s
        der = s + (r - r_in) * ds
        val = np.where(r <= r_in, r_in, val)
        der = np.where(r <= r_in, 0.0, der)
        return val, der

    def alpha(x):
        r = np.linalg.norm(x, axis=-1)
        rs = np.where(r == 0, 1.0, r)
        e, _ = eta(r)
        u = x / rs[..., None]
        u = np.where((r == 0)[..., None], np.eye(p.n)[0], u)
        return e[..., None] * u

    def alpha_jac(x):
        r = np.linalg.norm(x, axis=-1)
        rs = np.where(r == 0, 1.0, r)
        e, de = eta(r)
        u = x / rs[..., None]
        outer = u[..., :, None] * u[..., None, :]
        eye = np.eye(p.n)
        return de[..., None, None] * outer + (e / rs)[..., None, None] * (eye - outer)

    def weight(x):
        r = np.linalg.norm(x, axis=-1)
        t = (r - tau / 2.0) / (tau / 2.0)
        return smooth.step(t)

    def weight_grad(x):
        r = np.linalg.norm(x, axis=-1)
        rs = np.where(r == 0, 1.0, r)
        t = (r - tau / 2.0) / (tau / 2.0)
        return (smooth.step_deriv(t) / (tau / 2.0) / rs)[..., None] * x

    def check_gap(vals):
        lam = np.linalg.eigvalsh(vals)
        m = np.abs(lam).min()
        if p.gap_c > 0 and m < p.gap_c * (1 - 1e-8):
            raise ValueError(f"gap violated in the retracted region: min |eig| = {m:.3e}")

    def func(x):
        vals = p.func(alpha(x))
        check_gap(vals)
        return weight(x)[..., None, None] * batched_sign(vals)

    def deriv(x, j):
        y = alpha(x)
        vals = p.func(y)
        jac = alpha_jac(x)
        direction = 0
        for k in range(p.n):
            direction = direction + jac[..., k, j][..., None, None] * p.derivative(y, k)
        w = weight(x)[..., None, None]
        gw = weight_grad(x)[..., j][..., None, None]
        return gw * batched_sign(vals) + w * sign_frechet(vals, direction)

    radius = max(tau, r_out if retract else 0.0)
    return Potential(n=p.n, d=p.d, func=func, deriv=deriv, gap_radius=radius, gap_c=1.0,
                     label=f"sgn({p.label})", sign_type=True, null_block=p.null_block,
                     params={"tau": tau, "inner_radius": r_in, "outer_radius": r_out})


def _ball_rule(n: int, nodes_per_axis: int):
    g, w = np.polynomial.legendre.leggauss(nodes_per_axis)
    grids = np.meshgrid(*([g] * n), indexing="ij")
    pts = np.stack([gg.ravel() for gg in grids], axis=-1)
    wts = np.ones(len(pts))
    for ww in np.meshgrid(*([w] * n), indexing="ij"):
        wts = wts * ww.ravel()
    rr = np.sum(pts**2, axis=-1)
    dens = np.zeros_like(rr)
    inside = rr < 1
    dens[inside] = np.exp(-1.0 / (1.0 - rr[inside]))
    wts = wts * dens
    keep = wts > 0
    pts, wts = pts[keep], wts[keep]
    return pts, wts / wts.sum()


def mollify(p: Potential, gamma: float, nodes_per_axis: int = 8) -> Potential:
    """Convolution with the scaled bump ``gamma^{-n} zeta(y/gamma)``.

    ``zeta`` is the normalized bump ``exp(-1/(1-|y|^2))`` on the unit ball. The
    convolution uses a tensor Gauss-Legendre rule on the cube with the bump as a
    weight, renormalized to unit mass, so constants are reproduced exactly and
    odd moments vanish by symmetry.
    """
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    pts, wts = _ball_rule(p.n, nodes_per_axis)
    shifts = gamma * pts

    def conv(fn, x):
        y = x[..., None, :] - shifts
        vals = fn(y)
        return np.einsum("q,...qab->...ab", wts, vals)

    def func(x):
        return conv(p.func, x)

    def deriv(x, j):
        return conv(lambda y: p.derivative(y, j), x)

    return Potential(n=p.n, d=p.d, func=func, deriv=deriv, gap_radius=p.gap_radius + gamma,
                     gap_c=p.gap_c / 2.0, label=f"mollified({p.label},{gamma:g})",
                     sign_type=False, null_block=p.null_block,
                     params={"gamma": gamma, "nodes": len(wts)})


# ---------------------------------------------------------------------------
# classification


@dataclass
class AdmissibilityReport:
    klass: str
    epsilon: float
    kappa: dict
    sample_count: int
    witnesses: dict
    unitary_radius: float | None = None
    scalar_square: bool = False
    decay_exponents: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "class": self.klass,
            "epsilon": self.epsilon,
            "kappa": self.kappa,
            "sample_count": self.sample_count,
            "witnesses": self.witnesses,
            "unitary_radius": self.unitary_radius,
            "scalar_square": self.scalar_square,
            "decay_exponents": self.decay_exponents,
        }


def sphere_directions(n: int, count: int, seed: int = 0) -> Array:
    """Deterministic pseudo-random unit vectors (Gaussian normalized)."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((count, n))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _decay_exponent(radii: Array, norms: Array) -> float:
    """Least squares slope of ``-log`` envelope against ``log(1+r)`` on the tail.

    The envelope ``max_{r' >= r} norm(r')`` is used so sparse features (bumps
    hit by only some samples) do not produce spurious growth.
    """
    env = np.maximum.accumulate(norms[::-1])[::-1]
    tail = radii >= np.sqrt(radii.min() * radii.max())
    y = env[tail]
    if np.all(y <= 1e-300):
        return math.inf
    y = np.maximum(y, 1e-300)
    x = np.log1p(radii[tail])
    slope = np.polyfit(x, np.log(y), 1)[0]
    return float(-slope)


def classify(p: Potential, radii: Array | None = None, directions: int = 32, tol: float = 1e-8,
             tau: float | None = None, seed: int = 0) -> AdmissibilityReport:
    """Sampling-based classification against the admissibility hierarchy.

    Classes, from most to least specific: ``admissible`` (unitary everywhere,
    derivative decay), ``tau_admissible`` (only when ``tau`` is given:
    ``Phi^2 = u I`` everywhere with ``u = 1`` outside ``B(0, tau)``),
    ``callias_admissible`` (unitary outside a ball), ``general_C2`` (gap and
    decay but not unitary at infinity), ``fails``.
    """
    if radii is None:
        radii = np.geomspace(1.0, 1e3, 16)
    radii = np.asarray(radii, dtype=float)
    if len(radii) < 3:
        raise ValueError("insufficient samples: need at least 3 radii")
    dirs = sphere_directions(p.n, directions, seed)
    inner = np.concatenate([[0.0], np.linspace(0.05, 1.0, 8)])
    all_r = np.concatenate([inner, radii])
    pts = all_r[:, None, None] * dirs[None, :, :]
    vals = p.eval(pts)
    eye = np.eye(p.d)
    count = pts.shape[0] * pts.shape[1]

    herm = np.abs(vals - np.swapaxes(vals.conj(), -1, -2)).max()
    if herm > HERMITIAN_TOL * (1 + np.abs(vals).max()):
        return AdmissibilityReport("fails", 0.0, {}, count, {"hermiticity": float(herm)})

    sq = vals @ vals
    unit_err = np.abs(sq - eye).max(axis=(-1, -2))
    scal = np.einsum("...aa->...", sq).real / p.d
    scalar_err = np.abs(sq - scal[..., None, None] * eye).max(axis=(-1, -2))
    lam = np.abs(np.linalg.eigvalsh(vals)).min(axis=-1)

    outer_idx = slice(len(inner), None)
    outer_unit = unit_err[outer_idx]
    unitary_everywhere = bool(unit_err.max() < tol)
    unitary_outside = bool(outer_unit.max() < tol)
    unit_rad = None
    if unitary_outside:
        bad = np.where(unit_err.max(axis=1) >= tol)[0]
        unit_rad = float(all_r[bad].max()) if len(bad) else 0.0
    scalar_square = bool(scalar_err.max() < tol) and bool(scal.max() <= 1 + tol)

    jac = p.jacobian(pts[len(inner):])
    n1 = np.linalg.norm(jac, ord=2, axis=(-2, -1)).max(axis=(1, 2))
    sec = np.zeros_like(n1)
    for j in range(p.n):
        for k in range(j, p.n):
            s2 = p.second_derivative(pts[len(inner):], j, k)
            sec = np.maximum(sec, np.linalg.norm(s2, ord=2, axis=(-2, -1)).max(axis=1))
    p1 = _decay_exponent(radii, n1)
    p2 = _decay_exponent(radii, sec)
    kappa1 = float(np.max(n1 * (1 + radii)))
    eps = p2 - 1.0
    kappa2 = float(np.max(sec * (1 + radii) ** (1 + min(eps, 10.0)))) if np.isfinite(eps) else 0.0
    gap_ok = bool(lam[outer_idx].min() >= p.gap_c * (1 - 1e-8)) if p.gap_c > 0 else False
    decay_ok = (p1 >= 1.0 - 0.05 or n1.max() < tol) and eps > 0.5

    worst = {
        "max_unitarity_defect_outside": float(outer_unit.max()),
        "max_first_derivative_weighted": kappa1,
        "min_abs_eigenvalue_outside": float(lam[outer_idx].min()),
    }
    if not decay_ok or not gap_ok:
        klass = "fails"
    elif unitary_everywhere:
        klass = "admissible"
    elif tau is not None and scalar_square and unit_rad is not None and unit_rad <= tau:
        klass = "tau_admissible"
    elif unitary_outside:
        klass = "callias_admissible"
    else:
        klass = "general_C2"
    return AdmissibilityReport(
        klass=klass,
        epsilon=float(eps),
        kappa={"order1": kappa1, "order2": kappa2},
        sample_count=count,
        witnesses=worst,
        unitary_radius=unit_rad,
        scalar_square=scalar_square,
        decay_exponents={"order1": p1, "order2": p2},
    )


def check_invariants(p: Potential, points: Array) -> dict:
    """Hermiticity everywhere and the gap outside ``gap_radius`` at the given points."""
    vals = p.eval(points)
    herm = float(np.abs(vals - np.swapaxes(vals.conj(), -1, -2)).max())
    r = np.linalg.norm(points, axis=-1)
    outside = r > p.gap_radius
    gap = math.inf
    if np.any(outside):
        lam = np.abs(np.linalg.eigvalsh(vals[outside]))
        lam = np.sort(lam, axis=-1)[..., p.null_block:]
        gap = float(lam.min())
    return {"hermitian": herm, "min_gap_outside": gap}


# ---------------------------------------------------------------------------
# counterexample diagnostics


def shell_box(k: int) -> tuple[float, float]:
    """Axis interval of the cube inside the shell region of shell ``k``."""
    p = 2.0**k
    rk, rk1 = float(shell_radius(k)), float(shell_radius(k + 1))
    return rk + p / 36.0, rk1 - 17.0 * p / 18.0


def shell_radial_range(k: int) -> tuple[float, float]:
    p = 2.0**k
    rk, rk1 = float(shell_radius(k)), float(shell_radius(k + 1))
    return rk + p / 2.0, rk1 - p / 20.0


def box_inside_shell(k: int) -> bool:
    lo, hi = shell_box(k)
    rlo, rhi = shell_radial_range(k)
    return math.sqrt(3.0) * lo >= rlo and math.sqrt(3.0) * hi <= rhi


def first_volume_shell(k_max: int = 200) -> int:
    """Smallest ``k0 >= 2`` with the cube inside the shell for every ``k0 <= k <= k_max``."""
    ok = [box_inside_shell(k) for k in range(2, k_max + 1)]
    k0 = None
    for i in range(len(ok) - 1, -1, -1):
        if not ok[i]:
            break
        k0 = i + 2
    if k0 is None:
        raise ValueError("no shell satisfies the containment condition")
    return k0


def shell_volume(k: int) -> float:
    """Volume of cube intersected with shell, exact once the cube lies inside the shell."""
    lo, hi = shell_box(k)
    if box_inside_shell(k):
        return (hi - lo) ** 3
    return shell_volume_sampled(k, 64)


def shell_volume_sampled(k: int, m: int = 64) -> float:
    """Midpoint-grid estimate of the region volume (independent of the containment shortcut)."""
    lo, hi = shell_box(k)
    rlo, rhi = shell_radial_range(k)
    h = (hi - lo) / m
    c = lo + h * (np.arange(m) + 0.5)
    g = np.stack(np.meshgrid(c, c, c, indexing="ij"), axis=-1)
    r = np.linalg.norm(g, axis=-1)
    return float(np.count_nonzero((r >= rlo) & (r <= rhi)) * h**3)


def lower_bound_terms(k_lo: int, k_hi: int, corrected: bool = False) -> Array:
    """Terms ``(1/k) 2^{3k} / (2^k - 2)^3 / 36^3``.

    With ``corrected=True`` the denominator uses ``r_{k+1}^3``, matching the
    derivative ``k^{-1/3} sigma_j / r_{k+1}`` that the potential actually has.
    """
    k = np.arange(k_lo, k_hi + 1, dtype=float)
    denom = shell_radius(k + 1) if corrected else shell_radius(k)
    return (1.0 / k) * 2.0 ** (3 * k) / denom**3 / 36.0**3


def partial_sums(k0: int, k_max: int, corrected: bool = False) -> Array:
    """``S_K`` for ``K = k0..k_max``."""
    return np.cumsum(lower_bound_terms(k0, k_max, corrected))


@dataclass
class ShellRecord:
    k: int
    derivative_coefficient: float
    coefficient_times_r_k1_k13: float
    derivative_residual: float
    trace_cubed: complex
    volume: float
    volume_normalized: float


def appendix_b_diagnostics(k_max: int = 40, samples_per_shell: int = 16, seed: int = 0) -> dict:
    """Shell derivatives, volumes and divergent lower-bound partial sums.

    The derivative on each cube region is sampled and fitted as ``a_k sigma_j``;
    ``a_k r_{k+1} k^{1/3}`` equal to 1 means the derivative carries the
    ``1/r_{k+1}`` factor from the definition of ``xi_{k,j}``.
    """
    k0 = first_volume_shell(max(k_max, 8))
    if k_max < k0:
        raise ValueError(f"k_max too small: need k_max >= {k0}")
    pot = counterexample(k_max=k_max + 1)
    pauli = np.array(clifford.PAULI)
    rng = np.random.default_rng(seed)
    records = []
    for k in range(2, k_max + 1):
        lo, hi = shell_box(k)
        rlo, rhi = shell_radial_range(k)
        pts = lo + (hi - lo) * rng.random((samples_per_shell * 8, 3))
        r = np.linalg.norm(pts, axis=-1)
        pts = pts[(r >= rlo) & (r <= rhi)][:samples_per_shell]
        if len(pts) == 0:
            records.append(ShellRecord(k, math.nan, math.nan, math.nan, complex("nan"), 0.0, 0.0))
            continue
        jac = pot.jacobian(pts)
        coef = np.einsum("pjab,jba->pj", jac, pauli).real / 2.0
        a = float(coef.mean())
        model = a * pauli
        resid = float(np.abs(jac - model).max())
        c_cubed = 0j
        for perm, sgn in clifford.signed_permutations(3):
            c_cubed += sgn * np.trace(model[perm[0]] @ model[perm[1]] @ model[perm[2]])
        vol = shell_volume(k)
        records.append(ShellRecord(k, a, a * float(shell_radius(k + 1)) * k ** (1 / 3), resid,
                                   complex(c_cubed), vol, vol * 36.0**3 / 2.0 ** (3 * k)))
    sums = partial_sums(k0, k_max)
    sums_c = partial_sums(k0, k_max, corrected=True)
    return {
        "k0": k0,
        "r": {k: float(shell_radius(k)) for k in range(2, k_max + 2)},
        "shells": records,
        "partial_sums": sums,
        "partial_sums_corrected": sums_c,
        "K": np.arange(k0, k_max + 1),
    }


def doubling_increment(K: int, k0: int, corrected: bool = False) -> float:
    """``S_{2K} - S_K``."""
    s = partial_sums(k0, 2 * K, corrected)
    return float(s[2 * K - k0] - s[K - k0])


def cutoff_properties(r1: float, r2: float, t1: float, t2: float, m: int = 2001) -> dict:
    """Sampled checks of the cutoff bounds: range, plateau, support, derivative bound."""
    s = np.linspace(r1 - (r2 - r1) * 0.25, r2 + (r2 - r1) * 0.25, m)
    v = psi_cutoff(s, r1, r2, t1, t2)
    dv = psi_cutoff_deriv(s, r1, r2, t1, t2)
    plateau = (s >= r1 + t1) & (s <= r2 - t2)
    outside = (s < r1) | (s > r2)
    d1 = smooth.STEP_DERIV_SUP
    bound = d1 * max(1.0 / t1, 1.0 / t2)
    return {
        "min": float(v.min()),
        "max": float(v.max()),
        "plateau_defect": float(np.abs(v[plateau] - 1.0).max()) if plateau.any() else 0.0,
        "outside_max": float(np.abs(v[outside]).max()) if outside.any() else 0.0,
        "deriv_max": float(np.abs(dv).max()),
        "deriv_bound": float(bound),
        "d1": float(d1),
    }


# ---------------------------------------------------------------------------
# file formats

_ALLOWED_FUNCS = {
    "sqrt": np.sqrt, "exp": np.exp, "sin": np.sin, "cos": np.cos, "tanh": np.tanh,
    "arctan": np.arctan, "log": np.log, "abs": np.abs,
}


def _compile_expr(expr: str, n: int) -> Callable[[Array], Array]:
    tree = ast.parse(expr, mode="eval")
    names = {f"x{i + 1}" for i in range(n)} | {"r", "pi"} | set(_ALLOWED_FUNCS)
    for node in ast.walk(tree):
        if isinstance(node, ast.Name) and node.id not in names:
            raise ValueError(f"unknown name {node.id!r} in expression {expr!r}")
        if isinstance(node, (ast.Attribute, ast.Subscript, ast.Lambda, ast.Dict, ast.List)):
            raise ValueError(f"unsupported syntax in expression {expr!r}")
        if isinstance(node, ast.Call) and not (isinstance(node.func, ast.Name) and node.func.id in _ALLOWED_FUNCS):
            raise ValueError(f"unsupported call in expression {expr!r}")
    code = compile(tree, "<potential>", "eval")

    def fn(x):
        env = {f"x{i + 1}": x[..., i] for i in range(n)}
        env["r"] = np.linalg.norm(x, axis=-1)
        env["pi"] = np.pi
        env.update(_ALLOWED_FUNCS)
        val = eval(code, {"__builtins__": {}}, env)
        return np.broadcast_to(np.asarray(val, dtype=complex), x.shape[:-1])

    return fn


def parse_spec_text(text: str) -> Potential:
    """Parse the key-value potential format.

    Either ``name = <builtin>`` with optional ``params = k=v, k=v``, or a matrix
    table of lines ``entry i j = <expression in x1..xn, r>`` (1-based indices).
    Optional keys: ``n``, ``d``, ``gap_c``, ``gap_R``, ``label``.
    """
    fields: dict[str, str] = {}
    entries: list[tuple[int, int, str]] = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"malformed line: {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key.startswith("entry"):
            parts = key.split()
            if len(parts) != 3:
                raise ValueError(f"malformed entry key: {key!r}")
            entries.append((int(parts[1]) - 1, int(parts[2]) - 1, val))
        else:
            fields[key] = val
    params = parse_params(fields.get("params", ""))
    if "name" in fields:
        if "n" in fields:
            params.setdefault("n", int(fields["n"]))
        p = builtin(fields["name"], **params)
    else:
        if not entries:
            raise ValueError("potential file needs a name or entry lines")
        n = int(fields.get("n", 3))
        d = int(fields.get("d", max(max(i, j) for i, j, _ in entries) + 1))
        compiled = [(i, j, _compile_expr(e, n)) for i, j, e in entries]

        def func(x):
            out = np.zeros(x.shape[:-1] + (d, d), dtype=complex)
            for i, j, fn in compiled:
                out[..., i, j] = fn(x)
            return out

        p = Potential(n=n, d=d, func=func, deriv=None, gap_radius=float(fields.get("gap_R", 0.0)),
                      gap_c=float(fields.get("gap_c", 1.0)), label=fields.get("label", "table"),
                      sign_type=fields.get("sign_type", "false").lower() == "true")
        return p
    updates = {}
    if "gap_c" in fields:
        updates["gap_c"] = float(fields["gap_c"])
    if "gap_R" in fields:
        updates["gap_radius"] = float(fields["gap_R"])
    if "label" in fields:
        updates["label"] = fields["label"]
    return replace(p, **updates) if updates else p


def parse_params(text: str) -> dict:
    out: dict = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        if "=" not in item:
            raise ValueError(f"malformed parameter {item!r}")
        k, v = (s.strip() for s in item.split("=", 1))
        try:
            out[k] = int(v)
        except ValueError:
            try:
                out[k] = float(v)
            except ValueError:
                out[k] = v
    return out


GRID_HEADER = struct.Struct("<QQQ")


def write_grid(path: str | Path, points: Array, matrices: Array) -> None:
    """Binary table: little-endian uint64 header ``n, d, count``, then per record
    ``n`` float64 coordinates followed by ``d*d`` complex entries in row-major
    order, each as a (real, imag) float64 pair."""
    points = np.asarray(points, dtype="<f8")
    matrices = np.asarray(matrices, dtype=complex)
    count, n = points.shape
    d = matrices.shape[-1]
    rec = np.empty((count, n + 2 * d * d), dtype="<f8")
    rec[:, :n] = points
    flat = matrices.reshape(count, d * d)
    rec[:, n::2] = flat.real
    rec[:, n + 1::2] = flat.imag
    with open(path, "wb") as fh:
        fh.write(GRID_HEADER.pack(n, d, count))
        fh.write(rec.tobytes())


def read_grid(path: str | Path) -> tuple[Array, Array]:
    data = Path(path).read_bytes()
    n, d, count = GRID_HEADER.unpack_from(data, 0)
    rec = np.frombuffer(data, dtype="<f8", offset=GRID_HEADER.size)
    width = n + 2 * d * d
    if rec.size != count * width:
        raise ValueError("grid file size does not match its header")
    rec = rec.reshape(count, width)
    pts = rec[:, :n].copy()
    mats = (rec[:, n::2] + 1j * rec[:, n + 1::2]).reshape(count, d, d)
    return pts, mats


def grid_potential(points: Array, matrices: Array, gap_c: float = 1.0, gap_radius: float = 0.0,
                   label: str = "grid") -> Potential:
    """Potential interpolated from scattered samples (thin plate spline per entry)."""
    from scipy.interpolate import RBFInterpolator

    points = np.asarray(points, dtype=float)
    matrices = np.asarray(matrices, dtype=complex)
    count, n = points.shape
    d = matrices.shape[-1]
    flat = matrices.reshape(count, d * d)
    values = np.concatenate([flat.real, flat.imag], axis=1)
    interp = RBFInterpolator(points, values, kernel="thin_plate_spline")

    def func(x):
        shp = x.shape[:-1]
        v = interp(x.reshape(-1, n))
        m = (v[:, : d * d] + 1j * v[:, d * d:]).reshape(shp + (d, d))
        return 0.5 * (m + np.swapaxes(m.conj(), -1, -2))

    return Potential(n=n, d=d, func=func, deriv=None, gap_radius=gap_radius, gap_c=gap_c, label=label)


def load_potential(path: str | Path) -> Potential:
    path = Path(path)
    raw = path.read_bytes()
    if raw[:1].isascii() and not path.suffix == ".bin":
        try:
            return parse_spec_text(raw.decode("utf-8"))
        except UnicodeDecodeError:
            pass
    pts, mats = read_grid(path)
    return grid_potential(pts, mats, label=path.stem)
