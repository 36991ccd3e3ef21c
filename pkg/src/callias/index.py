"""Surface-integral index formula, the density M and the invariance checks.

For a sign-type potential U on R^n (n odd) the index is

    ind = (i/8pi)^((n-1)/2) / ((n-1)/2)! * lim 1/(2 Lam)
          * sum eps_{i1..in} \\oint_{Lam S^{n-1}} tr(U d_{i1}U ... d_{i_{n-1}}U) x_{in} dsigma.

The sphere integral is evaluated with product Gauss rules and the epsilon
sum by antisymmetrized products, which visit every signed permutation once
but share common factors.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import special

from . import clifford
from .potential import Potential

PLATEAU_TOL = 1e-7


# ---------------------------------------------------------------------------
# sphere quadrature


def sphere_area(n: int) -> float:
    """Surface area of the unit sphere S^{n-1} in R^n."""
    return 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)


@dataclass(frozen=True)
class SphereRule:
    n: int
    degree: int
    nodes: np.ndarray
    weights: np.ndarray

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Integrate samples with leading axis over the nodes."""
        return np.tensordot(self.weights, values, axes=(0, 0))


def _circle_rule(degree: int):
    m = degree + 1
    phi = 2.0 * np.pi * np.arange(m) / m
    return np.stack([np.cos(phi), np.sin(phi)], axis=-1), np.full(m, 2.0 * np.pi / m)


def sphere_rule(n: int, degree: int = 31) -> SphereRule:
    """Product rule on S^{n-1}, exact for polynomials of total degree <= ``degree``.

    The last coordinate ``t`` is integrated with Gauss-Jacobi nodes for the
    weight ``(1-t^2)^{(n-3)/2}`` (Gauss-Legendre when n = 3), the remaining
    ``sqrt(1-t^2) S^{n-2}`` recursively, and the circle by the trapezoid rule.
    """
    if n < 2:
        raise ValueError("sphere rule needs n >= 2")
    if degree < 1:
        raise ValueError("degree must be positive")
    if n == 2:
        nodes, weights = _circle_rule(degree)
        return SphereRule(2, degree, nodes, weights)
    m = degree // 2 + 1
    a = (n - 3) / 2.0
    if a == 0:
        t, wt = np.polynomial.legendre.leggauss(m)
    else:
        t, wt = special.roots_jacobi(m, a, a)
    sub = sphere_rule(n - 1, degree)
    s = np.sqrt(1.0 - t * t)
    nodes = np.concatenate(
        [s[:, None, None] * sub.nodes[None, :, :], np.broadcast_to(t[:, None, None], (m, len(sub.weights), 1))],
        axis=-1,
    ).reshape(-1, n)
    weights = (wt[:, None] * sub.weights[None, :]).ravel()
    return SphereRule(n, degree, nodes, weights)


def sphere_moment(n: int, powers: Sequence[int]) -> float:
    """Closed-form integral of ``prod x_i^{a_i}`` over S^{n-1}."""
    if any(p % 2 for p in powers):
        return 0.0
    b = [(p + 1) / 2.0 for p in powers]
    return 2.0 * math.prod(math.gamma(bi) for bi in b) / math.gamma(sum(b))


# ---------------------------------------------------------------------------
# epsilon-weighted traces


def _sorted_subsets(n: int, max_size: int):
    for size in range(1, max_size + 1):
        yield from itertools.combinations(range(n), size)


def antisymmetrized_products(jac: np.ndarray, max_size: int | None = None) -> dict:
    """``A(S) = sum_{orderings of S} sign * prod d_i U`` for sorted index sets ``S``.

    ``jac`` has shape ``(..., n, d, d)``. Uses the expansion along the first
    factor, ``A(S) = sum_{p} (-1)^p d_{S[p]} U A(S without S[p])``.
    """
    n = jac.shape[-3]
    max_size = n if max_size is None else max_size
    table: dict = {}
    for subset in _sorted_subsets(n, max_size):
        if len(subset) == 1:
            table[subset] = jac[..., subset[0], :, :]
            continue
        acc = 0
        for p, i in enumerate(subset):
            rest = subset[:p] + subset[p + 1:]
            term = jac[..., i, :, :] @ table[rest]
            acc = acc + term if p % 2 == 0 else acc - term
        table[subset] = acc
    return table


def surface_density(u_vals: np.ndarray, jac: np.ndarray, x: np.ndarray) -> np.ndarray:
    """``sum eps tr(U d_{i1}U ... d_{i_{n-1}}U) x_{in}`` at each point."""
    n = jac.shape[-3]
    table = antisymmetrized_products(jac, n - 1)
    total = 0
    for k in range(n):
        rest = tuple(i for i in range(n) if i != k)
        # eps_{rest..., k} = (-1)^(n-1-k) relative to the sorted order
        sgn = -1.0 if (n - 1 - k) % 2 else 1.0
        tr = np.einsum("...ab,...ba->...", u_vals, table[rest])
        total = total + sgn * tr * x[..., k]
    return total


def surface_density_permutations(u_vals: np.ndarray, jac: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Reference route: literal loop over the n! signed permutations."""
    n = jac.shape[-3]
    total = 0
    for perm, sgn in clifford.signed_permutations(n):
        prod = u_vals
        for i in perm[:-1]:
            prod = prod @ jac[..., i, :, :]
        total = total + sgn * np.einsum("...aa->...", prod) * x[..., perm[-1]]
    return total


def m_density_from_jacobian(jac: np.ndarray) -> np.ndarray:
    n = jac.shape[-3]
    table = antisymmetrized_products(jac, n)
    return np.einsum("...aa->...", table[tuple(range(n))])


def m_density_permutations(jac: np.ndarray) -> np.ndarray:
    n = jac.shape[-3]
    total = 0
    for perm, sgn in clifford.signed_permutations(n):
        prod = jac[..., perm[0], :, :]
        for i in perm[1:]:
            prod = prod @ jac[..., i, :, :]
        total = total + sgn * np.einsum("...aa->...", prod)
    return total


def surface_integrand(u: Potential, x) -> complex | np.ndarray:
    """Epsilon-weighted trace integrand at point(s) ``x``."""
    x = np.asarray(x, dtype=float)
    vals = u.eval(x)
    jac = u.jacobian(x)
    out = surface_density(vals, jac, x)
    return complex(out) if np.ndim(out) == 0 else out


def m_density(u: Potential, x) -> complex | np.ndarray:
    """``M_U(x) = sum eps tr(d_{i1}U ... d_{in}U)``."""
    x = np.asarray(x, dtype=float)
    out = m_density_from_jacobian(u.jacobian(x))
    return complex(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# index


def prefactor(n: int) -> complex:
    """``(i/8pi)^{(n-1)/2} / ((n-1)/2)!``, used together with ``1/(2 Lam)``."""
    if n % 2 == 0:
        raise ValueError("the index formula is for odd n")
    h = (n - 1) // 2
    return (1j / (8 * math.pi)) ** h / math.factorial(h)


def c_n(n: int) -> complex:
    """``c_n = (1/2)(i/8pi)^{(n-1)/2}/((n-1)/2)!``, used together with ``1/Lam``."""
    return 0.5 * prefactor(n)


@dataclass
class IndexResult:
    per_radius: list
    extrapolated: complex
    index_real: float
    imag_residual: float
    integer_distance: float
    c_n: complex
    converged: bool
    method: str
    label: str = ""
    notes: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "label": self.label,
            "per_radius": [(float(r), complex(v)) for r, v in self.per_radius],
            "extrapolated": complex(self.extrapolated),
            "index_real": self.index_real,
            "imag_residual": self.imag_residual,
            "integer_distance": self.integer_distance,
            "c_n": complex(self.c_n),
            "converged": self.converged,
            "method": self.method,
            "notes": list(self.notes),
        }


def default_radii(u: Potential) -> list[float]:
    base = u.gap_radius + 1.0
    return [base, 2 * base, 4 * base, 8 * base]


def surface_value(u: Potential, radius: float, rule: SphereRule) -> complex:
    """``prefactor/(2 Lam) * sphere integral`` at a single radius."""
    pts = radius * rule.nodes
    dens = surface_density(u.eval(pts), u.jacobian(pts), pts)
    integral = complex(rule.integrate(dens)) * radius ** (u.n - 1)
    return prefactor(u.n) / (2.0 * radius) * integral


def _extrapolate(radii: np.ndarray, values: np.ndarray, plateau_tol: float):
    for i in range(len(values) - 2):
        window = values[i:i + 3]
        if np.abs(window - window[-1]).max() <= plateau_tol:
            return values[-1], "plateau", True
    if len(values) < 3:
        return values[-1], "last", False
    # Richardson in 1/Lam with a quadratic model through the last three radii
    inv = 1.0 / radii[-3:]
    vand = np.vander(inv, 3, increasing=True)
    coef = np.linalg.solve(vand.astype(complex), values[-3:])
    return coef[0], "richardson", False


def callias_index(u: Potential, radii: Sequence[float] | None = None, rule: SphereRule | None = None,
                  plateau_tol: float = PLATEAU_TOL, tol: float = 1e-5) -> IndexResult:
    """Evaluate the surface formula on a schedule of radii and extrapolate.

    A plateau (three consecutive radii within ``plateau_tol``) gives a converged
    result; otherwise Richardson extrapolation in ``1/Lam`` is reported with
    ``converged`` set only if the extrapolant is within ``tol`` of an integer.
    """
    if u.n % 2 == 0:
        raise ValueError("index formula requires odd n")
    radii = default_radii(u) if radii is None else list(radii)
    if not radii:
        raise ValueError("radius schedule is empty")
    if min(radii) < u.gap_radius:
        raise ValueError(f"radii must be >= gap radius {u.gap_radius}")
    rule = sphere_rule(u.n) if rule is None else rule
    if rule.n != u.n:
        raise ValueError("sphere rule dimension mismatch")
    vals = np.array([surface_value(u, r, rule) for r in radii])
    ext, method, ok = _extrapolate(np.asarray(radii, float), vals, plateau_tol)
    real = float(ext.real)
    dist = abs(real - round(real))
    notes = []
    if not ok:
        ok = method == "richardson" and dist < tol
        if not ok:
            notes.append("non-convergent limit")
    if u.null_block:
        notes.append("generalized Witten (non-Fredholm embedding)")
    return IndexResult(
        per_radius=list(zip(radii, vals)),
        extrapolated=complex(ext),
        index_real=real,
        imag_residual=float(abs(ext.imag)),
        integer_distance=float(dist),
        c_n=c_n(u.n),
        converged=bool(ok),
        method=method,
        label=u.label,
        notes=notes,
    )


def volume_index(u: Potential, radius: float, rule: SphereRule | None = None,
                 radial_nodes: int = 48, breaks: Sequence[float] | None = None) -> complex:
    """``c_n * int_{B(0,radius)} M_U`` by Gauss-Legendre shells times the sphere rule.

    ``breaks`` splits the radial interval where ``M_U`` is not smooth.
    """
    rule = sphere_rule(u.n) if rule is None else rule
    edges = sorted({0.0, float(radius), *[b for b in (breaks or []) if 0 < b < radius]})
    g, w = np.polynomial.legendre.leggauss(radial_nodes)
    total = 0j
    for a, b in zip(edges[:-1], edges[1:]):
        rs = 0.5 * (b - a) * (g + 1) + a
        ws = 0.5 * (b - a) * w
        pts = rs[:, None, None] * rule.nodes[None, :, :]
        dens = m_density_from_jacobian(u.jacobian(pts))
        shell = dens @ rule.weights
        total += complex(np.sum(ws * rs ** (u.n - 1) * shell))
    return c_n(u.n) * total


def chain_rule_check(u: Potential, t: Callable, jac: Callable, samples, method: str = "fd") -> float:
    """Max over samples of ``|M_{U o T}(x) - M_U(T(x)) det T'(x)|``.

    With ``method='fd'`` the left side differentiates the composite numerically,
    independently of the chain rule.
    """
    x = np.asarray(samples, dtype=float)
    comp = u.compose(t, jac, label=f"{u.label}oT")
    if method == "fd":
        jl = np.stack([comp.fd_derivative(x, j) for j in range(u.n)], axis=-3)
    else:
        jl = comp.jacobian(x)
    lhs = m_density_from_jacobian(jl)
    rhs = m_density_from_jacobian(u.jacobian(t(x))) * np.linalg.det(jac(x))
    return float(np.abs(lhs - rhs).max())


def inversion_map(x):
    r2 = np.sum(x * x, axis=-1, keepdims=True)
    return x / r2


def inversion_jacobian(x):
    r2 = np.sum(x * x, axis=-1)
    eye = np.eye(x.shape[-1])
    outer = x[..., :, None] * x[..., None, :]
    return eye / r2[..., None, None] - 2.0 * outer / (r2**2)[..., None, None]


@dataclass
class InvarianceResult:
    index_original: float
    index_transformed_signed: float
    difference: float
    orientation: int


def invariance_check(u: Potential, m: np.ndarray, rule: SphereRule | None = None) -> InvarianceResult:
    """Compare ``ind(U)`` with ``sgn(det M) ind(U o M)`` for an invertible linear ``M``."""
    m = np.asarray(m, dtype=float)
    det = float(np.linalg.det(m))
    if abs(det) < 1e-12:
        raise ValueError("transformation must be invertible")
    sgn = 1 if det > 0 else -1
    a = callias_index(u, rule=rule)
    b = callias_index(u.linear_map(m), rule=rule)
    return InvarianceResult(a.index_real, sgn * b.index_real, abs(a.index_real - sgn * b.index_real), sgn)


def scaling_check(u: Potential, t_scale: float, radii: Sequence[float] | None = None,
                  rule: SphereRule | None = None) -> float:
    """``|ind(U) - ind(U(t x))|``; each side uses radii beyond its own gap radius."""
    if t_scale <= 0:
        raise ValueError("scale must be positive")
    a = callias_index(u, radii=radii, rule=rule)
    scaled = u.scaled(t_scale)
    sradii = None if radii is None else [r / t_scale for r in radii]
    b = callias_index(scaled, radii=sradii, rule=rule)
    return abs(a.index_real - b.index_real)


def reflection(n: int, axis: int = 0) -> np.ndarray:
    m = np.eye(n)
    m[axis, axis] = -1.0
    return m


def rotation(n: int, angles: Sequence[float] | None = None, seed: int = 0) -> np.ndarray:
    """A proper rotation from a QR factorization (or given Euler-like planar angles)."""
    if angles is not None:
        m = np.eye(n)
        for k, a in enumerate(angles):
            i, j = k % n, (k + 1) % n
            g = np.eye(n)
            g[i, i] = g[j, j] = math.cos(a)
            g[i, j], g[j, i] = -math.sin(a), math.sin(a)
            m = g @ m
        return m
    q, r = np.linalg.qr(np.random.default_rng(seed).standard_normal((n, n)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


# ---------------------------------------------------------------------------
# output


def format_text(res: IndexResult) -> str:
    lines = [f"potential: {res.label}"]
    for r, v in res.per_radius:
        lines.append(f"radius {r:.6g}: {v.real:+.12f} {v.imag:+.3e}i")
    lines.append(f"method: {res.method}")
    lines.append(f"index: {res.index_real:+.12f}")
    lines.append(f"imag_residual: {res.imag_residual:.3e}")
    lines.append(f"integer_distance: {res.integer_distance:.3e}")
    lines.append(f"converged: {res.converged}")
    for note in res.notes:
        lines.append(f"note: {note}")
    return "\n".join(lines) + "\n"


def format_csv(res: IndexResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["radius", "re", "im"])
    for r, v in res.per_radius:
        w.writerow([repr(float(r)), repr(float(v.real)), repr(float(v.imag))])
    return buf.getvalue()
