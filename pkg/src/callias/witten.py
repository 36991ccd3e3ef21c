"""Resolvent identities on finite matrices and a lattice version of Witten's regularized index.

The lattice operator is ``L = Q + Phi`` on a periodic grid, with ``Q = sum gamma_j D_j``
and ``D_j`` the Fourier-symbol derivative. The regularized trace over a ball of
radius ``Lam`` is

    z * sum_{|x| <= Lam} tr[(L*L + z)^{-1}(x, x) - (LL* + z)^{-1}(x, x)],

which approximates ``ind(L) (1 + z)^{-n/2}`` for the hedgehog.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import fft as sfft
from scipy.spatial.transform import Rotation

from . import clifford
from .potential import Potential
from .smooth import step

DENSE_LIMIT = 4096
SOLVER_TOL = 1e-8


class SolverError(RuntimeError):
    """Iterative solve did not reach the requested tolerance."""


# ---------------------------------------------------------------------------
# internal trace and finite-matrix identities


def internal_trace(a: np.ndarray, m: int) -> np.ndarray:
    """Partial trace over the outer ``m``-fold block index of an ``(mN) x (mN)`` matrix."""
    a = np.asarray(a)
    size = a.shape[0]
    if a.shape != (size, size) or size % m:
        raise ValueError(f"matrix of shape {a.shape} has no {m}-fold block structure")
    nb = size // m
    return np.einsum("iaib->ab", a.reshape(m, nb, m, nb))


def scalar_block(b: np.ndarray, base: int) -> np.ndarray:
    """``b (x) I_base``: a matrix acting only on the block index."""
    return np.kron(np.asarray(b), np.eye(base))


def random_complex(rng, *shape) -> np.ndarray:
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def witten_regularization(l: np.ndarray, z: complex, m: int) -> np.ndarray:
    """``z tr_m((L*L + z)^{-1} - (LL* + z)^{-1})``."""
    eye = np.eye(l.shape[0])
    ls = l.conj().T
    return z * internal_trace(np.linalg.inv(ls @ l + z * eye) - np.linalg.inv(l @ ls + z * eye), m)


def _solve_checked(a: np.ndarray, b: np.ndarray, cond_limit: float = 1e12) -> np.ndarray:
    cond = np.linalg.cond(a)
    if not np.isfinite(cond) or cond > cond_limit:
        raise np.linalg.LinAlgError(f"ill-conditioned solve (condition number {cond:.3e})")
    return np.linalg.solve(a, b)


def check_witten_identity(l: np.ndarray, z: complex, m: int = 4) -> float:
    """Residual of ``2 B_L(z) = tr_m[L, L*(LL*+z)^{-1}] - tr_m[L*, L(L*L+z)^{-1}]``."""
    l = np.asarray(l, dtype=complex)
    eye = np.eye(l.shape[0])
    ls = l.conj().T
    inv_a = _solve_checked(ls @ l + z * eye, eye)
    inv_b = _solve_checked(l @ ls + z * eye, eye)
    lhs = 2 * z * internal_trace(inv_a - inv_b, m)
    x = ls @ inv_b
    y = l @ inv_a
    rhs = internal_trace(l @ x - x @ l, m) - internal_trace(ls @ y - y @ ls, m)
    return float(np.abs(lhs - rhs).max())


def check_internal_trace_cyclicity(a: np.ndarray, b: np.ndarray, m: int) -> float:
    """``max |tr_m(AB) - tr_m(BA)|``; ``b`` is either ``m x m`` (scalar entries) or a full block matrix."""
    a = np.asarray(a)
    b = np.asarray(b)
    if b.shape == (m, m):
        b = scalar_block(b, a.shape[0] // m)
    return float(np.abs(internal_trace(a @ b, m) - internal_trace(b @ a, m)).max())


def cyclicity_counterexample(m: int = 3, base: int = 5, seed: int = 0) -> float:
    """Residual for a block operator ``B`` with non-scalar entries; generically far from zero."""
    rng = np.random.default_rng(seed)
    a = random_complex(rng, m * base, m * base)
    b = random_complex(rng, m * base, m * base)
    return check_internal_trace_cyclicity(a, b, m)


# ---------------------------------------------------------------------------
# Neumann expansion of the resolvent difference on a toy lattice


def spectral_derivative(npts: int, spacing: float = 1.0, nyquist: str = "keep") -> np.ndarray:
    """Dense Fourier-symbol derivative on a periodic grid.

    ``nyquist='zero'`` drops the Nyquist symbol of an even grid, which makes the
    matrix exactly odd under reflection but removes the index signal on the
    lattice (the mode then behaves like a doubler); it is kept for comparison.
    """
    k = fourier_symbol(npts, spacing, nyquist)
    f = np.fft.fft(np.eye(npts), axis=0)
    return np.fft.ifft(1j * k[:, None] * f, axis=0)


def fourier_symbol(npts: int, spacing: float, nyquist: str = "keep") -> np.ndarray:
    k = 2 * np.pi * np.fft.fftfreq(npts, d=spacing)
    if nyquist == "zero" and npts % 2 == 0:
        k[npts // 2] = 0.0
    elif nyquist not in ("keep", "zero"):
        raise ValueError(f"unknown nyquist mode {nyquist!r}")
    return k


@dataclass
class ToyLattice:
    """Dense 1D lattice operator ``L = D (x) I_d + Phi`` with pointwise unitary ``Phi``."""

    d_matrix: np.ndarray
    phi: np.ndarray
    d: int

    @property
    def q(self) -> np.ndarray:
        return np.kron(self.d_matrix, np.eye(self.d))

    @property
    def l(self) -> np.ndarray:
        return self.q + self.phi

    @property
    def commutator(self) -> np.ndarray:
        q = self.q
        return q @ self.phi - self.phi @ q

    @property
    def laplacian(self) -> np.ndarray:
        q = self.q
        return q @ q


def toy_lattice(npts: int = 16, length: float = 2 * np.pi, angle=None, seed: int = 0) -> ToyLattice:
    """Periodic 1D lattice with ``Phi(x) = cos(t) sigma3 + sin(t) sigma1``, ``t`` a smooth angle profile."""
    h = length / npts
    x = h * np.arange(npts)
    if angle is None:
        rng = np.random.default_rng(seed)
        c = rng.standard_normal(3)
        angle = c[0] + c[1] * np.sin(2 * np.pi * x / length) + c[2] * np.cos(4 * np.pi * x / length)
    else:
        angle = np.broadcast_to(np.asarray(angle, float), x.shape)
    s1, _, s3 = clifford.PAULI
    blocks = np.cos(angle)[:, None, None] * s3 + np.sin(angle)[:, None, None] * s1
    phi = np.zeros((2 * npts, 2 * npts), complex)
    for i, blk in enumerate(blocks):
        phi[2 * i:2 * i + 2, 2 * i:2 * i + 2] = blk
    return ToyLattice(spectral_derivative(npts, h), phi, 2)


@dataclass
class NeumannCheck:
    remainder_residual: float
    alternate_residual: float
    sum_residual: float
    spectral_radius: float
    series_residual: float | None


def check_neumann_expansion(lat: ToyLattice, z: complex, n_terms: int) -> NeumannCheck:
    """Verify the finite Neumann expansion of the resolvent difference in exact remainder form.

    With ``R = (-Delta_h + 1 + z)^{-1}`` and ``C = [Q_h, Phi_h]``, both
    ``(A - B) (CR)^{2N+2}`` and ``(A + B)(CR)^{2N+3}`` remainders are checked,
    where ``A = (L*L + z)^{-1}`` and ``B = (LL* + z)^{-1}``. When the spectral
    radius of ``CR`` is below one the truncated series is also compared.
    """
    l = lat.l
    dim = l.shape[0]
    eye = np.eye(dim)
    ls = l.conj().T
    a = _solve_checked(ls @ l + z * eye, eye)
    b = _solve_checked(l @ ls + z * eye, eye)
    r = _solve_checked(-lat.laplacian + (1 + z) * eye, eye)
    c = lat.commutator
    cr = c @ r
    odd = np.zeros_like(a)
    even = np.zeros_like(a)
    power = eye.astype(complex)
    for k in range(n_terms + 1):
        even = even + r @ power
        power = power @ cr
        odd = odd + r @ power
        power = power @ cr
    # power is now (CR)^{2N+2}
    diff = a - b
    scale = max(1.0, np.abs(diff).max())
    res1 = np.abs(diff - (2 * odd + diff @ power)).max() / scale
    res2 = np.abs(diff - (2 * odd + (a + b) @ power @ cr)).max() / scale
    res3 = np.abs((a + b) - (2 * even + (a + b) @ power)).max() / scale
    rho = float(np.abs(np.linalg.eigvals(cr)).max())
    series = None
    if rho < 1:
        series = float(np.abs(diff - 2 * odd).max() / scale)
    return NeumannCheck(float(res1), float(res2), float(res3), rho, series)


# ---------------------------------------------------------------------------
# commutator of the free resolvent with a multiplication operator


@dataclass
class CommutatorCheck:
    n: int
    modes: int
    printed_residual: float
    symmetrized_residual: float
    scalar_residual: float


def resolvent_commutator_check(n: int = 1, modes: int = 32, mu: float = 1.3, bandwidth: int = 2,
                               seed: int = 0) -> CommutatorCheck:
    """Compare ``[R_mu, Psi]`` with closed forms on a Fourier-Galerkin lattice.

    Multiplication by a trigonometric polynomial ``Psi`` is the Toeplitz matrix
    of its coefficients and derivatives are diagonal, so the product rule is
    exact. Three right-hand sides are reported (relative residuals):

    * ``printed``: ``R (Q^2 Psi) R + 2 R (Q Psi) Q R``
    * ``symmetrized``: ``R ((Q Psi) Q + Q (Q Psi)) R``
    * ``scalar``: ``R (Delta Psi) R + 2 R (grad Psi . grad) R``

    The last two hold in every dimension; the first only for ``n = 1``,
    where ``(Q Psi) Q = Psi' d/dx``.
    """
    rng = np.random.default_rng(seed)
    lo = -(modes // 2)
    axis_modes = np.arange(lo, lo + modes)
    ks = np.array(list(itertools.product(axis_modes, repeat=n)))
    coeff = {}
    for m in itertools.product(range(-bandwidth, bandwidth + 1), repeat=n):
        coeff[m] = complex(rng.standard_normal(), rng.standard_normal())
    for m in list(coeff):
        mm = tuple(-v for v in m)
        if m == mm:
            coeff[m] = complex(coeff[m].real)
        else:
            coeff[mm] = np.conj(coeff[m])
    diff = ks[:, None, :] - ks[None, :, :]

    def toeplitz(weight):
        out = np.zeros((len(ks), len(ks)), complex)
        for m, c in coeff.items():
            mask = np.all(diff == np.array(m), axis=-1)
            out[mask] = weight(np.array(m)) * c
        return out

    if n == 1:
        gammas = [np.eye(1)]
    else:
        gammas = list(clifford.build_algebra(n).gammas)
    spin = gammas[0].shape[0]
    ispin = np.eye(spin)
    dmats = [np.diag(1j * ks[:, j]) for j in range(n)]
    q = sum(np.kron(g, dj) for g, dj in zip(gammas, dmats))
    lap = sum(dj @ dj for dj in dmats)
    r = np.kron(ispin, np.linalg.inv(-lap + mu * np.eye(len(ks))))
    psi = np.kron(ispin, toeplitz(lambda m: 1.0))
    dpsi = [toeplitz(lambda m, j=j: 1j * m[j]) for j in range(n)]
    q_psi = sum(np.kron(g, dp) for g, dp in zip(gammas, dpsi))
    q2_psi = np.kron(ispin, toeplitz(lambda m: -float(m @ m)))
    lhs = r @ psi - psi @ r
    norm = np.linalg.norm(lhs)
    printed = r @ q2_psi @ r + 2 * r @ q_psi @ q @ r
    sym = r @ (q_psi @ q + q @ q_psi) @ r
    grad = sum(np.kron(ispin, dp @ dj) for dp, dj in zip(dpsi, dmats))
    scal = r @ q2_psi @ r + 2 * r @ grad @ r
    return CommutatorCheck(n, modes, float(np.linalg.norm(lhs - printed) / norm),
                           float(np.linalg.norm(lhs - sym) / norm), float(np.linalg.norm(lhs - scal) / norm))


# ---------------------------------------------------------------------------
# trace-one family with vanishing norm


def vogt_counterexample(z: complex, n_modes: int) -> tuple[complex, float]:
    """Diagonal operator ``phi_k -> z exp(-(k-1) z) phi_k``: its trace and operator norm.

    The trace tends to one as ``z -> 0`` while the norm ``|z|`` vanishes.
    """
    z = complex(z)
    if z.real <= 0:
        raise ValueError("need Re z > 0")
    k = np.arange(n_modes)
    vals = z * np.exp(-k * z)
    trace = complex(np.sum(vals))
    norm = float(np.abs(vals).max())
    return (trace.real if z.imag == 0 else trace), norm


def vogt_closed_form(z: complex, n_modes: int) -> complex:
    z = complex(z)
    return z * np.exp(z) / np.expm1(z) * -np.expm1(-n_modes * z)


# ---------------------------------------------------------------------------
# periodic lattice


def periodic_fold(x, half_width: float, start: float = 0.9):
    """Smooth odd ``2a``-periodic map equal to ``x`` for ``|x| <= start*a``.

    Blends ``x`` into ``(a/pi) sin(pi x / a)``, which vanishes on the faces.
    """
    x = np.asarray(x, dtype=float)
    a = half_width
    b = step((np.abs(x) - start * a) / ((1 - start) * a))
    return (1 - b) * x + b * (a / np.pi) * np.sin(np.pi * x / a)


@dataclass
class LatticeOperator:
    n: int
    half_width: float
    npts: int
    d: int
    gammas: np.ndarray
    phi: np.ndarray
    label: str = ""
    nyquist: str = "keep"
    null_block: bool = False

    @property
    def spacing(self) -> float:
        return 2 * self.half_width / self.npts

    @property
    def coords(self) -> np.ndarray:
        h = self.spacing
        return -self.half_width + h * (np.arange(self.npts) + 0.5)

    @property
    def spin(self) -> int:
        return self.gammas.shape[-1]

    @property
    def components(self) -> int:
        return self.spin * self.d

    @property
    def dimension(self) -> int:
        return self.npts**self.n * self.components

    @property
    def grid_shape(self) -> tuple:
        return (self.npts,) * self.n

    def points(self) -> np.ndarray:
        x = self.coords
        return np.stack(np.meshgrid(*([x] * self.n), indexing="ij"), axis=-1)

    def symbol(self) -> np.ndarray:
        """``Q`` in Fourier space: ``sum_j gamma_j i k_j``, shape ``grid + (spin, spin)``."""
        k = fourier_symbol(self.npts, self.spacing, self.nyquist)
        grids = np.meshgrid(*([k] * self.n), indexing="ij")
        return sum(1j * g[..., None, None] * gam for g, gam in zip(grids, self.gammas))

    def laplace_symbol(self) -> np.ndarray:
        k = fourier_symbol(self.npts, self.spacing, self.nyquist)
        grids = np.meshgrid(*([k] * self.n), indexing="ij")
        return sum(g * g for g in grids)

    def is_constant(self) -> bool:
        flat = self.phi.reshape(-1, self.d, self.d)
        return bool(np.all(flat == flat[0]))

    # dense matrices, for small grids

    def dense_q(self) -> np.ndarray:
        dmat = spectral_derivative(self.npts, self.spacing, self.nyquist)
        eye = np.eye(self.npts)
        q = 0
        for j, gam in enumerate(self.gammas):
            factors = [dmat if a == j else eye for a in range(self.n)]
            full = factors[0]
            for f in factors[1:]:
                full = np.kron(full, f)
            q = q + np.kron(full, np.kron(gam, np.eye(self.d)))
        return q

    def dense_phi(self) -> np.ndarray:
        sites = self.phi.reshape(-1, self.d, self.d)
        blocks = np.einsum("st,xab->xsatb", np.eye(self.spin), sites).reshape(len(sites), self.components, self.components)
        out = np.zeros((self.dimension, self.dimension), complex)
        c = self.components
        for i, blk in enumerate(blocks):
            out[i * c:(i + 1) * c, i * c:(i + 1) * c] = blk
        return out

    def dense_l(self) -> np.ndarray:
        return self.dense_q() + self.dense_phi()


def build_lattice(p: Potential, npts: int, half_width: float, nyquist: str = "keep",
                  wrap: bool = True) -> LatticeOperator:
    """Sample ``p`` on a cell-centred periodic grid, folding coordinates near the faces."""
    if p.n not in (2, 3):
        raise ValueError("lattice path supports n = 2 and n = 3")
    gam = clifford.build_algebra(p.n).stacked()
    h = 2 * half_width / npts
    x = -half_width + h * (np.arange(npts) + 0.5)
    pts = np.stack(np.meshgrid(*([x] * p.n), indexing="ij"), axis=-1)
    if wrap:
        pts = periodic_fold(pts, half_width)
    phi = np.asarray(p.eval(pts), dtype=complex)
    herm = np.abs(phi - np.swapaxes(phi.conj(), -1, -2)).max()
    if herm > 1e-12:
        raise ValueError(f"potential is not pointwise Hermitian (deviation {herm:.3e})")
    return LatticeOperator(p.n, half_width, npts, p.d, gam, phi, p.label, nyquist, p.null_block)


# ---------------------------------------------------------------------------
# operator application in Fourier space


class _FourierOperators:
    def __init__(self, lat: LatticeOperator, workers: int | None = None):
        self.lat = lat
        self.axes = tuple(range(lat.n))
        self.qsym = lat.symbol()
        self.k2 = lat.laplace_symbol()
        self.workers = workers

    def fft(self, a):
        return sfft.fftn(a, axes=self.axes, workers=self.workers)

    def ifft(self, a):
        return sfft.ifftn(a, axes=self.axes, workers=self.workers)

    def qhat(self, vhat):
        # arrays are grid + (spin, d, batch)
        return np.einsum("...st,...tab->...sab", self.qsym, vhat)

    def phi(self, v):
        return np.einsum("...ac,...scb->...sab", self.lat.phi, v)

    def normal(self, vhat, z, which: str):
        """``(L*L + z)`` (``which='A'``) or ``(LL* + z)`` (``'B'``) in Fourier coordinates."""
        sgn = 1.0 if which == "A" else -1.0
        v = self.ifft(vhat)
        w = sgn * self.ifft(self.qhat(vhat)) + self.phi(v)
        what = self.fft(w)
        return -sgn * self.qhat(what) + self.fft(self.phi(w)) + z * vhat

    def precondition(self, rhat, z):
        return rhat / (self.k2 + 1.0 + z)[..., None, None, None]


def block_pcg(apply, precond, b, tol: float = SOLVER_TOL, maxiter: int = 2000):
    """Preconditioned CG for several right-hand sides (last axis) at once."""
    axes = tuple(range(b.ndim - 1))
    x = np.zeros_like(b)
    r = b.copy()
    zr = precond(r)
    p = zr.copy()
    rz = np.sum(np.conj(r) * zr, axis=axes)
    bnorm = np.sqrt(np.sum(np.abs(b) ** 2, axis=axes))
    for it in range(1, maxiter + 1):
        ap = apply(p)
        alpha = rz / np.sum(np.conj(p) * ap, axis=axes)
        x += alpha * p
        r -= alpha * ap
        rnorm = np.sqrt(np.sum(np.abs(r) ** 2, axis=axes))
        if np.all(rnorm <= tol * bnorm):
            return x, it
        zr = precond(r)
        rz_new = np.sum(np.conj(r) * zr, axis=axes)
        p = zr + (rz_new / rz) * p
        rz = rz_new
    raise SolverError(f"PCG did not converge in {maxiter} iterations (residual {float((rnorm / bnorm).max()):.3e})")


# ---------------------------------------------------------------------------
# cube symmetry


def _su2_lift(rot: np.ndarray) -> np.ndarray:
    """``S`` with ``S sigma_j S* = sum_k rot[k, j] sigma_k``."""
    vec = Rotation.from_matrix(rot).as_rotvec()
    theta = np.linalg.norm(vec)
    if theta < 1e-14:
        return np.eye(2, dtype=complex)
    axis = vec / theta
    nsig = sum(a * s for a, s in zip(axis, clifford.PAULI))
    s = math.cos(theta / 2) * np.eye(2) - 1j * math.sin(theta / 2) * nsig
    sig = clifford.PAULI
    target = [sum(rot[k, j] * sig[k] for k in range(3)) for j in range(3)]
    if max(np.abs(s @ sig[j] @ s.conj().T - target[j]).max() for j in range(3)) > 1e-12:
        s = s.conj().T
    return s


def cube_rotations() -> list[tuple[np.ndarray, np.ndarray]]:
    """The 24 proper rotations of the cube with their SU(2) lifts."""
    out = []
    for perm in itertools.permutations(range(3)):
        for signs in itertools.product((1, -1), repeat=3):
            m = np.zeros((3, 3))
            for i, (p, s) in enumerate(zip(perm, signs)):
                m[i, p] = s
            if np.linalg.det(m) > 0:
                out.append((m, _su2_lift(m)))
    return out


def _site_image(rot: np.ndarray, idx: np.ndarray, npts: int) -> np.ndarray:
    """Index of ``rot @ x`` for cell-centred indices (x_i = i - (N-1)/2 in grid units)."""
    centred = 2 * idx - (npts - 1)
    img = centred @ rot.T
    return ((img + (npts - 1)) // 2).astype(int)


def symmetry_group(lat: LatticeOperator) -> list[tuple[np.ndarray, np.ndarray]]:
    """Cube rotations under which the discretized ``Q`` is exactly covariant.

    Coordinate permutations always commute with the Fourier derivative. Sign
    flips only do when there is no Nyquist mode (odd N) or its symbol is dropped.
    """
    if lat.n != 3 or lat.d != 2 or lat.spin != 2:
        return []
    if np.abs(lat.gammas - np.stack(clifford.PAULI)).max() > 0:
        return []
    rots = cube_rotations()
    if lat.npts % 2 == 0 and lat.nyquist != "zero":
        rots = [(r, s) for r, s in rots if np.all(r >= 0)]
    return rots


def symmetry_defect(lat: LatticeOperator, group=None) -> float:
    """Max deviation of ``Phi(R x) = S Phi(x) S*`` over ``group`` (inf if no group applies)."""
    group = symmetry_group(lat) if group is None else group
    if len(group) <= 1:
        return np.inf
    idx = np.stack(np.meshgrid(*([np.arange(lat.npts)] * 3), indexing="ij"), axis=-1).reshape(-1, 3)
    phi = lat.phi.reshape(-1, 2, 2)
    worst = 0.0
    for rot, s in group:
        img = _site_image(rot, idx, lat.npts)
        flat = np.ravel_multi_index(img.T, lat.grid_shape)
        worst = max(worst, float(np.abs(phi[flat] - s @ phi @ s.conj().T).max()))
    return worst


def site_orbits(sites: np.ndarray, npts: int, group=None) -> list[tuple[tuple, int]]:
    """Orbit representatives among ``sites`` with orbit sizes."""
    rots = [r for r, _ in (cube_rotations() if group is None else group)]
    seen = set()
    out = []
    for s in map(tuple, sites):
        if s in seen:
            continue
        orbit = {tuple(_site_image(r, np.array(s), npts)) for r in rots}
        seen |= orbit
        out.append((s, len(orbit)))
    return out


# ---------------------------------------------------------------------------
# windowed regularized trace


@dataclass
class WittenTraceResult:
    label: str
    n: int
    npts: int
    half_width: float
    nyquist: str
    method: str
    values: list  # (Lam, z, complex trace)
    f_curve: dict  # z -> (value at largest Lam, spread over the last two Lam)
    index_estimate: float
    index_spread: float
    index_interchanged: float | None
    iterations: int
    notes: list = field(default_factory=list)

    def value(self, lam: float, z: complex) -> complex:
        for l, zz, v in self.values:
            if abs(l - lam) < 1e-12 and abs(zz - z) < 1e-12:
                return v
        raise KeyError((lam, z))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["Lam", "z", "re_trace", "im_trace"])
        for lam, z, v in self.values:
            w.writerow([repr(float(lam)), repr(complex(z).real), repr(float(v.real)), repr(float(v.imag))])
        return buf.getvalue()


# Odd grids have no Nyquist mode, so the whole cube group acts exactly and
# only orbit representatives are solved for; even grids use the 3-cycles.
LEVELS = {
    0: {"npts": 12, "half_width": 6.0, "radii": (1.5, 2.0, 3.0)},
    1: {"npts": 16, "half_width": 8.0, "radii": (2.0, 3.0, 4.0)},
    2: {"npts": 25, "half_width": 25.0 / 3.0, "radii": (2.0, 3.0, 4.0)},
    3: {"npts": 33, "half_width": 8.25, "radii": (2.0, 3.0, 4.0)},
}


def lattice_for_level(p: Potential, level: int, nyquist: str = "keep") -> tuple[LatticeOperator, tuple]:
    if level not in LEVELS:
        raise ValueError(f"unknown level {level}; expected one of {sorted(LEVELS)}")
    cfg = LEVELS[level]
    return build_lattice(p, cfg["npts"], cfg["half_width"], nyquist), cfg["radii"]


def _window(lat: LatticeOperator, lam_max: float):
    pts = lat.points()
    r = np.linalg.norm(pts, axis=-1)
    sites = np.argwhere(r <= lam_max + 1e-12)
    return sites, r[tuple(sites.T)]


def _site_traces_dense(lat: LatticeOperator, sites: np.ndarray, zs) -> np.ndarray:
    l = lat.dense_l()
    ls = l.conj().T
    a = ls @ l
    b = l @ ls
    c = lat.components
    flat = np.ravel_multi_index(sites.T, lat.grid_shape)
    cols = (flat[:, None] * c + np.arange(c)[None, :]).ravel()
    eye = np.eye(lat.dimension)
    out = np.zeros((len(zs), len(sites)), complex)
    for iz, z in enumerate(zs):
        xa = np.linalg.solve(a + z * eye, eye[:, cols])
        xb = np.linalg.solve(b + z * eye, eye[:, cols])
        diag = xa[cols, np.arange(len(cols))] - xb[cols, np.arange(len(cols))]
        out[iz] = diag.reshape(len(sites), c).sum(axis=1)
    return out


def _site_traces_iterative(lat: LatticeOperator, sites: np.ndarray, zs, batch: int, tol: float,
                           workers: int | None) -> tuple[np.ndarray, int]:
    ops = _FourierOperators(lat, workers)
    shape = lat.grid_shape + (lat.spin, lat.d)
    cols = [(tuple(s), sp, ia) for s in sites for sp in range(lat.spin) for ia in range(lat.d)]
    out = np.zeros((len(zs), len(sites)), complex)
    iters = 0
    per_site = lat.components
    for iz, z in enumerate(zs):
        diag = np.zeros(len(cols), complex)
        for start in range(0, len(cols), batch):
            chunk = cols[start:start + batch]
            rhs = np.zeros(shape + (len(chunk),), complex)
            for c, (s, sp, ia) in enumerate(chunk):
                rhs[s + (sp, ia, c)] = 1.0
            bhat = ops.fft(rhs)
            vals = []
            for which in ("A", "B"):
                xhat, it = block_pcg(lambda v: ops.normal(v, z, which), lambda v: ops.precondition(v, z), bhat, tol)
                iters += it
                x = ops.ifft(xhat)
                vals.append(np.array([x[s + (sp, ia, c)] for c, (s, sp, ia) in enumerate(chunk)]))
            diag[start:start + len(chunk)] = vals[0] - vals[1]
        out[iz] = diag.reshape(len(sites), per_site).sum(axis=1)
    return out, iters


def _fit_zero(zs, vals) -> float:
    zs = np.asarray(zs, float)
    vals = np.asarray(vals, float)
    if len(zs) == 1:
        return float(vals[0])
    deg = min(len(zs) - 1, 2)
    return float(np.polyval(np.polyfit(zs, vals, deg), 0.0))


def witten_trace(lat: LatticeOperator, radii: Sequence[float], zs: Sequence[complex], method: str = "auto",
                 symmetry: bool | str = "auto", batch: int = 64, tol: float = SOLVER_TOL,
                 workers: int | None = None, plateau: float = 0.05) -> WittenTraceResult:
    """Windowed regularized trace ``z tr(chi_Lam B_L(z))`` on the lattice.

    ``method`` is ``'dense'``, ``'iterative'`` or ``'auto'`` (dense up to
    ``DENSE_LIMIT`` unknowns). With ``symmetry`` enabled and a cube-covariant
    potential, only orbit representatives are solved for. The index is
    estimated from ``f(z) (1 + z)^{n/2}`` at the largest radius and, per
    radius, by polynomial extrapolation to ``z = 0``.
    """
    radii = sorted(float(r) for r in radii)
    zs = [complex(z) for z in zs]
    if not radii or not zs:
        raise ValueError("radius and z schedules must be nonempty")
    if radii[-1] > 0.5 * lat.half_width + 1e-12:
        raise ValueError(f"window radius {radii[-1]} exceeds half of the box half-width {lat.half_width}")
    if any(z.real <= 0 for z in zs):
        raise ValueError("need Re z > 0")
    notes = []
    sites, _ = _window(lat, radii[-1])
    if method == "auto":
        method = "dense" if lat.dimension <= DENSE_LIMIT else "iterative"
    weights = np.ones(len(sites))
    use_sites = sites
    if lat.is_constant():
        # [Q, Phi] = 0 exactly, so L*L and LL* are the same matrix
        traces = np.zeros((len(zs), len(sites)), complex)
        iters = 0
        method = "identical-operators"
    else:
        if symmetry:
            group = symmetry_group(lat)
            defect = symmetry_defect(lat, group)
            if defect < 1e-12:
                orbits = site_orbits(sites, lat.npts, group)
                use_sites = np.array([s for s, _ in orbits])
                weights = np.array([w for _, w in orbits], float)
                notes.append(f"symmetry group of order {len(group)}: {len(use_sites)} orbit representatives for {len(sites)} sites")
            elif symmetry is True:
                raise ValueError(f"potential is not cube covariant on this grid (defect {defect:.3e})")
        if method == "dense":
            traces = _site_traces_dense(lat, use_sites, zs)
            iters = 0
        elif method == "iterative":
            traces, iters = _site_traces_iterative(lat, use_sites, zs, batch, tol, workers)
        else:
            raise ValueError(f"unknown method {method!r}")
    # rotations preserve |x|, so each orbit lies in the same windows as its representative
    rad = np.linalg.norm(lat.points()[tuple(use_sites.T)], axis=-1)
    values = []
    for iz, z in enumerate(zs):
        for lam in radii:
            mask = rad <= lam + 1e-12
            values.append((lam, z, complex(z * np.sum(weights[mask] * traces[iz, mask]))))
    half = lat.n / 2
    f_curve = {}
    for z in zs:
        last = [v for l, zz, v in values if zz == z]
        spread = abs(last[-1] - last[-2]) if len(last) > 1 else float("nan")
        f_curve[z] = (last[-1].real, float(spread))
    scaled = [f_curve[z][0] * (1 + z.real) ** half for z in zs]
    per_radius = [_fit_zero([z.real for z in zs], [values[iz * len(radii) + ir][2].real for iz in range(len(zs))])
                  for ir in range(len(radii))]
    index_estimate = per_radius[-1]
    spread = abs(per_radius[-1] - per_radius[-2]) if len(per_radius) > 1 else float("nan")
    interchanged = None
    if len(radii) > 1 and all(f_curve[z][1] < plateau for z in zs):
        interchanged = float(np.mean(scaled))
    imag = max(abs(v.imag) for _, _, v in values)
    if imag > 1e-9:
        notes.append(f"imaginary part {imag:.3e}")
    if lat.null_block:
        notes.append("generalized Witten (non-Fredholm embedding)")
    return WittenTraceResult(lat.label, lat.n, lat.npts, lat.half_width, lat.nyquist, method, values, f_curve,
                             index_estimate, spread, interchanged, iters, notes)


def even_dimension_analog(npts: int = 12, half_width: float = 6.0, radius: float = 3.0,
                          zs: Sequence[float] = (0.5, 1.0)) -> float:
    """Largest site trace of the resolvent difference for the planar hedgehog (dense solve).

    In even dimensions the chirality matrix anticommutes with ``Q`` and
    commutes with ``Phi``, so the site traces vanish identically.
    """
    from .potential import hedgehog

    p = hedgehog(n=2)
    lat = build_lattice(p, npts, half_width)
    sites, _ = _window(lat, radius)
    traces = _site_traces_dense(lat, sites, [complex(z) for z in zs])
    return float(np.abs(traces).max())


def lattice_checks(lat: LatticeOperator, samples: int = 3, seed: int = 0) -> dict:
    """Random-vector checks: ``Q`` skew-Hermitian, ``L*L`` and ``LL*`` Hermitian and nonnegative."""
    rng = np.random.default_rng(seed)
    ops = _FourierOperators(lat)
    shape = lat.grid_shape + (lat.spin, lat.d, 1)
    worst = {"q_skew": 0.0, "hermitian": 0.0, "min_rayleigh": np.inf}
    for _ in range(samples):
        u = random_complex(rng, *shape)
        v = random_complex(rng, *shape)
        uh, vh = ops.fft(u), ops.fft(v)
        qu = ops.ifft(ops.qhat(uh))
        qv = ops.ifft(ops.qhat(vh))
        scale = np.sqrt(np.vdot(u, u).real * np.vdot(v, v).real)
        worst["q_skew"] = max(worst["q_skew"], abs(np.vdot(u, qv) + np.vdot(qu, v)) / scale)
        for which in ("A", "B"):
            av = ops.ifft(ops.normal(vh, 0.0, which))
            au = ops.ifft(ops.normal(uh, 0.0, which))
            worst["hermitian"] = max(worst["hermitian"], abs(np.vdot(u, av) - np.vdot(au, v)) / scale)
            ray = np.vdot(v, av).real / np.vdot(v, v).real
            worst["min_rayleigh"] = min(worst["min_rayleigh"], ray)
    return worst
