"""Hermitian functional calculus: sign, absolute value, finite differences."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

HERMITIAN_TOL = 1e-10


class GapError(ValueError):
    """Raised when a matrix is not invertible at the required spectral gap."""

    def __init__(self, message: str, min_abs_eig: float):
        super().__init__(message)
        self.min_abs_eig = min_abs_eig


class QuadratureError(RuntimeError):
    """Raised when adaptive quadrature fails to reach its tolerance."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class SpectralDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self, fvals: np.ndarray | None = None) -> np.ndarray:
        lam = self.eigenvalues if fvals is None else fvals
        v = self.eigenvectors
        return (v * lam) @ v.conj().T


def check_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOL) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    dev = np.abs(a - a.conj().T).max() if a.size else 0.0
    if dev > tol * (1.0 + np.abs(a).max()):
        raise ValueError(f"matrix is not Hermitian (deviation {dev:.3e})")
    return a


def spectral_decomposition(a: np.ndarray) -> SpectralDecomposition:
    a = check_hermitian(a)
    lam, v = np.linalg.eigh(0.5 * (a + a.conj().T))
    return SpectralDecomposition(lam, v)


def sign_spectral(a: np.ndarray, c: float) -> np.ndarray:
    """Sign of a Hermitian matrix via its eigendecomposition.

    Raises
    ------
    GapError
        If some eigenvalue has modulus below ``c``.
    """
    dec = spectral_decomposition(a)
    m = float(np.abs(dec.eigenvalues).min()) if dec.eigenvalues.size else np.inf
    if m < c:
        raise GapError(f"not invertible at required gap: min |eigenvalue| = {m:.3e} < {c}", m)
    return dec.reconstruct(np.sign(dec.eigenvalues))


def abs_matrix(a: np.ndarray) -> np.ndarray:
    """Absolute value ``|A| = (A^2)^{1/2}`` of a Hermitian matrix."""
    dec = spectral_decomposition(a)
    return dec.reconstruct(np.abs(dec.eigenvalues))


def sign_integral(a: np.ndarray, c: float, rtol: float = 1e-12, limit: int = 200) -> np.ndarray:
    """Sign via ``(2/pi) A int_0^inf (t^2 + A^2)^{-1} dt``.

    The half line is mapped onto ``[0, pi/2)`` with ``t = s tan(theta)`` and
    ``s = sqrt(c)``, so the integrand becomes
    ``s sec^2(theta) (s^2 tan^2(theta) + A^2)^{-1}``, which stays bounded because
    ``Re A^2 >= c``. All matrix entries are integrated adaptively together.

    Parameters
    ----------
    a : array
        Square matrix with ``Re(A^2) >= c``.
    c : float
        Positive lower bound used for the substitution scale and the precheck.
    """
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if c <= 0:
        raise ValueError("c must be positive")
    a2 = a @ a
    re_part = 0.5 * (a2 + a2.conj().T)
    low = float(np.linalg.eigvalsh(re_part).min())
    if low < c * (1 - 1e-12):
        raise GapError(f"Re(A^2) has eigenvalue {low:.3e} below {c}", low)
    dim = a.shape[0]
    eye = np.eye(dim)
    s = np.sqrt(c)

    def integrand(theta: float) -> np.ndarray:
        t = s * np.tan(theta)
        sec2 = 1.0 / np.cos(theta) ** 2
        return s * sec2 * np.linalg.inv(t * t * eye + a2)

    def flat(theta: float) -> np.ndarray:
        m = integrand(theta)
        return np.concatenate([m.real.ravel(), m.imag.ravel()])

    val, err = integrate.quad_vec(flat, 0.0, np.pi / 2, epsrel=rtol, epsabs=rtol, limit=limit)
    if not np.isfinite(err) or err > 1e-8 * max(1.0, np.abs(val).max()):
        raise QuadratureError(f"sign integral did not converge (error estimate {err:.3e})", float(err))
    half = dim * dim
    m = (val[:half] + 1j * val[half:]).reshape(dim, dim)
    return (2.0 / np.pi) * a @ m


def default_step(x: np.ndarray) -> float:
    return float(np.finfo(float).eps ** 0.2 * (1.0 + np.linalg.norm(x)))


def fd_derivative(
    f: Callable[[np.ndarray], np.ndarray],
    x: np.ndarray,
    j: int,
    h: float | None = None,
) -> np.ndarray:
    """Fourth order central difference of ``f`` along the coordinate ``j`` (0-based)."""
    x = np.asarray(x, dtype=float)
    if h is None:
        h = default_step(x)
    e = np.zeros_like(x)
    e[j] = h
    return (f(x - 2 * e) - 8 * f(x - e) + 8 * f(x + e) - f(x + 2 * e)) / (12 * h)


def batched_sign(a: np.ndarray) -> np.ndarray:
    """Sign of a stack of Hermitian matrices (no gap check)."""
    lam, v = np.linalg.eigh(a)
    return (v * np.sign(lam)[..., None, :]) @ np.swapaxes(v.conj(), -1, -2)


def sign_frechet(a: np.ndarray, e: np.ndarray) -> np.ndarray:
    """Derivative of ``sgn`` at Hermitian ``a`` in the Hermitian direction ``e``.

    Uses the divided-difference (Daleckii-Krein) formula in the eigenbasis of
    ``a``; works on stacks of matrices.
    """
    lam, v = np.linalg.eigh(a)
    s = np.sign(lam)
    li = lam[..., :, None]
    lj = lam[..., None, :]
    si = s[..., :, None]
    sj = s[..., None, :]
    diff = li - lj
    same = si == sj
    with np.errstate(divide="ignore", invalid="ignore"):
        dd = np.where(same, 0.0, (si - sj) / np.where(same, 1.0, diff))
    vh = np.swapaxes(v.conj(), -1, -2)
    inner = vh @ e @ v
    return v @ (dd * inner) @ vh
