"""Smooth bump and step functions shared by the potential constructions."""

from __future__ import annotations

import numpy as np

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(80)


def bump(t):
    """Standard bump ``exp(-1/(1-t^2))`` on (-1, 1), zero outside."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1
    ti = t[inside]
    out[inside] = np.exp(-1.0 / (1.0 - ti * ti))
    return out


def _bump_integral(u):
    """``int_{-1}^{u} bump`` for u in [-1, 1] by Gauss-Legendre on [-1, u]."""
    u = np.asarray(u, dtype=float)
    half = 0.5 * (u + 1.0)
    nodes = -1.0 + half[..., None] * (_GL_NODES + 1.0)
    return half * np.sum(_GL_WEIGHTS * bump(nodes), axis=-1)


BUMP_MASS_1D = float(_bump_integral(np.array(1.0)))


def step(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1, a normalized bump integral between."""
    t = np.asarray(t, dtype=float)
    tc = np.clip(t, 0.0, 1.0)
    return _bump_integral(2.0 * tc - 1.0) / BUMP_MASS_1D


def step_deriv(t, order: int = 1):
    """Derivatives of :func:`step` of order 1 or 2."""
    t = np.asarray(t, dtype=float)
    u = 2.0 * t - 1.0
    b = bump(u)
    if order == 1:
        return 2.0 * b / BUMP_MASS_1D
    if order == 2:
        inside = np.abs(u) < 1
        db = np.zeros_like(u)
        ui = u[inside]
        db[inside] = b[inside] * (-2.0 * ui / (1.0 - ui * ui) ** 2)
        return 4.0 * db / BUMP_MASS_1D
    raise ValueError("order must be 1 or 2")


STEP_DERIV_SUP = 2.0 * np.exp(-1.0) / BUMP_MASS_1D


def cap(r):
    """Radial cap ``rho``: equal to r near 0, monotone, rho(1) = 1 with all derivatives flat at 1."""
    r = np.asarray(r, dtype=float)
    b = step((r - 0.25) / 0.75)
    return np.where(r >= 1.0, 1.0, (1.0 - b) * r + b)


def cap_deriv(r):
    r = np.asarray(r, dtype=float)
    b = step((r - 0.25) / 0.75)
    db = step_deriv((r - 0.25) / 0.75) / 0.75
    return np.where(r >= 1.0, 0.0, (1.0 - b) + db * (1.0 - r))
