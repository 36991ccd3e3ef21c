"""Euclidean Dirac algebra built by recursive Kronecker products.

The matrices gamma_1, ..., gamma_n are Hermitian, of size 2^nhat with
n = 2*nhat or n = 2*nhat + 1, and satisfy
gamma_j gamma_k + gamma_k gamma_j = 2 delta_jk I.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass

import numpy as np

SIGMA1 = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA3 = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = (SIGMA1, SIGMA2, SIGMA3)

ALGEBRA_TOL = 1e-12


def _require_square(a: np.ndarray, name: str) -> np.ndarray:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {a.shape}")
    return a


def kronecker(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product with the block convention ``A o B = [a_ij B]``.

    Both inputs must be square.
    """
    a = _require_square(a, "a")
    b = _require_square(b, "b")
    return np.kron(a, b).astype(complex)


@dataclass(frozen=True)
class CliffordAlgebra:
    """Generators of the Euclidean Dirac algebra in dimension ``n``."""

    n: int
    nhat: int
    gammas: tuple

    @property
    def size(self) -> int:
        return 2**self.nhat

    def gamma(self, j: int) -> np.ndarray:
        """1-based access, ``gamma(1)`` is the first generator."""
        if not 1 <= j <= self.n:
            raise ValueError(f"gamma index {j} out of range 1..{self.n}")
        return self.gammas[j - 1]

    def stacked(self) -> np.ndarray:
        """Generators as an array of shape (n, 2^nhat, 2^nhat)."""
        return np.stack(self.gammas)

    def check(self) -> dict:
        """Maximal deviations from Hermiticity, anticommutation and unitarity."""
        eye = np.eye(self.size)
        herm = max(np.abs(g - g.conj().T).max() for g in self.gammas)
        unit = max(np.abs(g.conj().T @ g - eye).max() for g in self.gammas)
        anti = 0.0
        for j, k in itertools.product(range(self.n), repeat=2):
            gj, gk = self.gammas[j], self.gammas[k]
            target = 2.0 * eye if j == k else 0.0 * eye
            anti = max(anti, np.abs(gj @ gk + gk @ gj - target).max())
        return {"hermitian": float(herm), "anticommutation": float(anti), "unitary": float(unit)}


def _product(mats) -> np.ndarray:
    out = mats[0]
    for m in mats[1:]:
        out = out @ m
    return out


@functools.lru_cache(maxsize=None)
def _build(n: int) -> tuple:
    if n == 2:
        return (SIGMA1.copy(), SIGMA2.copy())
    prev = _build(n - 1)
    if n % 2 == 1:
        # odd step: keep the even algebra and append a scaled full product
        nhat = (n - 1) // 2
        last = (-1j) ** nhat * _product(prev)
        return tuple(prev) + (last,)
    # even step n = 2*nhat + 2 from the even algebra of dimension 2*nhat
    nhat = (n - 2) // 2
    base = _build(n - 2)
    size = 2**nhat
    new = [kronecker(SIGMA1, g) for g in base]
    new.append(1j**nhat * kronecker(SIGMA1, _product(base)))
    new.append(kronecker(SIGMA2, np.eye(size)))
    return tuple(new)


def build_algebra(n: int) -> CliffordAlgebra:
    """Construct (and memoize) the algebra for ``n >= 2``."""
    if int(n) != n or n < 2:
        raise ValueError(f"dimension must be an integer >= 2, got {n}")
    n = int(n)
    gammas = _build(n)
    for g in gammas:
        g.setflags(write=False)
    return CliffordAlgebra(n=n, nhat=n // 2, gammas=gammas)


def epsilon_symbol(indices) -> int:
    """Levi-Civita symbol: 0 on repeats, otherwise the permutation sign."""
    idx = list(indices)
    if len(set(idx)) != len(idx):
        return 0
    sign = 1
    seen = [False] * len(idx)
    order = sorted(range(len(idx)), key=lambda i: idx[i])
    for start in range(len(idx)):
        if seen[start]:
            continue
        length = 0
        i = start
        while not seen[i]:
            seen[i] = True
            i = order[i]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


@functools.lru_cache(maxsize=None)
def signed_permutations(n: int) -> tuple:
    """All permutations of ``range(n)`` with their signs, in lexicographic order."""
    return tuple((p, epsilon_symbol(p)) for p in itertools.permutations(range(n)))


def gamma_trace(alg: CliffordAlgebra, indices) -> complex:
    """Trace of ``gamma_{i1} ... gamma_{ik}`` with 1-based indices."""
    idx = list(indices)
    if not idx:
        raise ValueError("indices must be nonempty")
    mats = [alg.gamma(i) for i in idx]
    return complex(np.trace(_product(mats)))


def full_trace_constant(n: int) -> complex:
    """The constant ``(2i)^nhat`` with tr(gamma_1 ... gamma_n) = (2i)^nhat for odd n."""
    if n % 2 == 0:
        return 0j
    return (2j) ** ((n - 1) // 2)
