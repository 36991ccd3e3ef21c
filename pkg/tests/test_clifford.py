import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from callias import clifford


@pytest.mark.parametrize("n", range(2, 9))
def test_algebra_relations(n):
    rep = clifford.build_algebra(n).check()
    assert max(rep.values()) <= 1e-12


@pytest.mark.parametrize("n, dim", [(2, 2), (3, 2), (4, 4), (5, 4), (6, 8), (7, 8), (8, 16)])
def test_dimension(n, dim):
    assert clifford.build_algebra(n).gamma(1).shape == (dim, dim)


def test_pauli_recovered_in_three_dimensions():
    alg = clifford.build_algebra(3)
    for j in range(3):
        assert np.allclose(alg.gamma(j + 1), clifford.PAULI[j])


@pytest.mark.parametrize("n, expected", [(1, 1), (3, 2j), (5, -4), (7, -8j), (9, 16)])
def test_full_trace_constant(n, expected):
    assert clifford.full_trace_constant(n) == pytest.approx(expected)


@pytest.mark.parametrize("n", [3, 5])
def test_full_tuple_trace_all_permutations(n):
    alg = clifford.build_algebra(n)
    c = clifford.full_trace_constant(n)
    for perm, sgn in clifford.signed_permutations(n):
        assert abs(clifford.gamma_trace(alg, [p + 1 for p in perm]) - sgn * c) <= 1e-12


def test_signed_permutations_count_and_parity():
    perms = clifford.signed_permutations(5)
    assert len(perms) == 120
    assert sum(s for _, s in perms) == 0
    for perm, sgn in perms[:20]:
        assert clifford.epsilon_symbol(perm) == sgn


def test_epsilon_symbol_repeated_index():
    assert clifford.epsilon_symbol((0, 1, 1)) == 0
    assert clifford.epsilon_symbol((1, 0, 2)) == -1


@given(st.sampled_from([3, 5, 7]), st.data())
def test_short_odd_traces_vanish(n, data):
    alg = clifford.build_algebra(n)
    length = data.draw(st.sampled_from(range(1, n, 2)))
    idx = data.draw(st.lists(st.integers(1, n), min_size=length, max_size=length))
    assert abs(clifford.gamma_trace(alg, idx)) <= 1e-12


@given(st.integers(2, 8), st.data())
def test_anticommutation_random_pairs(n, data):
    alg = clifford.build_algebra(n)
    j = data.draw(st.integers(1, n))
    k = data.draw(st.integers(1, n))
    a, b = alg.gamma(j), alg.gamma(k)
    eye = np.eye(a.shape[0])
    assert np.abs(a @ b + b @ a - 2 * (j == k) * eye).max() <= 1e-12


def test_kronecker_matches_numpy():
    rng = np.random.default_rng(1)
    a, b = rng.standard_normal((2, 2)), rng.standard_normal((3, 3))
    assert np.allclose(clifford.kronecker(a, b), np.kron(a, b))


def test_invalid_dimension():
    with pytest.raises(ValueError):
        clifford.build_algebra(0)


def test_even_dimension_full_trace_vanishes():
    alg = clifford.build_algebra(4)
    for idx in itertools.permutations(range(1, 5)):
        assert abs(clifford.gamma_trace(alg, idx)) <= 1e-12
