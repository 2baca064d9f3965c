import itertools
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gapless.fock import (
    FockBasis,
    Term,
    adjoint,
    apply_term,
    build_operator,
    enumerate_basis,
    expectation,
    number_terms,
)
from gapless.models import dirichlet3_terms


@pytest.mark.parametrize("K,N,dim", [(3, 2, 6), (1, 5, 1), (3, 60, 1891), (4, 0, 1)])
def test_basis_sizes(K, N, dim):
    assert len(enumerate_basis(K, N)) == dim


def test_basis_order_is_lexicographic_descending():
    b = enumerate_basis(3, 2)
    assert [tuple(s) for s in b.states] == [(2, 0, 0), (1, 1, 0), (1, 0, 1), (0, 2, 0), (0, 1, 1), (0, 0, 2)]


@given(st.integers(1, 4), st.integers(0, 9))
def test_basis_bijection(K, N):
    b = enumerate_basis(K, N)
    assert len(b) == comb(N + K - 1, K - 1)
    for i, s in enumerate(b.states):
        assert b.index_of(s) == i
    assert np.array_equal(b.lookup(b.states), np.arange(len(b)))


def test_lookup_missing_state():
    b = enumerate_basis(3, 3)
    assert b.lookup(np.array([[4, 0, 0]]))[0] == -1


def test_from_states_validation():
    with pytest.raises(ValueError):
        FockBasis.from_states([(1, 0), (0, 2)])
    with pytest.raises(ValueError):
        FockBasis.from_states([(1, 0), (1, 0)])
    with pytest.raises(ValueError):
        enumerate_basis(0, 3)


def test_apply_term_examples():
    assert apply_term(Term(1.0, (0,), (0,)), (2, 0, 0)) == (2.0, (2, 0, 0))
    assert apply_term(Term(1.0, (1,), (0,)), (1, 0, 0)) == (1.0, (0, 1, 0))
    assert apply_term(Term(1.0, (), (0,)), (0, 3, 0)) is None


def test_apply_term_mode_out_of_range():
    with pytest.raises(IndexError):
        apply_term(Term(1.0, (5,), (0,)), (1, 0, 0))


def test_apply_term_ladder_factors():
    amp, out = apply_term(Term(0.5, (0, 0), (1, 1)), (1, 3, 0))
    # sqrt(3)*sqrt(2) from the annihilators, sqrt(2)*sqrt(3) from the creators
    assert out == (3, 1, 0)
    assert amp == pytest.approx(0.5 * 6.0)


def test_adjointness_over_all_pairs():
    b = enumerate_basis(3, 3)
    terms = [Term(1.0, (0, 1), (2, 2)), Term(0.3, (1,), (0,)), Term(-2.0, (0, 0), (0, 2))]
    for t in terms:
        for s in b.states:
            r = apply_term(t, tuple(s))
            if r is None:
                continue
            amp, s2 = r
            back = apply_term(adjoint(t), s2)
            assert back is not None and back[1] == tuple(s)
            assert back[0] == pytest.approx(amp, rel=1e-14)


def test_free_operator_is_diagonal():
    b = enumerate_basis(3, 2)
    H = build_operator(dirichlet3_terms(0.0), b).toarray()
    expected = [(np.arange(1, 4) ** 2 @ s) / 4 for s in b.states]
    assert np.array_equal(H, np.diag(expected))
    # (2,0,0) (1,1,0) (1,0,1) (0,2,0) (0,1,1) (0,0,2)
    assert list(np.diag(H)) == [0.5, 1.25, 2.5, 2.0, 3.25, 4.5]


def test_single_matrix_element():
    b = enumerate_basis(3, 2)
    H = build_operator(dirichlet3_terms(0.1), b)
    i = b.index_of((2, 0, 0))
    assert H.toarray()[i, i] == pytest.approx(0.5 - 3 * 0.1 / 8 * 2, abs=1e-15)


@given(st.floats(0, 5), st.integers(1, 6))
@settings(max_examples=25, deadline=None)
def test_model_operator_exactly_symmetric(alpha, N):
    H = build_operator(dirichlet3_terms(alpha), enumerate_basis(3, N)).toarray()
    assert np.array_equal(H, H.T)


def test_rejects_non_conserving_term():
    with pytest.raises(ValueError):
        build_operator([Term(1.0, (0,), ())], enumerate_basis(2, 2))


def test_rejects_non_hermitian_list():
    with pytest.raises(ValueError):
        build_operator([Term(1.0, (1,), (0,))], enumerate_basis(2, 2))
    op = build_operator([Term(1.0, (1,), (0,))], enumerate_basis(2, 2), hermitian=False)
    assert op.toarray()[1, 0] == pytest.approx(np.sqrt(2))


def test_rejects_leaving_sector():
    sector = FockBasis.from_states([(2, 0, 0), (0, 2, 0)])
    with pytest.raises(ValueError):
        build_operator([Term(1.0, (1,), (0,)), Term(1.0, (0,), (1,))], sector)


def test_expectation_examples():
    b = enumerate_basis(3, 2)
    n2 = build_operator(number_terms(1), b)
    v = np.zeros(len(b))
    v[b.index_of((0, 2, 0))] = 1.0
    assert expectation(n2, v) == 2.0
    H = build_operator(dirichlet3_terms(0.7), b)
    for i in range(len(b)):
        e = np.zeros(len(b))
        e[i] = 1.0
        assert expectation(H, e) == H.toarray()[i, i]
    u = np.full(len(b), 1 / np.sqrt(len(b)))
    assert expectation(H, u) == pytest.approx(H.toarray().sum() / 6, rel=1e-14)
    with pytest.raises(ValueError):
        expectation(H, np.ones(3))
    with pytest.raises(ValueError):
        expectation(H, np.ones(len(b)))


def test_number_conservation_structural():
    b = enumerate_basis(3, 4)
    H = build_operator(dirichlet3_terms(1.3), b).toarray()
    Ntot = sum(build_operator(number_terms(k), b).toarray() for k in range(3))
    assert np.array_equal(Ntot, 4 * np.eye(len(b)))
    assert np.allclose(H @ Ntot, Ntot @ H, atol=0)


def test_operator_pairs_are_counted_once():
    # a_0^+ a_1^+ a_0 a_1 and a_1^+ a_0^+ a_1 a_0 are the same operator n_0 n_1
    b = enumerate_basis(2, 3)
    A = build_operator([Term(1.0, (0, 1), (0, 1))], b).toarray()
    B = build_operator([Term(1.0, (1, 0), (1, 0))], b).toarray()
    assert np.array_equal(A, B)
    assert np.array_equal(np.diag(A), [s[0] * s[1] for s in b.states])
    for pair in itertools.product(range(2), repeat=2):
        assert Term(1.0, pair, pair).conserves_number
