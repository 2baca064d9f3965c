"""Fixed-particle-number Fock bases and sparse normal-ordered operators.

Modes are labelled ``0 .. K-1``. A :class:`Term` is a normal-ordered monomial
``coefficient * a_{c1}^+ a_{c2}^+ ... a_{n1} a_{n2} ...``; the annihilators act
first (right to left), then the creators.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

__all__ = [
    "FockBasis",
    "Term",
    "ManyBodyOperator",
    "enumerate_basis",
    "apply_term",
    "build_operator",
    "expectation",
    "number_terms",
    "adjoint",
]


def _compositions(K: int, N: int):
    """Yield all K-tuples of non-negative ints summing to N, lexicographically descending."""
    if K == 1:
        yield (N,)
        return
    for first in range(N, -1, -1):
        for rest in _compositions(K - 1, N - first):
            yield (first,) + rest


@dataclass(frozen=True, eq=False)
class FockBasis:
    """Ordered set of occupation-number states with a reverse index.

    Usually the full fixed-``N`` sector (see :func:`enumerate_basis`), but any
    subset of it (a symmetry sector) is allowed via :meth:`from_states`.
    """

    K: int
    N: int
    states: np.ndarray
    index: dict = field(repr=False)

    @classmethod
    def from_states(cls, states: Iterable[Sequence[int]], N: int | None = None) -> "FockBasis":
        arr = np.asarray([tuple(int(n) for n in s) for s in states], dtype=np.int64)
        if arr.ndim != 2 or len(arr) == 0:
            raise ValueError("need a non-empty list of occupation tuples")
        totals = arr.sum(axis=1)
        if N is None:
            N = int(totals[0])
        if np.any(totals != N) or np.any(arr < 0):
            raise ValueError(f"all states must hold exactly N={N} particles")
        arr.setflags(write=False)
        index = {tuple(row): i for i, row in enumerate(arr.tolist())}
        if len(index) != len(arr):
            raise ValueError("duplicate states in basis")
        return cls(K=arr.shape[1], N=int(N), states=arr, index=index)

    def __len__(self) -> int:
        return len(self.states)

    @property
    def dim(self) -> int:
        return len(self.states)

    def index_of(self, occupations: Sequence[int]) -> int:
        return self.index[tuple(int(n) for n in occupations)]

    def lookup(self, occupations: np.ndarray) -> np.ndarray:
        """Vectorised index lookup; returns -1 for states not in the basis."""
        occupations = np.asarray(occupations, dtype=np.int64)
        keys = self._keys(occupations)
        pos = np.searchsorted(self._sorted_keys, keys)
        pos = np.clip(pos, 0, len(self._sorted_keys) - 1)
        found = self._sorted_keys[pos] == keys
        return np.where(found, self._order[pos], -1)

    def _keys(self, occ: np.ndarray) -> np.ndarray:
        # mixed-radix key; occupations never exceed N
        radix = self.N + 1
        weights = radix ** np.arange(self.K, dtype=np.int64)[::-1]
        return occ @ weights

    @property
    def _sorted_keys(self) -> np.ndarray:
        return self._key_table()[0]

    @property
    def _order(self) -> np.ndarray:
        return self._key_table()[1]

    def _key_table(self):
        cache = self.__dict__.get("_key_cache")
        if cache is None:
            if float(self.N + 1) ** self.K >= 2.0**62:
                raise OverflowError("basis too large for integer ranking")
            keys = self._keys(self.states)
            order = np.argsort(keys, kind="stable")
            cache = (keys[order], order)
            object.__setattr__(self, "_key_cache", cache)
        return cache

    def occupations(self, mode: int) -> np.ndarray:
        return self.states[:, mode]


def enumerate_basis(K: int, N: int) -> FockBasis:
    """All occupation tuples of ``K`` modes holding ``N`` bosons.

    States are ordered lexicographically descending, so ``(N, 0, ..., 0)`` is
    first. The count is ``binomial(N + K - 1, K - 1)``.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    if N < 0:
        raise ValueError("N must be >= 0")
    basis = FockBasis.from_states(_compositions(K, N), N=N)
    assert len(basis) == comb(N + K - 1, K - 1)
    return basis


@dataclass(frozen=True)
class Term:
    """Normal-ordered monomial ``coefficient * prod(a_c^+) * prod(a_n)``."""

    coefficient: float
    creators: tuple[int, ...] = ()
    annihilators: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "creators", tuple(int(c) for c in self.creators))
        object.__setattr__(self, "annihilators", tuple(int(a) for a in self.annihilators))

    @property
    def conserves_number(self) -> bool:
        return len(self.creators) == len(self.annihilators)

    def modes(self) -> tuple[int, ...]:
        return self.creators + self.annihilators


def adjoint(term: Term) -> Term:
    """Hermitian conjugate of a real-coefficient term (still normal-ordered)."""
    return Term(term.coefficient, tuple(reversed(term.annihilators)), tuple(reversed(term.creators)))


def number_terms(mode: int, coefficient: float = 1.0) -> list[Term]:
    return [Term(coefficient, (mode,), (mode,))]


def apply_term(term: Term, state: Sequence[int]) -> tuple[float, tuple[int, ...]] | None:
    """Act with a single term on one occupation state.

    Returns ``(amplitude, new_state)`` or ``None`` when an annihilator hits an
    empty mode.
    """
    occ = list(int(n) for n in state)
    K = len(occ)
    for m in term.modes():
        if not 0 <= m < K:
            raise IndexError(f"mode {m} out of range for K={K}")
    # integer ladder factors multiplied first, one square root at the end
    weight = 1
    for m in reversed(term.annihilators):
        if occ[m] == 0:
            return None
        weight *= occ[m]
        occ[m] -= 1
    for m in reversed(term.creators):
        occ[m] += 1
        weight *= occ[m]
    return float(term.coefficient) * float(np.sqrt(weight)), tuple(occ)


def _term_action(term: Term, states: np.ndarray):
    """Vectorised :func:`apply_term` over an array of states."""
    occ = states.copy()
    weight = np.ones(len(occ), dtype=np.float64)
    alive = np.ones(len(occ), dtype=bool)
    for m in reversed(term.annihilators):
        n = occ[:, m]
        alive &= n > 0
        weight *= np.maximum(n, 0)
        occ[:, m] = n - 1
    for m in reversed(term.creators):
        occ[:, m] += 1
        weight *= np.maximum(occ[:, m], 0)
    return float(term.coefficient) * np.sqrt(weight), occ, alive


@dataclass(frozen=True, eq=False)
class ManyBodyOperator:
    """Sparse matrix of an operator on a :class:`FockBasis`."""

    basis: FockBasis
    matrix: sp.csr_matrix

    @property
    def shape(self):
        return self.matrix.shape

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def __matmul__(self, vec):
        return self.matrix @ vec

    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal()


def build_operator(terms: Sequence[Term], basis: FockBasis, hermitian: bool = True) -> ManyBodyOperator:
    """Assemble ``sum(terms)`` as a CSR matrix on ``basis``.

    Entry ``(i, j)`` accumulates the amplitude of every term mapping state ``j``
    to state ``i``. With ``hermitian=True`` the result is symmetrised, which only
    removes round-off; a term list that is not Hermitian raises.
    Transitions leaving the basis (e.g. out of a symmetry sector) raise too.
    """
    rows, cols, vals = [], [], []
    states = basis.states
    for term in terms:
        if not term.conserves_number:
            raise ValueError(f"term {term} does not conserve particle number")
        for m in term.modes():
            if not 0 <= m < basis.K:
                raise IndexError(f"mode {m} out of range for K={basis.K}")
        if term.coefficient == 0:
            continue
        amp, occ, alive = _term_action(term, states)
        src = np.nonzero(alive)[0]
        if len(src) == 0:
            continue
        dst = basis.lookup(occ[src])
        if np.any(dst < 0):
            bad = occ[src][dst < 0][0]
            raise ValueError(f"term {term} leaves the basis (reaches {tuple(bad)})")
        rows.append(dst)
        cols.append(src)
        vals.append(amp[src])
    dim = len(basis)
    if rows:
        mat = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim)
        ).tocsr()
    else:
        mat = sp.csr_matrix((dim, dim))
    mat.sum_duplicates()
    if hermitian:
        asym = abs(mat - mat.T)
        scale = max(1.0, abs(mat).max() if mat.nnz else 1.0)
        if asym.nnz and asym.max() > 1e-12 * scale:
            raise ValueError("term list is not Hermitian on this basis")
        mat = ((mat + mat.T) * 0.5).tocsr()
        mat.eliminate_zeros()
    return ManyBodyOperator(basis, mat)


def expectation(op: ManyBodyOperator, vector: np.ndarray) -> float:
    """``<v|Op|v>`` for a normalised state vector."""
    v = np.asarray(vector)
    if v.shape != (len(op.basis),):
        raise ValueError(f"vector has shape {v.shape}, basis has {len(op.basis)} states")
    norm = np.vdot(v, v).real
    if abs(norm - 1.0) > 1e-12:
        raise ValueError(f"vector not normalised (norm^2 = {norm})")
    return float(np.vdot(v, op.matrix @ v).real)
