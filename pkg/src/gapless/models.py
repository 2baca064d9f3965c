"""Term lists for the attractive-boson Hamiltonians.

Units: box length ``L = 2*pi``, ``hbar = 2m = 1``; energies are measured in
``4 pi^2 hbar^2 / (2 m L^2)``, which is 1 in these units.

Box (Dirichlet) modes ``k = 1 .. k_max`` map to term indices ``k - 1``;
ring (periodic) modes ``k = -k_max .. k_max`` map to ``k + k_max``.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from math import log
from typing import Sequence

import numpy as np

from .fock import Term

__all__ = [
    "ModelParams",
    "ExternalProbeParams",
    "dirichlet_full_terms",
    "dirichlet3_terms",
    "DIRICHLET3_QUARTIC",
    "periodic_terms",
    "periodic_mode_index",
    "momentum_terms",
    "master_mode_toy_terms",
    "microstate_entropy",
    "neural_synapse_terms",
    "synaptic_matrix",
    "external_probe_terms",
    "external_probe_closed_form",
    "combine_terms",
]


@dataclass(frozen=True)
class ModelParams:
    alpha: float
    N: int

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.N < 1:
            raise ValueError("N must be positive")

    @property
    def lam(self) -> float:
        return self.alpha * self.N

    @classmethod
    def from_lambda(cls, lam: float, N: int) -> "ModelParams":
        return cls(alpha=lam / N, N=N)


@dataclass(frozen=True)
class ExternalProbeParams:
    """Soft mode ``b`` (gap ``deltaE``) coupled to an external mode ``c``."""

    deltaE: float
    Egamma: float
    g: float
    gamma: float

    @property
    def deltag(self) -> float:
        return float(np.hypot(self.Egamma - self.deltaE, self.g))


def combine_terms(terms: Sequence[Term]) -> list[Term]:
    """Merge terms with identical operator content, dropping zeros."""
    acc: dict[tuple, float] = {}
    for t in terms:
        key = (t.creators, t.annihilators)
        acc[key] = acc.get(key, 0.0) + t.coefficient
    return [Term(c, cr, an) for (cr, an), c in acc.items() if c != 0.0]


def _kinetic(k_max: int, energy) -> list[Term]:
    return [Term(energy(k), (k - 1,), (k - 1,)) for k in range(1, k_max + 1)]


def dirichlet_full_terms(k_max: int, alpha: float) -> list[Term]:
    """Box Hamiltonian with every mode-space sum cut to ``1 <= index <= k_max``.

    Built from the three families of the momentum-space interaction
    ``-alpha/8 * sum_{k,l,m >= 1} [ a_k+ a_l+ a_m a_{k+l-m} + 2 a_k+ a_l+ a_m a_{k-l+m}
    - 2 (a_{l+m+k}+ a_l+ a_m a_k + a_k+ a_l+ a_m a_{k+l+m}) ]``.
    Terms with a generated index outside the window are discarded.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    terms = _kinetic(k_max, lambda k: k * k / 4.0)
    if alpha == 0:
        return terms
    c = -alpha / 8.0
    ok = range(1, k_max + 1)

    def add(coef, cr, an):
        if all(1 <= i <= k_max for i in cr + an):
            terms.append(Term(coef, tuple(i - 1 for i in cr), tuple(i - 1 for i in an)))

    for k, l, m in product(ok, ok, ok):
        add(c, (k, l), (m, k + l - m))
        add(2 * c, (k, l), (m, k - l + m))
        add(-2 * c, (l + m + k, l), (m, k))
        add(-2 * c, (k, l), (m, k + l + m))
    return combine_terms(terms)


# (coefficient in units of -alpha/8, creators, annihilators), in the standard listing order, 1-based modes
DIRICHLET3_QUARTIC = (
    (3, (1, 1), (1, 1)),
    (8, (1, 2), (1, 2)),
    (2, (1, 1), (2, 2)),
    (2, (2, 2), (1, 1)),
    (8, (1, 3), (1, 3)),
    (2, (1, 1), (3, 3)),
    (2, (3, 3), (1, 1)),
    (-2, (1, 1), (1, 3)),
    (-2, (1, 3), (1, 1)),
    (4, (1, 2), (2, 3)),
    (4, (2, 3), (1, 2)),
    (2, (1, 3), (2, 2)),
    (2, (2, 2), (1, 3)),
    (3, (2, 2), (2, 2)),
    (8, (2, 3), (2, 3)),
    (2, (2, 2), (3, 3)),
    (2, (3, 3), (2, 2)),
    (3, (3, 3), (3, 3)),
)


def dirichlet3_terms(alpha: float) -> list[Term]:
    """The three-mode truncated box Hamiltonian: 3 kinetic + 18 quartic terms."""
    terms = _kinetic(3, lambda k: k * k / 4.0)
    for w, cr, an in DIRICHLET3_QUARTIC:
        terms.append(Term(-alpha * w / 8.0, tuple(i - 1 for i in cr), tuple(i - 1 for i in an)))
    return terms


def periodic_mode_index(k: int, k_max: int) -> int:
    return k + k_max


def periodic_terms(k_max: int, alpha: float) -> list[Term]:
    """Ring Hamiltonian ``sum k^2 n_k - alpha/4 sum a_k+ a_l+ a_{m+k} a_{l-m}``, ``|k| <= k_max``."""
    if k_max < 0:
        raise ValueError("k_max must be >= 0")
    ks = range(-k_max, k_max + 1)
    idx = lambda k: k + k_max  # noqa: E731
    terms = [Term(float(k * k), (idx(k),), (idx(k),)) for k in ks if k != 0]
    if alpha == 0:
        return terms
    c = -alpha / 4.0
    for k, l in product(ks, ks):
        for m in range(-2 * k_max, 2 * k_max + 1):
            p, q = m + k, l - m
            if abs(p) <= k_max and abs(q) <= k_max:
                terms.append(Term(c, (idx(k), idx(l)), (idx(p), idx(q))))
    return combine_terms(terms)


def momentum_terms(k_max: int) -> list[Term]:
    """Total momentum ``P = sum k n_k`` on the ring modes."""
    return [Term(float(k), (k + k_max,), (k + k_max,)) for k in range(-k_max, k_max + 1) if k != 0]


def master_mode_toy_terms(E: Sequence[float], alpha: float) -> list[Term]:
    """``sum_k E_k (1 - alpha n_0) n_k + E_0 n_0`` with mode 0 the master mode."""
    E = [float(e) for e in E]
    terms = [Term(E[0], (0,), (0,))]
    for k in range(1, len(E)):
        terms.append(Term(E[k], (k,), (k,)))
        # n_0 n_k = a_0+ a_k+ a_0 a_k for k != 0
        terms.append(Term(-alpha * E[k], (0, k), (0, k)))
    return terms


def microstate_entropy(K: int, d: int) -> float:
    """Log of the number of degenerate patterns of ``K`` gapless ``d``-level modes."""
    return K * log(d)


def synaptic_matrix(alpha: float) -> dict[tuple[int, int], list[tuple[float, int, int]]]:
    """Operator-valued synaptic matrix ``W[k, j]`` as ``[(coef, m, n), ...]`` meaning ``coef * a_m+ a_n``.

    Modes are 1-based here. Lower-triangle entries are the adjoints of the upper ones.
    """
    a8 = alpha / 8.0
    upper = {
        (1, 1): [(3 * a8, 1, 1)],
        (2, 2): [(3 * a8, 2, 2)],
        (3, 3): [(3 * a8, 3, 3)],
        (1, 2): [(4 * a8, 2, 1), (2 * a8, 1, 2), (4 / 3 * a8, 2, 3), (a8, 3, 2)],
        (1, 3): [(4 * a8, 3, 1), (2 * a8, 1, 3), (4 / 3 * a8, 2, 2), (-2 * a8, 1, 1)],
        (2, 3): [(4 * a8, 3, 2), (2 * a8, 2, 3), (4 / 3 * a8, 1, 2), (a8, 2, 1)],
    }
    W = dict(upper)
    for (k, j), ops in upper.items():
        if k != j:
            W[(j, k)] = [(c, n, m) for c, m, n in ops]
    return W


def neural_synapse_terms(alpha: float) -> list[Term]:
    """``sum_k E_k n_k - sum_{kj} a_k+ W_kj a_j`` with ``E_k = k^2/4``."""
    terms = _kinetic(3, lambda k: k * k / 4.0)
    for (k, j), ops in synaptic_matrix(alpha).items():
        for coef, m, n in ops:
            terms.append(Term(-coef, (k - 1, m - 1), (n - 1, j - 1)))
    return terms


def external_probe_terms(p: ExternalProbeParams) -> list[Term]:
    """``dE b+b + Eg c+c + g/2 (b c+ + b+ c)`` with ``b`` = mode 0, ``c`` = mode 1."""
    return [
        Term(p.deltaE, (0,), (0,)),
        Term(p.Egamma, (1,), (1,)),
        Term(p.g / 2.0, (1,), (0,)),
        Term(p.g / 2.0, (0,), (1,)),
    ]


def external_probe_closed_form(p: ExternalProbeParams, t) -> tuple[np.ndarray, np.ndarray]:
    """Occupations ``(n_c, n_b)`` at time ``t`` starting from ``|0>_b |gamma>_c``."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be >= 0")
    total = p.gamma**2
    dg = p.deltag
    if dg == 0.0:
        nb = np.zeros_like(t)
    else:
        nb = total * (p.g / dg) ** 2 * np.sin(dg * t / 2.0) ** 2
    return total - nb, nb
