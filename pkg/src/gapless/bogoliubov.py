"""Quadratic fluctuation Hamiltonians and their symplectic diagonalisation.

A quadratic form in the fluctuation amplitudes ``d`` is

    H = constant + (linear . d + c.c.) + d^+ A d + 1/2 (d^T B d + c.c.)

with ``A`` Hermitian and ``B`` symmetric. Writing ``Psi = (d, d*)`` the
quadratic part is ``1/2 Psi^+ H_bdg Psi`` with ``H_bdg = [[A, B*], [B, A*]]``.
The Bogoliubov modes follow from ``d = V beta + U* beta^+``, i.e.
``Psi = T Phi`` with ``T = [[V, U*], [U, V*]]`` and ``T eta T^+ = eta``,
``eta = diag(1, -1)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import linalg

from . import cnumber
from .cnumber import CNumberPoint, HessianBlock, NoStationaryPoint
from .fock import Term

__all__ = [
    "QuadraticForm",
    "BogoliubovResult",
    "GapPoint",
    "UnstableExpansion",
    "expand_quadratic",
    "dirichlet_quadratic_closed_form",
    "symplectic_diagonalize",
    "periodic_quadratic",
    "periodic_spectrum",
    "dirichlet_gap_at",
    "dirichlet_gap_curve",
    "write_gap_csv",
    "nullity",
]

ZERO_TOL = 1e-8
IMAG_TOL = 1e-8


class UnstableExpansion(ArithmeticError):
    """The dynamical matrix has complex eigenvalues: the expansion point is unstable."""


@dataclass(frozen=True)
class QuadraticForm:
    constant: float
    linear: np.ndarray
    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A))
        B = np.atleast_2d(np.asarray(self.B))
        lin = np.asarray(self.linear).ravel()
        if A.shape != B.shape or A.shape[0] != A.shape[1] or len(lin) != A.shape[0]:
            raise ValueError("A, B must be square and match the linear block")
        scale = max(1.0, float(np.max(np.abs(A))), float(np.max(np.abs(B))))
        if np.max(np.abs(A - A.conj().T)) > 1e-12 * scale:
            raise ValueError("A is not Hermitian")
        if np.max(np.abs(B - B.T)) > 1e-12 * scale:
            raise ValueError("B is not symmetric")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "linear", lin)

    @property
    def K(self) -> int:
        return self.A.shape[0]

    @property
    def hessian(self) -> HessianBlock:
        return HessianBlock(self.A, self.B)

    @property
    def bdg(self) -> np.ndarray:
        return self.hessian.bdg

    def det_m(self) -> float:
        return self.hessian.det_m()


@dataclass
class BogoliubovResult:
    """Bogoliubov blocks and excitation energies.

    Columns of ``U`` and ``V`` belong to ``energies`` (ascending). Columns of
    flagged zero modes carry NaN: no normalisable canonical pair exists there.
    """

    U: np.ndarray
    V: np.ndarray
    energies: np.ndarray
    symplectic_residual: float
    zero_modes: list[int] = field(default_factory=list)
    method: str = "colpa"

    @property
    def gap(self) -> float:
        return float(self.energies[0])

    @property
    def T(self) -> np.ndarray:
        return np.block([[self.V, self.U.conj()], [self.U, self.V.conj()]])


@dataclass(frozen=True)
class GapPoint:
    lam: float
    gap: float
    det_m: float
    stable: bool
    point: CNumberPoint | None = None


# --------------------------------------------------------------------------
# expansions


def expand_quadratic(
    terms: Sequence[Term],
    point: CNumberPoint | Sequence[complex],
    N: float,
    condensate: int = 0,
    n_modes: int | None = None,
) -> QuadraticForm:
    """Second-order expansion of a term list around a condensate point.

    ``point`` is either a three-mode :class:`CNumberPoint` (condensate mode 0)
    or the amplitudes of the non-condensate modes. The condensate mode is
    eliminated by number conservation; the returned blocks live on the
    remaining ``K - 1`` modes. With ``alpha = lambda / N`` the blocks are
    independent of ``N``.
    """
    if isinstance(point, CNumberPoint):
        if condensate != 0:
            raise ValueError("CNumberPoint expansions use mode 0 as the condensate")
        amps = cnumber.pattern_vector(point, N)[1:]
    else:
        amps = np.asarray(point, dtype=complex)
    depleted = float(np.sum(np.abs(amps) ** 2))
    if N - depleted <= 1e-12 * N:
        raise ValueError("condensate mode is empty; the expansion is singular there")
    val, lin, hb = cnumber.hessian_blocks(terms, amps, N, condensate, n_modes)
    A = 0.5 * (hb.A + hb.A.conj().T)
    B = 0.5 * (hb.B + hb.B.T)
    if not (np.any(A.imag) or np.any(B.imag) or np.any(lin.imag)):
        A, B, lin = A.real, B.real, lin.real
    return QuadraticForm(val, lin, A, B)


def dirichlet_quadratic_closed_form(point: CNumberPoint, lam: float, N: float = 1.0) -> QuadraticForm:
    """Closed-form expansion of the three-mode box model on modes 2 and 3.

    Valid at ``delta2 = 0`` and ``delta3 in {0, pi}``. The linear block scales
    as ``sqrt(N)``, the quadratic blocks are ``N``-independent.
    """
    if point.delta2 != 0.0 or point.delta3 not in (0.0, math.pi):
        raise ValueError("closed forms hold only for delta2 = 0 and delta3 in {0, pi}")
    x, th = point.x, point.signed_theta
    c = (1 - x) * math.cos(th) ** 2
    if c <= 1e-14:
        raise ValueError("condensate mode is empty; the expansion is singular there")
    sin, cos, tan = math.sin, math.cos, math.tan
    sec = 1.0 / cos(th)
    r = math.sqrt(c)
    s1 = math.sqrt(1 - x)
    sx = math.sqrt(x)
    st = sin(th)
    c2, c4 = cos(2 * th), cos(4 * th)

    l2 = 6 * sx * (3 * lam * (1 - x) ** 1.5 * st**3 + lam * s1 * (4 * x - 3) * st
                   + (lam * (2 * x - 1) + 1) * r + lam * tan(th) ** 2 * c**1.5)
    l3 = (lam * (x - 1) ** 2 * c4 + lam * (7 * x - 1) * (x - 1) * c2
          + 2 * s1 * st * r * (3 * lam * (x - 1) * c2 + 8))
    linear = math.sqrt(N) * np.array([l2, l3]) / (8 * r)

    b22 = 16 * lam * (s1 * ((23 - 16 * x) * x - 4) * st + 4 * (4 * x - 1) * c**1.5
                      - (1 - x) ** 1.5 * st**3 * (2 * (x - 1) * c2 + 21 * x - 6))
    a22 = 16 * (2 * sec**2 * (lam * (10 * x - 1) + 3) * c**1.5
                + st * (-14 * lam * (1 - x) ** 2.5 * st**4 - 7 * lam * (1 - x) ** 1.5 * (7 * x - 4) * st**2
                        - 6 * lam * tan(th) ** 3 * sec * c**2.5 + lam * s1 * ((49 - 32 * x) * x - 14)
                        - 2 * tan(th) * sec * (lam * (13 * x - 4) + 3) * c**1.5))
    b23 = 16 * lam * sx * c * (8 * (x - 1) * c2 + 3 * x * sec**2 + 10 * s1 * st * r - x + 1)
    a23 = 16 * lam * sx * c * (10 * (x - 1) * c2 + 3 * x * sec**2 + 2 * s1 * st * r + x - 1)
    b33 = lam * (x - 1) * (32 * c2 * r + 32 * x * r + 32 * c4 * sec**2 * c**1.5
                           - 6 * s1 * st * (4 * (3 * x - 2) * c2 + 3 * (x - 1) * c4 + 17 * x - 5))
    a33 = 16 * c * sec**2 * (2 * (lam * (3 * x - 1) + 8) * r
                             + st * (st * (lam * st * (5 * (x - 1) * st * (3 * s1 * st + 4 * r) + 9 * s1 * (3 - 4 * x))
                                           - 2 * (lam * (13 * x - 11) + 8) * r)
                                     + 12 * lam * s1 * (2 * x - 1)))
    pref = 1.0 / (128 * c**1.5)
    # cross terms are listed once per unordered pair
    A = pref * np.array([[a22, a23], [a23, a33]])
    B = pref * np.array([[b22, b23], [b23, b33]])
    return QuadraticForm(N * cnumber.h_bog(point, lam), linear, A, B)


def periodic_quadratic(lam: float, k_max: int) -> QuadraticForm:
    """Fluctuations of the ring model around the uniform condensate.

    Modes are ordered ``k = -k_max .. -1, 1 .. k_max``; ``A = k^2 - lam/2`` on the
    diagonal and ``B`` pairs ``k`` with ``-k`` with entry ``-lam/2``.
    """
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    ks = np.array([k for k in range(-k_max, k_max + 1) if k != 0])
    K = len(ks)
    A = np.diag(ks.astype(float) ** 2 - lam / 2.0)
    B = np.zeros((K, K))
    B[np.arange(K), K - 1 - np.arange(K)] = -lam / 2.0
    return QuadraticForm(0.0, np.zeros(K), A, B)


def periodic_spectrum(lam: float, k: np.ndarray | int) -> np.ndarray:
    """``eps_k = sqrt(k^2 (k^2 - lam))``."""
    k2 = np.asarray(k, dtype=float) ** 2
    return np.sqrt(k2 * (k2 - lam))


# --------------------------------------------------------------------------
# diagonalisation


def _eta(K: int) -> np.ndarray:
    return np.diag(np.concatenate([np.ones(K), -np.ones(K)]))


def _pair_columns(t: np.ndarray) -> np.ndarray:
    """Full ``T`` from its positive-norm half ``t = [V; U]``."""
    K = t.shape[0] // 2
    V, U = t[:K], t[K:]
    return np.block([[V, U.conj()], [U, V.conj()]])


def _residual(t: np.ndarray) -> float:
    if t.shape[1] == 0:
        return 0.0
    T = _pair_columns(t)
    m = t.shape[1]
    eta_m = _eta(m)
    G = T.conj().T @ _eta(t.shape[0] // 2) @ T
    return float(np.max(np.abs(G - eta_m)))


def _colpa(H: np.ndarray, K: int):
    Kc = linalg.cholesky(H, lower=False)  # H = Kc^+ Kc
    eta = _eta(K)
    W = Kc @ eta @ Kc.conj().T
    lvals, vecs = linalg.eigh(W)
    order = np.argsort(-lvals)  # positive first, descending
    lvals, vecs = lvals[order], vecs[:, order]
    pos = lvals[:K]
    if np.any(pos <= 0):
        raise linalg.LinAlgError("signature mismatch")
    # T = Kc^-1 W E^1/2, keep the positive-norm half
    t = linalg.solve_triangular(Kc, vecs[:, :K] * np.sqrt(pos), lower=False)
    return pos, t


def _real_block_energies(q: QuadraticForm) -> np.ndarray | None:
    """``eps^2`` from ``(A - B)(A + B)`` when both blocks are real."""
    if np.iscomplexobj(q.A) and np.any(q.A.imag != 0):
        return None
    if np.iscomplexobj(q.B) and np.any(q.B.imag != 0):
        return None
    A, B = np.real(q.A), np.real(q.B)
    return linalg.eigvals((A - B) @ (A + B))


def _eta_gram_schmidt(vecs: np.ndarray, eta: np.ndarray) -> np.ndarray:
    out = []
    for v in vecs.T:
        for u in out:
            v = v - (u.conj() @ eta @ v) * u
        n = (v.conj() @ eta @ v).real
        out.append(v / math.sqrt(n))
    return np.array(out).T


def _eig_path(q: QuadraticForm, zero_tol: float):
    K = q.K
    eta = _eta(K)
    H = q.bdg
    omega, vecs = linalg.eig(eta @ H)
    scale = max(1.0, float(np.max(np.abs(H))))

    eps2 = _real_block_energies(q)
    if eps2 is not None:
        if np.any(np.abs(eps2.imag) > IMAG_TOL * np.maximum(1.0, np.abs(eps2.real))) or np.any(
            eps2.real < -max(zero_tol**2, 1e-14 * scale**2)
        ):
            raise UnstableExpansion("dynamical matrix has complex eigenvalues (unstable expansion point)")
        magnitudes = np.sort(np.sqrt(np.maximum(eps2.real, 0.0)))
    else:
        magnitudes = None

    norms = np.einsum("ij,ij->j", vecs.conj(), eta @ vecs).real
    if magnitudes is not None:
        # stability already settled; Jordan pairs at zero may carry round-off imaginary parts
        n_zero = int(np.sum(magnitudes < zero_tol))
        cand = np.nonzero(norms > 0)[0]
        cand = cand[np.argsort(-np.abs(omega.real[cand]))][: K - n_zero]
        # signed energies: magnitudes from eps^2, signs from the positive-norm frequencies
        nonzero = magnitudes[n_zero:]
        signed = [np.sign(w) * nonzero[np.argmin(np.abs(nonzero - abs(w)))] for w in omega.real[cand]]
        energies = np.sort(np.concatenate([np.zeros(n_zero), signed]))
    else:
        regular = np.abs(omega) >= zero_tol
        bad = regular & (np.abs(omega.imag) > IMAG_TOL * np.maximum(1.0, np.abs(omega.real)))
        if np.any(bad):
            raise UnstableExpansion("dynamical matrix has complex eigenvalues (unstable expansion point)")
        cand = np.nonzero(regular & (norms > 0))[0]
        n_zero = K - len(cand)
        energies = np.sort(np.concatenate([np.zeros(n_zero), omega.real[cand]]))
    cand = cand[np.argsort(omega.real[cand])]
    v = vecs[:, cand]
    v = _eta_gram_schmidt(v, eta) if v.shape[1] else v
    return energies, v, n_zero


def symplectic_diagonalize(q: QuadraticForm, zero_tol: float = ZERO_TOL, method: str = "auto",
                           linear_tol: float = 1e-6) -> BogoliubovResult:
    """Bogoliubov transformation of a quadratic form at a stationary point.

    ``method="auto"`` uses the Cholesky (Colpa) route when ``H_bdg`` is
    positive definite and otherwise falls back to the eigen-decomposition of
    ``eta H_bdg`` with symplectic normalisation of the positive-norm vectors.
    Raises :class:`UnstableExpansion` for complex excitation frequencies.
    """
    if np.linalg.norm(q.linear) > linear_tol:
        raise ValueError(f"linear part {np.linalg.norm(q.linear):.3g} does not vanish: not a stationary point")
    if method not in ("auto", "colpa", "eig"):
        raise ValueError(f"unknown method {method!r}")
    K = q.K
    if method in ("auto", "colpa"):
        try:
            pos, t = _colpa(q.bdg, K)
        except linalg.LinAlgError:
            if method == "colpa":
                raise
        else:
            order = np.argsort(pos)
            pos, t = pos[order], t[:, order]
            if pos[0] >= zero_tol:
                return BogoliubovResult(U=t[K:], V=t[:K], energies=pos, symplectic_residual=_residual(t),
                                        method="colpa")
            if method == "colpa":
                raise linalg.LinAlgError("zero mode: Cholesky route is singular")

    energies, v, n_zero = _eig_path(q, zero_tol)
    U = np.full((K, K), np.nan, dtype=complex)
    V = np.full((K, K), np.nan, dtype=complex)
    zero_modes = list(range(n_zero))
    m = min(v.shape[1], K - n_zero)
    V[:, n_zero:n_zero + m] = v[:K, :m]
    U[:, n_zero:n_zero + m] = v[K:, :m]
    return BogoliubovResult(U=U, V=V, energies=energies, symplectic_residual=_residual(v[:, :m]),
                            zero_modes=zero_modes, method="eig")


def nullity(M: np.ndarray, tol: float = ZERO_TOL) -> int:
    """Number of singular values of ``M`` below ``tol`` (relative to ``max(1, ||M||)``)."""
    s = linalg.svdvals(M)
    return int(np.sum(s < tol * max(1.0, s[0] if len(s) else 1.0)))


# --------------------------------------------------------------------------
# gap curve of the box model


def dirichlet_gap_at(point: CNumberPoint, lam: float) -> GapPoint:
    """Smallest Bogoliubov energy of the three-mode box model at a landscape point."""
    q = dirichlet_quadratic_closed_form(point, lam)
    det_m = q.det_m()
    try:
        res = symplectic_diagonalize(q, linear_tol=1e-6)
    except UnstableExpansion:
        return GapPoint(lam, math.nan, det_m, False, point)
    return GapPoint(lam, res.gap, det_m, True, point)


def dirichlet_gap_curve(lambda_grid: Sequence[float]) -> list[GapPoint]:
    """Gap at the ``x != 0`` minimum per coupling; below ``lambda_lm`` a NaN marker."""
    out = []
    for lam in lambda_grid:
        lam = float(lam)
        try:
            p = cnumber.stationary_points(lam)["minimum"]
        except NoStationaryPoint:
            out.append(GapPoint(lam, math.nan, math.nan, False, None))
            continue
        out.append(dirichlet_gap_at(p, lam))
    return out


def write_gap_csv(points: Sequence[GapPoint], path: str | Path) -> None:
    """``lambda,gap,detM,stable`` with round-trip float formatting."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lambda", "gap", "detM", "stable"])
        for p in points:
            w.writerow([repr(float(p.lam)), repr(float(p.gap)), repr(float(p.det_m)), int(p.stable)])
