"""Finite-N exact diagonalisation, slow-state construction and time evolution.

Time is measured in inverse energy units; frequencies are ``E / (2 pi)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import linalg, optimize, stats
from scipy.sparse import linalg as sla

from . import cnumber
from .fock import FockBasis, ManyBodyOperator, Term, build_operator, enumerate_basis
from .models import ExternalProbeParams, dirichlet3_terms, external_probe_terms, periodic_terms

__all__ = [
    "SectorBlock",
    "SpectralDecomposition",
    "InflectionStateSpec",
    "EvolutionTrace",
    "FitResult",
    "CoherencePoint",
    "PeriodicCheck",
    "FitError",
    "ConstraintError",
    "diagonalize",
    "parity_labels",
    "ground_state",
    "ground_state_occupations",
    "transition_location",
    "build_inflection_state",
    "evolve_state",
    "evolve_observable",
    "evolve_expm",
    "mean_frequency",
    "coherence_time_grid",
    "coherence_point",
    "coherence_scan",
    "lambda_at_max",
    "fit_lambda_scaling",
    "scaling_model",
    "one_body_density",
    "coherent_density_matrix",
    "position_density",
    "periodic_zero_momentum_basis",
    "periodic_finite_N_checks",
    "periodic_gap_minimum",
    "external_probe_numeric",
    "DEFAULT_WINDOWS",
]

DEFAULT_WINDOWS = (0.4, 0.375, 0.225)
DENSE_LIMIT = 5000
DEFAULT_CAP = 20000


class FitError(RuntimeError):
    """Least-squares fit did not converge; ``last`` holds the final iterate."""

    def __init__(self, msg, last=None):
        super().__init__(msg)
        self.last = last


class ConstraintError(RuntimeError):
    """The occupation constraint could not be met; ``violation`` is the final miss."""

    def __init__(self, msg, violation=None):
        super().__init__(msg)
        self.violation = violation


# --------------------------------------------------------------------------
# spectra


@dataclass(frozen=True, eq=False)
class SectorBlock:
    """Eigenpairs of the operator restricted to basis states ``indices``."""

    indices: np.ndarray
    energies: np.ndarray
    vectors: np.ndarray


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Full spectrum, stored per symmetry sector.

    ``energies`` and ``vectors`` expose the combined (dense) view; the
    evolution routines work block by block.
    """

    basis: FockBasis
    blocks: tuple[SectorBlock, ...]

    @property
    def dim(self) -> int:
        return len(self.basis)

    @property
    def energies(self) -> np.ndarray:
        return np.sort(np.concatenate([b.energies for b in self.blocks]))

    @property
    def vectors(self) -> np.ndarray:
        """Dense eigenvector matrix (``dim`` rows), columns ordered like :attr:`energies`."""
        E = np.concatenate([b.energies for b in self.blocks])
        V = np.zeros((self.dim, len(E)))
        col = 0
        for b in self.blocks:
            V[np.ix_(b.indices, np.arange(col, col + len(b.energies)))] = b.vectors
            col += len(b.energies)
        return V[:, np.argsort(E, kind="stable")]

    def project(self, state: np.ndarray) -> list[np.ndarray]:
        """Eigenbasis coefficients of ``state``, per block."""
        return [b.vectors.T @ state[b.indices] for b in self.blocks]


def parity_labels(basis: FockBasis, mode: int = 1) -> np.ndarray:
    """Occupation parity of one mode, a conserved label when that mode only appears in pairs."""
    return basis.occupations(mode) % 2


def _split(op: ManyBodyOperator, labels: np.ndarray | None):
    dim = len(op.basis)
    if labels is None:
        return [np.arange(dim)]
    labels = np.asarray(labels)
    if labels.shape != (dim,):
        raise ValueError("one sector label per basis state required")
    coo = op.matrix.tocoo()
    if np.any(labels[coo.row] != labels[coo.col]):
        raise ValueError("operator couples different sectors")
    return [np.nonzero(labels == v)[0] for v in np.unique(labels)]


def diagonalize(op: ManyBodyOperator, labels: np.ndarray | None = None, cap: int = DEFAULT_CAP,
                support: np.ndarray | None = None) -> SpectralDecomposition:
    """Full eigen-decomposition with a dense symmetric solver, optionally per sector.

    ``labels`` assigns each basis state to a symmetry sector the operator
    conserves; blocks are then diagonalised independently. With ``support``
    (a state vector) only the sectors holding more than ``1e-10`` of its norm
    are kept, the same relative cutoff :func:`evolve_observable` applies.
    """
    dim = len(op.basis)
    if dim > cap:
        raise ValueError(f"dimension {dim} exceeds the dense cap {cap}; use ground_state() instead")
    blocks = []
    for idx in _split(op, labels):
        if support is not None:
            support = np.asarray(support)
            if np.linalg.norm(support[idx]) <= 1e-10 * np.linalg.norm(support):
                continue
        sub = op.matrix[idx][:, idx].toarray()
        E, V = linalg.eigh(sub)
        blocks.append(SectorBlock(idx, E, V))
    return SpectralDecomposition(op.basis, tuple(blocks))


def ground_state(op: ManyBodyOperator, k: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Lowest ``k`` eigenpairs: dense up to 5000 states, Lanczos beyond."""
    dim = len(op.basis)
    if dim <= DENSE_LIMIT:
        E, V = linalg.eigh(op.toarray(), subset_by_index=[0, min(k, dim) - 1])
        return E, V
    E, V = sla.eigsh(op.matrix, k=k, which="SA", tol=1e-12, v0=np.ones(dim) / math.sqrt(dim))
    order = np.argsort(E)
    return E[order], V[:, order]


def ground_state_occupations(lambda_grid: Sequence[float], N: int) -> np.ndarray:
    """``<n_k>/N`` of the three-mode box model ground state, one row per coupling."""
    basis = enumerate_basis(3, N)
    occ = basis.states.astype(float)
    out = []
    for lam in lambda_grid:
        op = build_operator(dirichlet3_terms(lam / N), basis)
        _, V = ground_state(op)
        p = V[:, 0] ** 2
        out.append(p @ occ / N)
    return np.array(out)


def transition_location(lambda_grid: Sequence[float], occupations: np.ndarray, mode: int = 1) -> float:
    """Midpoint of the grid interval where ``<n_mode>/N`` changes fastest."""
    lams = np.asarray(lambda_grid, dtype=float)
    d = np.abs(np.diff(occupations[:, mode]) / np.diff(lams))
    i = int(np.argmax(d))
    return float(0.5 * (lams[i] + lams[i + 1]))


# --------------------------------------------------------------------------
# slow state


@dataclass(frozen=True)
class InflectionStateSpec:
    """Target ``<n_2>/N`` and occupation windows around the inflection point."""

    x_target: float
    center: tuple[float, float, float]
    windows: tuple[float, float, float] = DEFAULT_WINDOWS

    def __post_init__(self):
        if any(w <= 0 for w in self.windows):
            raise ValueError("windows must be positive")
        if abs(sum(self.center) - 1.0) > 1e-9:
            raise ValueError("center occupations must sum to 1")

    @classmethod
    def at_inflection(cls, lam: float, windows=DEFAULT_WINDOWS) -> "InflectionStateSpec":
        p = cnumber.inflection_point(lam)
        return cls(p.x, tuple(float(v) for v in cnumber.occupation_fractions(p)), tuple(windows))

    def subspace(self, basis: FockBasis) -> np.ndarray:
        """Indices of basis states inside every window."""
        rel = basis.states / basis.N
        inside = np.all(np.abs(rel - np.asarray(self.center)) <= np.asarray(self.windows) + 1e-12, axis=1)
        return np.nonzero(inside)[0]


def _lowest(mat: np.ndarray) -> np.ndarray:
    return linalg.eigh(mat, subset_by_index=[0, 0])[1][:, 0]


def build_inflection_state(
    spec: InflectionStateSpec,
    op: ManyBodyOperator,
    method: str = "penalty",
    mu: float = 1e2,
    mode: int = 1,
    tol: float = 1e-3,
    fallback: bool = True,
) -> np.ndarray:
    """Minimal-energy state in the window subspace with ``<n_mode>/N`` at the target.

    ``method``:

    * ``"window"``: ground state of ``H`` inside the windows; the constraint is
      neither imposed nor checked.
    * ``"shifted"``: ground state of ``H + mu (n/N - y)^2`` with the centre ``y``
      tuned so that the constraint holds to machine precision.
    * ``"penalty"``: ground state of ``H + mu (n/N - x_target)^2``, ``mu`` escalated
      tenfold from ``mu`` up to ``1e6`` until the constraint holds within ``tol``.
      At small N the occupation grid is coarse and no ``mu`` may reach ``tol``;
      with ``fallback`` the multiplier form (``"shifted"``) is then used at the
      ``mu`` that came closest.
    * ``"lagrange"``: exact minimiser of ``<H>`` at fixed ``<n>``; the ground state of
      ``H - nu n`` with ``nu`` tuned, mixed with its partner across a level crossing.
    """
    idx = spec.subspace(op.basis)
    if len(idx) == 0:
        raise ValueError("window subspace is empty")
    N = op.basis.N
    Hw = op.matrix[idx][:, idx].toarray()
    n = op.basis.occupations(mode)[idx].astype(float) / N
    x = spec.x_target

    def mean(v):
        return float(v**2 @ n)

    if method == "window":
        v = _lowest(Hw)
    elif method == "penalty":
        m, best = mu, None
        while True:
            v = _lowest(Hw + np.diag(m * (n - x) ** 2))
            viol = mean(v) - x
            if best is None or abs(viol) < best[0]:
                best = (abs(viol), m)
            if abs(viol) <= tol:
                break
            if m >= 1e6:
                if not fallback:
                    raise ConstraintError(f"penalty did not converge, violation {viol:.3g}", viol)
                v = _shifted_retry(Hw, n, x, best[1], mu, tol)
                break
            m = min(10 * m, 1e6)
    elif method == "shifted":
        v = _shifted(Hw, n, x, mu, tol)
    elif method == "lagrange":
        v = _lagrange_state(Hw, n, x)
        viol = mean(v) - x
        if abs(viol) > tol:
            raise ConstraintError(f"Lagrange state missed the target by {viol:.3g}", viol)
    else:
        raise ValueError(f"unknown method {method!r}")
    psi = np.zeros(len(op.basis))
    psi[idx] = v / np.linalg.norm(v)
    return psi


def _shifted(Hw: np.ndarray, n: np.ndarray, x: float, mu: float, tol: float) -> np.ndarray:
    """Ground state of ``H + mu (n - y)^2`` with ``y`` solved for ``<n> = x``."""

    def f(y):
        return float(_lowest(Hw + np.diag(mu * (n - y) ** 2)) ** 2 @ n) - x

    lo, hi = x - 0.25, x + 0.25
    flo, fhi = f(lo), f(hi)
    if flo > 0 or fhi < 0:
        raise ConstraintError("could not bracket the penalty centre", min(abs(flo), abs(fhi)))
    y = optimize.brentq(f, lo, hi, xtol=1e-13)
    v = _lowest(Hw + np.diag(mu * (n - y) ** 2))
    viol = float(v**2 @ n) - x
    if abs(viol) > tol:
        raise ConstraintError(f"shifted penalty missed the target by {viol:.3g}", viol)
    return v


def _shifted_retry(Hw, n, x, mu_best, mu_min, tol):
    # y -> <n> can jump at level crossings; smaller mu smooths it
    m, err = mu_best, None
    while m >= min(mu_min, 1.0) * (1 - 1e-12):
        try:
            return _shifted(Hw, n, x, m, tol)
        except ConstraintError as exc:
            err = exc
        m /= 10
    raise err


def _lagrange_state(Hw: np.ndarray, n: np.ndarray, x: float) -> np.ndarray:
    def g(nu):
        return _lowest(Hw - np.diag(nu * n))

    scale = max(1.0, float(np.max(np.abs(Hw))))
    lo, hi = -10 * scale, 10 * scale
    if g(lo) ** 2 @ n > x or g(hi) ** 2 @ n < x:
        raise ConstraintError("target occupation outside the window's reach")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g(mid) ** 2 @ n < x:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-13 * scale:
            break
    a, b = g(lo), g(hi)
    # the target lies in a jump of <n>(nu): combine the two sides
    b = b - (a @ b) * a
    nb = np.linalg.norm(b)
    if nb < 1e-12:
        return a
    b /= nb
    naa, nbb, nab = a**2 @ n, b**2 @ n, (a * b) @ n
    haa, hbb, hab = a @ Hw @ a, b @ Hw @ b, a @ Hw @ b

    def occ(p):
        return math.cos(p) ** 2 * naa + math.sin(p) ** 2 * nbb + math.sin(2 * p) * nab - x

    def energy(p):
        return math.cos(p) ** 2 * haa + math.sin(p) ** 2 * hbb + math.sin(2 * p) * hab

    ps = np.linspace(0.0, math.pi, 4001)
    vals = np.array([occ(p) for p in ps])
    roots = [optimize.brentq(occ, ps[i], ps[i + 1], xtol=1e-15)
             for i in np.nonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))[0]]
    if not roots:
        return a
    p = min(roots, key=energy)
    return math.cos(p) * a + math.sin(p) * b


# --------------------------------------------------------------------------
# evolution and spectroscopy


@dataclass
class EvolutionTrace:
    times: np.ndarray
    n2_rel: np.ndarray
    f_mean: float | None = None
    t_coh: float | None = None

    def to_rows(self):
        return zip(self.times.tolist(), self.n2_rel.tolist())


def coherence_time_grid(f1: float = 1.0 / 3000.0, n_max: int = 12000) -> np.ndarray:
    """Uniform times covering one period ``1/f1`` with ``2 n_max`` samples (no aliasing up to ``n_max f1``)."""
    M = 2 * n_max
    return np.arange(M) / (f1 * M)


def _check_uniform(times: np.ndarray) -> float:
    if len(times) < 2:
        raise ValueError("need at least two time points")
    dt = np.diff(times)
    if np.max(np.abs(dt - dt[0])) > 1e-9 * max(1.0, abs(dt[0])):
        raise ValueError("time grid must be uniform")
    return float(dt[0])


def evolve_state(state: np.ndarray, decomp: SpectralDecomposition, t: float) -> np.ndarray:
    """``exp(-i H t) |state>`` through the spectral decomposition."""
    out = np.zeros(decomp.dim, dtype=complex)
    for b, c in zip(decomp.blocks, decomp.project(np.asarray(state, dtype=complex))):
        out[b.indices] = b.vectors @ (np.exp(-1j * b.energies * t) * c)
    return out


def evolve_observable(
    state: np.ndarray,
    decomp: SpectralDecomposition,
    times: np.ndarray,
    mode: int = 1,
    f1: float | None = None,
    n_max: int | None = None,
    cutoff: float = 1e-10,
    chunk: int = 2000,
) -> EvolutionTrace:
    """``<n_mode>(t)/N`` for ``|state(t)> = sum_j exp(-i E_j t) c_j |E_j>``.

    Eigencomponents with ``|c_j|`` below ``cutoff`` times the largest are
    dropped (their weight enters ``n(t)`` at order ``cutoff``). When ``f1`` is
    given the mean frequency and coherence time are attached.
    """
    times = np.asarray(times, dtype=float)
    _check_uniform(times)
    state = np.asarray(state, dtype=float if np.isrealobj(state) else complex)
    norm = np.linalg.norm(state)
    if abs(norm - 1.0) > 1e-10:
        raise ValueError(f"state not normalised (norm {norm})")
    occ = decomp.basis.occupations(mode).astype(float)
    trace = np.zeros(len(times))
    coeffs = decomp.project(state)
    cmax = max(float(np.max(np.abs(c))) if len(c) else 0.0 for c in coeffs)
    for b, c in zip(decomp.blocks, coeffs):
        keep = np.abs(c) > cutoff * cmax
        if not np.any(keep):
            continue
        Vk, ck, Ek = b.vectors[:, keep], c[keep], b.energies[keep]
        w = occ[b.indices]
        for s in range(0, len(times), chunk):
            ph = np.outer(Ek, times[s:s + chunk])
            if np.isrealobj(ck):
                # real eigenvectors and coefficients: two real products instead of one complex one
                re = Vk @ (np.cos(ph) * ck[:, None])
                im = Vk @ (np.sin(ph) * ck[:, None])
                trace[s:s + chunk] += w @ (re**2 + im**2)
            else:
                Z = Vk @ (np.exp(-1j * ph) * ck[:, None])
                trace[s:s + chunk] += w @ (Z.real**2 + Z.imag**2)
    trace /= decomp.basis.N
    out = EvolutionTrace(times, trace)
    if f1 is not None:
        out.f_mean, out.t_coh = mean_frequency(out, f1, n_max or len(times) // 2)
    return out


def mean_frequency(trace: EvolutionTrace | np.ndarray, f1: float, n_max: int,
                   times: np.ndarray | None = None) -> tuple[float, float]:
    """DFT-weighted mean frequency ``f1 sum i |c_i|^2 / sum |c_i|^2`` and ``t_coh = 1/f``.

    The mean is subtracted first so the constant part does not pull the
    estimate to zero. Coefficients are taken at ``i f1`` for ``i = 1..n_max``.
    """
    if isinstance(trace, EvolutionTrace):
        times, values = trace.times, trace.n2_rel
    else:
        values = np.asarray(trace, dtype=float)
        if times is None:
            raise ValueError("times required with a bare array")
    times = np.asarray(times, dtype=float)
    dt = _check_uniform(times)
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    x = values - values.mean()
    if not np.any(np.abs(x) > 1e-14 * max(1.0, float(np.max(np.abs(values))))):
        raise ValueError("trace is constant after mean removal; mean frequency undefined")
    M = len(x)
    if times[-1] + dt < 1.0 / f1 * (1 - 1e-9):
        raise ValueError("trace shorter than one period of f1")
    if abs(M * dt * f1 - 1.0) < 1e-9 and n_max <= M // 2:
        c = np.fft.rfft(x)[1:n_max + 1]
    else:
        i = np.arange(1, n_max + 1)
        c = np.zeros(n_max, dtype=complex)
        for s in range(0, n_max, 512):
            c[s:s + 512] = np.exp(-2j * np.pi * f1 * np.outer(i[s:s + 512], times)) @ x
    p = np.abs(c) ** 2
    if p.sum() == 0:
        raise ValueError("no spectral weight in the requested band")
    f = f1 * float(np.arange(1, len(p) + 1) @ p) / float(p.sum())
    return f, 1.0 / f


def evolve_expm(op: ManyBodyOperator, state: np.ndarray, t: float) -> np.ndarray:
    """``exp(-i H t) |state>`` without diagonalising (Krylov action of the exponential)."""
    return sla.expm_multiply(-1j * t * op.matrix.tocsc(), np.asarray(state, dtype=complex))


# --------------------------------------------------------------------------
# coherence-time scans


@dataclass(frozen=True)
class CoherencePoint:
    lam: float
    N: int
    x_inf: float
    f_mean: float
    t_coh: float


def coherence_point(
    lam: float,
    N: int,
    basis: FockBasis | None = None,
    f1: float = 1.0 / 3000.0,
    n_max: int = 12000,
    method: str = "penalty",
    mu: float = 1e2,
    windows=DEFAULT_WINDOWS,
    return_trace: bool = False,
):
    """Build ``|Phi_inf>`` for one ``(N, lambda)``, evolve it and measure ``t_coh``."""
    basis = basis or enumerate_basis(3, N)
    op = build_operator(dirichlet3_terms(lam / N), basis)
    spec = InflectionStateSpec.at_inflection(lam, windows)
    psi = build_inflection_state(spec, op, method=method, mu=mu)
    decomp = diagonalize(op, parity_labels(basis), support=psi)
    tr = evolve_observable(psi, decomp, coherence_time_grid(f1, n_max), f1=f1, n_max=n_max)
    pt = CoherencePoint(float(lam), int(N), spec.x_target, tr.f_mean, tr.t_coh)
    return (pt, tr) if return_trace else pt


def coherence_scan(lambda_grid: Sequence[float], N: int, progress: Callable | None = None,
                   **kwargs) -> list[CoherencePoint]:
    basis = enumerate_basis(3, N)
    out = []
    for lam in lambda_grid:
        pt = coherence_point(float(lam), N, basis=basis, **kwargs)
        out.append(pt)
        if progress is not None:
            progress(pt)
    return out


def slow_gap_exponent(Ns: Sequence[int], lam: float | None = None, **kwargs) -> tuple[float, np.ndarray]:
    """Exponent ``beta`` of ``Delta E ~ N^-beta`` for the slow state, with ``Delta E = 2 pi f_mean``.

    ``lam`` defaults to the critical coupling of the box model. Returns
    ``(beta, Delta E per N)``; ``kwargs`` go to :func:`coherence_point`.
    """
    if len(set(Ns)) < 2:
        raise ValueError("need at least two distinct N")
    if lam is None:
        lam = cnumber.find_lambda_lm_dirichlet()[0]
    dE = np.array([2 * math.pi * coherence_point(lam, int(N), **kwargs).f_mean for N in Ns])
    slope = np.polyfit(np.log(np.asarray(Ns, dtype=float)), np.log(dE), 1)[0]
    return float(-slope), dE


def lambda_at_max(lams: Sequence[float], values: Sequence[float]) -> float:
    """Grid argmax refined by a parabola through the neighbouring points."""
    lams = np.asarray(lams, dtype=float)
    v = np.asarray(values, dtype=float)
    i = int(np.argmax(v))
    if i == 0 or i == len(v) - 1:
        return float(lams[i])
    x0, x1, x2 = lams[i - 1:i + 2]
    y0, y1, y2 = v[i - 1:i + 2]
    denom = (x0 - x1) * (x0 - x2) * (x1 - x2)
    A = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom
    B = (x2**2 * (y0 - y1) + x1**2 * (y2 - y0) + x0**2 * (y1 - y2)) / denom
    if A >= 0:
        return float(x1)
    return float(min(max(-B / (2 * A), x0), x2))


# --------------------------------------------------------------------------
# scaling fit


@dataclass(frozen=True)
class FitResult:
    lambda_lm: float
    a: float
    b: float
    residual: float
    fixed_lambda_lm: bool = False

    def to_dict(self) -> dict:
        return {"lambda_lm": self.lambda_lm, "a": self.a, "b": self.b, "residual": self.residual,
                "fixed_lambda_lm": self.fixed_lambda_lm}


def scaling_model(N, lambda_lm, a, b):
    return lambda_lm + a * np.asarray(N, dtype=float) ** (-b)


def fit_lambda_scaling(points: Sequence[tuple[float, float]], lambda_lm: float | None = None,
                       p0=(1.792, 3.56, 0.61)) -> FitResult:
    """Least-squares fit of ``lambda_N = lambda_lm + a N^-b``.

    With ``lambda_lm`` given only ``(a, b)`` are fitted. ``residual`` is the
    root-mean-square misfit.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must be (N, lambda_N) pairs")
    Ns, ys = pts[:, 0], pts[:, 1]
    if len(np.unique(Ns)) != len(Ns) or len(Ns) < 3:
        raise ValueError("need at least 3 points with distinct N")
    try:
        if lambda_lm is None:
            popt, _ = optimize.curve_fit(scaling_model, Ns, ys, p0=p0,
                                         bounds=([-np.inf, 0.0, 0.0], [np.inf, np.inf, 10.0]),
                                         xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=20000)
            lm, a, b = popt
        else:
            popt, _ = optimize.curve_fit(lambda n, a, b: scaling_model(n, lambda_lm, a, b), Ns, ys,
                                         p0=p0[1:], bounds=([0.0, 0.0], [np.inf, 10.0]),
                                         xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=20000)
            lm, (a, b) = lambda_lm, popt
    except (RuntimeError, ValueError) as exc:
        raise FitError(f"scaling fit failed: {exc}") from exc
    res = float(np.sqrt(np.mean((scaling_model(Ns, lm, a, b) - ys) ** 2)))
    if not (a > 0 and b > 0):
        raise FitError("fit left the a > 0, b > 0 region", last=(lm, a, b))
    return FitResult(float(lm), float(a), float(b), res, lambda_lm is not None)


# --------------------------------------------------------------------------
# position space


def one_body_density(state: np.ndarray, basis: FockBasis) -> np.ndarray:
    """``rho[k, l] = <a_k^+ a_l>`` in a number-conserving state."""
    K = basis.K
    rho = np.zeros((K, K), dtype=complex)
    v = np.asarray(state, dtype=complex)
    for k in range(K):
        for l in range(K):
            op = build_operator([Term(1.0, (k,), (l,))], basis, hermitian=False)
            rho[k, l] = np.vdot(v, op.matrix @ v)
    return rho


def coherent_density_matrix(amplitudes: Sequence[complex]) -> np.ndarray:
    a = np.asarray(amplitudes, dtype=complex)
    return np.outer(a.conj(), a)


def position_density(rho: np.ndarray, z_grid: np.ndarray) -> np.ndarray:
    """``(1/pi) sum_kl rho[k, l] sin(k z/2) sin(l z/2)`` with box modes ``k = 1..K``."""
    z = np.asarray(z_grid, dtype=float)
    if np.any(z < -1e-12) or np.any(z > 2 * np.pi + 1e-12):
        raise ValueError("z must lie in [0, 2 pi]")
    K = rho.shape[0]
    phi = np.sin(np.outer(np.arange(1, K + 1), z) / 2.0)
    return np.real(np.einsum("kz,kl,lz->z", phi, rho, phi)) / np.pi


# --------------------------------------------------------------------------
# periodic model at finite N


@dataclass
class PeriodicCheck:
    N: int
    lambdas: np.ndarray
    n0_fraction: np.ndarray
    gaps: np.ndarray


def periodic_zero_momentum_basis(N: int) -> FockBasis:
    """States ``(m, N - 2m, m)`` over ring modes ``(-1, 0, 1)``."""
    return FockBasis.from_states([(m, N - 2 * m, m) for m in range(N // 2, -1, -1)], N=N)


def _periodic_spectrum(N: int, lam: float, basis: FockBasis, k: int = 2):
    op = build_operator(periodic_terms(1, lam / N), basis)
    return linalg.eigh(op.toarray(), subset_by_index=[0, k - 1])


def periodic_finite_N_checks(N: int, lambda_grid: Sequence[float]) -> PeriodicCheck:
    """Ground-state 0-mode fraction and lowest gap in the zero-momentum sector."""
    basis = periodic_zero_momentum_basis(N)
    n0 = basis.occupations(1).astype(float)
    fr, gaps = [], []
    for lam in lambda_grid:
        E, V = _periodic_spectrum(N, float(lam), basis)
        fr.append(float(V[:, 0] ** 2 @ n0) / N)
        gaps.append(float(E[1] - E[0]))
    return PeriodicCheck(N, np.asarray(lambda_grid, dtype=float), np.array(fr), np.array(gaps))


def periodic_gap_minimum(N: int, bracket=(0.8, 1.6)) -> tuple[float, float]:
    """``(lambda, gap)`` at the minimum of the zero-momentum gap."""
    basis = periodic_zero_momentum_basis(N)

    def gap(lam):
        E, _ = _periodic_spectrum(N, lam, basis)
        return E[1] - E[0]

    lams = np.linspace(*bracket, 81)
    g = np.array([gap(l) for l in lams])
    i = int(np.argmin(g))
    lo, hi = lams[max(i - 1, 0)], lams[min(i + 1, len(lams) - 1)]
    res = optimize.minimize_scalar(gap, bounds=(lo, hi), method="bounded", options={"xatol": 1e-10})
    return float(res.x), float(res.fun)


# --------------------------------------------------------------------------
# external probe


def external_probe_numeric(p: ExternalProbeParams, times: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """``(n_c, n_b)`` from exact two-mode evolution of ``|0>_b |gamma>_c``.

    The coherent state is split into total-number sectors, truncated at
    ``ceil(gamma^2 + 8 gamma)`` or further out until the dropped Poisson tail
    carries less than ``1e-14`` particles; each sector is diagonalised exactly.
    """
    times = np.asarray(times, dtype=float)
    mean = p.gamma**2
    n_top = int(math.ceil(mean + 8 * abs(p.gamma)))
    while stats.poisson.sf(n_top, mean) * (n_top + 1 + mean) > 1e-14:
        n_top += 1
    terms = external_probe_terms(p)
    nb = np.zeros(len(times))
    nc = np.zeros(len(times))
    for n in range(1, n_top + 1):
        weight = float(stats.poisson.pmf(n, mean))
        if weight == 0.0:
            continue
        basis = enumerate_basis(2, n)
        E, V = linalg.eigh(build_operator(terms, basis).toarray())
        start = np.zeros(len(basis))
        start[basis.index_of((0, n))] = 1.0
        c = V.T @ start
        amp = V @ (np.exp(-1j * np.outer(E, times)) * c[:, None])
        prob = np.abs(amp) ** 2
        nb += weight * (basis.occupations(0) @ prob)
        nc += weight * (basis.occupations(1) @ prob)
    return nc, nb
