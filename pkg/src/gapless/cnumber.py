"""The c-number (Bogoliubov) energy landscape.

Mode operators are replaced by complex amplitudes; one condensate mode is fixed
by particle number, ``a_0 -> sqrt(N - sum |a_k|^2)``. For the three-mode box
model the landscape is parametrised by :class:`CNumberPoint`::

    a_1 = sqrt(N (1-x)) cos(theta)
    a_2 = sqrt(N x) exp(i delta2)
    a_3 = sqrt(N (1-x)) sin(theta) exp(i delta3)

and all energies below are per particle unless stated otherwise. Internally
the two preferred phase branches ``delta3 in {0, pi}`` are folded into a signed
angle ``theta in [-pi/2, pi/2]`` (``delta3 = pi`` is ``theta -> -theta``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import optimize

from .fock import Term

__all__ = [
    "CNumberPoint",
    "LandscapeResult",
    "HessianBlock",
    "h_bog",
    "h_bog_generic",
    "substitute",
    "wirtinger_derivatives",
    "condensate_derivatives",
    "hessian_blocks",
    "gradient_hessian",
    "theta_valley",
    "marginal_curve",
    "marginal_slope",
    "inflection_point",
    "stationary_points",
    "ground_state_scan",
    "find_lambda_gs",
    "find_lambda_lm_dirichlet",
    "find_lambda_lm_periodic",
    "periodic_det_m",
    "pattern_vector",
    "coherent_overlap",
    "distinguishable",
    "occupation_fractions",
    "NoStationaryPoint",
]

HALF_PI = 0.5 * math.pi


class NoStationaryPoint(ValueError):
    """No stationary point with ``x != 0`` exists at the requested coupling."""


@dataclass(frozen=True)
class CNumberPoint:
    x: float
    theta: float
    delta2: float = 0.0
    delta3: float = 0.0

    def __post_init__(self):
        if not -1e-12 <= self.x <= 1 + 1e-12:
            raise ValueError(f"x={self.x} outside [0, 1]")
        if not -1e-12 <= self.theta <= HALF_PI + 1e-12:
            raise ValueError(f"theta={self.theta} outside [0, pi/2]")

    @classmethod
    def from_signed(cls, x: float, theta: float) -> "CNumberPoint":
        """Map a signed angle onto ``theta >= 0`` with ``delta3 in {0, pi}``."""
        x = min(max(float(x), 0.0), 1.0)
        if theta < 0:
            return cls(x, min(-float(theta), HALF_PI), 0.0, math.pi)
        return cls(x, min(float(theta), HALF_PI), 0.0, 0.0)

    @property
    def signed_theta(self) -> float:
        """Signed angle; only meaningful on the ``delta2 = 0, delta3 in {0, pi}`` branches."""
        return -self.theta if math.cos(self.delta3) < 0 else self.theta

    def to_dict(self) -> dict:
        return {"x": self.x, "theta": self.theta, "delta2": self.delta2, "delta3": self.delta3}


@dataclass(frozen=True)
class HessianBlock:
    """Second derivatives of the c-number function in complex amplitudes.

    ``A[k, j] = d2H / da_k* da_j`` and ``B[k, j] = d2H / da_k da_j``;
    ``M = [[B*, A], [A^T, B]]``.
    """

    A: np.ndarray
    B: np.ndarray

    @property
    def M(self) -> np.ndarray:
        return np.block([[self.B.conj(), self.A], [self.A.T, self.B]])

    @property
    def bdg(self) -> np.ndarray:
        """Hermitian form ``[[A, B*], [B, A*]]`` (the real Hessian up to congruence)."""
        return np.block([[self.A, self.B.conj()], [self.B, self.A.conj()]])

    def det_m(self) -> float:
        return float(np.real(np.linalg.det(self.M)))


@dataclass
class LandscapeResult:
    lam: float
    minima: list[tuple[CNumberPoint, float]]
    inflection: tuple[CNumberPoint, float] | None = None
    marginal_curve: np.ndarray = field(default_factory=lambda: np.empty((0, 2)))

    @property
    def global_minimum(self) -> tuple[CNumberPoint, float]:
        return min(self.minima, key=lambda m: m[1])

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "minima": [{"point": p.to_dict(), "energy": e} for p, e in self.minima],
            "inflection": None
            if self.inflection is None
            else {"point": self.inflection[0].to_dict(), "detM": self.inflection[1]},
            "marginal_curve": [[float(a), float(b)] for a, b in self.marginal_curve],
        }


# --------------------------------------------------------------------------
# closed forms for the three-mode box model


def h_bog(point: CNumberPoint, lam: float) -> float:
    """Energy per particle of the three-mode box model at a landscape point."""
    return _h(point.x, point.theta, lam, point.delta2, point.delta3)


def _h(x, th, lam, d2=0.0, d3=0.0):
    s2 = np.sin(th) ** 2
    c2 = np.cos(th) ** 2
    kin = 0.25 * (1 + 3 * x + 8 * (1 - x) * s2)
    inter = (
        np.sin(2 * th) ** 2 * (1 - x) ** 2 * (0.5 + np.cos(2 * d3))
        + 3
        + 2 * x
        - 2 * x * x
        + 4 * x * (1 - x) * (np.cos(2 * d2) * c2 + np.cos(2 * d2 - 2 * d3) * s2)
        + 2 * np.sin(2 * th) * (1 - x) * (x * np.cos(2 * d2 - d3) + np.cos(d3) * (2 * x - (1 - x) * c2))
    )
    return kin - lam / 8.0 * inter


def gradient_hessian(point: CNumberPoint, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Gradient and Hessian per particle in ``(x, theta)`` at zero phases.

    ``delta3 = pi`` is accepted and handled through the signed angle.
    """
    if point.delta2 != 0.0 or point.delta3 not in (0.0, math.pi):
        raise ValueError("closed forms hold only for delta2 = 0 and delta3 in {0, pi}")
    sign = -1.0 if point.delta3 == math.pi else 1.0
    g, H = _grad_hess(point.x, sign * point.theta, lam)
    g[1] *= sign
    H[0, 1] *= sign
    H[1, 0] *= sign
    return g, H


def _grad(x, th, lam):
    s2, s4, c2, c4 = np.sin(2 * th), np.sin(4 * th), np.cos(2 * th), np.cos(4 * th)
    hx = (
        -16 * lam * s2
        - 2 * lam * s4
        + 16 * c2
        - 9 * lam
        + 28 * lam * x * s2
        + 2 * lam * x * s4
        + 3 * lam * (x - 1) * c4
        + 21 * lam * x
        - 4
    ) / 16.0
    ht = 0.25 * (x - 1) * (-8 * s2 + lam * (x - 1) * c4 - lam * c2 * (3 * (x - 1) * s2 - 7 * x + 1))
    return hx, ht


def _hess(x, th, lam):
    s2, s4, c2, c4 = np.sin(2 * th), np.sin(4 * th), np.cos(2 * th), np.cos(4 * th)
    hxx = lam / 16.0 * (28 * s2 + 2 * s4 + 3 * c4 + 21)
    hxt = 0.25 * (-8 * s2 + 2 * lam * (7 * x - 4) * c2 + lam * (x - 1) * (2 * c4 - 3 * s4))
    htt = 0.5 * (1 - x) * (8 * c2 + lam * ((7 * x - 1) * s2 + 2 * (x - 1) * s4 + 3 * (x - 1) * c4))
    return hxx, hxt, htt


def _grad_hess(x, th, lam):
    hx, ht = _grad(x, th, lam)
    hxx, hxt, htt = _hess(x, th, lam)
    return np.array([hx, ht]), np.array([[hxx, hxt], [hxt, htt]])


def _det_hess(x, th, lam):
    hxx, hxt, htt = _hess(x, th, lam)
    return hxx * htt - hxt * hxt


def pattern_vector(point: CNumberPoint, N: float, include_phases: bool = True) -> np.ndarray:
    """Condensate amplitudes ``(a_1, a_2, a_3)`` of a landscape point."""
    d2 = point.delta2 if include_phases else 0.0
    d3 = point.delta3 if include_phases else 0.0
    r = math.sqrt(N)
    return np.array(
        [
            r * math.sqrt(1 - point.x) * math.cos(point.theta),
            r * math.sqrt(point.x) * np.exp(1j * d2),
            r * math.sqrt(1 - point.x) * math.sin(point.theta) * np.exp(1j * d3),
        ],
        dtype=complex,
    )


def occupation_fractions(point: CNumberPoint) -> np.ndarray:
    """Relative occupations ``(n1, n2, n3) / N`` of a landscape point."""
    x, th = point.x, point.theta
    return np.array([(1 - x) * math.cos(th) ** 2, x, (1 - x) * math.sin(th) ** 2])


# --------------------------------------------------------------------------
# generic substitution for arbitrary term lists


def substitute(terms: Sequence[Term], amplitudes: Sequence[complex]) -> complex:
    """Replace every ``a_k`` by ``amplitudes[k]`` (and ``a_k^+`` by its conjugate).

    For a normal-ordered operator this equals the coherent-state expectation value.
    """
    a = np.asarray(amplitudes, dtype=complex)
    ac = a.conj()
    total = 0j
    for t in terms:
        v = complex(t.coefficient)
        for c in t.creators:
            v *= ac[c]
        for n in t.annihilators:
            v *= a[n]
        total += v
    return total


def _full_amplitudes(amplitudes, N, condensate, K):
    b = np.asarray(amplitudes, dtype=complex)
    if len(b) != K - 1:
        raise ValueError(f"expected {K - 1} amplitudes, got {len(b)}")
    depleted = float(np.sum(np.abs(b) ** 2))
    if depleted > N * (1 + 1e-12):
        raise ValueError(f"sum |a_k|^2 = {depleted} exceeds N = {N}")
    full = np.insert(b, condensate, math.sqrt(max(N - depleted, 0.0)))
    return full


def _mode_count(terms: Sequence[Term]) -> int:
    return 1 + max(m for t in terms for m in t.modes())


def h_bog_generic(
    terms: Sequence[Term],
    amplitudes: Sequence[complex],
    N: float,
    condensate: int = 0,
    n_modes: int | None = None,
) -> float:
    """Total c-number energy with the condensate mode fixed by number conservation.

    ``amplitudes`` lists the non-condensate modes in order.
    """
    K = n_modes or _mode_count(terms)
    full = _full_amplitudes(amplitudes, N, condensate, K)
    return float(substitute(terms, full).real)


def wirtinger_derivatives(terms: Sequence[Term], amplitudes: Sequence[complex]):
    """Value, gradient and Hessian of the substituted polynomial in ``z = (a, a*)``.

    ``a`` and ``a*`` are treated as independent variables (Wirtinger calculus).
    Returns ``(value, grad[2K], hess[2K, 2K])``.
    """
    a = np.asarray(amplitudes, dtype=complex)
    K = len(a)
    z = np.concatenate([a, a.conj()])
    val = 0j
    grad = np.zeros(2 * K, dtype=complex)
    hess = np.zeros((2 * K, 2 * K), dtype=complex)
    for t in terms:
        e = np.zeros(2 * K, dtype=int)
        for n in t.annihilators:
            e[n] += 1
        for c in t.creators:
            e[K + c] += 1
        vars_ = np.nonzero(e)[0]
        c0 = complex(t.coefficient)
        val += c0 * np.prod(z[vars_] ** e[vars_])
        for p in vars_:
            ep = e.copy()
            ep[p] -= 1
            grad[p] += c0 * e[p] * np.prod(z[vars_] ** ep[vars_])
            for q in vars_:
                eq = ep.copy()
                if eq[q] == 0:
                    continue
                coef = e[p] * eq[q]
                eq[q] -= 1
                hess[p, q] += c0 * coef * np.prod(z[vars_] ** eq[vars_])
    return val, grad, hess


def condensate_derivatives(
    terms: Sequence[Term],
    amplitudes: Sequence[complex],
    N: float,
    condensate: int = 0,
    n_modes: int | None = None,
):
    """Derivatives of :func:`h_bog_generic` in the non-condensate amplitudes.

    Returns ``(value, grad, hess)`` over ``w = (b, b*)`` where ``b`` are the
    ``K - 1`` free amplitudes; the condensate ``sqrt(N - sum |b|^2)`` enters by
    the chain rule, exactly (no expansion in 1/N).
    """
    K = n_modes or _mode_count(terms)
    full = _full_amplitudes(amplitudes, N, condensate, K)
    s = full[condensate].real
    if s <= 0:
        raise ValueError("condensate mode is empty; the substitution is singular there")
    b = np.delete(full, condensate)
    m = K - 1
    val, g, H = wirtinger_derivatives(terms, full)

    # y = (a_0..a_{K-1}, a*_0..a*_{K-1}) as a function of w = (b, b*)
    free = [k for k in range(K) if k != condensate]
    J = np.zeros((2 * K, 2 * m), dtype=complex)
    for i, k in enumerate(free):
        J[k, i] = 1.0
        J[K + k, m + i] = 1.0
    ds = np.concatenate([-b.conj(), -b]) / (2 * s)  # ds/db_i, ds/db*_i
    J[condensate, :] = ds
    J[K + condensate, :] = ds
    u = np.concatenate([b.conj(), b])
    S = -np.outer(u, u) / (4 * s**3)  # d2s / dw_p dw_q
    for i in range(m):
        S[i, m + i] -= 1.0 / (2 * s)
        S[m + i, i] -= 1.0 / (2 * s)
    grad = J.T @ g
    hess = J.T @ H @ J + (g[condensate] + g[K + condensate]) * S
    return float(val.real), grad, hess


def hessian_blocks(
    terms: Sequence[Term],
    amplitudes: Sequence[complex],
    N: float,
    condensate: int = 0,
    n_modes: int | None = None,
):
    """``(value, linear, HessianBlock)`` of the landscape at a point.

    ``linear[k] = dH / db_k``; the blocks use the free amplitudes only.
    """
    val, grad, hess = condensate_derivatives(terms, amplitudes, N, condensate, n_modes)
    m = len(grad) // 2
    A = hess[m:, :m]  # d2/db*_k db_j
    B = hess[:m, :m]
    return val, grad[:m], HessianBlock(A=A, B=B)


# --------------------------------------------------------------------------
# landscape searches for the three-mode box model

_THETA_GRID = np.linspace(-HALF_PI, HALF_PI, 361)
_BRANCH_BOUNDS = {None: (-HALF_PI, HALF_PI), "+": (0.0, HALF_PI), "-": (-HALF_PI, 0.0)}


def theta_valley(x: float, lam: float, branch: str | None = None) -> float:
    """Signed angle minimising the energy at fixed ``x``.

    ``branch=None`` searches both phase branches; ``"+"`` keeps ``delta3 = 0``
    (``theta >= 0``) and ``"-"`` keeps ``delta3 = pi``.
    """
    lo_b, hi_b = _BRANCH_BOUNDS[branch]
    grid = _THETA_GRID[(_THETA_GRID >= lo_b) & (_THETA_GRID <= hi_b)]
    vals = _h(x, grid, lam)
    i = int(np.argmin(vals))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, len(grid) - 1)]
    res = optimize.minimize_scalar(lambda t: _h(x, t, lam), bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-12})
    th = float(res.x)
    # Newton polish on dH/dtheta = 0
    for _ in range(8):
        _, ht = _grad(x, th, lam)
        _, _, htt = _hess(x, th, lam)
        if htt <= 0:
            break
        th_new = min(max(th - ht / htt, lo_b), hi_b)
        if abs(th_new - th) < 1e-15:
            break
        th = th_new
    return th


def marginal_curve(lam: float, n_points: int = 400) -> np.ndarray:
    """``(x, min_theta E(x, theta)/N)`` on a uniform grid of ``n_points`` in ``[0, 1]``."""
    xs = np.linspace(0.0, 1.0, n_points)
    return np.array([(x, _h(x, theta_valley(x, lam), lam)) for x in xs])


def marginal_slope(x: float, lam: float, branch: str | None = "+") -> float:
    """``d/dx`` of the marginal curve on one phase branch (envelope theorem)."""
    return float(_grad(x, theta_valley(x, lam, branch), lam)[0])


def _polish_inflection(x, th, lam):
    def f(v):
        return [_grad(v[0], v[1], lam)[1], _det_hess(v[0], v[1], lam)]

    sol = optimize.root(f, [x, th], method="hybr", options={"xtol": 1e-14})
    if sol.success and 0 < sol.x[0] < 1:
        return float(sol.x[0]), float(sol.x[1])
    return x, th


def _interior_branch_slopes(lam: float, x_range, n: int = 91):
    """Marginal slopes on the ``delta3 = 0`` branch where its valley is off the ``theta = 0`` edge."""
    xs = np.linspace(*x_range, n)
    th = np.array([theta_valley(x, lam, "+") for x in xs])
    keep = th > 1e-6
    if keep.sum() < 3:
        raise NoStationaryPoint(f"no interior theta > 0 valley at lambda={lam}")
    xs = xs[keep]
    return xs, np.array([_grad(x, t, lam)[0] for x, t in zip(xs, th[keep])])


def inflection_point(lam: float, x_range=(0.05, 0.95)) -> CNumberPoint:
    """Inflection point ``x_inf(lam)`` of the marginal curve.

    It is where the marginal slope is smallest, equivalently ``dH/dtheta = 0``
    and ``det Hess(x, theta) = 0``. It is stationary only at ``lam_lm``.
    Raises :class:`NoStationaryPoint` when the ``theta > 0`` valley has no
    smooth inflection (at large ``lam`` the valley ends before reaching one).
    """
    xs, slopes = _interior_branch_slopes(lam, x_range)
    i = int(np.argmin(slopes))
    if i == 0:
        raise NoStationaryPoint(f"marginal slope has no interior minimum at lambda={lam}")
    lo, hi = xs[i - 1], xs[min(i + 1, len(xs) - 1)]
    res = optimize.minimize_scalar(lambda x: marginal_slope(x, lam), bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-10})
    x = float(res.x)
    x, th = _polish_inflection(x, theta_valley(x, lam, "+"), lam)
    return CNumberPoint.from_signed(x, th)


def stationary_points(lam: float) -> dict[str, CNumberPoint]:
    """Interior stationary points on the ``theta > 0`` valley: ``{"minimum": ..., "saddle": ...}``.

    The saddle is reported only while the valley is smooth through it.
    Raises :class:`NoStationaryPoint` below ``lam_lm``.
    """
    xs, slopes = _interior_branch_slopes(lam, (0.02, 1.0 - 1e-9), n=197)
    i = int(np.argmin(slopes))
    try:
        # close to lambda_lm the negative-slope window is narrower than the grid
        xi = inflection_point(lam).x
        si = marginal_slope(xi, lam)
        if si < slopes[i]:
            i = int(np.searchsorted(xs, xi))
            xs = np.insert(xs, i, xi)
            slopes = np.insert(slopes, i, si)
    except NoStationaryPoint:
        pass
    if slopes[i] > 0:
        raise NoStationaryPoint(f"no x != 0 stationary point at lambda={lam}")
    f = lambda x: marginal_slope(x, lam)  # noqa: E731
    out = {}
    j = i + int(np.argmax(slopes[i:] > 0))
    if slopes[j] > 0:
        x = optimize.brentq(f, xs[j - 1], xs[j], xtol=1e-15, rtol=4 * np.finfo(float).eps)
        out["minimum"] = _stationary_at(x, lam)
    if i > 0 and np.any(slopes[:i] > 0):
        j = int(np.nonzero(slopes[:i] > 0)[0][-1])
        x = optimize.brentq(f, xs[j], xs[j + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps)
        out["saddle"] = _stationary_at(x, lam)
    if "minimum" not in out:
        raise NoStationaryPoint(f"no x != 0 minimum at lambda={lam}")
    return out


def _stationary_at(x: float, lam: float) -> CNumberPoint:
    x, th = _polish_stationary(x, theta_valley(x, lam, "+"), lam)
    return CNumberPoint.from_signed(x, th)


def _polish_stationary(x, th, lam):
    v = np.array([x, th])
    for _ in range(20):
        g, H = _grad_hess(v[0], v[1], lam)
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            break
        v = v - step
        if np.max(np.abs(step)) < 1e-16:
            break
    if 0 < v[0] < 1 and np.max(np.abs(_grad(v[0], v[1], lam))) < 1e-9:
        return float(v[0]), float(v[1])
    return x, th


def _boundary_minimum(lam: float) -> tuple[float, float]:
    """Minimum on the ``x = 0`` edge: ``(theta_signed, energy)``."""
    th = theta_valley(0.0, lam)
    return th, float(_h(0.0, th, lam))


def _local_minima(lam: float, starts: int = 4) -> list[tuple[float, float, float]]:
    """Multistart box-constrained descent on both phase branches (signed theta)."""
    found: list[tuple[float, float, float]] = []
    fun = lambda v: _h(v[0], v[1], lam)  # noqa: E731

    def jac(v):
        return np.array(_grad(v[0], v[1], lam))

    grid_x = (np.arange(starts) + 0.5) / starts
    grid_t = (np.arange(starts) + 0.5) / starts * HALF_PI
    for sign in (1.0, -1.0):
        for x0 in grid_x:
            for t0 in grid_t:
                res = optimize.minimize(fun, [x0, sign * t0], jac=jac, method="L-BFGS-B",
                                        bounds=[(0.0, 1.0), (-HALF_PI, HALF_PI)],
                                        options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 500})
                x, th = float(res.x[0]), float(res.x[1])
                if x < 1e-7:
                    th, e = _boundary_minimum(lam)
                    x = 0.0
                else:
                    x, th = _polish_stationary(x, th, lam)
                    e = float(_h(x, th, lam))
                if not any(abs(x - a) < 1e-6 and abs(th - b) < 1e-6 for a, b, _ in found):
                    found.append((x, th, e))
    # keep genuine minima only
    keep = []
    for x, th, e in found:
        if x == 0.0:
            if _grad(0.0, th, lam)[0] >= -1e-12 and _hess(0.0, th, lam)[2] >= -1e-9:
                keep.append((x, th, e))
        elif np.all(np.linalg.eigvalsh(_grad_hess(x, th, lam)[1]) >= -1e-9):
            keep.append((x, th, e))
    keep.sort(key=lambda r: r[0])
    return keep


def ground_state_scan(lambda_grid: Sequence[float], n_marginal: int = 400,
                      with_inflection: bool = True) -> list[LandscapeResult]:
    """Minima, inflection point and marginal curve of the landscape per coupling."""
    lams = list(lambda_grid)
    if not lams:
        raise ValueError("lambda grid is empty")
    out = []
    for lam in lams:
        minima = [(CNumberPoint.from_signed(x, th), e) for x, th, e in _local_minima(lam)]
        infl = None
        if with_inflection and lam > 0:
            try:
                p = inflection_point(lam)
                infl = (p, float(_det_hess(p.x, p.signed_theta, lam)))
            except NoStationaryPoint:
                infl = None
        out.append(LandscapeResult(lam, minima, infl, marginal_curve(lam, n_marginal)))
    return out


def _branch_gap(lam: float) -> float:
    """Energy of the ``x != 0`` minimum minus the ``x = 0`` minimum."""
    p = stationary_points(lam)["minimum"]
    return float(h_bog(p, lam)) - _boundary_minimum(lam)[1]


def find_lambda_gs(bracket=(3.0, 4.0)) -> float:
    """Coupling at which the ``x != 0`` minimum becomes the global minimum."""
    a, b = bracket
    fa, fb = _branch_gap(a), _branch_gap(b)
    if fa * fb > 0:
        raise ValueError(f"bracket {bracket} does not enclose the level crossing")
    return float(optimize.brentq(_branch_gap, a, b, xtol=1e-13, rtol=4 * np.finfo(float).eps))


def find_lambda_lm_dirichlet(lam_hi: float = 2.5, lam_lo: float = 1.5) -> tuple[float, CNumberPoint]:
    """Smallest coupling with an ``x != 0`` stationary point (the stationary inflection point)."""

    def g(lam):
        p = inflection_point(lam)
        return marginal_slope(p.x, lam)

    if g(lam_hi) >= 0 or g(lam_lo) <= 0:
        raise ValueError("bracket does not contain the stationary inflection point")
    lam = optimize.brentq(g, lam_lo, lam_hi, xtol=1e-12)
    p = inflection_point(lam)

    def F(v):
        x, th, la = v
        hx, ht = _grad(x, th, la)
        return [hx, ht, _det_hess(x, th, la)]

    sol = optimize.root(F, [p.x, p.signed_theta, lam], method="hybr", options={"xtol": 1e-15})
    if sol.success and np.max(np.abs(F(sol.x))) < 1e-12:
        x, th, lam = (float(v) for v in sol.x)
    else:
        x, th = p.x, p.signed_theta
    return float(lam), CNumberPoint.from_signed(x, th)


def periodic_det_m(lam: float) -> float:
    """``det M`` of the three-mode ring landscape at the uniform condensate, ``4 (lam - 1)``."""
    A, B = 2.0 - lam, -lam
    return float(np.linalg.det(np.array([[B, A], [A, B]])))


def find_lambda_lm_periodic() -> float:
    """Coupling where ``det M = 4 (lam - 1)`` vanishes at ``a_1 = 0``."""
    return float(optimize.brentq(periodic_det_m, 0.0, 4.0, xtol=1e-15))


# --------------------------------------------------------------------------
# coherent states


def coherent_overlap(a: Sequence[complex], b: Sequence[complex]) -> float:
    """``|<a|b>|^2 = exp(-sum |a_k - b_k|^2)``."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        raise ValueError("amplitude vectors differ in length")
    return float(np.exp(-np.sum(np.abs(a - b) ** 2)))


def distinguishable(a: Sequence[complex], b: Sequence[complex], threshold: float = 9.0) -> bool:
    """Whether two coherent states count as distinct patterns (``sum |a - b|^2 >= threshold``)."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    return bool(np.sum(np.abs(a - b) ** 2) >= threshold)
