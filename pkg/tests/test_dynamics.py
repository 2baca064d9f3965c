import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gapless import cnumber
from gapless import dynamics as dyn
from gapless.fock import build_operator, enumerate_basis
from gapless.models import dirichlet3_terms


def _box(lam, N):
    basis = enumerate_basis(3, N)
    return build_operator(dirichlet3_terms(lam / N), basis)


# --------------------------------------------------------------------------
# spectra


def test_free_spectrum():
    d = dyn.diagonalize(build_operator(dirichlet3_terms(0.0), enumerate_basis(3, 2)))
    assert list(d.energies) == [0.5, 1.25, 2.0, 2.5, 3.25, 4.5]


@pytest.mark.parametrize("labels", [False, True])
def test_decomposition_invariants(labels):
    op = _box(2.1, 20)
    d = dyn.diagonalize(op, dyn.parity_labels(op.basis) if labels else None)
    H = op.toarray()
    V, E = d.vectors, d.energies
    assert np.all(np.diff(E) >= 0)
    norm = np.max(np.abs(H))
    assert np.max(np.abs(H @ V - V * E)) <= 1e-9 * norm
    assert np.max(np.abs(V.T @ V - np.eye(len(E)))) <= 1e-10


def test_parity_sectors_reproduce_full_spectrum():
    op = _box(2.5, 24)
    full = dyn.diagonalize(op).energies
    split = dyn.diagonalize(op, dyn.parity_labels(op.basis))
    assert len(split.blocks) == 2
    assert np.allclose(full, split.energies, atol=1e-10)


def test_bad_sector_labels():
    op = _box(2.5, 6)
    with pytest.raises(ValueError):
        dyn.diagonalize(op, dyn.parity_labels(op.basis, mode=0))
    with pytest.raises(ValueError):
        dyn.diagonalize(op, np.zeros(3))


def test_dimension_cap():
    with pytest.raises(ValueError, match="ground_state"):
        dyn.diagonalize(_box(2.0, 10), cap=20)


def test_ground_energy_decreases_with_coupling():
    basis = enumerate_basis(3, 10)
    e = [dyn.ground_state(build_operator(dirichlet3_terms(a), basis))[0][0] for a in np.linspace(0, 0.5, 11)]
    assert np.all(np.diff(e) < 0)


def test_iterative_ground_state_matches_dense(monkeypatch):
    op = _box(3.0, 30)
    E_dense, V_dense = dyn.ground_state(op, k=2)
    monkeypatch.setattr(dyn, "DENSE_LIMIT", 10)
    E_it, V_it = dyn.ground_state(op, k=2)
    assert np.allclose(E_dense, E_it, atol=1e-10)
    assert abs(abs(V_dense[:, 0] @ V_it[:, 0]) - 1) <= 1e-10


def test_ground_state_occupations_small():
    occ = dyn.ground_state_occupations([0.5, 1.0], 40)
    assert occ.shape == (2, 3)
    assert np.allclose(occ.sum(axis=1), 1.0)
    assert np.all(occ[:, 0] >= 0.95)


def test_transition_location():
    lams = np.array([1.0, 2.0, 3.0, 4.0])
    occ = np.zeros((4, 3))
    occ[:, 1] = [0.0, 0.01, 0.5, 0.52]
    assert dyn.transition_location(lams, occ) == 2.5


# --------------------------------------------------------------------------
# slow state


def test_spec_validation():
    with pytest.raises(ValueError):
        dyn.InflectionStateSpec(0.3, (0.6, 0.3, 0.1), (0.4, 0.0, 0.2))
    with pytest.raises(ValueError):
        dyn.InflectionStateSpec(0.3, (0.6, 0.3, 0.2))


def test_inflection_spec_at_critical_coupling():
    spec = dyn.InflectionStateSpec.at_inflection(2.083)
    assert spec.windows == (0.4, 0.375, 0.225)
    assert np.allclose(spec.center, (0.67, 0.32, 0.01), atol=0.02)
    assert sum(spec.center) == pytest.approx(1.0, abs=1e-15)
    basis = enumerate_basis(3, 60)
    idx = spec.subspace(basis)
    assert 0 < len(idx) < 1891


def test_slow_state_contract():
    op = _box(2.083, 60)
    spec = dyn.InflectionStateSpec.at_inflection(2.083)
    psi = dyn.build_inflection_state(spec, op)
    inside = np.zeros(len(op.basis), bool)
    inside[spec.subspace(op.basis)] = True
    assert np.all(psi[~inside] == 0)
    assert np.linalg.norm(psi) == pytest.approx(1.0, abs=1e-14)
    occ = (psi**2) @ op.basis.states / 60
    assert abs(occ[1] - spec.x_target) <= 1e-3
    assert np.allclose(occ, (0.67, 0.32, 0.01), atol=0.02)


@pytest.mark.parametrize("method", ["shifted", "lagrange"])
def test_exact_constraint_methods(method):
    op = _box(2.1, 40)
    spec = dyn.InflectionStateSpec.at_inflection(2.1)
    psi = dyn.build_inflection_state(spec, op, method=method, mu=1e3)
    x = psi**2 @ op.basis.occupations(1) / 40
    assert abs(x - spec.x_target) <= 1e-9


def test_penalty_failure_reports_violation():
    # at N=40 the occupation grid is too coarse for the plain penalty here
    op = _box(2.3, 40)
    spec = dyn.InflectionStateSpec.at_inflection(2.3)
    with pytest.raises(dyn.ConstraintError) as info:
        dyn.build_inflection_state(spec, op, fallback=False)
    assert abs(info.value.violation) > 1e-3
    psi = dyn.build_inflection_state(spec, op)
    assert abs(psi**2 @ op.basis.occupations(1) / 40 - spec.x_target) <= 1e-3


def test_empty_window_and_unknown_method():
    op = _box(2.1, 10)
    spec = dyn.InflectionStateSpec(0.3, (0.65, 0.3, 0.05), (0.01, 0.01, 0.01))
    with pytest.raises(ValueError, match="empty"):
        dyn.build_inflection_state(spec, op)
    with pytest.raises(ValueError):
        dyn.build_inflection_state(dyn.InflectionStateSpec.at_inflection(2.1), op, method="nope")


# --------------------------------------------------------------------------
# evolution


def test_eigenstate_trace_is_constant():
    op = _box(2.0, 12)
    d = dyn.diagonalize(op, dyn.parity_labels(op.basis))
    b = d.blocks[0]
    psi = np.zeros(len(op.basis))
    psi[b.indices] = b.vectors[:, 3]
    tr = dyn.evolve_observable(psi, d, np.linspace(0, 50, 101))
    assert np.ptp(tr.n2_rel) <= 1e-12


def test_two_level_superposition_frequency():
    op = _box(2.0, 12)
    d = dyn.diagonalize(op, dyn.parity_labels(op.basis))
    b = d.blocks[0]
    psi = np.zeros(len(op.basis))
    psi[b.indices] = (b.vectors[:, 0] + b.vectors[:, 1]) / math.sqrt(2)
    w = b.energies[1] - b.energies[0]
    t = np.linspace(0, 4 * 2 * math.pi / w, 401)
    tr = dyn.evolve_observable(psi, d, t)
    n = op.basis.occupations(1) / 12
    v0, v1 = b.vectors[:, 0], b.vectors[:, 1]
    n_b = n[b.indices]
    expected = 0.5 * (v0**2 @ n_b + v1**2 @ n_b) + (v0 * v1) @ n_b * np.cos(w * t)
    assert np.allclose(tr.n2_rel, expected, atol=1e-12)


def test_spectral_evolution_matches_matrix_exponential():
    rng = np.random.default_rng(0)
    op = _box(2.4, 6)
    d = dyn.diagonalize(op)
    psi = rng.normal(size=len(op.basis)) + 1j * rng.normal(size=len(op.basis))
    psi /= np.linalg.norm(psi)
    H = op.toarray()
    e0 = np.vdot(psi, H @ psi).real
    for t in (0.0, 0.7, 13.0, 250.0):
        a = dyn.evolve_state(psi, d, t)
        b = dyn.evolve_expm(op, psi, t)
        assert np.max(np.abs(a - b)) <= 1e-8
        assert abs(np.linalg.norm(a) - 1) <= 1e-10
        assert abs(np.vdot(a, H @ a).real - e0) <= 1e-10 * abs(e0)


def test_sector_restricted_decomposition_gives_same_trace():
    op = _box(2.083, 30)
    psi = dyn.build_inflection_state(dyn.InflectionStateSpec.at_inflection(2.083), op)
    full = dyn.diagonalize(op, dyn.parity_labels(op.basis))
    part = dyn.diagonalize(op, dyn.parity_labels(op.basis), support=psi)
    assert len(part.blocks) == 1 and part.vectors.shape == (len(op.basis), len(part.energies))
    t = np.arange(0, 500, 0.25)
    a = dyn.evolve_observable(psi, full, t).n2_rel
    b = dyn.evolve_observable(psi, part, t).n2_rel
    c = dyn.evolve_observable(psi.astype(complex), full, t).n2_rel
    assert np.max(np.abs(a - b)) <= 1e-14 and np.max(np.abs(a - c)) <= 1e-13


def test_trace_bounds_and_input_checks():
    op = _box(2.083, 30)
    d = dyn.diagonalize(op, dyn.parity_labels(op.basis))
    psi = dyn.build_inflection_state(dyn.InflectionStateSpec.at_inflection(2.083), op)
    tr = dyn.evolve_observable(psi, d, np.arange(0, 200, 0.5))
    assert np.all((tr.n2_rel >= 0) & (tr.n2_rel <= 1))
    with pytest.raises(ValueError):
        dyn.evolve_observable(2 * psi, d, np.arange(10.0))
    with pytest.raises(ValueError):
        dyn.evolve_observable(psi, d, np.array([0.0, 1.0, 3.0]))


# --------------------------------------------------------------------------
# spectroscopy


def test_mean_frequency_of_sinusoid():
    f1 = 1 / 300
    t = dyn.coherence_time_grid(f1, 200)
    x = 0.3 + 0.01 * np.sin(2 * math.pi * 10 * f1 * t)
    f, tc = dyn.mean_frequency(x, f1, 200, times=t)
    assert abs(f - 10 * f1) <= f1
    assert tc * f == pytest.approx(1.0, rel=1e-15)


def test_mean_frequency_direct_sum_matches_fft():
    f1 = 1 / 300
    t = dyn.coherence_time_grid(f1, 100)
    rng = np.random.default_rng(1)
    x = rng.normal(size=len(t))
    fast = dyn.mean_frequency(x, f1, 100, times=t)
    # a slightly longer window forces the explicit sum
    t2 = np.arange(len(t) + 3) * (t[1] - t[0])
    x2 = np.r_[x, x[:3]]
    slow = dyn.mean_frequency(x2, f1 * len(t) / len(t2), 100, times=t2)
    assert np.isfinite(slow[0]) and slow[0] > 0
    i = np.arange(1, 101)
    direct = np.exp(-2j * math.pi * f1 * np.outer(i, t)) @ (x - x.mean())
    p = np.abs(direct) ** 2
    assert fast[0] == pytest.approx(f1 * (i @ p) / p.sum(), rel=1e-12)


def test_mean_frequency_errors():
    t = dyn.coherence_time_grid(1 / 30, 10)
    with pytest.raises(ValueError, match="constant"):
        dyn.mean_frequency(np.full(len(t), 0.3), 1 / 30, 10, times=t)
    with pytest.raises(ValueError):
        dyn.mean_frequency(np.sin(t), 1 / 30, 10, times=t[::-1])
    with pytest.raises(ValueError, match="period"):
        dyn.mean_frequency(np.sin(t[:5]), 1 / 30, 10, times=t[:5])


def test_coherence_time_stable_under_doubling_n_max():
    a = dyn.coherence_point(2.1, 40)
    b = dyn.coherence_point(2.1, 40, n_max=24000)
    assert abs(b.t_coh / a.t_coh - 1) <= 0.05


def test_lambda_at_max():
    lams = np.linspace(1.9, 2.3, 41)
    v = -((lams - 2.0834) ** 2)
    assert dyn.lambda_at_max(lams, v) == pytest.approx(2.0834, abs=1e-12)
    assert dyn.lambda_at_max([1, 2, 3], [3, 2, 1]) == 1


def test_coherence_point_single_run():
    pt, tr = dyn.coherence_point(2.05, 20, f1=1 / 300, n_max=400, return_trace=True)
    assert pt.t_coh * pt.f_mean == pytest.approx(1.0)
    assert len(tr.times) == 800 and pt.N == 20


def test_slow_gap_exponent_is_positive():
    beta, dE = dyn.slow_gap_exponent([30, 40, 50, 60])
    assert beta > 0
    assert np.all(dE > 0)
    with pytest.raises(ValueError):
        dyn.slow_gap_exponent([40, 40])


# --------------------------------------------------------------------------
# scaling fit


def test_fit_recovers_exact_model():
    Ns = np.array([40, 50, 60, 70, 80, 90])
    pts = list(zip(Ns, dyn.scaling_model(Ns, 1.792, 3.56, 0.61)))
    r = dyn.fit_lambda_scaling(pts)
    assert r.lambda_lm == pytest.approx(1.792, abs=1e-6)
    assert r.a == pytest.approx(3.56, abs=1e-6) and r.b == pytest.approx(0.61, abs=1e-6)
    assert r.residual <= 1e-9
    fixed = dyn.fit_lambda_scaling(pts, lambda_lm=1.792)
    assert fixed.fixed_lambda_lm and fixed.a == pytest.approx(3.56, abs=1e-6)


def test_fit_input_errors():
    with pytest.raises(ValueError):
        dyn.fit_lambda_scaling([(40, 2.1), (50, 2.0)])
    with pytest.raises(ValueError):
        dyn.fit_lambda_scaling([(40, 2.1), (40, 2.0), (50, 2.0)])


# --------------------------------------------------------------------------
# position space


def test_density_single_mode():
    N = 7
    basis = enumerate_basis(3, N)
    psi = np.zeros(len(basis))
    psi[basis.index_of((N, 0, 0))] = 1.0
    rho = dyn.one_body_density(psi, basis)
    z = np.linspace(0, 2 * math.pi, 101)
    assert np.allclose(dyn.position_density(rho, z), N / math.pi * np.sin(z / 2) ** 2, atol=1e-13)
    assert dyn.position_density(rho, np.array([0.0, 2 * math.pi])) == pytest.approx([0.0, 0.0], abs=1e-13)
    with pytest.raises(ValueError):
        dyn.position_density(rho, np.array([7.0]))


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=10, deadline=None)
def test_density_integrates_to_N(seed):
    rng = np.random.default_rng(seed)
    basis = enumerate_basis(3, 8)
    psi = rng.normal(size=len(basis))
    psi /= np.linalg.norm(psi)
    rho = dyn.one_body_density(psi, basis)
    assert np.allclose(rho, rho.conj().T, atol=1e-13)
    assert np.trace(rho).real == pytest.approx(8.0, abs=1e-12)
    z = np.linspace(0, 2 * math.pi, 2001)
    assert np.trapezoid(dyn.position_density(rho, z), z) == pytest.approx(8.0, abs=1e-6 * 8)


def test_critical_state_family_is_nested():
    _, p = cnumber.find_lambda_lm_dirichlet()
    z = np.linspace(0, 2 * math.pi, 401)
    curves = []
    for dx in (-0.02, 0.0, 0.02):
        q = cnumber.CNumberPoint(p.x + dx, p.theta, p.delta2, p.delta3)
        curves.append(dyn.position_density(dyn.coherent_density_matrix(cnumber.pattern_vector(q, 60)), z))
    peak = [c.max() for c in curves]
    assert peak[0] < peak[1] < peak[2]
    for c in curves:
        assert np.trapezoid(c, z) == pytest.approx(60, rel=1e-6)


# --------------------------------------------------------------------------
# ring model and external probe


def test_zero_momentum_sector():
    b = dyn.periodic_zero_momentum_basis(10)
    assert len(b) == 6
    assert all(s[0] == s[2] for s in b.states)


def test_periodic_checks_small():
    chk = dyn.periodic_finite_N_checks(200, [0.5, 2.0])
    assert chk.n0_fraction[0] > 0.95 and chk.n0_fraction[1] < 0.85
    assert np.all(chk.gaps > 0)
    lam, gap = dyn.periodic_gap_minimum(200)
    assert 0.9 < lam < 1.3 and gap < chk.gaps[0]


def test_external_probe_sectors():
    from gapless.models import ExternalProbeParams, external_probe_closed_form

    p = ExternalProbeParams(0.2, 0.5, 0.3, 1.2)
    t = np.linspace(0, 50, 11)
    nc, nb = dyn.external_probe_numeric(p, t)
    ncc, nbc = external_probe_closed_form(p, t)
    assert np.allclose(nc, ncc, atol=1e-10) and np.allclose(nb, nbc, atol=1e-10)
    assert np.allclose(nc + nb, 1.44, atol=1e-12)
