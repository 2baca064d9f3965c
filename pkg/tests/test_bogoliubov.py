import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _oracles import rel_err, wirtinger_fd
from gapless import bogoliubov as bg
from gapless import cnumber
from gapless.cnumber import CNumberPoint
from gapless.models import dirichlet3_terms, periodic_terms

PERIODIC_LAMBDAS = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.99]


def _eta(K):
    return np.diag(np.r_[np.ones(K), -np.ones(K)])


@pytest.mark.parametrize("lam", PERIODIC_LAMBDAS)
def test_periodic_spectrum_oracle(lam):
    res = bg.symplectic_diagonalize(bg.periodic_quadratic(lam, 3))
    expected = np.sort(np.repeat(bg.periodic_spectrum(lam, [1, 2, 3]), 2))
    assert np.max(np.abs(res.energies - expected)) <= 1e-9
    assert res.symplectic_residual <= 1e-9
    T = res.T
    assert np.max(np.abs(T @ _eta(6) @ T.conj().T - _eta(6))) <= 1e-9


@pytest.mark.parametrize("lam", [0.3, 0.75, 0.99])
def test_periodic_u_v_closed_forms(lam):
    res = bg.symplectic_diagonalize(bg.periodic_quadratic(lam, 3))
    for k in (1, 2, 3):
        eps = bg.periodic_spectrum(lam, k)
        cols = np.nonzero(np.abs(res.energies - eps) < 1e-9)[0]
        assert len(cols) == 2
        u2 = 0.5 * (1 + (k * k - lam / 2) / eps)
        v2 = 0.5 * ((k * k - lam / 2) / eps - 1)
        assert np.sum(np.abs(res.V[:, cols]) ** 2) == pytest.approx(2 * u2, abs=1e-9)
        assert np.sum(np.abs(res.U[:, cols]) ** 2) == pytest.approx(2 * v2, abs=1e-9)


def test_periodic_examples():
    q0 = bg.periodic_quadratic(0.0, 2)
    assert np.all(q0.B == 0)
    assert np.allclose(bg.symplectic_diagonalize(q0).energies, [1, 1, 4, 4], atol=1e-14)
    assert bg.symplectic_diagonalize(bg.periodic_quadratic(0.75, 1)).gap == pytest.approx(0.5, abs=1e-12)
    crit = bg.symplectic_diagonalize(bg.periodic_quadratic(1.0, 3))
    assert crit.gap <= 1e-8
    assert crit.zero_modes == [0, 1]
    with pytest.raises(bg.UnstableExpansion):
        bg.symplectic_diagonalize(bg.periodic_quadratic(1.5, 1))
    with pytest.raises(ValueError):
        bg.periodic_quadratic(-0.1, 1)


def test_periodic_generic_expansion_matches():
    for lam in (0.2, 0.9):
        N = 100.0
        q = bg.expand_quadratic(periodic_terms(2, lam / N), [0, 0, 0, 0], N, condensate=2)
        ref = bg.periodic_quadratic(lam, 2)
        assert np.allclose(q.A, ref.A, atol=1e-12)
        assert np.allclose(q.B, ref.B, atol=1e-12)


@given(st.floats(0.0, 0.999), st.integers(1, 4))
@settings(max_examples=40, deadline=None)
def test_spectrum_pairs(lam, k_max):
    q = bg.periodic_quadratic(lam, k_max)
    ev = np.sort(np.linalg.eigvals(_eta(q.K) @ q.bdg).real)
    assert np.allclose(ev, -ev[::-1], atol=1e-9)
    res = bg.symplectic_diagonalize(q)
    assert np.all(res.energies >= -1e-9)


def _random_box_points(n, seed):
    rng = np.random.default_rng(seed)
    for _ in range(n):
        x, th = rng.uniform(0.05, 0.9), rng.uniform(0.05, 1.3)
        yield CNumberPoint(x, th, 0.0, math.pi if rng.random() < 0.5 else 0.0), rng.uniform(0.0, 5.0)


def test_closed_form_matches_generic_expansion():
    for p, lam in _random_box_points(60, 3):
        cf = bg.dirichlet_quadratic_closed_form(p, lam)
        gen = bg.expand_quadratic(dirichlet3_terms(lam), p, 1.0)
        assert rel_err(cf.A, gen.A) <= 1e-10
        assert rel_err(cf.B, gen.B) <= 1e-10
        assert rel_err(cf.linear, gen.linear) <= 1e-10
        assert cf.constant == pytest.approx(gen.constant, abs=1e-12)


def test_closed_form_matches_finite_differences():
    for p, lam in _random_box_points(50, 4):
        N = 1.0
        cf = bg.dirichlet_quadratic_closed_form(p, lam, N)
        lin, A, B = wirtinger_fd(dirichlet3_terms(lam / N), cnumber.pattern_vector(p, N)[1:], N)
        assert rel_err(cf.A, A) <= 1e-5
        assert rel_err(cf.B, B) <= 1e-5
        assert rel_err(cf.linear, lin) <= 1e-5


def test_blocks_scale_with_particle_number():
    p, lam = CNumberPoint(0.3, 0.2), 2.4
    q1 = bg.dirichlet_quadratic_closed_form(p, lam, 1.0)
    q60 = bg.expand_quadratic(dirichlet3_terms(lam / 60), p, 60.0)
    assert np.allclose(q60.A, q1.A, atol=1e-11)
    assert np.allclose(q60.linear, math.sqrt(60) * q1.linear, atol=1e-10)


def test_linear_part_vanishes_at_stationary_point():
    p = cnumber.stationary_points(2.0)["minimum"]
    q = bg.dirichlet_quadratic_closed_form(p, 2.0)
    assert np.linalg.norm(q.linear) <= 1e-8


def test_empty_condensate_rejected():
    for p in (CNumberPoint(1.0, 0.2), CNumberPoint(0.3, math.pi / 2)):
        with pytest.raises(ValueError):
            bg.dirichlet_quadratic_closed_form(p, 2.0)
        with pytest.raises(ValueError):
            bg.expand_quadratic(dirichlet3_terms(2.0), p, 1.0)


def test_quadratic_form_validation():
    with pytest.raises(ValueError):
        bg.QuadraticForm(0.0, np.zeros(2), np.array([[1, 2], [0, 1]]), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        bg.QuadraticForm(0.0, np.zeros(2), np.eye(2), np.array([[0, 1], [0, 0]]))
    with pytest.raises(ValueError):
        bg.symplectic_diagonalize(bg.QuadraticForm(0.0, np.ones(2), np.eye(2), np.zeros((2, 2))))


def test_colpa_and_eig_paths_agree():
    p = cnumber.stationary_points(2.5)["minimum"]
    q = bg.dirichlet_quadratic_closed_form(p, 2.5)
    a = bg.symplectic_diagonalize(q, method="colpa")
    b = bg.symplectic_diagonalize(q, method="eig")
    assert a.method == "colpa" and b.method == "eig"
    assert np.allclose(a.energies, b.energies, atol=1e-10)
    assert b.symplectic_residual <= 1e-9


def test_box_gap_at_critical_point():
    lam, p = cnumber.find_lambda_lm_dirichlet()
    g = bg.dirichlet_gap_at(p, lam)
    assert g.stable and g.gap <= 1e-4
    assert abs(g.det_m) <= 1e-6
    q = bg.dirichlet_quadratic_closed_form(p, lam)
    res = bg.symplectic_diagonalize(q)
    assert len(res.zero_modes) == bg.nullity(q.hessian.M) == 1


def test_zero_modes_match_nullity():
    for lam in (0.5, 1.0):
        q = bg.periodic_quadratic(lam, 2)
        assert len(bg.symplectic_diagonalize(q).zero_modes) == bg.nullity(q.hessian.M)
    p = cnumber.stationary_points(2.2)["minimum"]
    q = bg.dirichlet_quadratic_closed_form(p, 2.2)
    assert bg.nullity(q.hessian.M) == 0 and not bg.symplectic_diagonalize(q).zero_modes


def test_gap_curve():
    lam_lm = cnumber.find_lambda_lm_dirichlet()[0]
    pts = bg.dirichlet_gap_curve([1.5, 2.0, 2.5, 3.0])
    assert not pts[0].stable and math.isnan(pts[0].gap)
    assert all(p.stable for p in pts[1:])
    assert pts[2].gap > 0.05
    # gap and det M vanish together
    for p in pts[1:]:
        assert p.gap > 1e-3 and p.det_m > 1e-6
    assert lam_lm < 2.0


def test_gap_csv(tmp_path):
    pts = bg.dirichlet_gap_curve([1.5, 2.0])
    path = tmp_path / "gap.csv"
    bg.write_gap_csv(pts, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "lambda,gap,detM,stable"
    row = lines[2].split(",")
    assert float(row[1]) == pts[1].gap and row[3] == "1"
    assert lines[1].split(",")[1] == "nan"
