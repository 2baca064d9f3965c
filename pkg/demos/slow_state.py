"""Slow state near the inflection point: occupations, position density and coherence time.

Run: python demos/slow_state.py [N] [lambda]
"""

import sys

import numpy as np

from gapless import dynamics
from gapless.fock import build_operator, enumerate_basis
from gapless.models import dirichlet3_terms


def main(N=60, lam=2.083):
    basis = enumerate_basis(3, N)
    op = build_operator(dirichlet3_terms(lam / N), basis)
    spec = dynamics.InflectionStateSpec.at_inflection(lam)
    psi = dynamics.build_inflection_state(spec, op)
    occ = psi**2 @ basis.states / N
    print(f"N = {N}, lambda = {lam}: target <n2>/N = {spec.x_target:.4f}")
    print(f"  state occupations = {occ[0]:.4f}, {occ[1]:.4f}, {occ[2]:.4f}")

    rho = dynamics.one_body_density(psi, basis)
    z = np.linspace(0, 2 * np.pi, 9)
    dens = dynamics.position_density(rho, z)
    print("  density:", " ".join(f"{v:6.2f}" for v in dens))

    pt = dynamics.coherence_point(lam, N, basis=basis)
    print(f"  mean frequency {pt.f_mean:.5f}, coherence time {pt.t_coh:.3f}")


if __name__ == "__main__":
    args = sys.argv[1:]
    main(int(args[0]) if args else 60, float(args[1]) if len(args) > 1 else 2.083)
