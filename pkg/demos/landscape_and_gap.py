"""Critical couplings of the three-mode box model and the Bogoliubov gap around them.

Run: python demos/landscape_and_gap.py
"""

import numpy as np

from gapless import bogoliubov, cnumber


def main():
    lam_lm, p = cnumber.find_lambda_lm_dirichlet()
    lam_gs = cnumber.find_lambda_gs()
    occ = cnumber.occupation_fractions(p)
    print(f"lambda_lm = {lam_lm:.6f}  inflection x = {p.x:.4f}, theta = {p.theta:.4f}")
    print(f"  occupations n1, n2, n3 / N = {occ[0]:.3f}, {occ[1]:.3f}, {occ[2]:.3f}")
    print(f"lambda_gs = {lam_gs:.6f}")
    print("\n lambda      gap        det M")
    # at lambda_lm itself the minimum merges with the saddle, so evaluate at the inflection point
    pts = [bogoliubov.dirichlet_gap_at(p, lam_lm)]
    pts += bogoliubov.dirichlet_gap_curve(np.round(np.arange(1.80, 3.01, 0.1), 2))
    for g in pts:
        print(f"{g.lam:7.4f}  {g.gap:9.3e}  {g.det_m:10.3e}")


if __name__ == "__main__":
    main()
