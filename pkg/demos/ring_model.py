"""Ring (periodic) model at finite N: condensate depletion and the closing gap near lambda = 1.

Run: python demos/ring_model.py
"""

import numpy as np

from gapless import dynamics


def main():
    chk = dynamics.periodic_finite_N_checks(1000, [0.6, 0.8, 1.0, 1.2, 1.5])
    print("N = 1000, zero-momentum sector")
    for lam, f, g in zip(chk.lambdas, chk.n0_fraction, chk.gaps):
        print(f"  lambda {lam:4.2f}: n0/N = {f:.4f}, gap = {g:.4f}")
    Ns = np.array([250, 500, 1000])
    mins = [dynamics.periodic_gap_minimum(int(N)) for N in Ns]
    for N, (lam, gap) in zip(Ns, mins):
        print(f"  N = {N:4d}: gap minimum {gap:.4f} at lambda = {lam:.4f}")
    beta = -np.polyfit(np.log(Ns), np.log([g for _, g in mins]), 1)[0]
    print(f"  gap ~ N^-{beta:.3f}")


if __name__ == "__main__":
    main()
