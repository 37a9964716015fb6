"""Harmonic propagator: semiclassical error against the closed form versus step size.

    python3 scripts/ho_exactness.py [--out ho_exactness.csv]

For a quadratic Hamiltonian the semiclassical propagator is exact, so the
remaining error is the RK4 truncation error and should fall as ``phase_step^4``.
"""

import argparse
import csv

import numpy as np

from csentangle.hamiltonian import CoherentLabel, build_harmonic
from csentangle.propagator import exact_ho_propagator, propagate


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="ho_exactness.csv")
    args = ap.parse_args()
    model = build_harmonic(1.0)
    pairs = [(0.5, 1.0), (1.0j, -0.5), (-1.0, 0.5j)]
    times = np.linspace(0.5, 4 * np.pi, 9)
    rows = []
    for step in (1.6e-2, 8e-3, 4e-3, 2e-3):
        worst = 0.0
        for z1, z2 in pairs:
            a, b = CoherentLabel([z1]), CoherentLabel([z2])
            for T in times:
                for xi in (1, -1):
                    K = propagate(model, a, b, T, xi, phase_step=step).amplitude
                    worst = max(worst, abs(K - exact_ho_propagator(1.0, a, b, T, xi)))
        rows.append((step, worst))
        print(f"phase_step {step:.1e}: max error {worst:.3e}")
    order = np.polyfit(np.log([r[0] for r in rows]), np.log([r[1] for r in rows]), 1)[0]
    print(f"observed order {order:.2f}")
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["phase_step", "max_abs_err"])
        w.writerows(rows)


if __name__ == "__main__":
    main()
