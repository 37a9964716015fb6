"""Newton shooting on the Kerr pair: iterations and residuals over random boundary data.

    python3 scripts/bvp_convergence_study.py [--cases 200] [--seed 0]

Draws ``|z1|, |z2| <= 2`` per mode and ``Gamma T <= 0.5`` and reports how
many trajectory evaluations the default guess needs.
"""

import argparse
import collections

import numpy as np

from csentangle.errors import FocalPointError, ShootingError
from csentangle.hamiltonian import build_kerr_pair
from csentangle.shooting import BvpProblem, solve


def disk(rng, radius, size):
    return radius * np.sqrt(rng.uniform(0, 1, size)) * np.exp(2j * np.pi * rng.uniform(0, 1, size))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cases", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    model, k = build_kerr_pair(1.0, 1.0, 0.1)
    counts = collections.Counter()
    worst, failures = 0.0, 0
    for _ in range(args.cases):
        z1, z2 = disk(rng, 2.0, 2), disk(rng, 2.0, 2)
        T = rng.uniform(0, 0.5) / k.Gamma
        xi = int(rng.choice([1, -1]))
        try:
            sol = solve(BvpProblem(model, z1, np.conj(z2), T, xi))[0]
        except (ShootingError, FocalPointError):
            failures += 1
            continue
        counts[sol.iterations] += 1
        worst = max(worst, sol.residual)
    print(f"{args.cases} cases, {failures} failures, worst residual {worst:.2e}")
    for it in sorted(counts):
        print(f"  {it:2d} evaluations: {counts[it]}")
    print(f"max evaluations {max(counts) if counts else 0} (budget 20)")


if __name__ == "__main__":
    main()
