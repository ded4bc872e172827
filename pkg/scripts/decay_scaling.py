"""Sublevel-set decay of |grad Re(x1 + i x2)^k| in three dimensions.

Prints the fitted slope, slope * (k - 1) and the admissible a-range for each
degree.  The a-grid is scaled by k - 1 so every degree sees the same range of
cylinder radii.
"""
import argparse

import numpy as np

from propsmall.fields import harmonic_polynomial
from propsmall.geometry import Cube
from propsmall.smallness import decay_profile


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--kmin", type=int, default=3)
    p.add_argument("--kmax", type=int, default=8)
    p.add_argument("--delta", type=float, default=0.5)
    p.add_argument("--nodes", type=int, default=257)
    p.add_argument("--centred", action="store_true",
                   help="use the cube centred on the axis instead of the offset cube")
    args = p.parse_args()
    Q = Cube((0.0, 0.0, 0.0), 1.0) if args.centred else Cube((1 / 12, 1 / 12, 0.0), 1.0)
    print("k,slope,slope_times_k_minus_1,admissible,a_min,a_max")
    for k in range(args.kmin, args.kmax + 1):
        a = (k - 1) * np.arange(1.0, 6.0, 0.02)
        fit = decay_profile(harmonic_polynomial(3, k), Q, 1 + args.delta, a, nodes=args.nodes, target="grad")
        ok = [x for x, good in zip(fit.a, fit.admissible) if good]
        print(f"{k},{fit.slope!r},{fit.slope * (k - 1)!r},{len(ok)},{min(ok)!r},{max(ok)!r}")


if __name__ == "__main__":
    main()
