"""Max interior error of the finite-difference Dirichlet solver under refinement."""
import argparse

import numpy as np

from propsmall.fields import adapted, harmonic_polynomial, parse_coefficients
from propsmall.geometry import Cube
from propsmall.solver import solve_dirichlet


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--degrees", type=int, nargs="+", default=[3, 4, 5])
    p.add_argument("--coeffs", default="identity:n=2", help="constant coefficient spec, e.g. rotated:values=2/1,angle=0.4")
    p.add_argument("--res", type=int, nargs="+", default=[17, 33, 65, 129])
    args = p.parse_args()
    A = parse_coefficients(args.coeffs)
    Q = Cube((0.0, 0.0), 1.0)
    print("degree,resolution,iterations,max_error,ratio")
    for k in args.degrees:
        exact = adapted(harmonic_polynomial(2, k), A)
        prev = None
        for n in args.res:
            u, rep = solve_dirichlet(A, Q, exact, resolution=n)
            inner = (slice(1, -1),) * 2
            err = float(np.abs(u.values[inner] - exact(u.lattice.points())[inner]).max())
            ratio = prev / err if prev and err > 0 else float("nan")
            print(f"{k},{n},{rep.iterations},{err!r},{ratio!r}")
            prev = err


if __name__ == "__main__":
    main()
