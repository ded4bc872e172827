"""Critical-cube and bad-cube censuses over a range of subdivisions.

    python3 scripts/census_sweep.py critical --k 2 --Ks 4 8 16 32
    python3 scripts/census_sweep.py bad --k 3 --Bs 2 4 8
"""
import argparse
import math

from propsmall.fields import harmonic_polynomial
from propsmall.geometry import Cube
from propsmall.smallness import bad_cube_census, census_slope, critical_census


def critical(args):
    u = harmonic_polynomial(3, args.k)
    Q = Cube((0.0, 0.0, 0.0), 1.0)
    counts = []
    print("K,count,log_count_over_log_K,columns")
    for K in args.Ks:
        r = critical_census(u, Q, K, c=args.c)
        counts.append(r.count)
        columns = len({b[:2] for b in r.bad})
        print(f"{K},{r.count},{r.exponent!r},{columns}")
    if len(counts) >= 2 and min(counts) > 0:
        print(f"# slope={census_slope(args.Ks, counts)!r}")


def bad(args):
    u = harmonic_polynomial(2, args.k)
    Q = Cube((0.0, 0.0), 1.0)
    print("B,parent_index,threshold,count,exponent")
    for B in args.Bs:
        r = bad_cube_census(u, Q, B=B, N0=args.N0)
        e = r.exponent if r.count else -math.inf
        print(f"{B},{r.parent_index!r},{r.threshold!r},{r.count},{e!r}")


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="kind", required=True)
    c = sub.add_parser("critical")
    c.add_argument("--k", type=int, default=2)
    c.add_argument("--c", type=float, default=0.5)
    c.add_argument("--Ks", type=int, nargs="+", default=[4, 8, 16, 32])
    b = sub.add_parser("bad")
    b.add_argument("--k", type=int, default=3)
    b.add_argument("--N0", type=float, default=1.0)
    b.add_argument("--Bs", type=int, nargs="+", default=[2, 4, 8])
    args = p.parse_args()
    critical(args) if args.kind == "critical" else bad(args)


if __name__ == "__main__":
    main()
