"""Run the CLI configurations behind the acceptance suite and save each CSV.

    python3 scripts/run_acceptance_experiments.py --out results/
"""
import argparse
import time
from pathlib import Path

from propsmall.cli import resolve_config, run

RUNS = {
    "calibration_k5": ("doubling", {"field": "harmonic_poly:n=2,k=5", "centers": "5", "radii": "3"}),
    "affine_cube_D20": ("doubling", {"field": "affine", "dilation": "20"}),
    "solve_cubic_129": ("solve", {"field": "harmonic_poly:n=2,k=3", "res": "129"}),
    "census_cubic": ("census", {"field": "harmonic_poly:n=2,k=3"}),
    "decay_cylinder_k4": ("decay", {"field": "harmonic_poly:n=3,k=4", "cube": f"{1 / 12!r},{1 / 12!r},0,1",
                                    "target": "grad", "a": "3:18:0.06", "res": "257"}),
    "decay_slab": ("decay", {"field": "affine", "res": "2049", "a": "1:7:0.05"}),
    "critical_saddle_3d": ("critical", {}),
    "recursion": ("recursion", {}),
    "eigen_cap": ("eigen", {}),
    "remez_cubic": ("remez", {"res": "33", "centers": "5", "radii": "3"}),
}


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="results", help="directory for the CSV files")
    p.add_argument("--only", nargs="*", default=None, help="subset of run names")
    args = p.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, (experiment, overrides) in RUNS.items():
        if args.only and name not in args.only:
            continue
        t0 = time.perf_counter()
        text = run(resolve_config(experiment, {}, overrides))
        (out / f"{name}.csv").write_text(text)
        fits = [line[2:] for line in text.splitlines() if line.startswith("# fit.")]
        print(f"{name:20s} {time.perf_counter() - t0:6.1f}s  {' '.join(fits[:3])}")


if __name__ == "__main__":
    main()
