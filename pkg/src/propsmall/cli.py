"""Command-line experiment runner.

``propsmall run <experiment> [--config FILE] [--key value ...]``

Configuration is resolved as built-in defaults, then ``key = value`` lines
from ``--config``, then command-line flags.  Every CSV starts with the
resolved configuration as ``# key=value`` lines, followed by a header row.
Summary values follow the rows as ``# fit.name=value`` lines.

Exit codes: 0 success, 2 unparsable configuration, 3 unknown experiment,
4 solver did not converge, 5 any other failure.  Errors print one line
``error: <kind>: <detail>`` to stderr.
"""
from __future__ import annotations

import argparse
import io
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import doubling, smallness
from .fields import (
    SpecError,
    concentrating_spherical_harmonic,
    parse_coefficients,
    parse_field,
    parse_spec,
    torus_mode,
)
from .geometry import Cube, PointSet, hausdorff_content
from .solver import solve_dirichlet

EXIT_PARSE, EXIT_UNKNOWN, EXIT_SOLVER, EXIT_OTHER = 2, 3, 4, 5

COMMON = {"field": "harmonic_poly:n=2,k=3", "cube": "unit", "res": "65", "out": "-", "seed": "0",
          "padding": "4", "coeffs": "", "tol": "1e-10", "maxiter": ""}

DEFAULTS = {
    "solve": {"coeffs": "identity"},
    "doubling": {"dilation": "4", "centers": "17", "radii": "6", "target": "u"},
    "decay": {"d": "1.5", "a": "1:8:0.25", "target": "u", "res": "257"},
    "census": {"B": "8", "N0": "1", "target": "u", "centers": "5", "radii": "4", "dilation": "4"},
    "critical": {"K": "8,16,32", "c": "0.5", "samples": "8", "field": "harmonic_poly:n=3,k=2", "delta": "0.5"},
    "remez": {"density": "0.1", "trials": "4", "centers": "17", "radii": "6", "dilation": "4"},
    "recursion": {"B": "10", "delta": "0.5", "c": "0.25", "C1": "1", "beta": "", "C0": "", "margin": "0.1",
                  "N0": "1", "levels": "4", "a": "1:200:0.25", "base_rate": "1"},
    "eigen": {"family": "sphere", "region": "cap:theta=0.5235987755982988", "kmin": "2", "kmax": "12",
              "density": "361"},
    "content": {"d": "1.5", "mask": "", "density": "0.1", "max_depth": ""},
}


class ConfigError(Exception):
    def __init__(self, token: str):
        super().__init__(token)
        self.token = token


class UnknownExperiment(Exception):
    pass


class NotConverged(Exception):
    pass


@dataclass
class ExperimentConfig:
    experiment: str
    values: dict[str, str] = field(default_factory=dict)

    def get(self, key: str) -> str:
        return self.values[key]

    def num(self, key: str, cast=float):
        raw = self.values[key]
        try:
            return cast(raw)
        except ValueError:
            raise ConfigError(raw) from None

    def ints(self, key: str) -> list[int]:
        try:
            return [int(v) for v in self.values[key].split(",")]
        except ValueError:
            raise ConfigError(self.values[key]) from None

    def grid(self, key: str) -> np.ndarray:
        raw = self.values[key]
        parts = raw.split(":")
        try:
            if len(parts) == 3:
                lo, hi, step = (float(p) for p in parts)
                if step <= 0 or hi < lo:
                    raise ValueError
                count = int(math.floor((hi - lo) / step + 1e-9)) + 1
                return lo + step * np.arange(count)
            return np.array([float(v) for v in raw.split(",")])
        except ValueError:
            raise ConfigError(raw) from None

    def echo(self) -> str:
        lines = [f"# experiment={self.experiment}"]
        lines += [f"# {k}={self.values[k]}" for k in sorted(self.values)]
        return "\n".join(lines) + "\n"


def read_config_file(path: str) -> dict[str, str]:
    out = {}
    try:
        text = Path(path).read_text()
    except OSError:
        raise ConfigError(path) from None
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, eq, val = line.partition("=")
        if not eq or not key.strip():
            raise ConfigError(line)
        out[key.strip()] = val.strip()
    return out


def resolve_config(experiment: str, file_values: dict[str, str], overrides: dict[str, str]) -> ExperimentConfig:
    if experiment not in DEFAULTS:
        raise UnknownExperiment(experiment)
    values = dict(COMMON)
    values.update(DEFAULTS[experiment])
    for source in (file_values, overrides):
        for k, v in source.items():
            if k not in values:
                raise ConfigError(k)
            values[k] = v
    return ExperimentConfig(experiment, values)


# --- shared helpers ------------------------------------------------------------------


def _field(cfg: ExperimentConfig):
    try:
        return parse_field(cfg.get("field"))
    except SpecError as exc:
        raise ConfigError(exc.token) from None


def _cube(cfg: ExperimentConfig, n: int) -> Cube:
    raw = cfg.get("cube")
    if raw == "unit":
        return Cube(tuple([0.0] * n), 1.0)
    try:
        vals = [float(v) for v in raw.split(",")]
    except ValueError:
        raise ConfigError(raw) from None
    if len(vals) != n + 1 or vals[-1] <= 0:
        raise ConfigError(raw)
    return Cube(tuple(vals[:-1]), vals[-1])


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (tuple, list, np.ndarray)):
        return ";".join(_fmt(v) for v in x)
    return str(x)


def _maxiter(cfg: ExperimentConfig) -> int | None:
    return cfg.num("maxiter", int) if cfg.get("maxiter") else None


def _solved(cfg: ExperimentConfig, u, Q: Cube):
    """Solve ``div(A grad v) = 0`` on the padded cube with ``u`` as boundary data."""
    spec = cfg.get("coeffs")
    if not spec:
        return u
    try:
        A = parse_coefficients(spec if ":" in spec else f"{spec}:n={u.n}")
    except SpecError as exc:
        raise ConfigError(exc.token) from None
    if A.n != u.n:
        raise ConfigError(spec)
    domain = Q.scale(cfg.num("padding"))
    v, report = solve_dirichlet(A, domain, u, tol=cfg.num("tol"), resolution=cfg.num("res", int),
                                 maxiter=_maxiter(cfg))
    if not report.converged:
        raise NotConverged(f"residual {report.residual:.3e} after {report.iterations} iterations")
    return v


class Table:
    def __init__(self, header: list[str]):
        self.header = header
        self.rows: list[list[str]] = []
        self.summary: list[tuple[str, object]] = []

    def add(self, *row):
        self.rows.append([_fmt(v) for v in row])

    def note(self, key: str, value):
        self.summary.append((key, value))

    def render(self, cfg: ExperimentConfig) -> str:
        buf = io.StringIO()
        buf.write(cfg.echo())
        buf.write(",".join(self.header) + "\n")
        for r in self.rows:
            buf.write(",".join(r) + "\n")
        for k, v in self.summary:
            buf.write(f"# fit.{k}={_fmt(v)}\n")
        return buf.getvalue()


# --- experiments -----------------------------------------------------------------------


def run_solve(cfg):
    u = _field(cfg)
    Q = _cube(cfg, u.n)
    spec = cfg.get("coeffs")
    try:
        A = parse_coefficients(spec if ":" in spec else f"{spec}:n={u.n}")
    except SpecError as exc:
        raise ConfigError(exc.token) from None
    v, rep = solve_dirichlet(A, Q, u, tol=cfg.num("tol"), resolution=cfg.num("res", int),
                             maxiter=_maxiter(cfg))
    if not rep.converged:
        raise NotConverged(f"residual {rep.residual:.3e} after {rep.iterations} iterations")
    dev = float(np.abs(v.values - u(v.lattice.points())).max())
    t = Table(["resolution", "iterations", "residual", "converged", "max_principle", "max_deviation"])
    t.add(max(v.lattice.shape), rep.iterations, rep.residual, rep.converged, rep.max_principle, dev)
    return t


def run_doubling(cfg):
    u = _field(cfg)
    Q = _cube(cfg, u.n)
    f = _solved(cfg, u, Q)
    r = doubling.doubling_index_cube(
        f, Q, centers=cfg.num("centers", int), radii=cfg.num("radii", int),
        dilation=cfg.num("dilation"), target=cfg.get("target"),
    )
    t = Table(["target", "N_ball", "N_cube", "x*", "r*"])
    t.add(r.target, r.ball_index, r.cube_index, r.argmax_center, r.argmax_radius)
    t.note("clipped", r.clipped)
    return t


def run_decay(cfg):
    u = _field(cfg)
    Q = _cube(cfg, u.n)
    f = _solved(cfg, u, Q)
    fit = smallness.decay_profile(f, Q, cfg.num("d"), cfg.grid("a"), nodes=cfg.num("res", int),
                                  target=cfg.get("target"))
    t = Table(["a", "content", "admissible"])
    for a, c, ok in zip(fit.a, fit.contents, fit.admissible):
        t.add(a, c, ok)
    for key in ("slope", "intercept", "ls_intercept", "index", "floor", "all_empty"):
        t.note(key, getattr(fit, key))
    return t


def run_census(cfg):
    u = _field(cfg)
    Q = _cube(cfg, u.n)
    f = _solved(cfg, u, Q)
    rep = smallness.bad_cube_census(
        f, Q, cfg.num("B", int), cfg.num("N0"), target=cfg.get("target"),
        centers=cfg.num("centers", int), radii=cfg.num("radii", int), dilation=cfg.num("dilation"),
    )
    t = Table(["subcube", "N_q", "bad"])
    for idx in np.ndindex(rep.indices.shape):
        t.add(idx, rep.indices[idx], rep.indices[idx] >= rep.threshold)
    t.note("parent_index", rep.parent_index)
    t.note("threshold", rep.threshold)
    t.note("count", rep.count)
    t.note("exponent", rep.exponent)
    return t


def run_critical(cfg):
    u = _field(cfg)
    Q = _cube(cfg, u.n)
    f = _solved(cfg, u, Q)
    Ks = cfg.ints("K")
    delta = cfg.num("delta")
    t = Table(["K", "count", "exponent", "bound"])
    counts = []
    for K in Ks:
        r = smallness.critical_census(f, Q, K, cfg.num("c"), cfg.num("samples", int))
        counts.append(r.count)
        t.add(K, r.count, r.exponent, r.bound(Q.n, delta))
    if len(Ks) >= 2 and min(counts) > 0:
        t.note("slope", smallness.census_slope(Ks, counts))
    return t


def run_remez(cfg):
    u = _field(cfg)
    Q = _cube(cfg, u.n)
    f = _solved(cfg, u, Q)
    lat = Q.lattice(cfg.num("res", int))
    N = doubling.doubling_index_cube(f, Q, centers=cfg.num("centers", int), radii=cfg.num("radii", int),
                                     dilation=cfg.num("dilation")).cube_index
    seed0 = cfg.num("seed", int)
    t = Table(["seed", "C", "sup_Q", "sup_E", "measure_E", "N"])
    for s in range(cfg.num("trials", int)):
        E = smallness.random_mask(lat, cfg.num("density"), seed0 + s)
        r = smallness.remez_check(f, Q, E, index=N)
        t.add(seed0 + s, r.constant, r.sup_Q, r.sup_E, r.measure_E, r.index)
    return t


def run_recursion(cfg):
    B, delta, c, C1 = cfg.num("B"), cfg.num("delta"), cfg.num("c"), cfg.num("C1")
    if cfg.get("beta") and cfg.get("C0"):
        params = smallness.RecursionParams(B, c, delta, C1, cfg.num("beta"), cfg.num("C0"))
    else:
        beta = cfg.num("beta") if cfg.get("beta") else None
        params = smallness.find_parameters(B, delta, c, C1, cfg.num("margin"), beta)
    rate = cfg.num("base_rate")
    N0 = cfg.num("N0")
    table = smallness.recursive_bound_propagator(
        lambda a: np.minimum(1.0, np.exp(-rate * (a - 1.0))), params, cfg.grid("a"), N0, cfg.num("levels", int)
    )
    bound = table.closed_form()
    t = Table(["N", "a", "M", "closed_form"])
    for i, N in enumerate(table.Ns):
        for j, a in enumerate(table.a):
            t.add(N, a, table.M[i, j], bound[i, j])
    t.note("beta", params.beta)
    t.note("C0", params.C0)
    t.note("condition", params.condition())
    t.note("C", table.C)
    t.note("recursion_violations", table.recursion_violations())
    t.note("closed_form_violations", table.closed_form_violations())
    return t


def _region(spec: str):
    try:
        name, p = parse_spec(spec)
        if name == "cap":
            return smallness.PolarCap(float(p["theta"]))
        if name == "disc":
            center = tuple(float(v) for v in p.get("center", "0.5/0.5").split("/"))
            return smallness.TorusDisc(center, float(p["radius"]))
        if name == "all":
            return None
    except (KeyError, ValueError, SpecError):
        pass
    raise ConfigError(spec)


def run_eigen(cfg):
    fam = cfg.get("family")
    if fam == "sphere":
        family = concentrating_spherical_harmonic
    elif fam == "torus":
        family = lambda k: torus_mode((k, 0))  # noqa: E731
    else:
        raise ConfigError(fam)
    region = _region(cfg.get("region"))
    ks = range(cfg.num("kmin", int), cfg.num("kmax", int) + 1)
    fit = smallness.eigen_remez_check(family, region, ks, cfg.num("density", int))
    t = Table(["k", "eigenvalue", "log_ratio"])
    for k, lam, y in zip(fit.ks, fit.eigenvalues, fit.log_ratios):
        t.add(k, lam, y)
    t.note("slope_k", fit.slope_k)
    t.note("slope_sqrt_lambda", fit.slope_sqrt_lambda)
    t.note("worst_rate", fit.worst_rate)
    return t


def run_content(cfg):
    if cfg.get("mask"):
        try:
            E = PointSet.read(cfg.get("mask"))
        except (OSError, ValueError):
            raise ConfigError(cfg.get("mask")) from None
    else:
        u = _field(cfg)
        Q = _cube(cfg, u.n)
        E = smallness.random_mask(Q.lattice(cfg.num("res", int)), cfg.num("density"), cfg.num("seed", int))
    depth = cfg.num("max_depth", int) if cfg.get("max_depth") else None
    est = hausdorff_content(E, cfg.num("d"), depth)
    t = Table(["generation", "side", "value"])
    L = E.lattice.bounding_cube.side
    for j, v in enumerate(est.generation_values):
        t.add(j, L / 2**j, v)
    t.note("content", est.value)
    t.note("generation", est.depth)
    t.note("cover_size", len(est))
    return t


EXPERIMENTS = {
    "solve": run_solve, "doubling": run_doubling, "decay": run_decay, "census": run_census,
    "critical": run_critical, "remez": run_remez, "recursion": run_recursion, "eigen": run_eigen,
    "content": run_content,
}


def run(cfg: ExperimentConfig) -> str:
    """Execute ``cfg`` and return the CSV text."""
    if cfg.experiment not in EXPERIMENTS:
        raise UnknownExperiment(cfg.experiment)
    return EXPERIMENTS[cfg.experiment](cfg).render(cfg)


# --- argument parsing -------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message.split(":")[-1].strip() or message)


def _build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="propsmall", description="Run a measurement experiment and emit CSV.")
    sub = p.add_subparsers(dest="command")
    r = sub.add_parser("run", help="run one experiment")
    r.add_argument("experiment")
    r.add_argument("--config", help="file of key = value lines")
    r.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override any key")
    keys = sorted({k for d in DEFAULTS.values() for k in d} | set(COMMON))
    for k in keys:
        r.add_argument(f"--{k}", dest=f"opt_{k}", default=None)
    return p


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command != "run":
            raise ConfigError(args.command or "missing command")
        overrides = {k[4:]: v for k, v in vars(args).items() if k.startswith("opt_") and v is not None}
        for item in args.set:
            key, eq, val = item.partition("=")
            if not eq:
                raise ConfigError(item)
            overrides[key.strip()] = val.strip()
        file_values = read_config_file(args.config) if args.config else {}
        cfg = resolve_config(args.experiment, file_values, overrides)
        text = run(cfg)
    except ConfigError as exc:
        print(f"error: parse: {exc.token}", file=sys.stderr)
        return EXIT_PARSE
    except UnknownExperiment as exc:
        print(f"error: unknown-experiment: {exc}", file=sys.stderr)
        return EXIT_UNKNOWN
    except NotConverged as exc:
        print(f"error: not-converged: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except Exception as exc:  # noqa: BLE001
        print(f"error: {type(exc).__name__}: {' '.join(str(exc).split())}", file=sys.stderr)
        return EXIT_OTHER
    out = cfg.get("out")
    if out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
