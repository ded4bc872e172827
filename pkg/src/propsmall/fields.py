"""Coefficient fields of the ellipticity class and closed-form solutions.

Analytic solutions double as oracles: harmonic polynomials calibrate doubling
indices against their degree, torus modes and the concentrating spherical
harmonics feed the eigenfunction experiments, and constant-coefficient
problems are reduced to the Laplacian by ``x -> A^{-1/2} x``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .rng import SplitMix64

Array = np.ndarray


# --- coefficient fields -------------------------------------------------------


@dataclass(frozen=True)
class CoefficientField:
    name: str
    n: int
    evaluator: Callable[[Array], Array]
    lambda1: float
    lambda2: float
    constant: Array | None = None

    def __call__(self, x) -> Array:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.n:
            raise ValueError(f"expected points in R^{self.n}, got trailing dimension {x.shape[-1]}")
        return self.evaluator(x)


def _ellipticity_of(matrix: Array) -> float:
    w = np.linalg.eigvalsh(matrix)
    return float(max(w.max(), 1.0 / w.min()))


def constant_field(matrix, name: str = "constant") -> CoefficientField:
    M = np.array(matrix, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("coefficient matrix must be square")
    if not np.array_equal(M, M.T):
        raise ValueError("coefficient matrix must be symmetric")
    if np.linalg.eigvalsh(M).min() <= 0:
        raise ValueError("coefficient matrix must be positive definite")
    M.setflags(write=False)

    def evaluate(x):
        return np.broadcast_to(M, x.shape[:-1] + M.shape).copy()

    return CoefficientField(name, M.shape[0], evaluate, _ellipticity_of(M), 0.0, M)


def identity(n: int) -> CoefficientField:
    return constant_field(np.eye(n), name=f"identity:n={n}")


def diagonal(values) -> CoefficientField:
    values = [float(v) for v in values]
    return constant_field(np.diag(values), name="diag:values=" + "/".join(map(repr, values)))


def rotated(values, angle: float) -> CoefficientField:
    """``R diag(values) R^T`` with ``R`` a rotation by ``angle`` in the x1-x2 plane."""
    D = np.diag([float(v) for v in values])
    n = D.shape[0]
    R = np.eye(n)
    c, s = math.cos(angle), math.sin(angle)
    R[:2, :2] = [[c, -s], [s, c]]
    M = R @ D @ R.T
    M = (M + M.T) / 2
    return constant_field(M, name=f"rotated:values={'/'.join(repr(float(v)) for v in values)},angle={angle!r}")


def scalar_perturbation(n: int, eps: float = 0.1, axis: int = 0) -> CoefficientField:
    """``(1 + eps sin x_axis) I``."""
    if not 0 <= eps < 1:
        raise ValueError("perturbation size must lie in [0, 1)")
    eye = np.eye(n)

    def evaluate(x):
        return (1.0 + eps * np.sin(x[..., axis]))[..., None, None] * eye

    lam1 = max(1.0 + eps, 1.0 / (1.0 - eps))
    return CoefficientField(f"perturbed:n={n},eps={eps!r}", n, evaluate, lam1, float(eps))


@dataclass(frozen=True)
class EllipticityEstimate:
    lambda1: float
    lambda2: float
    asymmetric: tuple[int, ...]
    nonpositive: tuple[int, ...]

    @property
    def ok(self) -> bool:
        return not self.asymmetric and not self.nonpositive

    def within(self, field: CoefficientField, rtol: float = 1e-12) -> bool:
        return (self.lambda1 <= field.lambda1 * (1 + rtol)
                and self.lambda2 <= field.lambda2 * (1 + rtol) + rtol)


def check_ellipticity(
    A: CoefficientField,
    samples,
    pairs: int = 10_000,
    step: float = 1e-3,
    seed: int = 0,
) -> EllipticityEstimate:
    """Sampled ellipticity and Lipschitz constants.

    The Lipschitz estimate uses ``pairs`` pairs ``(x, x + step u)`` with ``x``
    cycling through ``samples`` and ``u`` a random unit vector, so it is a
    lower estimate of the true constant.
    """
    x = np.atleast_2d(np.asarray(samples, dtype=float))
    if x.shape[0] == 0:
        raise ValueError("need at least one sample point")
    M = A(x)
    asym = np.abs(M - np.swapaxes(M, -1, -2)).max(axis=(-1, -2)) > 1e-12
    sym = (M + np.swapaxes(M, -1, -2)) / 2
    w = np.linalg.eigvalsh(sym)
    nonpos = w[:, 0] <= 0
    with np.errstate(divide="ignore"):
        lam1 = float(np.max(np.maximum(w[:, -1], np.where(nonpos, np.inf, 1.0 / w[:, 0]))))

    lam2 = 0.0
    if pairs > 0:
        rng = SplitMix64(seed)
        u = rng.normal(pairs * A.n).reshape(pairs, A.n)
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        base = x[np.arange(pairs) % x.shape[0]]
        other = base + step * u
        diff = np.abs(A(other) - A(base)).max(axis=(-1, -2))
        lam2 = float(np.max(diff / np.linalg.norm(other - base, axis=1)))
    return EllipticityEstimate(
        lam1, lam2, tuple(np.nonzero(asym)[0].tolist()), tuple(np.nonzero(nonpos)[0].tolist())
    )


# --- analytic solutions --------------------------------------------------------


@dataclass(frozen=True)
class AnalyticSolution:
    label: str
    n: int
    value: Callable[[Array], Array]
    gradient: Callable[[Array], Array] | None = None
    harmonic: bool = True

    def __call__(self, x) -> Array:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.n:
            raise ValueError(f"{self.label}: expected points in R^{self.n}")
        return self.value(x)

    def grad(self, x) -> Array:
        if self.gradient is None:
            raise ValueError(f"{self.label} has no gradient")
        return self.gradient(np.asarray(x, dtype=float))


def harmonic_variants(n: int) -> list[tuple[int, int, int]]:
    """``(a, b, part)`` triples: ``part`` 0 is ``Re (x_a + i x_b)^k``, 1 is ``Im``."""
    return [(a, b, part) for a, b in itertools.combinations(range(n), 2) for part in (0, 1)]


def harmonic_polynomial(n: int, k: int, variant: int = 0) -> AnalyticSolution:
    """Homogeneous harmonic polynomial of degree ``k`` in ``R^n``.

    Variant ``v`` is the real (even ``v``) or imaginary (odd ``v``) part of
    ``(x_a + i x_b)^k`` for the ``v // 2``-th coordinate pair ``a < b``.
    """
    if n < 2:
        raise ValueError("harmonic polynomials need n >= 2")
    if k < 0:
        raise ValueError("degree must be non-negative")
    variants = harmonic_variants(n)
    if not 0 <= variant < len(variants):
        raise ValueError(f"variant must lie in [0, {len(variants)})")
    label = f"harmonic_poly:n={n},k={k},variant={variant}"
    if k == 0:
        return AnalyticSolution(label, n, lambda x: np.ones(x.shape[:-1]), lambda x: np.zeros(x.shape))
    a, b, part = variants[variant]

    def value(x):
        z = (x[..., a] + 1j * x[..., b]) ** k
        return z.real if part == 0 else z.imag

    def gradient(x):
        dz = k * (x[..., a] + 1j * x[..., b]) ** (k - 1)
        g = np.zeros(x.shape)
        if part == 0:
            g[..., a], g[..., b] = dz.real, -dz.imag
        else:
            g[..., a], g[..., b] = dz.imag, dz.real
        return g

    return AnalyticSolution(label, n, value, gradient)


def affine(n: int = 2, axis: int = 0) -> AnalyticSolution:
    def value(x):
        return x[..., axis].copy()

    def gradient(x):
        g = np.zeros(x.shape)
        g[..., axis] = 1.0
        return g

    return AnalyticSolution(f"affine:n={n}", n, value, gradient)


def constant(n: int, c: float) -> AnalyticSolution:
    return AnalyticSolution(
        f"constant:n={n},value={c!r}", n, lambda x: np.full(x.shape[:-1], float(c)), lambda x: np.zeros(x.shape)
    )


def shifted(u: AnalyticSolution, offset) -> AnalyticSolution:
    """``x -> u(x - offset)``."""
    off = np.asarray(offset, dtype=float)
    grad = None if u.gradient is None else (lambda x: u.gradient(x - off))
    return AnalyticSolution(f"{u.label}|shift={off.tolist()}", u.n, lambda x: u.value(x - off), grad, u.harmonic)


def scaled(u: AnalyticSolution, c: float) -> AnalyticSolution:
    grad = None if u.gradient is None else (lambda x: c * u.gradient(x))
    return AnalyticSolution(f"{u.label}|scale={c!r}", u.n, lambda x: c * u.value(x), grad, u.harmonic)


def gradient_magnitude(u: AnalyticSolution) -> AnalyticSolution:
    if u.gradient is None:
        raise ValueError(f"{u.label} has no gradient")
    return AnalyticSolution(
        f"|grad {u.label}|", u.n, lambda x: np.linalg.norm(u.gradient(x), axis=-1), None, harmonic=False
    )


def adapted(v: AnalyticSolution, A: CoefficientField) -> AnalyticSolution:
    """Solution of ``div(A grad u) = 0`` for constant ``A`` built from a harmonic ``v``:
    ``u(x) = v(A^{-1/2} x)``."""
    if A.constant is None:
        raise ValueError("only constant coefficient fields can be adapted")
    w, V = np.linalg.eigh(A.constant)
    S = V @ np.diag(w**-0.5) @ V.T

    def value(x):
        return v.value(x @ S.T)

    grad = None if v.gradient is None else (lambda x: v.gradient(x @ S.T) @ S)
    return AnalyticSolution(f"{v.label}|adapted={A.name}", v.n, value, grad, v.harmonic)


# --- eigenfunctions -------------------------------------------------------------


@dataclass(frozen=True)
class Eigenfunction:
    """Laplace eigenfunction ``phi`` with ``Delta phi + eigenvalue * phi = 0``.

    Torus points are coordinates in ``R^m`` (period 1); sphere points are unit
    vectors in ``R^3``.
    """

    label: str
    manifold: str
    eigenvalue: float
    value: Callable[[Array], Array]
    gradient: Callable[[Array], Array] | None = None
    dim: int = 2

    def __call__(self, x) -> Array:
        return self.value(np.asarray(x, dtype=float))

    def at_angles(self, colatitude, azimuth) -> Array:
        if self.manifold != "sphere":
            raise ValueError("angular evaluation is only defined on the sphere")
        return self.value(sphere_point(colatitude, azimuth))


def sphere_point(colatitude, azimuth) -> Array:
    th, ph = np.broadcast_arrays(np.asarray(colatitude, float), np.asarray(azimuth, float))
    return np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], axis=-1)


def torus_mode(freq) -> Eigenfunction:
    """``cos(2 pi <freq, x>)`` on ``R^m / Z^m``."""
    f = np.array(freq, dtype=float).ravel()
    lam = 4 * math.pi**2 * float(f @ f)

    def value(x):
        return np.cos(2 * np.pi * (x @ f))

    def gradient(x):
        return -2 * np.pi * np.sin(2 * np.pi * (x @ f))[..., None] * f

    return Eigenfunction(f"torus_mode:freq={f.astype(int).tolist()}", "torus", lam, value, gradient, f.size)


def concentrating_spherical_harmonic(k: int) -> Eigenfunction:
    """``Re (x + i y)^k`` restricted to the unit sphere, eigenvalue ``k(k+1)``."""
    if k < 1:
        raise ValueError("degree must be >= 1")

    def value(p):
        return ((p[..., 0] + 1j * p[..., 1]) ** k).real

    return Eigenfunction(f"sphere_harmonic:k={k}", "sphere", float(k * (k + 1)), value, None, 2)


def eigenfunction_lift(phi: Eigenfunction, eigenvalue: float | None = None) -> AnalyticSolution:
    """``u(x, t) = phi(x) exp(sqrt(eigenvalue) t)`` on ``M x R``.

    Torus lifts are harmonic functions on ``R^{m+1}``.  Sphere lifts take points
    ``(p, t)`` with ``p`` projected radially onto the sphere; they are harmonic
    for the product metric only, so they carry ``harmonic=False``.
    """
    lam = phi.eigenvalue if eigenvalue is None else float(eigenvalue)
    if lam < 0:
        raise ValueError("eigenvalue must be non-negative")
    root = math.sqrt(lam)
    if phi.manifold == "torus":
        m = phi.dim

        def value(x):
            return phi.value(x[..., :m]) * np.exp(root * x[..., m])

        def gradient(x):
            e = np.exp(root * x[..., m])
            g = np.empty(x.shape)
            g[..., :m] = phi.gradient(x[..., :m]) * e[..., None]
            g[..., m] = root * phi.value(x[..., :m]) * e
            return g

        return AnalyticSolution(f"lift({phi.label})", m + 1, value, gradient, True)

    def value(x):
        p = x[..., :3] / np.linalg.norm(x[..., :3], axis=-1, keepdims=True)
        return phi.value(p) * np.exp(root * x[..., 3])

    return AnalyticSolution(f"lift({phi.label})", 4, value, None, False)


# --- registry ---------------------------------------------------------------------


class SpecError(ValueError):
    """Unparsable field or coefficient spec; ``token`` names the culprit."""

    def __init__(self, token: str, message: str = ""):
        super().__init__(message or f"cannot parse {token!r}")
        self.token = token


def parse_spec(spec: str) -> tuple[str, dict[str, str]]:
    name, _, rest = spec.strip().partition(":")
    if not name:
        raise SpecError(spec, "empty spec")
    params = {}
    if rest:
        for item in rest.split(","):
            key, eq, val = item.partition("=")
            if not eq or not key:
                raise SpecError(item)
            params[key.strip()] = val.strip()
    return name.strip(), params


def _num(params, key, default, cast=float):
    if key not in params:
        if default is None:
            raise SpecError(key, f"missing parameter {key!r}")
        return default
    try:
        return cast(params[key])
    except ValueError:
        raise SpecError(params[key]) from None


def _vec(params, key):
    try:
        return [float(v) for v in params[key].split("/")]
    except ValueError:
        raise SpecError(params[key]) from None


def parse_field(spec: str) -> AnalyticSolution:
    """Resolve a solution spec such as ``harmonic_poly:n=2,k=3`` or ``affine``.

    Optional ``shift=a/b/...`` and ``scale=c`` modifiers apply to any field.
    """
    name, p = parse_spec(spec)
    if name == "harmonic_poly":
        u = harmonic_polynomial(_num(p, "n", 2, int), _num(p, "k", None, int), _num(p, "variant", 0, int))
    elif name == "affine":
        u = affine(_num(p, "n", 2, int))
    elif name == "constant":
        u = constant(_num(p, "n", 2, int), _num(p, "value", 1.0))
    elif name == "torus_lift":
        m = _num(p, "m", 1, int)
        freq = [0] * m
        freq[0] = _num(p, "k", None, int)
        u = eigenfunction_lift(torus_mode(freq))
    else:
        raise SpecError(name, f"unknown field {name!r}")
    if "shift" in p:
        off = _vec(p, "shift")
        if len(off) != u.n:
            raise SpecError(p["shift"])
        u = shifted(u, off)
    if "scale" in p:
        u = scaled(u, _num(p, "scale", None))
    return u


def parse_coefficients(spec: str) -> CoefficientField:
    name, p = parse_spec(spec)
    try:
        if name == "identity":
            return identity(_num(p, "n", 2, int))
        if name == "diag":
            return diagonal(_vec(p, "values"))
        if name == "perturbed":
            return scalar_perturbation(_num(p, "n", 2, int), _num(p, "eps", 0.1), _num(p, "axis", 0, int))
        if name == "rotated":
            return rotated(_vec(p, "values"), _num(p, "angle", math.pi / 6))
    except SpecError:
        raise
    except (ValueError, KeyError) as exc:
        raise SpecError(spec, str(exc)) from None
    raise SpecError(name, f"unknown coefficient field {name!r}")
