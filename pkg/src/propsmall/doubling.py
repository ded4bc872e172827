"""Doubling indices of ``|f|`` over balls and cubes, and the checks built on them.

``f`` is an :class:`~propsmall.fields.AnalyticSolution` (or any vectorised
callable on points) or a :class:`~propsmall.solver.GridFunction`.  Suprema of
analytic targets come from a fixed template of sample points (boundary sphere
plus interior shells) followed by a few rounds of local grid refinement around
the best sample.  Suprema of grid functions are node maxima plus one
interpolated refinement toward the ball's boundary.  Both are lower estimates
of the true supremum.
"""
from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .fields import AnalyticSolution, gradient_magnitude
from .geometry import Ball, Cube, PointSet
from .rng import SplitMix64
from .solver import GridFunction, gradient

ZERO_FLOOR = 1e-300
DEFAULT_DILATION = 4.0
_CHUNK = 1 << 21


class DegenerateSupremum(ValueError):
    """The supremum over a ball or set fell below ``ZERO_FLOOR``."""


def resolve_target(f, target: str = "u"):
    """``f`` itself for ``target='u'``, ``|grad f|`` for ``target='grad'``."""
    if target == "u":
        return f
    if target != "grad":
        raise ValueError(f"target must be 'u' or 'grad', got {target!r}")
    if isinstance(f, GridFunction):
        return gradient(f).magnitude()
    return gradient_magnitude(f)


def _dim(f) -> int:
    if isinstance(f, (GridFunction, AnalyticSolution)):
        return f.n
    raise TypeError("cannot infer the dimension of a plain callable; wrap it in AnalyticSolution")


# --- analytic suprema ------------------------------------------------------------


@functools.lru_cache(maxsize=None)
def _ball_template(n: int) -> np.ndarray:
    """Sample points of the closed unit ball: boundary sphere, shells, centre."""
    if n == 2:
        ang = 2 * np.pi * np.arange(360) / 360
        pts = [np.stack([np.cos(ang), np.sin(ang)], -1)]
        inner = 2 * np.pi * np.arange(90) / 90
        for rho in (0.75, 0.5, 0.25):
            pts.append(rho * np.stack([np.cos(inner), np.sin(inner)], -1))
    elif n == 3:
        def sphere(nt, nphi):
            th = np.pi * np.arange(nt) / (nt - 1)
            ph = 2 * np.pi * np.arange(nphi) / nphi
            T, P = np.meshgrid(th, ph, indexing="ij")
            return np.stack([np.sin(T) * np.cos(P), np.sin(T) * np.sin(P), np.cos(T)], -1).reshape(-1, 3)
        pts = [sphere(19, 36), 0.5 * sphere(10, 18)]
    else:
        dirs = []
        for a in range(n):
            for s in (1.0, -1.0):
                e = np.zeros(n)
                e[a] = s
                dirs.append(e)
        for a, b in itertools.combinations(range(n), 2):
            for sa, sb in itertools.product((1.0, -1.0), repeat=2):
                e = np.zeros(n)
                e[a], e[b] = sa / math.sqrt(2), sb / math.sqrt(2)
                dirs.append(e)
        z = SplitMix64(n).normal(2000 * n).reshape(2000, n)
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        boundary = np.concatenate([np.array(dirs), z])
        pts = [boundary, 0.5 * boundary[::4]]
    pts.append(np.zeros((1, n)))
    return np.concatenate(pts)


@functools.lru_cache(maxsize=None)
def _refine_offsets(n: int) -> np.ndarray:
    g = np.arange(-2, 3, dtype=float)
    return np.stack(np.meshgrid(*([g] * n), indexing="ij"), -1).reshape(-1, n)


def _refine_step(n: int) -> float:
    return {2: 2 * np.pi / 360, 3: np.pi / 18}.get(n, 0.3)


def abs_values(f, pts: np.ndarray) -> np.ndarray:
    """``|f|`` at ``pts`` (shape ``(..., n)``), evaluated in bounded chunks."""
    out = np.empty(pts.shape[:-1])
    flat = pts.reshape(-1, pts.shape[-1])
    o = out.reshape(-1)
    for s in range(0, flat.shape[0], _CHUNK):
        o[s : s + _CHUNK] = np.abs(f(flat[s : s + _CHUNK]))
    return out


def _analytic_ball_sups(f, centers: np.ndarray, radii: np.ndarray, rounds: int) -> np.ndarray:
    n = centers.shape[1]
    tmpl = _ball_template(n)
    offs = _refine_offsets(n)
    out = np.empty(len(radii))
    per = max(1, _CHUNK // tmpl.shape[0])
    for s in range(0, len(radii), per):
        c = centers[s : s + per, None, :]
        r = radii[s : s + per, None, None]
        pts = c + r * tmpl
        vals = abs_values(f, pts)
        best = np.argmax(vals, axis=1)
        sup = vals[np.arange(len(best)), best]
        bp = pts[np.arange(len(best)), best]
        step = _refine_step(n) * r[:, 0, 0]
        for _ in range(rounds):
            cand = bp[:, None, :] + step[:, None, None] * offs
            rel = cand - c
            norm = np.linalg.norm(rel, axis=-1, keepdims=True)
            scale = np.minimum(1.0, r / np.maximum(norm, 1e-300))
            cand = c + rel * scale
            cv = abs_values(f, cand)
            j = np.argmax(cv, axis=1)
            cvj = cv[np.arange(len(j)), j]
            better = cvj > sup
            sup = np.where(better, cvj, sup)
            bp = np.where(better[:, None], cand[np.arange(len(j)), j], bp)
            step = step * 0.4
        out[s : s + per] = sup
    return out


def _analytic_cube_sup(f, cube: Cube, nodes: int | None, rounds: int) -> float:
    n = cube.n
    if nodes is None:
        nodes = {2: 65, 3: 33}.get(n, 9)
    lat = cube.lattice(nodes)
    pts = lat.points().reshape(-1, n)
    vals = abs_values(f, pts)
    i = int(np.argmax(vals))
    sup, bp = float(vals[i]), pts[i]
    step = lat.h / 2
    offs = _refine_offsets(n)
    lo, hi = cube.lo, cube.hi
    for _ in range(rounds):
        cand = np.clip(bp + step * offs, lo, hi)
        cv = abs_values(f, cand)
        j = int(np.argmax(cv))
        if cv[j] > sup:
            sup, bp = float(cv[j]), cand[j]
        step *= 0.4
    return sup


# --- grid suprema ---------------------------------------------------------------


def _grid_ball_sup(u: GridFunction, center: np.ndarray, radius: float) -> tuple[float, bool]:
    """Node maximum over the ball, refined once along the steepest outward edge.

    Returns ``(sup, clipped)``; ``clipped`` is set when the ball leaves the box.
    """
    lat = u.lattice
    vals = np.abs(u.values)
    lo = np.asarray(lat.center) - (np.asarray(lat.shape) - 1) / 2 * lat.h
    hi = lo + (np.asarray(lat.shape) - 1) * lat.h
    clipped = bool(np.any(center - radius < lo - 1e-12) or np.any(center + radius > hi + 1e-12))
    imin = np.maximum(np.ceil((center - radius - lo) / lat.h - 1e-9).astype(int), 0)
    imax = np.minimum(np.floor((center + radius - lo) / lat.h + 1e-9).astype(int), np.asarray(lat.shape) - 1)
    best = -1.0
    best_idx = None
    if np.all(imax >= imin):
        box = tuple(slice(a, b + 1) for a, b in zip(imin, imax))
        sub = vals[box]
        coords = [lo[a] + np.arange(imin[a], imax[a] + 1) * lat.h - center[a] for a in range(lat.n)]
        d2 = sum(np.meshgrid(*[c**2 for c in coords], indexing="ij"))
        inside = d2 <= radius**2 * (1 + 1e-12)
        if inside.any():
            masked = np.where(inside, sub, -1.0)
            k = int(np.argmax(masked))
            best = float(masked.flat[k])
            best_idx = np.array(np.unravel_index(k, sub.shape)) + imin
    # interpolated probes: centre and the axis points of the sphere
    probes = [center]
    for a in range(lat.n):
        for s in (1.0, -1.0):
            p = center.copy()
            p[a] += s * radius
            probes.append(p)
    pv = np.abs(u(np.array(probes)))
    pv = np.where(np.isnan(pv), -1.0, pv)
    best = max(best, float(pv.max()))
    if best_idx is not None:
        node = lo + best_idx * lat.h
        cand = []
        for a in range(lat.n):
            for s in (1, -1):
                j = best_idx.copy()
                j[a] += s
                if not 0 <= j[a] < lat.shape[a]:
                    continue
                nb = lo + j * lat.h
                if np.sum((nb - center) ** 2) <= radius**2:
                    continue
                if vals[tuple(j)] <= vals[tuple(best_idx)]:
                    continue
                cand.append((vals[tuple(j)], a, s, nb))
        if cand:
            _, a, s, nb = max(cand, key=lambda t: t[0])
            # crossing of the segment node -> nb with the sphere
            d = nb - node
            w = node - center
            qa, qb, qc = d @ d, 2 * d @ w, w @ w - radius**2
            t = (-qb + math.sqrt(max(qb * qb - 4 * qa * qc, 0.0))) / (2 * qa)
            t = min(max(t, 0.0), 1.0)
            v0, v1 = u.values[tuple(best_idx)], u.values[tuple(best_idx + _unit(lat.n, a, s))]
            best = max(best, abs((1 - t) * v0 + t * v1))
    return best, clipped


def _unit(n, a, s):
    e = np.zeros(n, dtype=int)
    e[a] = s
    return e


def _grid_cube_sup(u: GridFunction, cube: Cube) -> float:
    lat = u.lattice
    axes = lat.axes()
    sel = []
    for a in range(lat.n):
        m = (axes[a] >= cube.lo[a] - 1e-12) & (axes[a] <= cube.hi[a] + 1e-12)
        sel.append(np.nonzero(m)[0])
    if all(len(s) for s in sel):
        return float(np.abs(u.values[np.ix_(*sel)]).max())
    v = abs(float(u(np.asarray(cube.center)[None])[0]))
    if math.isnan(v):
        raise ValueError("cube lies outside the grid function's domain")
    return v


# --- public sup helpers ---------------------------------------------------------


def ball_sups(f, centers, radii, rounds: int = 6) -> tuple[np.ndarray, bool]:
    """Suprema of ``|f|`` over the balls ``B(centers[i], radii[i])``.

    Returns the suprema and whether any ball had to be clipped to the domain.
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    radii = np.broadcast_to(np.asarray(radii, dtype=float), (centers.shape[0],)).copy()
    if isinstance(f, GridFunction):
        sups = np.empty(len(radii))
        clipped = False
        for i, (c, r) in enumerate(zip(centers, radii)):
            sups[i], cl = _grid_ball_sup(f, c, float(r))
            clipped |= cl
        return sups, clipped
    return _analytic_ball_sups(f, centers, radii, rounds), False


def ball_sup(f, B: Ball) -> float:
    return float(ball_sups(f, [B.center], [B.radius])[0][0])


def cube_sup(f, Q: Cube, nodes: int | None = None, rounds: int = 6) -> float:
    if isinstance(f, GridFunction):
        return _grid_cube_sup(f, Q)
    return _analytic_cube_sup(f, Q, nodes, rounds)


def set_sup(f, E: PointSet) -> float:
    """Maximum of ``|f|`` over the masked nodes of ``E``."""
    if E.is_empty():
        raise ValueError("supremum over an empty set")
    pts = E.points()
    vals = np.abs(f(pts))
    if np.any(np.isnan(vals)):
        raise ValueError("point set leaves the grid function's domain")
    return float(vals.max())


def _check_floor(sup: float, what: str):
    if not sup >= ZERO_FLOOR:
        raise DegenerateSupremum(f"supremum of |f| over {what} is {sup!r}; the sample is identically zero")


# --- ball index, monotonicity, three spheres ----------------------------------------


def doubling_index_ball(f, B: Ball) -> float:
    """``log(sup_{2B} |f| / sup_B |f|)``."""
    sups, _ = ball_sups(f, [B.center, B.center], [B.radius, 2 * B.radius])
    _check_floor(sups[0], f"ball {B}")
    return float(math.log(sups[1] / sups[0]))


@dataclass(frozen=True)
class MonotonicityFit:
    """Certified constants for ``N(tB) <= N(B)(1 + c) + C`` on the sampled ``t``.

    ``additive`` is the least ``C`` with ``c = 0``; ``multiplicative`` the least
    ``c`` with ``C = 0`` (infinite when ``N(B) = 0`` but some ``N(tB) > 0``).
    """

    ts: tuple[float, ...]
    indices: tuple[float, ...]
    base_index: float
    additive: float
    multiplicative: float
    worst_violation: float

    def certifies(self, c: float, C: float, atol: float = 1e-12) -> bool:
        return all(N <= self.base_index * (1 + c) + C + atol for N in self.indices)


def check_monotonicity(f, B: Ball, ts: Sequence[float] = (0.5, 0.25, 0.125)) -> MonotonicityFit:
    ts = tuple(float(t) for t in ts)
    if any(not 0 < t <= 0.5 for t in ts):
        raise ValueError("t values must lie in (0, 1/2]")
    radii = [B.radius] + [t * B.radius for t in ts]
    centers = [B.center] * len(radii)
    sups, _ = ball_sups(f, centers * 2, radii + [2 * r for r in radii])
    m = len(radii)
    for s in sups[:m]:
        _check_floor(s, f"a ball centred at {B.center}")
    idx = np.log(sups[m:] / sups[:m])
    base, rest = float(idx[0]), tuple(float(v) for v in idx[1:])
    excess = max(N - base for N in rest)
    additive = max(0.0, excess)
    if base > 0:
        multiplicative = max(0.0, max(N / base - 1 for N in rest))
    else:
        multiplicative = 0.0 if max(rest) <= 0 else math.inf
    return MonotonicityFit(ts, rest, base, additive, multiplicative, excess)


class ThreeSpheres(NamedTuple):
    gamma: float
    feasible: bool


def three_spheres_check(f, B: Ball) -> ThreeSpheres:
    """Largest ``gamma`` with ``sup_B <= sup_{B/2}^gamma sup_{2B}^(1-gamma)``.

    ``feasible`` reports whether some ``gamma > 0`` works with constant 1.
    """
    r = B.radius
    sups, _ = ball_sups(f, [B.center] * 3, [r / 2, r, 2 * r])
    half, one, two = (float(s) for s in sups)
    _check_floor(half, f"ball {B.scale(0.5)}")
    if two <= half:
        return ThreeSpheres(1.0, True)
    gamma = math.log(two / one) / math.log(two / half)
    return ThreeSpheres(gamma, gamma > 0)


# --- cube index -------------------------------------------------------------------------


@dataclass(frozen=True)
class SamplingLattice:
    """Centres on a fixed grid over ``root`` and a fixed set of radii.

    A cube samples the centres of this grid that it contains and the radii no
    larger than its side, so the admissible sets of nested cubes nest too.
    """

    root: Cube
    centers_per_axis: int
    radii: tuple[float, ...]

    @classmethod
    def for_cube(cls, Q: Cube, centers: int = 17, radii_levels: int = 6) -> "SamplingLattice":
        if centers < 2:
            raise ValueError("need at least 2 centres per axis")
        return cls(Q, int(centers), tuple(Q.side * 2.0**-j for j in range(radii_levels + 1)))

    @classmethod
    def for_subdivision(cls, Q: Cube, parts: int, centers: int = 5, radii_levels: int = 4) -> "SamplingLattice":
        """Lattice whose restriction to each of the ``parts**n`` subcubes is that
        subcube's own ``centers``-per-axis grid with its own dyadic radii."""
        sub = Q.side / parts
        radii = {Q.side * 2.0**-j for j in range(radii_levels + 1)}
        radii |= {sub * 2.0**-j for j in range(radii_levels + 1)}
        return cls(Q, parts * (centers - 1) + 1, tuple(sorted(radii, reverse=True)))

    def all_centers(self) -> np.ndarray:
        return self.root.lattice(self.centers_per_axis).points().reshape(-1, self.root.n)

    def refined(self) -> "SamplingLattice":
        """Twice as many centre intervals and twice as many radius levels."""
        radii = set(self.radii)
        rmax, rmin = max(self.radii), min(self.radii)
        r = rmax
        while r >= rmin * 2.0 ** -(len(self.radii)) * (1 - 1e-12):
            radii.add(r)
            r /= 2
        return SamplingLattice(self.root, 2 * self.centers_per_axis - 1, tuple(sorted(radii, reverse=True)))


@dataclass(frozen=True)
class DoublingReport:
    target: str
    ball_index: float
    cube_index: float
    argmax_center: tuple[float, ...]
    argmax_radius: float
    dilation: float
    centers_per_axis: int
    radii_levels: int
    clipped: bool


class DoublingTable:
    """Log-ratios ``log(sup_{B(x, D r)} / sup_{B(x, r)})`` for every lattice pair."""

    def __init__(self, f, lattice: SamplingLattice, dilation: float = DEFAULT_DILATION):
        self.lattice = lattice
        self.dilation = float(dilation)
        centers = lattice.all_centers()
        radii = np.asarray(lattice.radii)
        C = np.repeat(centers, len(radii), axis=0)
        R = np.tile(radii, len(centers))
        # pairs sorted lexicographically by (x, r) for deterministic tie-breaks
        order = np.lexsort(tuple(np.column_stack([C, R]).T[::-1]))
        self.centers, self.radii = C[order], R[order]
        small, c1 = ball_sups(f, self.centers, self.radii)
        big, c2 = ball_sups(f, self.centers, self.dilation * self.radii)
        self.clipped = c1 or c2
        self.small, self.big = small, big
        with np.errstate(divide="ignore", invalid="ignore"):
            self.ratios = np.log(big / small)

    def index(self, Q: Cube) -> tuple[float, np.ndarray, float]:
        """Maximal index over pairs with centre in ``Q`` and radius ``<= s(Q)``."""
        sel = Q.contains(self.centers, tol=1e-9) & (self.radii <= Q.side * (1 + 1e-9))
        if not sel.any():
            raise ValueError(f"no sampling pair is admissible for {Q}")
        if np.any(self.small[sel] < ZERO_FLOOR):
            raise DegenerateSupremum(f"|f| vanishes on a sampled ball inside {Q}")
        idx = np.nonzero(sel)[0]
        k = idx[int(np.argmax(self.ratios[idx]))]
        return float(self.ratios[k]), self.centers[k], float(self.radii[k])


def doubling_index_cube(
    f,
    Q: Cube,
    centers: int = 17,
    radii: int = 6,
    dilation: float = DEFAULT_DILATION,
    target: str = "u",
    lattice: SamplingLattice | None = None,
    table: DoublingTable | None = None,
) -> DoublingReport:
    """Maximal doubling index over centres in ``Q`` and dyadic radii ``r <= s(Q)``.

    ``dilation`` replaces the factor ``10 n``; pass ``10 * n`` for the original.
    A shared ``lattice`` (or a precomputed ``table``) makes indices of nested
    cubes exactly monotone.
    """
    g = resolve_target(f, target)
    if table is None:
        lattice = lattice or SamplingLattice.for_cube(Q, centers, radii)
        table = DoublingTable(g, lattice, dilation)
    N, x, r = table.index(Q)
    ball = Ball(Q.center, Q.side / 2)
    return DoublingReport(
        target=target,
        ball_index=doubling_index_ball(g, ball),
        cube_index=N,
        argmax_center=tuple(float(v) for v in x),
        argmax_radius=r,
        dilation=table.dilation,
        centers_per_axis=table.lattice.centers_per_axis,
        radii_levels=len(table.lattice.radii) - 1,
        clipped=table.clipped,
    )


class SubcubeBound(NamedTuple):
    ratio: float
    exponent: float
    index: float
    K: float


def subcube_lower_bound_check(f, Q: Cube, q: Cube, **index_kw) -> SubcubeBound:
    """Least ``C'`` with ``sup_q |f| >= K^(-C' N) sup_Q |f|``, ``K = s(Q)/s(q)``."""
    if not Q.contains_cube(q):
        raise ValueError("q must lie inside Q")
    K = Q.side / q.side
    if K < 2 - 1e-12:
        raise ValueError("need s(Q) / s(q) >= 2")
    sq, sQ = cube_sup(f, q), cube_sup(f, Q)
    _check_floor(sq, f"cube {q}")
    N = doubling_index_cube(f, Q, **index_kw).cube_index
    ratio = sq / sQ
    if ratio >= 1:
        return SubcubeBound(ratio, 0.0, N, K)
    need = -math.log(ratio) / math.log(K)
    exponent = need / N if N > 0 else math.inf
    return SubcubeBound(ratio, exponent, N, K)


# --- propagation of smallness ----------------------------------------------------------


@dataclass(frozen=True)
class PropagationFit:
    """``sup_K |u| <= C sup_E^gamma sup_Omega^(1 - gamma)`` with ``C = 1``."""

    gamma: float
    C: float
    sup_E: float
    sup_K: float
    sup_omega: float
    vacuous: bool

    def certifies(self, rtol: float = 1e-12) -> bool:
        rhs = self.C * self.sup_E**self.gamma * self.sup_omega ** (1 - self.gamma)
        return self.sup_K <= rhs * (1 + rtol)


def propagation_fit(u, E: PointSet, K: PointSet, omega: Cube | None = None) -> PropagationFit:
    """Largest exponent making the three-sets inequality hold with constant 1.

    ``omega`` defaults to the grid function's box, or to the bounding cube of
    ``E``'s lattice for analytic ``u``.
    """
    sE, sK = set_sup(u, E), set_sup(u, K)
    if omega is not None:
        sO = cube_sup(u, omega)
    elif isinstance(u, GridFunction):
        sO = float(np.abs(u.values).max())
    else:
        sO = cube_sup(u, E.lattice.bounding_cube)
    sO = max(sO, sE, sK)
    _check_floor(sO, "the domain")
    if sE >= sO:
        return PropagationFit(1.0, 1.0, sE, sK, sO, True)
    if sK <= 0:
        return PropagationFit(math.inf, 1.0, sE, sK, sO, False)
    gamma = math.log(sK / sO) / math.log(sE / sO) if sE > 0 else 0.0
    return PropagationFit(gamma, 1.0, sE, sK, sO, False)
