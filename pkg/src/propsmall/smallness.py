"""Small-value sets of solutions and the measurements made on them.

Covers sublevel sets with their decay profiles, zero and critical sets with
their censuses, Remez checks, and the recursive bound propagator.

Sublevel sets live on a lattice over the half cube ``Q/2`` and are normalised
by ``sup_Q |f|``, so every quantity here is unchanged under ``f -> c f``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.ndimage import maximum_filter, minimum_filter
from scipy.optimize import brentq

from .doubling import (
    DEFAULT_DILATION,
    ZERO_FLOOR,
    DegenerateSupremum,
    DoublingTable,
    SamplingLattice,
    abs_values,
    cube_sup,
    doubling_index_ball,
    doubling_index_cube,
    resolve_target,
    set_sup,
)
from .fields import Eigenfunction, sphere_point
from .geometry import Ball, Cube, Lattice, PointSet, sublevel_contents
from .solver import GridFunction

DEFAULT_NODES = {1: 1025, 2: 257, 3: 129}


def _default_nodes(n: int) -> int:
    return DEFAULT_NODES.get(n, 17)


def _abs_on(f, lattice: Lattice) -> np.ndarray:
    vals = abs_values(f, lattice.points())
    if np.any(np.isnan(vals)):
        raise ValueError("lattice leaves the grid function's domain")
    return vals


def _positive_sup(f, Q: Cube) -> float:
    s = cube_sup(f, Q)
    if not s >= ZERO_FLOOR:
        raise DegenerateSupremum(f"supremum of |f| over {Q} is {s!r}")
    return s


# --- sublevel sets ----------------------------------------------------------------


@dataclass(frozen=True)
class SublevelSet:
    """Nodes of ``Q/2`` where ``|f| < exp(-a) sup_Q |f|``."""

    a: float
    mask: PointSet
    cube: Cube
    sup: float

    @property
    def threshold(self) -> float:
        return math.exp(-self.a) * self.sup


def sublevel_set(f, Q: Cube, a: float, nodes: int | None = None, target: str = "u") -> SublevelSet:
    if not a > 0:
        raise ValueError("a must be positive")
    g = resolve_target(f, target)
    lat = Q.scale(0.5).lattice(nodes or _default_nodes(Q.n))
    sup = _positive_sup(g, Q)
    vals = _abs_on(g, lat)
    return SublevelSet(float(a), PointSet(lat, vals < math.exp(-a) * sup), Q, sup)


def resolution_floor(values: np.ndarray, window: int = 4) -> float:
    """Smallest ``|f|`` the lattice resolves: min over nodes of the max of
    ``|f|`` on the axis cross of half-width ``window`` around the node."""
    n = values.ndim
    size = 2 * window + 1
    foot = np.zeros((size,) * n, dtype=bool)
    for a in range(n):
        idx = [window] * n
        idx[a] = slice(None)
        foot[tuple(idx)] = True
    return float(maximum_filter(values, footprint=foot, mode="nearest").min())


@dataclass(frozen=True)
class DecayFit:
    """Least-squares line through ``(a, log content)`` over admissible ``a``.

    ``intercept`` is shifted up so that the line bounds every admissible
    sample; ``ls_intercept`` is the plain least-squares value.
    """

    order: float
    a: tuple[float, ...]
    contents: tuple[float, ...]
    admissible: tuple[bool, ...]
    slope: float
    intercept: float
    ls_intercept: float
    index: float
    floor: float
    sup: float
    all_empty: bool

    def pairs(self) -> list[tuple[float, float]]:
        return [(a, c) for a, c, ok in zip(self.a, self.contents, self.admissible) if ok]


def decay_profile(
    f,
    Q: Cube,
    d: float,
    a_grid: Sequence[float],
    nodes: int | None = None,
    target: str = "u",
    window: int = 4,
    index: float | None = None,
) -> DecayFit:
    """Contents of order ``d`` of the sublevel sets ``E_a`` along ``a_grid``.

    An ``a`` is admissible when ``E_a`` is neither empty nor all of ``Q/2``
    and its threshold stays above :func:`resolution_floor`.  ``index``
    defaults to the ball doubling index of the ball inscribed in ``Q``.
    """
    a = np.asarray(a_grid, dtype=float)
    if a.ndim != 1 or a.size == 0 or np.any(np.diff(a) <= 0) or a[0] <= 0:
        raise ValueError("a grid must be positive and strictly increasing")
    if not 0 < d <= Q.n:
        raise ValueError(f"order must lie in (0, {Q.n}]")
    g = resolve_target(f, target)
    lat = Q.scale(0.5).lattice(nodes or _default_nodes(Q.n))
    sup = _positive_sup(g, Q)
    vals = _abs_on(g, lat)
    thr = np.exp(-a) * sup
    contents = sublevel_contents(vals, lat, thr, d)
    counts = np.searchsorted(np.sort(vals.ravel()), thr, side="left")
    floor = resolution_floor(vals, window)
    ok = (counts > 0) & (counts < vals.size) & (thr >= floor)
    if index is None:
        index = doubling_index_ball(g, Ball(Q.center, Q.side / 2))
    all_empty = bool(np.all(counts == 0))
    if ok.sum() >= 2:
        A = a[ok]
        y = np.log(contents[ok])
        slope, ls_int = np.polyfit(A, y, 1)
        intercept = float(np.max(y - slope * A))
    else:
        slope = ls_int = intercept = math.nan
    return DecayFit(
        order=float(d),
        a=tuple(a.tolist()),
        contents=tuple(contents.tolist()),
        admissible=tuple(ok.tolist()),
        slope=float(slope),
        intercept=float(intercept),
        ls_intercept=float(ls_int),
        index=float(index),
        floor=floor,
        sup=sup,
        all_empty=all_empty,
    )


# --- zero sets ----------------------------------------------------------------------


def _kuhn_simplices(n: int) -> list[np.ndarray]:
    """Vertex offsets of the ``n!`` simplices of the standard unit-cell split."""
    out = []
    for perm in itertools.permutations(range(n)):
        v = np.zeros(n, dtype=int)
        verts = [v.copy()]
        for a in perm:
            v[a] = 1
            verts.append(v.copy())
        out.append(np.array(verts))
    return out


def _corner(values: np.ndarray, off) -> np.ndarray:
    return values[tuple(slice(o, o + k - 1) for o, k in zip(off, values.shape))]


def _cross(vi, vj, pi, pj):
    t = vi / (vi - vj)
    return pi + t[..., None] * (pj - pi)


def _tri_area(p, q, r):
    return 0.5 * np.linalg.norm(np.cross(q - p, r - p), axis=-1)


def cell_zero_measures(values: np.ndarray, h: float) -> tuple[np.ndarray, int]:
    """Per-cell ``H^{n-1}`` of the zero set of the piecewise-linear interpolant.

    Zero counts as positive.  Returns the measures and the number of cells
    whose corners all vanish (where the interpolant is identically zero).
    """
    n = values.ndim
    if n not in (2, 3):
        raise ValueError("zero-set measure is implemented for n = 2 and n = 3")
    cell_shape = tuple(k - 1 for k in values.shape)
    total = np.zeros(cell_shape)
    for simplex in _kuhn_simplices(n):
        v = [_corner(values, off) for off in simplex]
        neg = [x < 0 for x in v]
        P = [off * float(h) for off in simplex]
        m = n + 1
        for i in range(m):
            others = [j for j in range(m) if j != i]
            lone = np.ones(cell_shape, dtype=bool)
            for j in others:
                lone &= neg[i] != neg[j]
            if not lone.any():
                continue
            vi = v[i][lone]
            pts = [_cross(vi, v[j][lone], P[i], P[j]) for j in others]
            if n == 2:
                total[lone] += np.linalg.norm(pts[1] - pts[0], axis=-1)
            else:
                total[lone] += _tri_area(*pts)
        if n == 3:
            # two negatives, two non-negatives; vertex 0 pairs with b
            for b in (1, 2, 3):
                c, d = [j for j in (1, 2, 3) if j != b]
                sel = (neg[0] == neg[b]) & (neg[0] != neg[c]) & (neg[0] != neg[d])
                if not sel.any():
                    continue
                V = [x[sel] for x in v]
                Pp = P
                p0c = _cross(V[0], V[c], Pp[0], Pp[c])
                p0d = _cross(V[0], V[d], Pp[0], Pp[d])
                pbd = _cross(V[b], V[d], Pp[b], Pp[d])
                pbc = _cross(V[b], V[c], Pp[b], Pp[c])
                total[sel] += _tri_area(p0c, p0d, pbd) + _tri_area(p0c, pbd, pbc)
    zero = values == 0
    flat = np.ones(cell_shape, dtype=bool)
    for off in itertools.product((0, 1), repeat=n):
        flat &= _corner(zero, off)
    return total, int(flat.sum())


@dataclass(frozen=True)
class ZeroSetMeasure:
    measure: float
    degenerate_cells: int
    nodes: int

    def __float__(self) -> float:
        return self.measure


def _zero_values(u, Q: Cube, nodes: int | None) -> tuple[np.ndarray, Lattice]:
    if isinstance(u, GridFunction) and nodes is None:
        lat = u.lattice
        if lat.bounding_cube == Q or (
            np.allclose(lat.center, Q.center) and math.isclose(lat.bounding_cube.side, Q.side)
        ):
            return np.asarray(u.values), lat
        nodes = max(lat.shape)
    lat = Q.lattice(nodes or _default_nodes(Q.n))
    vals = np.asarray(u(lat.points()), dtype=float)
    if np.any(np.isnan(vals)):
        raise ValueError("cube leaves the grid function's domain")
    return vals, lat


def zero_set_measure(u, Q: Cube, nodes: int | None = None) -> ZeroSetMeasure:
    """Length (n = 2) or area (n = 3) of ``{u = 0}`` inside ``Q``."""
    vals, lat = _zero_values(u, Q, nodes)
    cells, flat = cell_zero_measures(vals, lat.h)
    return ZeroSetMeasure(float(cells.sum()), flat, max(lat.shape))


@dataclass(frozen=True)
class ZeroLowerBound:
    """``H^{n-1}({u = 0} ∩ 2q) / s(q)^{n-1}`` over subcubes ``q`` meeting the zero set."""

    parts: int
    ratios: tuple[float, ...]
    cubes: tuple[tuple[int, ...], ...]
    constant: float
    clipped: bool


def zero_set_lower_bound(u, Q: Cube, parts: int, nodes: int | None = None) -> ZeroLowerBound:
    """Fit the least ``c`` with ``H^{n-1}(Z ∩ 2q) >= c s(q)^{n-1}`` for every
    subcube ``q`` of ``Q`` (``parts`` per axis) on which ``u`` changes sign.

    ``2q`` is clipped to ``Q``; ``clipped`` records whether that happened.
    """
    if parts < 1:
        raise ValueError("parts must be >= 1")
    n = Q.n
    if nodes is None:
        per = max(2, 2 * ((_default_nodes(n) - 1) // (2 * parts)))
        nodes = parts * per + 1
    if (nodes - 1) % (2 * parts):
        raise ValueError("nodes - 1 must be a multiple of 2 * parts")
    m = (nodes - 1) // parts
    vals, lat = _zero_values(u, Q, nodes)
    cells, _ = cell_zero_measures(vals, lat.h)
    s = Q.side / parts
    ratios, cubes, clipped = [], [], False
    for idx in itertools.product(range(parts), repeat=n):
        node_sl = tuple(slice(i * m, i * m + m + 1) for i in idx)
        block = vals[node_sl]
        if not (block.min() < 0 <= block.max()):
            continue
        lo = [i * m - m // 2 for i in idx]
        hi = [i * m + m + m // 2 for i in idx]
        if min(lo) < 0 or max(hi) > nodes - 1:
            clipped = True
        sl = tuple(slice(max(a, 0), min(b, nodes - 1)) for a, b in zip(lo, hi))
        ratios.append(float(cells[sl].sum()) / s ** (n - 1))
        cubes.append(idx)
    const = min(ratios) if ratios else math.nan
    return ZeroLowerBound(parts, tuple(ratios), tuple(cubes), const, clipped)


# --- Remez ----------------------------------------------------------------------------


@dataclass(frozen=True)
class RemezReport:
    """Least ``C >= 1`` with ``sup_Q <= C sup_E (C |Q| / |E|)^(C N)``."""

    constant: float
    sup_Q: float
    sup_E: float
    measure_E: float
    measure_Q: float
    index: float

    def rhs(self, C: float | None = None) -> float:
        C = self.constant if C is None else C
        return C * self.sup_E * (C * self.measure_Q / self.measure_E) ** (C * self.index)

    def certifies(self, rtol: float = 1e-9) -> bool:
        return self.sup_Q <= self.rhs() * (1 + rtol)


def remez_check(f, Q: Cube, E: PointSet, index: float | None = None, **index_kw) -> RemezReport:
    """``|E|`` is the node measure ``count * h^n``, capped at ``|Q|``."""
    if E.is_empty():
        raise ValueError("E must contain at least one node")
    sQ = _positive_sup(f, Q)
    sE = set_sup(f, E)
    if not sE >= ZERO_FLOOR:
        raise DegenerateSupremum("supremum over E vanishes")
    mE = min(E.node_measure(), Q.volume)
    if index is None:
        index = doubling_index_cube(f, Q, **index_kw).cube_index
    N = max(float(index), 0.0)
    L = math.log(Q.volume / mE)
    target = math.log(sQ / sE)

    def g(C):
        return math.log(C) + C * N * (math.log(C) + L) - target

    if g(1.0) >= 0:
        C = 1.0
    else:
        hi = 2.0
        while g(hi) < 0:
            hi *= 2
        C = brentq(g, 1.0, hi, xtol=1e-14, rtol=1e-14)
        # nudge onto the feasible side of the root
        while g(C) < 0:
            C = math.nextafter(C, math.inf)
    return RemezReport(C, sQ, sE, mE, Q.volume, N)


def random_mask(lattice: Lattice, density: float, seed: int) -> PointSet:
    """Nodes kept independently with probability ``density`` (SplitMix64 stream)."""
    from .rng import SplitMix64

    u = SplitMix64(seed).uniform(lattice.size).reshape(lattice.shape)
    mask = u < density
    if not mask.any():
        mask.flat[0] = True
    return PointSet(lattice, mask)


# --- censuses ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CensusReport:
    """Subcubes ``q`` of ``Q`` with ``N(f, q) >= max(N(f, Q) / 2, N0)``."""

    parts: int
    floor_index: float
    parent_index: float
    threshold: float
    count: int
    bad: tuple[tuple[int, ...], ...]
    indices: np.ndarray = field(repr=False)
    dilation: float = DEFAULT_DILATION
    target: str = "u"
    centers: int = 5
    radii: int = 4

    @property
    def exponent(self) -> float:
        return math.log(self.count) / math.log(self.parts) if self.count else -math.inf


def bad_cube_census(
    f,
    Q: Cube,
    B: int = 8,
    N0: float = 1.0,
    target: str = "u",
    centers: int = 5,
    radii: int = 4,
    dilation: float = DEFAULT_DILATION,
) -> CensusReport:
    """All subcube indices come from one nested sampling lattice, so
    ``N(f, q) <= N(f, Q)`` holds exactly."""
    if B < 2:
        raise ValueError("B must be >= 2")
    g = resolve_target(f, target)
    lat = SamplingLattice.for_subdivision(Q, B, centers, radii)
    table = DoublingTable(g, lat, dilation)
    parent = table.index(Q)[0]
    threshold = max(parent / 2, N0)
    subs = Q.subdivide(B)
    idx = np.array([table.index(q)[0] for q in subs]).reshape((B,) * Q.n)
    bad = tuple(tuple(int(i) for i in t) for t in np.argwhere(idx >= threshold))
    return CensusReport(B, float(N0), parent, threshold, len(bad), bad, idx, float(dilation), target, centers, radii)


def subcube_at(Q: Cube, parts: int, index: Sequence[int]) -> Cube:
    s = Q.side / parts
    c = Q.lo + (np.asarray(index) + 0.5) * s
    return Cube(tuple(c), s)


def recheck_bad(f, Q: Cube, report: CensusReport) -> list[bool]:
    """Re-measure each flagged subcube alone on a doubled sampling lattice."""
    g = resolve_target(f, report.target)
    out = []
    for idx in report.bad:
        q = subcube_at(Q, report.parts, idx)
        lat = SamplingLattice.for_cube(q, 2 * (report.centers - 1) + 1, 2 * report.radii)
        N = doubling_index_cube(g, q, lattice=lat, dilation=report.dilation).cube_index
        out.append(N >= report.threshold * (1 - 1e-12))
    return out


@dataclass(frozen=True)
class CriticalCensus:
    """Subcubes with ``inf_q |grad u| < c sup_{2q} |grad u|``."""

    K: int
    c: float
    count: int
    bad: tuple[tuple[int, ...], ...]
    clipped: bool
    samples: int

    @property
    def exponent(self) -> float:
        return math.log(self.count) / math.log(self.K) if self.count else -math.inf

    def bound(self, n: int, delta: float = 0.5, C: float = 1.0) -> float:
        return C * self.K ** (n - 2 + delta)


def critical_census(u, Q: Cube, K: int, c: float = 0.5, samples: int = 8) -> CriticalCensus:
    """``samples`` (even) lattice intervals per subcube edge; inf and sup are
    node extrema, and ``2q`` is clipped to the domain of a grid function."""
    if K < 2:
        raise ValueError("K must be >= 2")
    if samples < 2 or samples % 2:
        raise ValueError("samples per subcube must be a positive even number")
    g = resolve_target(u, "grad")
    n, m = Q.n, samples
    big = Cube(Q.center, Q.side * (K + 1) / K)
    lat = big.lattice((K + 1) * m + 1)
    vals = abs_values(g, lat.points())
    clipped = bool(np.isnan(vals).any())
    lo_v = np.where(np.isnan(vals), np.inf, vals)
    hi_v = np.where(np.isnan(vals), -np.inf, vals)
    inf_q = minimum_filter(lo_v, size=m + 1, mode="nearest")
    sup_2q = maximum_filter(hi_v, size=2 * m + 1, mode="nearest")
    # subcube i spans nodes [i m + m/2, i m + 3m/2]; centre node i m + m
    centre = tuple(slice(m, m + K * m, m) for _ in range(n))
    bad_mask = inf_q[centre] < c * sup_2q[centre]
    bad = tuple(tuple(int(i) for i in t) for t in np.argwhere(bad_mask))
    return CriticalCensus(int(K), float(c), len(bad), bad, clipped, m)


def census_slope(Ks: Sequence[int], counts: Sequence[int]) -> float:
    """Least-squares slope of ``log count`` against ``log K``."""
    counts = np.asarray(counts, dtype=float)
    if np.any(counts <= 0):
        raise ValueError("every count must be positive to fit a slope")
    return float(np.polyfit(np.log(np.asarray(Ks, dtype=float)), np.log(counts), 1)[0])


# --- recursive bound -----------------------------------------------------------------------


@dataclass(frozen=True)
class RecursionParams:
    B: float
    c: float
    delta: float
    C1: float
    beta: float
    C0: float

    def condition(self) -> float:
        """Left-hand side of the closed-form sufficient condition (must be <= 1)."""
        B, b = self.B, self.beta
        return B ** (1 - self.delta + 2 * self.C1 * b - self.C0 * b) + B ** (-self.delta - self.c + self.C1 * b)


def find_parameters(B: float, delta: float, c: float, C1: float, margin: float = 0.1,
                    beta: float | None = None) -> RecursionParams:
    """Pick ``beta`` (default ``(delta + c) / (2 C1)``) and the least ``C0``
    with ``condition() <= 1 - margin``."""
    if not (B > 1 and 0 < delta <= 1 and c > 0 and C1 > 0 and 0 <= margin < 1):
        raise ValueError("need B > 1, delta in (0, 1], c > 0, C1 > 0, margin in [0, 1)")
    beta = (delta + c) / (2 * C1) if beta is None else float(beta)
    second = B ** (-delta - c + C1 * beta)
    room = 1 - margin - second
    if not (beta > 0 and room > 0):
        raise ValueError("no C0 can satisfy the condition for this beta")
    C0 = (1 - delta + 2 * C1 * beta - math.log(room, B)) / beta
    return RecursionParams(float(B), float(c), float(delta), float(C1), beta, C0)


@dataclass(frozen=True)
class BoundTable:
    """Certified bounds ``M(N, a)`` on a dyadic ``N`` grid times an ``a`` grid."""

    params: RecursionParams
    Ns: tuple[float, ...]
    a: np.ndarray
    M: np.ndarray
    cap: float
    C: float

    def lookup(self, i: int, a) -> np.ndarray:
        """Row ``i`` linearly interpolated at ``a``; the cap below the grid."""
        a = np.asarray(a, dtype=float)
        return np.where(a < self.a[0], self.cap, np.interp(a, self.a, self.M[i]))

    def shift(self, N: float) -> float:
        return self.params.C1 * N * math.log(self.params.B)

    def rhs(self, i: int) -> np.ndarray:
        """Right-hand side of the recursion for row ``i >= 1`` on the grid."""
        p = self.params
        at = self.a - self.shift(self.Ns[i])
        return p.B ** (1 - p.delta) * self.lookup(i - 1, at) + p.B ** (-p.delta - p.c) * self.lookup(i, at)

    def recursion_violations(self, rtol: float = 1e-12) -> int:
        return int(sum(np.sum(self.M[i] > self.rhs(i) * (1 + rtol)) for i in range(1, len(self.Ns))))

    def closed_form(self) -> np.ndarray:
        N = np.asarray(self.Ns)[:, None]
        return self.C * np.exp(-self.params.beta * self.a[None, :] / N)

    def closed_form_violations(self, rtol: float = 1e-12) -> int:
        return int(np.sum(self.M > self.closed_form() * (1 + rtol)))


def recursive_bound_propagator(
    base: Callable[[np.ndarray], np.ndarray],
    params: RecursionParams,
    a_grid: Sequence[float],
    N0: float = 1.0,
    levels: int = 4,
    cap: float | None = None,
) -> BoundTable:
    """Fill ``M(N0 2^j, a)`` for ``j = 0..levels`` from the recursion.

    Row ``j = 0`` is ``base`` on the grid.  Each later entry, in order of
    increasing ``a``, is ``min(cap, rhs)`` where the right-hand side reads the
    already-filled table with linear interpolation in ``a`` and uses ``cap``
    for shifted arguments below the grid.  ``cap`` defaults to the largest
    base value.  ``C`` is the smallest constant for which the closed form
    dominates the base row and the cap below ``C0 N log B``.
    """
    p = params
    if not (p.B > 1 and 0 < p.delta <= 1 and p.c > 0 and p.C1 > 0 and p.beta > 0 and p.C0 > 0):
        raise ValueError("recursion parameters must be positive with B > 1 and delta in (0, 1]")
    if p.condition() > 1:
        raise ValueError(f"parameters fail the sufficient condition ({p.condition():.6g} > 1)")
    a = np.asarray(a_grid, dtype=float)
    if a.ndim != 1 or a.size < 2 or np.any(np.diff(a) <= 0):
        raise ValueError("a grid must be strictly increasing with at least two points")
    Ns = tuple(N0 * 2.0**j for j in range(levels + 1))
    max_shift = p.C1 * Ns[-1] * math.log(p.B)
    if a[-1] - a[0] <= max_shift:
        raise ValueError(f"a grid spans {a[-1] - a[0]:.6g}, not more than the largest shift {max_shift:.6g}")
    if np.max(np.diff(a)) > p.C1 * Ns[0] * math.log(p.B):
        raise ValueError("a grid spacing must not exceed the smallest shift C1 N0 log B")
    M = np.empty((len(Ns), a.size))
    M[0] = np.asarray(base(a), dtype=float)
    if np.any(M[0] < 0):
        raise ValueError("base bound must be non-negative")
    T = float(M[0].max()) if cap is None else float(cap)
    hi = p.B ** (1 - p.delta)
    lo = p.B ** (-p.delta - p.c)
    for i in range(1, len(Ns)):
        at = a - p.C1 * Ns[i] * math.log(p.B)
        prev = np.where(at < a[0], T, np.interp(at, a, M[i - 1]))
        row = M[i]
        for j in range(a.size):
            # at[j] <= a[j - 1], so only already-filled entries are read
            same = T if at[j] < a[0] else np.interp(at[j], a[:j], row[:j])
            row[j] = min(T, hi * prev[j] + lo * same)
    C_base = float(np.max(M[0] * np.exp(p.beta * a / N0)))
    C = max(C_base, T * p.B ** (p.beta * p.C0))
    return BoundTable(p, Ns, a, M, T, C)


# --- eigenfunctions --------------------------------------------------------------------------


@dataclass(frozen=True)
class PolarCap:
    """Points of the unit sphere with colatitude at most ``theta``."""

    theta: float

    def parameters(self, density: int) -> np.ndarray:
        th = np.linspace(0.0, self.theta, max(2, int(density * self.theta / math.pi) + 1))
        ph = 2 * np.pi * np.arange(2 * density) / (2 * density)
        return np.stack(np.meshgrid(th, ph, indexing="ij"), -1).reshape(-1, 2)

    def clip(self, params: np.ndarray) -> np.ndarray:
        out = params.copy()
        out[..., 0] = np.clip(out[..., 0], 0.0, self.theta)
        return out

    def points(self, params: np.ndarray) -> np.ndarray:
        return sphere_point(params[..., 0], params[..., 1])

    def step(self, density: int) -> float:
        return math.pi / density


@dataclass(frozen=True)
class TorusDisc:
    """Euclidean ball of radius ``radius`` around ``center`` on the flat torus."""

    center: tuple[float, ...]
    radius: float

    def parameters(self, density: int) -> np.ndarray:
        m = len(self.center)
        g = np.linspace(-self.radius, self.radius, density)
        P = np.stack(np.meshgrid(*([g] * m), indexing="ij"), -1).reshape(-1, m)
        return P[np.linalg.norm(P, axis=1) <= self.radius * (1 + 1e-12)]

    def clip(self, params: np.ndarray) -> np.ndarray:
        norm = np.linalg.norm(params, axis=-1, keepdims=True)
        return params * np.minimum(1.0, self.radius / np.maximum(norm, 1e-300))

    def points(self, params: np.ndarray) -> np.ndarray:
        return params + np.asarray(self.center)

    def step(self, density: int) -> float:
        return 2 * self.radius / (density - 1)


@dataclass(frozen=True)
class WholeTorus:
    dim: int

    def parameters(self, density: int) -> np.ndarray:
        g = np.arange(density) / density
        return np.stack(np.meshgrid(*([g] * self.dim), indexing="ij"), -1).reshape(-1, self.dim)

    def clip(self, params: np.ndarray) -> np.ndarray:
        return params

    def points(self, params: np.ndarray) -> np.ndarray:
        return params

    def step(self, density: int) -> float:
        return 1.0 / density


def region_sup(phi: Eigenfunction, region, density: int = 361, rounds: int = 8) -> float:
    """Sampled maximum of ``|phi|`` over ``region`` plus local refinement."""
    P = region.parameters(density)
    vals = np.abs(phi(region.points(P)))
    i = int(np.argmax(vals))
    best, bp = float(vals[i]), P[i]
    dim = P.shape[1]
    offs = np.stack(np.meshgrid(*([np.arange(-2.0, 3.0)] * dim), indexing="ij"), -1).reshape(-1, dim)
    step = region.step(density) / 2
    for _ in range(rounds):
        cand = region.clip(bp + step * offs)
        cv = np.abs(phi(region.points(cand)))
        j = int(np.argmax(cv))
        if cv[j] > best:
            best, bp = float(cv[j]), cand[j]
        step *= 0.4
    return best


def whole_manifold(phi: Eigenfunction):
    return PolarCap(math.pi) if phi.manifold == "sphere" else WholeTorus(phi.dim)


@dataclass(frozen=True)
class EigenRemezFit:
    """``log(sup_E |phi_k| / sup_M |phi_k|)`` against ``k`` and ``sqrt(lambda_k)``."""

    ks: tuple[int, ...]
    eigenvalues: tuple[float, ...]
    log_ratios: tuple[float, ...]
    slope_k: float
    slope_sqrt_lambda: float
    worst_rate: float


def eigen_remez_check(
    family: Callable[[int], Eigenfunction],
    region,
    ks: Sequence[int],
    density: int = 361,
) -> EigenRemezFit:
    """``region=None`` means the whole manifold.  ``worst_rate`` is the largest
    ``-log ratio / sqrt(lambda)``: the observed constant of a ``C sqrt(lambda)``
    exponent."""
    ks = tuple(int(k) for k in ks)
    lams, logs = [], []
    for k in ks:
        phi = family(k)
        supM = region_sup(phi, whole_manifold(phi), density)
        supE = supM if region is None else region_sup(phi, region, density)
        if not supE >= ZERO_FLOOR:
            raise DegenerateSupremum(f"{phi.label} vanishes on the region")
        lams.append(phi.eigenvalue)
        logs.append(math.log(min(supE / supM, 1.0)))
    k_arr = np.asarray(ks, dtype=float)
    root = np.sqrt(np.asarray(lams))
    y = np.asarray(logs)
    if len(ks) >= 2:
        slope_k = float(np.polyfit(k_arr, y, 1)[0])
        slope_l = float(np.polyfit(root, y, 1)[0])
    else:
        slope_k = slope_l = math.nan
    rates = -y / np.where(root > 0, root, 1.0)
    return EigenRemezFit(ks, tuple(lams), tuple(logs), slope_k, slope_l, float(np.max(rates)))
