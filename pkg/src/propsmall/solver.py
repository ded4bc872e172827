"""Finite-difference Dirichlet solver for ``div(A grad u) = 0`` on cubes.

Vertex-centred lattice, Dirichlet data on the boundary layer.  Axis fluxes use
face-averaged coefficients; the off-diagonal coefficients use centred 4-point
cross differences.  Every matrix entry is produced once from a per-edge weight
shared by both orientations, so the assembled operator is symmetric bit for
bit.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import RegularGridInterpolator

from .fields import CoefficientField
from .geometry import Cube, Lattice


class GridFunction:
    """Immutable samples on a lattice; scalar, or vector with a trailing axis."""

    def __init__(self, lattice: Lattice, values):
        values = np.array(values, dtype=float)
        if values.shape[: lattice.n] != lattice.shape or values.ndim > lattice.n + 1:
            raise ValueError(f"values of shape {values.shape} do not fit lattice {lattice.shape}")
        values.setflags(write=False)
        self.lattice = lattice
        self.values = values
        self._interp = None

    @property
    def n(self) -> int:
        return self.lattice.n

    @property
    def h(self) -> float:
        return self.lattice.h

    @property
    def is_vector(self) -> bool:
        return self.values.ndim == self.n + 1

    @property
    def cube(self) -> Cube:
        return self.lattice.bounding_cube

    def __call__(self, x) -> np.ndarray:
        """Multilinear interpolation; NaN outside the lattice box."""
        if self._interp is None:
            self._interp = RegularGridInterpolator(
                self.lattice.axes(), self.values, method="linear", bounds_error=False, fill_value=np.nan
            )
        x = np.asarray(x, dtype=float)
        return self._interp(x.reshape(-1, self.n)).reshape(x.shape[:-1] + self.values.shape[self.n :])

    def magnitude(self) -> "GridFunction":
        if not self.is_vector:
            return GridFunction(self.lattice, np.abs(self.values))
        return GridFunction(self.lattice, np.linalg.norm(self.values, axis=-1))

    def component(self, i: int) -> "GridFunction":
        return GridFunction(self.lattice, self.values[..., i])

    def dumps(self) -> str:
        if self.is_vector:
            raise ValueError("only scalar grid functions have a file format")
        lat = self.lattice
        header = ["grid", str(lat.n), *map(str, lat.shape), repr(lat.h), *map(repr, lat.center)]
        body = " ".join(repr(float(v)) for v in self.values.ravel(order="C"))
        return " ".join(header) + "\n" + body + "\n"

    @classmethod
    def loads(cls, text: str) -> "GridFunction":
        tokens = text.split()
        if not tokens or tokens[0] != "grid":
            raise ValueError("grid function file must start with 'grid'")
        n = int(tokens[1])
        shape = tuple(int(t) for t in tokens[2 : 2 + n])
        h = float(tokens[2 + n])
        center = tuple(float(t) for t in tokens[3 + n : 3 + 2 * n])
        body = tokens[3 + 2 * n :]
        if len(body) != int(np.prod(shape)):
            raise ValueError(f"expected {int(np.prod(shape))} values, found {len(body)}")
        return cls(Lattice(shape, h, center), np.array([float(t) for t in body]).reshape(shape))

    def write(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def read(cls, path) -> "GridFunction":
        return cls.loads(Path(path).read_text())


def sample(f, lattice: Lattice) -> GridFunction:
    """Values of an analytic solution, a callable, or a grid function on ``lattice``."""
    if isinstance(f, GridFunction):
        if f.lattice == lattice:
            return f
        return GridFunction(lattice, f(lattice.points()))
    return GridFunction(lattice, f(lattice.points()))


def gradient(u: GridFunction) -> GridFunction:
    """Central differences inside, second-order one-sided differences on faces."""
    if u.is_vector:
        raise ValueError("gradient of a vector field is not supported")
    if min(u.lattice.shape) < 3:
        raise ValueError("gradient needs at least 3 nodes per axis")
    parts = np.gradient(u.values, u.h, edge_order=2)
    if u.n == 1:
        parts = [parts]
    return GridFunction(u.lattice, np.stack(parts, axis=-1))


# --- discretisation ------------------------------------------------------------


def _offsets(n: int) -> list[tuple[int, ...]]:
    """Half of the stencil: ``e_a`` and ``e_a +- e_b`` for ``a < b``."""
    out = []
    for a in range(n):
        e = [0] * n
        e[a] = 1
        out.append(tuple(e))
    for a in range(n):
        for b in range(a + 1, n):
            for sb in (1, -1):
                e = [0] * n
                e[a], e[b] = 1, sb
                out.append(tuple(e))
    return out


@dataclass
class DiscreteSystem:
    """``K u_I = C g`` with ``K = -L`` restricted to interior nodes (SPD).

    ``edges`` maps each half-stencil offset to the per-node weight array of
    ``L`` on the edge ``(x, x + offset)``; ``diag`` holds ``L``'s centre weights.
    """

    lattice: Lattice
    matrix: sp.csr_matrix
    coupling: sp.csr_matrix
    interior: np.ndarray
    diag: np.ndarray
    edges: dict

    def stencil(self, index) -> dict[tuple[int, ...], float]:
        """Weights of ``L`` at node ``index`` keyed by neighbour offset."""
        n = self.lattice.n
        out = {(0,) * n: float(self.diag[tuple(index)])}
        for off, w in self.edges.items():
            for sign in (1, -1):
                base = [i if sign == 1 else i - o for i, o in zip(index, off)]
                pos = tuple(x - max(0, -o) for x, o in zip(base, off))
                if all(0 <= p < k for p, k in zip(pos, w.shape)):
                    out[tuple(sign * o for o in off)] = float(w[pos])
        return out

    def apply(self, u_full: np.ndarray) -> np.ndarray:
        """``L u`` at interior nodes, flattened in row-major interior order."""
        flat = np.asarray(u_full, dtype=float).ravel()
        return -(self.matrix @ flat[self.interior]) + self.coupling @ flat


def discretize(A: CoefficientField, Q: Cube, resolution: int) -> DiscreteSystem:
    if resolution < 9:
        raise ValueError("resolution must be at least 9 nodes per axis")
    if A.n != Q.n:
        raise ValueError("coefficient field and cube disagree on dimension")
    lat = Q.lattice(resolution)
    n, h = lat.n, lat.h
    coef = A(lat.points())
    if np.abs(coef - np.swapaxes(coef, -1, -2)).max() > 1e-12:
        raise ValueError("coefficient field is not symmetric at the lattice nodes")
    coef = (coef + np.swapaxes(coef, -1, -2)) / 2

    edges = {}
    diag = np.zeros(lat.shape)
    for off in _offsets(n):
        nz = [a for a, o in enumerate(off) if o]
        zero = (0,) * n
        if len(nz) == 1:
            caa = coef[..., nz[0], nz[0]]
            w = (_at(caa, off, zero) + _at(caa, off, off)) / 2 / h**2
            diag[_at_index(off, zero, lat.shape)] -= w
            diag[_at_index(off, off, lat.shape)] -= w
        else:
            a, b = nz
            cab = coef[..., a, b]
            ea = _unit(n, a, 1)
            if off[b] == 1:
                w = (_at(cab, off, ea) + _at(cab, off, _unit(n, b, 1))) / (4 * h**2)
            else:
                w = -(_at(cab, off, ea) + _at(cab, off, _unit(n, b, -1))) / (4 * h**2)
        edges[off] = w

    interior_mask = np.zeros(lat.shape, dtype=bool)
    interior_mask[(slice(1, -1),) * n] = True
    flat_index = np.arange(lat.size).reshape(lat.shape)
    interior = flat_index[interior_mask]
    position = np.full(lat.size, -1, dtype=np.int64)
    position[interior] = np.arange(interior.size)

    rows, cols, vals = [], [], []
    crow, ccol, cval = [], [], []
    for off, w in edges.items():
        src = flat_index[_at_index(off, (0,) * n, lat.shape)].ravel()
        dst = flat_index[_at_index(off, off, lat.shape)].ravel()
        ww = w.ravel()
        src_in = interior_mask.ravel()[src]
        dst_in = interior_mask.ravel()[dst]
        both = src_in & dst_in
        for r, c in ((src, dst), (dst, src)):
            rows.append(position[r[both]])
            cols.append(position[c[both]])
            vals.append(-ww[both])
        only_src = src_in & ~dst_in
        crow.append(position[src[only_src]])
        ccol.append(dst[only_src])
        cval.append(ww[only_src])
        only_dst = dst_in & ~src_in
        crow.append(position[dst[only_dst]])
        ccol.append(src[only_dst])
        cval.append(ww[only_dst])
    rows.append(np.arange(interior.size))
    cols.append(np.arange(interior.size))
    vals.append(-diag.ravel()[interior])

    m = interior.size
    K = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(m, m))
    C = sp.csr_matrix((np.concatenate(cval), (np.concatenate(crow), np.concatenate(ccol))), shape=(m, lat.size))
    K.eliminate_zeros()
    C.eliminate_zeros()
    return DiscreteSystem(lat, K, C, interior, diag, edges)


def _unit(n, a, sign):
    return tuple(sign if i == a else 0 for i in range(n))


def _at_index(off, shift, shape):
    """Index of ``x + shift`` for every base node ``x`` of the edge offset ``off``."""
    return tuple(slice(max(0, -o) + s, k - max(0, o) + s) for o, s, k in zip(off, shift, shape))


def _at(arr, off, shift):
    return arr[_at_index(off, shift, arr.shape)]


# --- conjugate gradients ---------------------------------------------------------


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    residual: float
    converged: bool
    max_principle: bool
    tolerance: float
    max_iterations: int


def conjugate_gradient(K, b: np.ndarray, tol: float, maxiter: int, x0: np.ndarray | None = None):
    """Jacobi-preconditioned CG; returns ``(x, iterations, relative residual)``.

    The returned iterate is the one with the smallest true residual seen.
    """
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros_like(b), 0, 0.0
    dinv = 1.0 / K.diagonal()
    r = b - K @ x
    z = dinv * r
    p = z.copy()
    rz = float(r @ z)
    best_x, best_res = x.copy(), float(np.linalg.norm(r)) / bnorm
    it = 0
    while best_res > tol and it < maxiter:
        Kp = K @ p
        pKp = float(p @ Kp)
        if pKp <= 0.0 or rz == 0.0:
            break  # exact solution reached, or round-off breakdown
        alpha = rz / pKp
        x += alpha * p
        r -= alpha * Kp
        it += 1
        res = float(np.linalg.norm(r)) / bnorm
        if res < best_res:
            best_x, best_res = x.copy(), res
        z = dinv * r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    true_res = float(np.linalg.norm(b - K @ best_x)) / bnorm
    return best_x, it, true_res


def solve_dirichlet(
    A: CoefficientField,
    Q: Cube,
    g,
    tol: float = 1e-10,
    resolution: int = 65,
    maxiter: int | None = None,
    system: DiscreteSystem | None = None,
) -> tuple[GridFunction, SolveReport]:
    """Solve with boundary values taken from ``g``.

    ``g`` is a callable on points (e.g. an ``AnalyticSolution``) or an array
    of values on the full lattice, of which only the boundary layer is used.
    """
    if not 0 < tol < 1:
        raise ValueError("tolerance must lie in (0, 1)")
    sysm = system or discretize(A, Q, resolution)
    lat = sysm.lattice
    if callable(g):
        gv = np.asarray(g(lat.points()), dtype=float)
    else:
        gv = np.asarray(g, dtype=float)
    if gv.shape != lat.shape:
        raise ValueError(f"boundary data of shape {gv.shape} does not match lattice {lat.shape}")
    boundary = np.ones(lat.shape, dtype=bool)
    boundary[(slice(1, -1),) * lat.n] = False
    gb = np.where(boundary, gv, 0.0)
    cap = maxiter if maxiter is not None else 50 * max(lat.shape)
    rhs = sysm.coupling @ gb.ravel()
    x, its, res = conjugate_gradient(sysm.matrix, rhs, tol, cap)
    u = gb.ravel().copy()
    u[sysm.interior] = x
    u = u.reshape(lat.shape)

    gmax = float(np.abs(gv[boundary]).max())
    eps = 10 * tol * gmax
    lo, hi = float(gv[boundary].min()), float(gv[boundary].max())
    inside = u[~boundary]
    mp = bool(inside.size == 0 or (inside.min() >= lo - eps and inside.max() <= hi + eps))
    report = SolveReport(its, res, res <= tol, mp, tol, cap)
    return GridFunction(lat, u), report
