"""Cubes, balls, lattice point sets and dyadic Hausdorff-content estimates.

Sets are represented by boolean masks over a vertex-centred lattice.  Content
estimates use covers by dyadic subcubes of the lattice's bounding cube, each
cube charged with the radius of its circumscribed ball, ``side * sqrt(n) / 2``.
Every lattice node is assigned to exactly one dyadic cube per generation
(half-open cells, the last cell closed), so the partitions nest.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np


@dataclass(frozen=True)
class Cube:
    center: tuple[float, ...]
    side: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if len(self.center) < 1:
            raise ValueError("cube needs at least one coordinate")
        if not self.side > 0:
            raise ValueError(f"cube side must be positive, got {self.side}")

    @property
    def n(self) -> int:
        return len(self.center)

    @property
    def lo(self) -> np.ndarray:
        return np.asarray(self.center) - self.side / 2

    @property
    def hi(self) -> np.ndarray:
        return np.asarray(self.center) + self.side / 2

    @property
    def diameter(self) -> float:
        return self.side * math.sqrt(self.n)

    @property
    def volume(self) -> float:
        return self.side**self.n

    def scale(self, t: float) -> "Cube":
        if not t > 0:
            raise ValueError("scale factor must be positive")
        return Cube(self.center, self.side * t)

    def subdivide(self, parts: int) -> list["Cube"]:
        """Split into ``parts**n`` equal closed subcubes, row-major (last axis fastest)."""
        if int(parts) != parts or parts < 2:
            raise ValueError(f"subdivision factor must be an integer >= 2, got {parts}")
        parts = int(parts)
        s = self.side / parts
        lo = self.lo
        return [
            Cube(tuple(lo + (np.asarray(idx) + 0.5) * s), s)
            for idx in itertools.product(range(parts), repeat=self.n)
        ]

    def contains(self, points, tol: float = 1e-12) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        slack = tol * max(self.side, 1.0)
        return np.all((p >= self.lo - slack) & (p <= self.hi + slack), axis=-1)

    def contains_cube(self, other: "Cube", tol: float = 1e-12) -> bool:
        slack = tol * max(self.side, 1.0)
        return bool(np.all(other.lo >= self.lo - slack) and np.all(other.hi <= self.hi + slack))

    def lattice(self, nodes: int) -> "Lattice":
        """Vertex-centred lattice with ``nodes`` points per axis spanning the cube."""
        if nodes < 2:
            raise ValueError("a lattice needs at least 2 nodes per axis")
        return Lattice((nodes,) * self.n, self.side / (nodes - 1), self.center)


@dataclass(frozen=True)
class Ball:
    center: tuple[float, ...]
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if not self.radius > 0:
            raise ValueError(f"ball radius must be positive, got {self.radius}")

    @property
    def n(self) -> int:
        return len(self.center)

    def scale(self, t: float) -> "Ball":
        if not t > 0:
            raise ValueError("scale factor must be positive")
        return Ball(self.center, self.radius * t)

    def contains(self, points, tol: float = 1e-12) -> np.ndarray:
        p = np.asarray(points, dtype=float) - np.asarray(self.center)
        return np.sqrt(np.sum(p * p, axis=-1)) <= self.radius * (1 + tol)


@dataclass(frozen=True)
class Lattice:
    """Regular lattice with spacing ``h`` centred at ``center``; node ``i`` on
    axis ``a`` sits at ``center[a] + (i - (shape[a] - 1) / 2) * h``."""

    shape: tuple[int, ...]
    h: float
    center: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(int(k) for k in self.shape))
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if len(self.shape) != len(self.center):
            raise ValueError("lattice shape and center disagree on dimension")
        if min(self.shape) < 2:
            raise ValueError("a lattice needs at least 2 nodes per axis")
        if not self.h > 0:
            raise ValueError("lattice spacing must be positive")

    @property
    def n(self) -> int:
        return len(self.shape)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def axis(self, a: int) -> np.ndarray:
        k = self.shape[a]
        return self.center[a] + (np.arange(k) - (k - 1) / 2) * self.h

    def axes(self) -> list[np.ndarray]:
        return [self.axis(a) for a in range(self.n)]

    def points(self) -> np.ndarray:
        """All node coordinates, shape ``shape + (n,)``."""
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    @property
    def bounding_cube(self) -> Cube:
        return Cube(self.center, (max(self.shape) - 1) * self.h)

    @property
    def resolution_depth(self) -> int:
        """Finest dyadic generation whose cells are no wider than ``h``."""
        return max(0, math.ceil(math.log2(max(self.shape) - 1)))

    def scaled(self, t: float) -> "Lattice":
        return Lattice(self.shape, self.h * t, tuple(t * c for c in self.center))

    def node_index(self, point, tol: float = 1e-9) -> tuple[int, ...] | None:
        """Index of the node at ``point`` or None when ``point`` is not a node."""
        idx = []
        for a, x in enumerate(point):
            f = (x - self.center[a]) / self.h + (self.shape[a] - 1) / 2
            i = round(f)
            if abs(f - i) > tol or not 0 <= i < self.shape[a]:
                return None
            idx.append(int(i))
        return tuple(idx)


class PointSet:
    """Immutable boolean mask over a lattice; a discrete stand-in for a set E."""

    def __init__(self, lattice: Lattice, mask):
        mask = np.array(mask, dtype=bool)
        if mask.shape != lattice.shape:
            raise ValueError(f"mask shape {mask.shape} does not match lattice {lattice.shape}")
        mask.setflags(write=False)
        self.lattice = lattice
        self.mask = mask

    @classmethod
    def from_predicate(cls, lattice: Lattice, predicate: Callable[[np.ndarray], np.ndarray]) -> "PointSet":
        return cls(lattice, predicate(lattice.points()))

    @classmethod
    def full(cls, lattice: Lattice) -> "PointSet":
        return cls(lattice, np.ones(lattice.shape, dtype=bool))

    @property
    def n(self) -> int:
        return self.lattice.n

    @property
    def count(self) -> int:
        return int(self.mask.sum())

    def is_empty(self) -> bool:
        return not self.mask.any()

    def points(self) -> np.ndarray:
        idx = np.nonzero(self.mask)
        return np.stack([self.lattice.axis(a)[i] for a, i in enumerate(idx)], axis=-1)

    def node_measure(self) -> float:
        return self.count * self.lattice.h**self.n

    def _check_same(self, other: "PointSet"):
        if other.lattice != self.lattice:
            raise ValueError("point sets live on different lattices")

    def __or__(self, other: "PointSet") -> "PointSet":
        self._check_same(other)
        return PointSet(self.lattice, self.mask | other.mask)

    def __and__(self, other: "PointSet") -> "PointSet":
        self._check_same(other)
        return PointSet(self.lattice, self.mask & other.mask)

    def __eq__(self, other):
        return (
            isinstance(other, PointSet)
            and other.lattice == self.lattice
            and np.array_equal(other.mask, self.mask)
        )

    def __repr__(self):
        return f"PointSet(shape={self.lattice.shape}, h={self.lattice.h!r}, count={self.count})"

    def dumps(self) -> str:
        lat = self.lattice
        header = ["mask", str(lat.n), *map(str, lat.shape), repr(lat.h), *map(repr, lat.center)]
        body = " ".join("1" if b else "0" for b in self.mask.ravel(order="C"))
        return " ".join(header) + "\n" + body + "\n"

    @classmethod
    def loads(cls, text: str) -> "PointSet":
        tokens = text.split()
        if not tokens or tokens[0] != "mask":
            raise ValueError("point set file must start with 'mask'")
        n = int(tokens[1])
        shape = tuple(int(t) for t in tokens[2 : 2 + n])
        h = float(tokens[2 + n])
        center = tuple(float(t) for t in tokens[3 + n : 3 + 2 * n])
        body = tokens[3 + 2 * n :]
        if len(body) != int(np.prod(shape)):
            raise ValueError(f"expected {int(np.prod(shape))} mask tokens, found {len(body)}")
        if any(t not in ("0", "1") for t in body):
            raise ValueError("mask tokens must be 0 or 1")
        mask = np.array([t == "1" for t in body], dtype=bool).reshape(shape)
        return cls(Lattice(shape, h, center), mask)

    def write(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def read(cls, path) -> "PointSet":
        return cls.loads(Path(path).read_text())


def scale_set(E: PointSet, t: float) -> PointSet:
    """Image of ``E`` under the homothety ``x -> t x``."""
    if not t > 0 or not math.isfinite(t):
        raise ValueError("homothety coefficient must be positive and finite")
    return PointSet(E.lattice.scaled(t), E.mask)


def subdivide(Q: Cube, parts: int) -> list[Cube]:
    return Q.subdivide(parts)


# --- dyadic pyramids ---------------------------------------------------------


def _axis_cells(k: int, kmax: int, depth: int) -> np.ndarray:
    """Dyadic cell of each node along one axis at the given generation."""
    i = np.arange(k, dtype=np.int64)
    cells = ((2 * i + (kmax - k)) << depth) // (2 * (kmax - 1))
    return np.minimum(cells, (1 << depth) - 1)


def _pool_axis(arr: np.ndarray, axis: int, cells: np.ndarray, ncells: int, ufunc, fill) -> np.ndarray:
    starts = np.searchsorted(cells, np.arange(ncells), side="left")
    stops = np.searchsorted(cells, np.arange(ncells), side="right")
    nonempty = stops > starts
    shape = list(arr.shape)
    shape[axis] = ncells
    out = np.full(shape, fill, dtype=arr.dtype)
    if nonempty.any():
        red = ufunc.reduceat(arr, starts[nonempty], axis=axis)
        index = [slice(None)] * arr.ndim
        index[axis] = np.nonzero(nonempty)[0]
        out[tuple(index)] = red
    return out


def dyadic_pyramid(values: np.ndarray, lattice: Lattice, depth: int, ufunc, fill) -> list[np.ndarray]:
    """Reduce node values into dyadic cells for generations ``0..depth``.

    Entry ``j`` has shape ``(2**j,) * n``; empty cells hold ``fill``.
    """
    kmax = max(lattice.shape)
    level = np.asarray(values)
    for a, k in enumerate(lattice.shape):
        level = _pool_axis(level, a, _axis_cells(k, kmax, depth), 1 << depth, ufunc, fill)
    levels = [level]
    for j in range(depth, 0, -1):
        m = 1 << (j - 1)
        shape = []
        for _ in range(lattice.n):
            shape += [m, 2]
        level = ufunc.reduce(level.reshape(shape), axis=tuple(range(1, 2 * lattice.n, 2)))
        levels.append(level)
    return levels[::-1]


@dataclass(frozen=True)
class ContentEstimate:
    """Dyadic-cover upper estimate of the Hausdorff content of order ``order``.

    ``cells`` holds the integer indices (one row per cube) of the cover at the
    winning generation ``depth``; ``generation_values`` records every
    generation's total so the minimum can be audited.
    """

    order: float
    value: float
    depth: int
    side: float
    cells: np.ndarray = field(compare=False)
    bounding_cube: Cube
    generation_values: tuple[float, ...] = field(default=())

    @property
    def radius(self) -> float:
        return self.side * math.sqrt(self.bounding_cube.n) / 2

    @property
    def cover(self) -> list[Cube]:
        lo = self.bounding_cube.lo
        return [Cube(tuple(lo + (c + 0.5) * self.side), self.side) for c in self.cells]

    def __len__(self):
        return len(self.cells)


def _check_order(d: float, n: int):
    if not d > 0:
        raise ValueError(f"content order must be positive, got {d}")
    if d > n:
        raise ValueError(f"content order {d} exceeds the dimension {n}")


def _depth(lattice: Lattice, max_depth: int | None) -> int:
    finest = lattice.resolution_depth
    if max_depth is None:
        return finest
    if max_depth < 0:
        raise ValueError("max_depth must be non-negative")
    return min(int(max_depth), finest)


def generation_radii(lattice: Lattice, depth: int) -> np.ndarray:
    L = lattice.bounding_cube.side
    return np.array([L / (1 << j) * math.sqrt(lattice.n) / 2 for j in range(depth + 1)])


def hausdorff_content(E: PointSet, d: float, max_depth: int | None = None) -> ContentEstimate:
    """Minimum over dyadic generations ``0..max_depth`` of ``count * radius**d``.

    ``max_depth`` defaults to (and is capped at) the generation whose cells
    match the lattice spacing; finer covers only count isolated nodes.
    """
    lat = E.lattice
    _check_order(d, lat.n)
    depth = _depth(lat, max_depth)
    cube = lat.bounding_cube
    if E.is_empty():
        return ContentEstimate(float(d), 0.0, 0, cube.side, np.zeros((0, lat.n), dtype=np.int64), cube,
                               tuple(0.0 for _ in range(depth + 1)))
    levels = dyadic_pyramid(E.mask, lat, depth, np.logical_or, False)
    radii = generation_radii(lat, depth)
    totals = tuple(float(int(lv.sum()) * radii[j] ** d) for j, lv in enumerate(levels))
    best = int(np.argmin(totals))
    return ContentEstimate(
        order=float(d),
        value=totals[best],
        depth=best,
        side=cube.side / (1 << best),
        cells=np.argwhere(levels[best]),
        bounding_cube=cube,
        generation_values=totals,
    )


def sublevel_contents(
    values: np.ndarray,
    lattice: Lattice,
    thresholds: Sequence[float],
    d: float,
    max_depth: int | None = None,
) -> np.ndarray:
    """Content estimates of ``{values < t}`` for many thresholds at once.

    Equivalent to ``hausdorff_content(PointSet(lattice, values < t), d)`` for
    each ``t``: a cell is occupied iff its minimum node value is below ``t``.
    """
    _check_order(d, lattice.n)
    depth = _depth(lattice, max_depth)
    levels = dyadic_pyramid(np.asarray(values, dtype=float), lattice, depth, np.minimum, np.inf)
    radii = generation_radii(lattice, depth)
    t = np.asarray(thresholds, dtype=float)
    totals = np.empty((depth + 1, t.size))
    for j, lv in enumerate(levels):
        mins = np.sort(lv.ravel())
        counts = np.searchsorted(mins, t, side="left")
        totals[j] = counts * radii[j] ** d
    return totals.min(axis=0)
