"""Uniform cell-centered grids, cubes, dyadic lattices and midpoint quadrature.

Every integral in the package is a midpoint sum over cell centers.  A cell
belongs to a cube iff its center lies in the half-open box
``[c - l/2, c + l/2)^n``, so dyadic children partition their parent exactly.

Cube collections carry a sparse cube-by-cell membership matrix; all
per-cube reductions (sums, log-mean-exp, minima) and the scatter-max used by
maximal operators run as segment reductions over that matrix.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import sparse

__all__ = [
    "GridError",
    "DomainError",
    "DegenerateCubeError",
    "ResolutionError",
    "SizeLimitError",
    "Grid",
    "GridFunction",
    "Cube",
    "DyadicLattice",
    "CubeCollection",
    "integrate",
    "average",
    "build_lattice",
    "enumerate_cubes",
    "STRATEGIES",
]

STRATEGIES = ("dyadic-all-shifts", "centered-sweep", "exhaustive-small")

# Edges this close (in cell units) to a cell center snap onto it.
_SNAP = 1e-9
# Geometry tolerance for "inside the domain" tests, relative to h.
_INSIDE_TOL = 1e-9


class GridError(ValueError):
    """Base class for grid and cube errors."""


class DomainError(GridError):
    pass


class DegenerateCubeError(GridError):
    pass


class ResolutionError(GridError):
    pass


class SizeLimitError(GridError):
    pass


@dataclass(frozen=True)
class Grid:
    """Cell-centered discretization of ``[-R, R]^n`` with ``N`` cells per axis."""

    dim: int
    half_extent: float
    cells_per_axis: int

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise GridError(f"dim must be 1, 2 or 3, got {self.dim}")
        if not self.half_extent > 0:
            raise GridError("half_extent must be positive")
        N = self.cells_per_axis
        if N < 4 or N & (N - 1):
            raise GridError(f"cells_per_axis must be a power of two >= 4, got {N}")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_extent / self.cells_per_axis

    h = spacing

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.cells_per_axis,) * self.dim

    @property
    def size(self) -> int:
        return self.cells_per_axis ** self.dim

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.dim

    @cached_property
    def axis(self) -> np.ndarray:
        """Cell centers along one axis."""
        i = np.arange(self.cells_per_axis)
        return -self.half_extent + (i + 0.5) * self.spacing

    @cached_property
    def centers(self) -> np.ndarray:
        """All cell centers, shape ``(N**n, n)`` in C (index-major) order."""
        mesh = np.meshgrid(*([self.axis] * self.dim), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    @cached_property
    def radius(self) -> np.ndarray:
        """``|x|`` at every cell center, flat."""
        return np.sqrt(np.sum(self.centers ** 2, axis=1))

    @property
    def root(self) -> "Cube":
        return Cube((0.0,) * self.dim, 2.0 * self.half_extent)

    def index_range(self, lo: float, hi: float) -> tuple[int, int]:
        """Cells whose centers lie in ``[lo, hi)`` along one axis (clamped)."""
        h, R = self.spacing, self.half_extent

        def first_at_or_after(a):
            t = (a + R) / h - 0.5
            rt = round(t)
            if abs(t - rt) < _SNAP:
                t = rt
            return math.ceil(t)

        i0 = max(first_at_or_after(lo), 0)
        i1 = min(first_at_or_after(hi), self.cells_per_axis)
        return i0, max(i1, i0)

    def contains_cube(self, cube: "Cube") -> bool:
        tol = _INSIDE_TOL * self.spacing
        half = cube.side / 2.0
        c = np.asarray(cube.center, dtype=float)
        return bool(np.all(c - half >= -self.half_extent - tol)
                    and np.all(c + half <= self.half_extent + tol))

    def cube_slices(self, cube: "Cube") -> tuple[slice, ...]:
        half = cube.side / 2.0
        out = []
        for c in cube.center:
            i0, i1 = self.index_range(c - half, c + half)
            out.append(slice(i0, i1))
        return tuple(out)

    def cube_cells(self, cube: "Cube") -> np.ndarray:
        """Flat indices of the cells in ``cube``."""
        sl = self.cube_slices(cube)
        ranges = [np.arange(s.start, s.stop) for s in sl]
        if any(r.size == 0 for r in ranges):
            return np.empty(0, dtype=np.int64)
        mesh = np.meshgrid(*ranges, indexing="ij")
        return np.ravel_multi_index([m.ravel() for m in mesh], self.shape)

    def to_dict(self) -> dict:
        return {"dim": self.dim, "half_extent": self.half_extent,
                "cells_per_axis": self.cells_per_axis}

    def refined(self) -> "Grid":
        return Grid(self.dim, self.half_extent, 2 * self.cells_per_axis)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Real samples on a grid, stored flat in index-major order."""

    grid: Grid
    samples: np.ndarray

    def __post_init__(self):
        s = np.ascontiguousarray(np.asarray(self.samples, dtype=float).ravel())
        if s.size != self.grid.size:
            raise GridError(f"expected {self.grid.size} samples, got {s.size}")
        if not np.all(np.isfinite(s)):
            raise GridError("grid function samples must be finite")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @classmethod
    def from_callable(cls, grid: Grid, fn) -> "GridFunction":
        """Sample ``fn(x)`` where ``x`` has shape ``(N**n, n)``."""
        return cls(grid, fn(grid.centers))

    @classmethod
    def constant(cls, grid: Grid, value: float) -> "GridFunction":
        return cls(grid, np.full(grid.size, float(value)))

    def __add__(self, other):
        if isinstance(other, GridFunction):
            return GridFunction(self.grid, self.samples + other.samples)
        return GridFunction(self.grid, self.samples + other)

    def __mul__(self, other):
        if isinstance(other, GridFunction):
            return GridFunction(self.grid, self.samples * other.samples)
        return GridFunction(self.grid, self.samples * other)

    __rmul__ = __mul__

    def __neg__(self):
        return GridFunction(self.grid, -self.samples)

    def abs(self) -> "GridFunction":
        return GridFunction(self.grid, np.abs(self.samples))

    def reshaped(self) -> np.ndarray:
        return self.samples.reshape(self.grid.shape)


@dataclass(frozen=True)
class Cube:
    center: tuple[float, ...]
    side: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if not self.side > 0:
            raise GridError("cube side must be positive")

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def lower(self) -> np.ndarray:
        return np.asarray(self.center) - self.side / 2.0

    @property
    def upper(self) -> np.ndarray:
        return np.asarray(self.center) + self.side / 2.0

    def contains_cube(self, other: "Cube", tol: float = 1e-12) -> bool:
        return bool(np.all(other.lower >= self.lower - tol)
                    and np.all(other.upper <= self.upper + tol))

    def key(self, scale: float = 1.0) -> tuple:
        """Hashable identity, robust to round-off at the given length scale."""
        return (tuple(round(c / scale, 8) for c in self.center),
                round(self.side / scale, 8))

    def to_dict(self) -> dict:
        return {"center": list(self.center), "side": self.side}


def _checked_cells(grid: Grid, Q: Cube) -> np.ndarray:
    if Q.dim != grid.dim:
        raise DomainError("cube and grid dimensions differ")
    if not grid.contains_cube(Q):
        raise DomainError(f"cube {Q} is not inside the grid domain")
    cells = grid.cube_cells(Q)
    if cells.size == 0:
        raise DegenerateCubeError(f"cube {Q} contains no cell center")
    return cells


def integrate(f: GridFunction, Q: Cube) -> float:
    """Midpoint rule: ``h^n`` times the sum of samples at centers inside ``Q``."""
    cells = _checked_cells(f.grid, Q)
    return float(f.grid.cell_volume * np.sum(f.samples[cells]))


def average(f: GridFunction, Q: Cube) -> float:
    """``integrate(f, Q) / vol(Q)`` with ``vol`` the discrete cell volume."""
    cells = _checked_cells(f.grid, Q)
    return float(np.mean(f.samples[cells]))


class CubeCollection:
    """A finite, duplicate-free list of in-domain cubes on a fixed grid."""

    def __init__(self, grid: Grid, cubes, tag: str = "", levels=None):
        self.grid = grid
        self.tag = tag
        kept, seen, lv = [], set(), []
        levels = list(levels) if levels is not None else [None] * len(cubes)
        for Q, d in zip(cubes, levels):
            k = Q.key(grid.spacing)
            if k in seen:
                continue
            if not grid.contains_cube(Q):
                raise DomainError(f"cube {Q} is not inside the grid domain")
            seen.add(k)
            kept.append(Q)
            lv.append(d)
        self.cubes: list[Cube] = kept
        self.levels = lv
        rows, cols = [], []
        for j, Q in enumerate(kept):
            cells = grid.cube_cells(Q)
            if cells.size == 0:
                raise DegenerateCubeError(f"cube {Q} contains no cell center")
            rows.append(np.full(cells.size, j, dtype=np.int64))
            cols.append(cells)
        m = len(kept)
        if m:
            r = np.concatenate(rows)
            c = np.concatenate(cols)
        else:
            r = c = np.empty(0, dtype=np.int64)
        data = np.ones(r.size)
        self.membership = sparse.csr_matrix((data, (r, c)), shape=(m, grid.size))
        self.membership.sort_indices()
        csc = self.membership.tocsc()
        csc.sort_indices()
        self._csc = csc
        self.counts = np.diff(self.membership.indptr)

    def __len__(self):
        return len(self.cubes)

    def __iter__(self):
        return iter(self.cubes)

    def __getitem__(self, i):
        return self.cubes[i]

    def __repr__(self):
        return f"CubeCollection(tag={self.tag!r}, n_cubes={len(self)})"

    @cached_property
    def centers(self) -> np.ndarray:
        return np.array([Q.center for Q in self.cubes], dtype=float).reshape(len(self), self.grid.dim)

    @cached_property
    def sides(self) -> np.ndarray:
        return np.array([Q.side for Q in self.cubes], dtype=float)

    @property
    def volumes(self) -> np.ndarray:
        """Discrete volumes ``count * h^n``."""
        return self.counts * self.grid.cell_volume

    def subset(self, idx, tag: str | None = None) -> "CubeCollection":
        idx = np.asarray(idx, dtype=int)
        return CubeCollection(self.grid, [self.cubes[i] for i in idx],
                              tag=self.tag if tag is None else tag,
                              levels=[self.levels[i] for i in idx])

    def require_nonempty(self):
        if len(self) == 0:
            raise GridError(f"cube collection {self.tag!r} is empty")

    # per-cube reductions -------------------------------------------------
    def _gather(self, values):
        return np.asarray(values, dtype=float)[self.membership.indices]

    def sums(self, values) -> np.ndarray:
        return self.membership @ np.asarray(values, dtype=float)

    def means(self, values) -> np.ndarray:
        return self.sums(values) / self.counts

    def integrals(self, values) -> np.ndarray:
        return self.sums(values) * self.grid.cell_volume

    def maxima(self, values) -> np.ndarray:
        if len(self) == 0:
            return np.empty(0)
        return np.maximum.reduceat(self._gather(values), self.membership.indptr[:-1])

    def minima(self, values) -> np.ndarray:
        if len(self) == 0:
            return np.empty(0)
        return np.minimum.reduceat(self._gather(values), self.membership.indptr[:-1])

    def log_means_exp(self, log_values) -> np.ndarray:
        """``log(mean_Q exp(v))`` per cube, stable for any dynamic range."""
        if len(self) == 0:
            return np.empty(0)
        g = self._gather(log_values)
        starts = self.membership.indptr[:-1]
        mx = np.maximum.reduceat(g, starts)
        rows = np.repeat(np.arange(len(self)), self.counts)
        s = np.add.reduceat(np.exp(g - mx[rows]), starts)
        return mx + np.log(s / self.counts)

    def scatter_max(self, cube_values, fill: float = 0.0):
        """For every cell, the max of ``cube_values`` over cubes containing it.

        Returns ``(values, covered)``; uncovered cells get ``fill``.
        """
        cv = np.asarray(cube_values, dtype=float)
        n = self.grid.size
        out = np.full(n, fill)
        ptr = self._csc.indptr
        covered = np.diff(ptr) > 0
        if covered.any():
            g = cv[self._csc.indices]
            red = np.maximum.reduceat(g, ptr[:-1][covered]) if g.size else np.empty(0)
            out[covered] = red
        return out, covered

    def scatter_sum(self, cube_values) -> np.ndarray:
        return self.membership.T @ np.asarray(cube_values, dtype=float)

    def indicator(self, j: int) -> np.ndarray:
        row = np.zeros(self.grid.size)
        a, b = self.membership.indptr[j], self.membership.indptr[j + 1]
        row[self.membership.indices[a:b]] = 1.0
        return row

    def cells_of(self, j: int) -> np.ndarray:
        a, b = self.membership.indptr[j], self.membership.indptr[j + 1]
        return self.membership.indices[a:b]

    def maximal_indices(self) -> np.ndarray:
        """Cubes not strictly contained in another cube of the collection."""
        keep = []
        for i, Q in enumerate(self.cubes):
            if not any(j != i and P.side > Q.side and P.contains_cube(Q)
                       for j, P in enumerate(self.cubes)):
                keep.append(i)
        return np.array(keep, dtype=int)

    def union(self, other: "CubeCollection", tag: str | None = None) -> "CubeCollection":
        return CubeCollection(self.grid, self.cubes + other.cubes,
                              tag=tag or f"{self.tag}+{other.tag}",
                              levels=self.levels + other.levels)

    def to_rows(self) -> list[dict]:
        return [{"index": j, **Q.to_dict(), "cells": int(self.counts[j])}
                for j, Q in enumerate(self.cubes)]


@dataclass(frozen=True)
class DyadicLattice:
    """Dyadic tower of depth ``D`` over a grid, optionally shifted by thirds."""

    grid: Grid
    depth: int
    shift: tuple[float, ...]
    shift_index: int = 0
    collection: CubeCollection = field(repr=False, compare=False, default=None)

    @property
    def root(self) -> Cube:
        return self.grid.root

    def cubes_at(self, level: int) -> list[Cube]:
        return [Q for Q, d in zip(self.collection.cubes, self.collection.levels) if d == level]


def _shift_digits(shift_index: int, dim: int) -> tuple[int, ...]:
    digits = []
    s = shift_index
    for _ in range(dim):
        digits.append(s % 3)
        s //= 3
    return tuple(digits)


def build_lattice(grid: Grid, depth: int, shift_index: int = 0) -> DyadicLattice:
    """Dyadic cubes of levels ``0..depth``; shift ``s`` offsets axis k by ``digit_k * 2R/3``.

    Cubes not fully inside the domain are dropped.
    """
    if depth < 0:
        raise ResolutionError("depth must be non-negative")
    if 2 ** depth > grid.cells_per_axis:
        raise ResolutionError(
            f"depth {depth} too deep for {grid.cells_per_axis} cells per axis")
    if not 0 <= shift_index < 3 ** grid.dim:
        raise GridError(f"shift_index must lie in [0, {3 ** grid.dim})")
    R = grid.half_extent
    digits = _shift_digits(shift_index, grid.dim)
    offset = tuple(d * 2.0 * R / 3.0 for d in digits)
    tol = _INSIDE_TOL * grid.spacing
    cubes, levels = [], []
    for d in range(depth + 1):
        side = 2.0 * R / 2 ** d
        per_axis = []
        for off in offset:
            # lower corners -R + off + j*side that keep the cube inside [-R, R]
            jlo = math.ceil((-off) / side - 1e-9)
            jhi = math.floor((2.0 * R - off - side) / side + 1e-9)
            lows = [-R + off + j * side for j in range(jlo, jhi + 1)]
            per_axis.append([lo for lo in lows
                             if lo >= -R - tol and lo + side <= R + tol])
        for corner in itertools.product(*per_axis):
            cubes.append(Cube(tuple(c + side / 2.0 for c in corner), side))
            levels.append(d)
    coll = CubeCollection(grid, cubes, tag=f"lattice(depth={depth},shift={shift_index})",
                          levels=levels)
    return DyadicLattice(grid, depth, offset, shift_index, coll)


def max_depth(grid: Grid) -> int:
    return int(round(math.log2(grid.cells_per_axis)))


def enumerate_cubes(grid: Grid, strategy: str, depth: int | None = None) -> CubeCollection:
    """Finite stand-ins for "all cubes"."""
    if strategy not in STRATEGIES:
        raise GridError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
    D = max_depth(grid) if depth is None else depth
    if strategy == "dyadic-all-shifts":
        coll = None
        for s in range(3 ** grid.dim):
            lat = build_lattice(grid, D, s).collection
            coll = lat if coll is None else coll.union(lat)
        coll.tag = "dyadic-all-shifts"
        return coll
    if strategy == "centered-sweep":
        R = grid.half_extent
        tol = _INSIDE_TOL * grid.spacing
        cubes, levels = [], []
        for d in range(D + 1):
            side = 2.0 * R / 2 ** d
            half = side / 2.0
            ok = grid.axis[(grid.axis - half >= -R - tol) & (grid.axis + half <= R + tol)]
            for c in itertools.product(ok, repeat=grid.dim):
                cubes.append(Cube(c, side))
                levels.append(d)
        return CubeCollection(grid, cubes, tag="centered-sweep", levels=levels)
    # exhaustive-small
    N = grid.cells_per_axis
    if grid.dim > 2 or N > 32:
        raise SizeLimitError("exhaustive-small is limited to n <= 2 and N <= 32")
    h, R = grid.spacing, grid.half_extent
    cubes, levels = [], []
    for k in range(1, N + 1):
        side = k * h
        starts = [-R + i * h for i in range(N - k + 1)]
        for corner in itertools.product(starts, repeat=grid.dim):
            cubes.append(Cube(tuple(c + side / 2.0 for c in corner), side))
            levels.append(k)
    return CubeCollection(grid, cubes, tag="exhaustive-small", levels=levels)
