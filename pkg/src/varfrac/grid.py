"""Intervals, graded grids, piecewise-constant functions and dyadic families."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from .errors import NotInFamily, PreconditionError


@dataclass(frozen=True, order=True)
class Interval:
    """A closed interval ``[a, b]`` with ``a < b``."""

    a: float
    b: float

    def __post_init__(self):
        if not (self.a < self.b):
            raise ValueError(f"interval needs a < b, got [{self.a}, {self.b}]")

    @property
    def center(self) -> float:
        return 0.5 * (self.a + self.b)

    @property
    def length(self) -> float:
        return self.b - self.a

    def dilate(self, m: float) -> "Interval":
        """The concentric interval ``m * Q``."""
        h = 0.5 * m * self.length
        return Interval(self.center - h, self.center + h)

    def contains(self, x) -> np.ndarray | bool:
        return (np.asarray(x) >= self.a) & (np.asarray(x) <= self.b)

    def covers(self, other: "Interval") -> bool:
        return self.a <= other.a and other.b <= self.b

    def intersect(self, other: "Interval") -> "Interval | None":
        lo, hi = max(self.a, other.a), min(self.b, other.b)
        return Interval(lo, hi) if lo < hi else None

    def scaled(self, lam: float) -> "Interval":
        return Interval(self.a * lam, self.b * lam)

    def as_list(self) -> list[float]:
        return [self.a, self.b]


# -- grids ----------------------------------------------------------------
def graded_points(s: float, reach: float, floor: float, band_cells: int = 1) -> np.ndarray:
    """Breakpoints clustering at ``s`` on both sides.

    Bands ``[s + reach 2^-(k+1), s + reach 2^-k]`` halve in width down to
    ``floor``; each band is split into ``band_cells`` equal cells.
    """
    if reach <= 0 or floor <= 0:
        return np.array([s])
    levels = max(1, int(math.ceil(math.log2(reach / floor))))
    edges = reach * 2.0 ** -np.arange(levels + 1)
    if band_cells > 1:
        t = np.linspace(0.0, 1.0, band_cells + 1)[:-1]
        inner = edges[1:, None] + (edges[:-1, None] - edges[1:, None]) * t[None, :]
        edges = np.concatenate([inner.ravel(), edges])
    return np.concatenate([s - edges, [s], s + edges])


@dataclass(frozen=True, eq=False)
class Grid:
    """Strictly increasing breakpoints; cell ``i`` is ``[bp[i], bp[i+1]]``."""

    breakpoints: np.ndarray

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        if bp.ndim != 1 or bp.size < 2 or not np.all(np.diff(bp) > 0):
            raise ValueError("grid breakpoints must be a strictly increasing array of length >= 2")
        bp.setflags(write=False)
        object.__setattr__(self, "breakpoints", bp)

    # constructors
    @classmethod
    def from_points(cls, points: Iterable[float], window: Interval | None = None) -> "Grid":
        pts = np.unique(np.asarray(list(points) if not isinstance(points, np.ndarray) else points, dtype=float))
        if window is not None:
            pts = np.unique(np.concatenate([pts[(pts > window.a) & (pts < window.b)], [window.a, window.b]]))
        # drop breakpoints closer than a few ulps to their left neighbour
        keep = np.concatenate([[True], np.diff(pts) > 4 * np.spacing(np.abs(pts[1:]) + 1e-300)])
        return cls(pts[keep])

    @classmethod
    def uniform(cls, window: Interval, n: int, extra: Iterable[float] = ()) -> "Grid":
        return cls.uniform_on(window.a, window.b, n, extra)

    @classmethod
    def uniform_on(cls, a: float, b: float, n: int, extra: Iterable[float] = ()) -> "Grid":
        pts = np.linspace(a, b, n + 1)
        extra = [t for t in extra if a < t < b]
        if extra:
            return cls.from_points(np.concatenate([pts, extra]))
        return cls(pts)

    @classmethod
    def graded(cls, window: Interval, singular_points: Sequence[float] = (), *, base_cells: int = 64,
               floor: float | None = None, band_cells: int = 1, reach: float | None = None,
               extra: Iterable[float] = ()) -> "Grid":
        """Uniform grid on ``window`` refined geometrically at each singular point.

        ``floor`` defaults to ``2^-40 * |window|``; ``reach`` (how far the bands
        extend) defaults to one base cell.
        """
        L = window.length
        floor = 2.0 ** -40 * L if floor is None else floor
        h = L / base_cells
        reach = h if reach is None else reach
        parts = [np.linspace(window.a, window.b, base_cells + 1), np.asarray(list(extra), dtype=float)]
        for s in singular_points:
            if window.a - reach < s < window.b + reach:
                parts.append(graded_points(s, reach, floor, band_cells))
        return cls.from_points(np.concatenate(parts), window)

    # geometry
    @property
    def window(self) -> Interval:
        return Interval(float(self.breakpoints[0]), float(self.breakpoints[-1]))

    @property
    def n_cells(self) -> int:
        return self.breakpoints.size - 1

    @cached_property
    def widths(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    @cached_property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.breakpoints[1:] + self.breakpoints[:-1])

    def locate(self, x) -> np.ndarray:
        """Index of the cell containing each point (right-continuous; -1 / n outside)."""
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.breakpoints, x, side="right") - 1
        idx = np.where(x == self.breakpoints[-1], self.n_cells - 1, idx)
        return np.where((x < self.breakpoints[0]) | (x > self.breakpoints[-1]), -1, idx)

    def merge(self, other: "Grid | Iterable[float]") -> "Grid":
        pts = other.breakpoints if isinstance(other, Grid) else np.asarray(list(other), dtype=float)
        return Grid.from_points(np.concatenate([self.breakpoints, pts]))

    def cell_overlaps(self, a, b):
        """Segments of cells overlapping each ``[a_i, b_i]``.

        Returns ``(cells, weights, starts)``: flattened cell indices, overlap
        lengths, and the start offset of each interval's run (``starts[-1]`` is
        the total length). Intervals are clipped to the window.
        """
        bp = self.breakpoints
        a = np.clip(np.atleast_1d(np.asarray(a, dtype=float)), bp[0], bp[-1])
        b = np.clip(np.atleast_1d(np.asarray(b, dtype=float)), bp[0], bp[-1])
        i0 = np.searchsorted(bp, a, side="right") - 1
        i1 = np.searchsorted(bp, b, side="left")
        i0 = np.clip(i0, 0, self.n_cells - 1)
        i1 = np.maximum(np.clip(i1, 0, self.n_cells), i0)
        counts = np.where(b > a, i1 - i0, 0)
        starts = np.concatenate([[0], np.cumsum(counts)])
        total = int(starts[-1])
        owner = np.repeat(np.arange(a.size), counts)
        cells = np.arange(total) - starts[owner] + i0[owner]
        lo = np.maximum(bp[cells], a[owner])
        hi = np.minimum(bp[cells + 1], b[owner])
        return cells, np.maximum(hi - lo, 0.0), starts

    def prefix_integral(self, values: np.ndarray, x) -> np.ndarray:
        """Exact ``int_{window.a}^{x}`` of the piecewise constant ``values``."""
        bp = self.breakpoints
        x = np.clip(np.asarray(x, dtype=float), bp[0], bp[-1])
        cum = np.concatenate([[0.0], np.cumsum(values * self.widths)])
        i = np.clip(np.searchsorted(bp, x, side="right") - 1, 0, self.n_cells - 1)
        return cum[i] + values[i] * (x - bp[i])

    def interval_integrals(self, values: np.ndarray, a, b) -> np.ndarray:
        """Exact integrals of ``values`` over each ``[a_i, b_i]`` (clipped; negated when ``b < a``).

        Sums the overlapping cells directly: differencing prefix sums loses
        everything for tiny intervals far from the window's left end.
        """
        a = np.atleast_1d(np.asarray(a, dtype=float))
        b = np.atleast_1d(np.asarray(b, dtype=float))
        sign = np.where(b < a, -1.0, 1.0)
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        cells, w, starts = self.cell_overlaps(lo, hi)
        owner = np.repeat(np.arange(lo.size), np.diff(starts))
        out = sign * np.bincount(owner, weights=np.asarray(values, dtype=float)[cells] * w, minlength=lo.size)
        return out


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Piecewise-constant function: ``values[i]`` on cell ``i``, zero off the window."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n_cells,):
            raise ValueError(f"expected {self.grid.n_cells} values, got shape {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def sample(cls, grid: Grid, fn: Callable[[np.ndarray], np.ndarray]) -> "GridFunction":
        """Midpoint samples of ``fn``."""
        return cls(grid, np.asarray(fn(grid.midpoints), dtype=float) * np.ones(grid.n_cells))

    @classmethod
    def indicator(cls, grid: Grid, Q: Interval, height: float = 1.0) -> "GridFunction":
        """Overlap-weighted indicator; exact when ``Q``'s endpoints are breakpoints."""
        cells, w, _ = grid.cell_overlaps(Q.a, Q.b)
        v = np.zeros(grid.n_cells)
        v[cells] = height * w / grid.widths[cells]
        return cls(grid, v)

    @classmethod
    def constant(cls, grid: Grid, c: float) -> "GridFunction":
        return cls(grid, np.full(grid.n_cells, float(c)))

    def __call__(self, x) -> np.ndarray:
        idx = self.grid.locate(x)
        return np.where(idx >= 0, self.values[np.clip(idx, 0, None)], 0.0)

    def integrate(self, Q: Interval | None = None) -> float:
        if Q is None:
            return float(np.dot(self.values, self.grid.widths))
        return float(self.grid.interval_integrals(self.values, Q.a, Q.b)[0])

    def abs(self) -> "GridFunction":
        return GridFunction(self.grid, np.abs(self.values))

    def map(self, fn: Callable[[np.ndarray], np.ndarray]) -> "GridFunction":
        return GridFunction(self.grid, fn(self.values))

    def resample(self, grid: Grid) -> "GridFunction":
        """Values on a grid whose cells refine (or overlap) this one."""
        return GridFunction(grid, self(grid.midpoints))

    def restrict(self, Q: Interval) -> "GridFunction":
        g = self.grid.merge([Q.a, Q.b])
        f = self.resample(g)
        return GridFunction(g, np.where((g.midpoints > Q.a) & (g.midpoints < Q.b), f.values, 0.0))

    def _binary(self, other, op) -> "GridFunction":
        if isinstance(other, GridFunction):
            if other.grid is self.grid or np.array_equal(other.grid.breakpoints, self.grid.breakpoints):
                return GridFunction(self.grid, op(self.values, other.values))
            g = self.grid.merge(other.grid)
            return GridFunction(g, op(self.resample(g).values, other.resample(g).values))
        return GridFunction(self.grid, op(self.values, float(other)))

    def __add__(self, other):
        return self._binary(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __mul__(self, other):
        return self._binary(other, np.multiply)

    __rmul__ = __mul__

    def __neg__(self):
        return GridFunction(self.grid, -self.values)

    @property
    def support_hull(self) -> Interval | None:
        nz = np.nonzero(self.values)[0]
        if nz.size == 0:
            return None
        return Interval(float(self.grid.breakpoints[nz[0]]), float(self.grid.breakpoints[nz[-1] + 1]))

    # serialisation
    def to_csv(self, path: str | Path) -> None:
        """Rows ``breakpoint,value``; the final breakpoint has an empty value."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["breakpoint", "value"])
            for x, v in zip(self.grid.breakpoints[:-1], self.values):
                w.writerow([repr(float(x)), repr(float(v))])
            w.writerow([repr(float(self.grid.breakpoints[-1])), ""])

    @classmethod
    def from_csv(cls, path: str | Path) -> "GridFunction":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or rows[0] != ["breakpoint", "value"]:
            raise ValueError("missing breakpoint,value header")
        bp = np.array([float(r[0]) for r in rows[1:]])
        vals = np.array([float(r[1]) for r in rows[1:-1]])
        return cls(Grid(bp), vals)


def integrate(f: GridFunction, Q: Interval) -> float:
    """Exact integral of ``f`` over ``Q`` intersected with the window."""
    return f.integrate(Q)


# -- dyadic families ----------------------------------------------------
def dyadic_children(Q: Interval) -> tuple[Interval, Interval]:
    c = Q.center
    return Interval(Q.a, c), Interval(c, Q.b)


@dataclass(frozen=True)
class DyadicFamily:
    """All dyadic subintervals of ``root`` down to ``max_depth``."""

    root: Interval
    max_depth: int

    def side(self, depth: int) -> float:
        return self.root.length / 2 ** depth

    def cube(self, depth: int, index: int) -> Interval:
        h = self.side(depth)
        return Interval(self.root.a + index * h, self.root.a + (index + 1) * h)

    def level(self, depth: int) -> tuple[np.ndarray, np.ndarray]:
        h = self.side(depth)
        k = np.arange(2 ** depth)
        return self.root.a + k * h, self.root.a + (k + 1) * h

    def locate(self, Q: Interval) -> tuple[int, int]:
        """``(depth, index)`` of a member; raises :class:`NotInFamily` otherwise."""
        ratio = self.root.length / Q.length
        depth = int(round(math.log2(ratio))) if ratio >= 1 else -1
        if depth < 0 or depth > self.max_depth:
            raise NotInFamily(f"{Q} is not in the dyadic family of {self.root}")
        h = self.side(depth)
        k = (Q.a - self.root.a) / h
        idx = int(round(k))
        tol = 1e-9 * max(1.0, abs(k))
        if abs(k - idx) > tol or not (0 <= idx < 2 ** depth) or abs(Q.length - h) > 1e-9 * h:
            raise NotInFamily(f"{Q} is not in the dyadic family of {self.root}")
        return depth, idx

    def __contains__(self, Q: Interval) -> bool:
        try:
            self.locate(Q)
        except NotInFamily:
            return False
        return True

    def children(self, Q: Interval) -> tuple[Interval, Interval]:
        depth, _ = self.locate(Q)
        if depth >= self.max_depth:
            raise NotInFamily(f"{Q} is at the finest depth")
        return dyadic_children(Q)

    def ancestors(self, Q: Interval) -> list[Interval]:
        depth, idx = self.locate(Q)
        return [self.cube(d, idx >> (depth - d)) for d in range(depth - 1, -1, -1)]

    def members(self) -> Iterator[Interval]:
        for d in range(self.max_depth + 1):
            for k in range(2 ** d):
                yield self.cube(d, k)

    def aligned_grid(self, refine: int = 0) -> Grid:
        """Uniform grid whose cells are the finest dyadic cells (split ``2^refine`` more)."""
        return Grid.uniform(self.root, 2 ** (self.max_depth + refine))

    def as_cubes(self) -> "CubeFamily":
        a, b, depth = [], [], []
        for d in range(self.max_depth + 1):
            la, lb = self.level(d)
            a.append(la)
            b.append(lb)
            depth.append(np.full(la.size, d))
        return CubeFamily(np.concatenate(a), np.concatenate(b), f"dyadic({self.root.a},{self.root.b};0..{self.max_depth})",
                          np.concatenate(depth))


def dyadic_ancestors(Q: Interval, family: DyadicFamily) -> list[Interval]:
    return family.ancestors(Q)


@dataclass(frozen=True, eq=False)
class CubeFamily:
    """A finite family of intervals held as endpoint arrays."""

    a: np.ndarray
    b: np.ndarray
    description: str = ""
    depth: np.ndarray | None = field(default=None)

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if a.shape != b.shape or np.any(b <= a):
            raise ValueError("cube family needs matching endpoint arrays with a < b")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @classmethod
    def of(cls, cubes: Iterable[Interval], description: str = "explicit") -> "CubeFamily":
        cubes = list(cubes)
        if not cubes:
            raise PreconditionError("cube family must be nonempty")
        return cls(np.array([q.a for q in cubes]), np.array([q.b for q in cubes]), description)

    def __len__(self) -> int:
        return self.a.size

    def __iter__(self) -> Iterator[Interval]:
        for a, b in zip(self.a, self.b):
            yield Interval(float(a), float(b))

    def __getitem__(self, i: int) -> Interval:
        return Interval(float(self.a[i]), float(self.b[i]))

    @property
    def lengths(self) -> np.ndarray:
        return self.b - self.a

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.a + self.b)

    def scaled(self, lam: float) -> "CubeFamily":
        return CubeFamily(self.a * lam, self.b * lam, f"{lam:g}*{self.description}", self.depth)

    def union(self, other: "CubeFamily") -> "CubeFamily":
        a = np.concatenate([self.a, other.a])
        b = np.concatenate([self.b, other.b])
        ab = np.unique(np.stack([a, b], axis=1), axis=0)
        return CubeFamily(ab[:, 0], ab[:, 1], f"{self.description}+{other.description}")

    def touching(self, x: float) -> np.ndarray:
        return (self.a <= x) & (x <= self.b)

    def endpoints(self) -> np.ndarray:
        return np.unique(np.concatenate([self.a, self.b]))


def test_cubes(window: Interval, depths: Iterable[int] | range, shifts: int = 0,
               near: Interval | None = None) -> CubeFamily:
    """Dyadic intervals of ``window`` at the given depths, plus shifted copies.

    With ``shifts = s > 0`` every dyadic interval is also translated by
    ``k/3 * length`` for ``k = 1..s``; copies are clipped to the window and
    duplicates removed. ``near`` keeps only cubes meeting that interval
    (without enumerating the rest), which is what a maximal function of a
    function supported there needs.
    """
    depths = list(depths)
    a_all, b_all, d_all = [], [], []
    L = window.length
    for d in depths:
        h = L / 2 ** d
        if near is None:
            j = np.arange(2 ** d)
        else:
            j0 = max(0, math.floor((near.a - window.a) / h) - 1)
            j1 = min(2 ** d, math.ceil((near.b - window.a) / h) + 1)
            j = np.arange(j0, j1)
        a = window.a + h * j
        rows_a, rows_b = [a], [a + h]
        for k in range(1, shifts + 1):
            sa = a + k * h / 3.0
            rows_a.append(sa)
            rows_b.append(sa + h)
        a_d = np.clip(np.concatenate(rows_a), window.a, window.b)
        b_d = np.clip(np.concatenate(rows_b), window.a, window.b)
        keep = b_d > a_d
        if near is not None:
            keep &= (b_d >= near.a) & (a_d <= near.b)
        a_all.append(a_d[keep])
        b_all.append(b_d[keep])
        d_all.append(np.full(int(keep.sum()), d))
    a = np.concatenate(a_all) if a_all else np.empty(0)
    b = np.concatenate(b_all) if b_all else np.empty(0)
    d = np.concatenate(d_all) if d_all else np.empty(0, dtype=int)
    ab, idx = np.unique(np.stack([a, b], axis=1), axis=0, return_index=True)
    order = np.sort(idx)
    desc = (f"test_cubes([{window.a:g},{window.b:g}], depths={depths[0] if depths else 0}..{depths[-1] if depths else -1}, "
            f"shifts={shifts}" + ("" if near is None else f", near=[{near.a:g},{near.b:g}]") + ")")
    return CubeFamily(a[order], b[order], desc, d[order])


test_cubes.__test__ = False  # keep pytest from collecting the helper by name


def local_cubes(point: float, window: Interval, depths: Iterable[int], shifts: int = 0) -> CubeFamily:
    """The members of ``test_cubes(window, depths, shifts)`` whose closure contains ``point``.

    Built directly (without enumerating whole levels), so very deep scales
    around a singular point stay cheap.
    """
    depths = list(depths)
    a_all, b_all, d_all = [], [], []
    L = window.length
    for d in depths:
        h = L / 2 ** d
        for k in range(shifts + 1):
            off = window.a + k * h / 3.0
            j = math.floor((point - off) / h)
            for jj in (j - 1, j, j + 1):
                if not 0 <= jj < 2 ** d:
                    continue
                # same arithmetic as test_cubes so endpoints agree bit for bit
                lo = window.a + h * jj + k * h / 3.0
                a = max(lo, window.a)
                b = min(lo + h, window.b)
                if a < b and a <= point <= b:
                    a_all.append(a)
                    b_all.append(b)
                    d_all.append(d)
    _, idx = np.unique(np.stack([np.array(a_all), np.array(b_all)], axis=1), axis=0, return_index=True)
    order = np.sort(idx)
    return CubeFamily(np.array(a_all)[order], np.array(b_all)[order],
                      f"local_cubes({point:g}; [{window.a:g},{window.b:g}], depths={depths[0]}..{depths[-1]}, shifts={shifts})",
                      np.array(d_all)[order])
