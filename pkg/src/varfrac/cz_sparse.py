"""Calderon-Zygmund stopping cubes, sparse families and the sparse operator."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import RootAboveThreshold
from .exponent import VariableExponent
from .grid import DyadicFamily, GridFunction, Interval
from .luxemburg import cell_recip, interval_norms
from .maximal import average_ops


@dataclass
class FamilyAverages:
    """Averaging-operator values for every member of a dyadic family, depth-major."""

    family: DyadicFamily
    values: np.ndarray

    def level(self, d: int) -> np.ndarray:
        return self.values[2 ** d - 1: 2 ** (d + 1) - 1]

    @property
    def root(self) -> float:
        return float(self.values[0])

    def jump_factor(self) -> float:
        """Largest child-to-parent ratio of averages (over parents with nonzero average)."""
        best = 1.0
        for d in range(1, self.family.max_depth + 1):
            child = self.level(d)
            parent = np.repeat(self.level(d - 1), 2)
            ok = parent > 0
            if ok.any():
                best = max(best, float(np.max(child[ok] / parent[ok])))
        return best


def family_averages(f: GridFunction, beta: VariableExponent, r: VariableExponent, family: DyadicFamily) -> FamilyAverages:
    return FamilyAverages(family, average_ops(f, family.as_cubes(), beta, r))


@dataclass
class CZLevel:
    lam: float
    cubes: list[Interval]
    averages: np.ndarray
    depth_index: list[tuple[int, int]]
    jump_factor: float

    def within_bounds(self) -> bool:
        """``lam < avg(Q) <= D^2 lam`` for every stopping cube."""
        D2 = self.jump_factor ** 2
        return bool(np.all(self.averages > self.lam) and np.all(self.averages <= D2 * self.lam * (1 + 1e-12)))


# averages come from bisection with relative accuracy ~1e-10; ties with lambda are not exceedances
_TIE = 1e-9


def select_stopping(avgs: FamilyAverages, lam: float) -> CZLevel:
    """Top-down traversal: keep a cube once its average exceeds ``lam``; do not visit below it."""
    if avgs.root > lam * (1 + _TIE):
        raise RootAboveThreshold(f"root average {avgs.root:.6g} exceeds lambda {lam:.6g}")
    fam = avgs.family
    cubes, vals, ids = [], [], []
    blocked = np.zeros(1, bool)
    for d in range(fam.max_depth + 1):
        if d > 0:
            blocked = np.repeat(blocked | hit, 2)
        lv = avgs.level(d)
        hit = (lv > lam * (1 + _TIE)) & ~blocked
        for i in np.nonzero(hit)[0]:
            cubes.append(fam.cube(d, int(i)))
            vals.append(float(lv[i]))
            ids.append((d, int(i)))
    return CZLevel(lam, cubes, np.array(vals), ids, avgs.jump_factor())


def cz_decompose(f: GridFunction, beta: VariableExponent, r: VariableExponent, family: DyadicFamily, lam: float) -> CZLevel:
    """Maximal dyadic cubes whose averaging-operator value exceeds ``lam``."""
    return select_stopping(family_averages(f, beta, r, family), lam)


def cube_mask(grid_mid: np.ndarray, Q: Interval) -> np.ndarray:
    return (grid_mid > Q.a) & (grid_mid < Q.b)


@dataclass
class SparseFamily:
    a: float
    levels: dict[int, CZLevel]
    carved: list[tuple[int, Interval, np.ndarray]]  # (k, Q, cell mask of E_Q)
    eta: float | None
    disjoint: bool
    nested: bool
    grid_widths: np.ndarray = field(repr=False, default_factory=lambda: np.empty(0))

    @property
    def cubes(self) -> list[Interval]:
        return [Q for _, Q, _ in self.carved]

    def as_dict(self) -> dict:
        return {
            "a": self.a,
            "eta": self.eta,
            "levels": [{"k": k, "cubes": [Q.as_list() for Q in lev.cubes]} for k, lev in sorted(self.levels.items())],
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True)


def build_sparse(f: GridFunction, beta: VariableExponent, r: VariableExponent, family: DyadicFamily, a: float,
                 k_range: Iterable[int] | None = None) -> SparseFamily:
    """Stopping cubes at ``lam = a^k`` with carved sets ``E = Q minus Omega_{k+1}``."""
    if not a > 1:
        raise ValueError("base a must exceed 1")
    avgs = family_averages(f, beta, r, family)
    grid = f.grid
    mids, widths = grid.midpoints, grid.widths
    top = float(avgs.values.max())
    if top <= 0:
        return SparseFamily(a, {}, [], None, True, True, widths)
    if k_range is None:
        k_lo = math.ceil(math.log(avgs.root, a) - 1e-12) if avgs.root > 0 else math.floor(math.log(top, a)) - 1
        while a ** k_lo < avgs.root:
            k_lo += 1
        k_hi = math.floor(math.log(top, a))
        while a ** k_hi >= top:
            k_hi -= 1
        ks = list(range(k_lo, k_hi + 1))
    else:
        ks = sorted(k_range)
    if not ks:
        return SparseFamily(a, {}, [], None, True, True, widths)
    levels = {k: select_stopping(avgs, a ** k) for k in ks}
    nxt = ks[-1] + 1
    levels_ext = dict(levels)
    if avgs.root <= a ** nxt:
        levels_ext[nxt] = select_stopping(avgs, a ** nxt)

    def omega(k: int) -> np.ndarray:
        m = np.zeros(grid.n_cells, bool)
        lev = levels_ext.get(k)
        if lev is not None:
            for Q in lev.cubes:
                m |= cube_mask(mids, Q)
        return m

    omegas = {k: omega(k) for k in levels_ext}
    nested = all(not np.any(omegas[k + 1] & ~omegas[k]) for k in ks if k + 1 in omegas)
    carved = []
    count = np.zeros(grid.n_cells, int)
    eta = math.inf
    for k in ks:
        above = omegas.get(k + 1, np.zeros(grid.n_cells, bool))
        for Q in levels[k].cubes:
            E = cube_mask(mids, Q) & ~above
            carved.append((k, Q, E))
            count += E
            eta = min(eta, float(widths[E].sum()) / Q.length)
    return SparseFamily(a, levels, carved, eta if carved else None, bool(np.all(count <= 1)), nested, widths)


def sparse_operator(f: GridFunction, S: SparseFamily | Iterable[Interval], beta: VariableExponent) -> GridFunction:
    """``sum_Q ||chi_Q||_beta avg_Q |f| chi_Q`` over the cubes of ``S``."""
    cubes = S.cubes if isinstance(S, SparseFamily) else list(S)
    grid = f.grid
    out = np.zeros(grid.n_cells)
    if not cubes:
        return GridFunction(grid, out)
    a = np.array([Q.a for Q in cubes])
    b = np.array([Q.b for Q in cubes])
    nb = interval_norms(grid, np.ones(grid.n_cells), cell_recip(beta, grid), a, b)
    avg = grid.interval_integrals(np.abs(f.values), a, b) / (b - a)
    mids = grid.midpoints
    for Q, c in zip(cubes, nb * avg):
        out[cube_mask(mids, Q)] += c
    return GridFunction(grid, out)
