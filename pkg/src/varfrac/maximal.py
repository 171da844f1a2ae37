"""Averaging operators, variable fractional maximal functions and the sharp maximal function."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError
from .exponent import VariableExponent
from .grid import CubeFamily, DyadicFamily, GridFunction, Interval
from .luxemburg import cell_recip, interval_norms


@dataclass(frozen=True)
class MaximalConfig:
    cubes: CubeFamily
    beta: VariableExponent
    r: VariableExponent

    def __post_init__(self):
        if len(self.cubes) == 0:
            raise PreconditionError("cube family must be nonempty")
        x = np.concatenate([self.cubes.a, self.cubes.b, self.cubes.centers])
        rb, rr = self.beta.recip(x), self.r.recip(x)
        if np.any(rr + 1e-12 < rb):
            raise PreconditionError("need r <= beta wherever both are finite")


def average_ops(f: GridFunction, cubes: CubeFamily, beta: VariableExponent, r: VariableExponent,
                *, skip_zero_mass: bool = True, fast_constant: bool = False) -> np.ndarray:
    """``||chi_Q||_beta ||f chi_Q||_r / ||chi_Q||_r`` for every cube of the family."""
    grid = f.grid
    a, b = cubes.a, cubes.b
    out = np.zeros(len(cubes))
    live = np.ones(len(cubes), bool)
    if skip_zero_mass:
        live = grid.interval_integrals(np.abs(f.values), a, b) > 0
    if not live.any():
        return out
    a, b = a[live], b[live]
    rb, rr = cell_recip(beta, grid), cell_recip(r, grid)
    ones = np.ones(grid.n_cells)
    kw = {"fast_constant": fast_constant}
    nb = interval_norms(grid, ones, rb, a, b, **kw)
    nf = interval_norms(grid, np.abs(f.values), rr, a, b, **kw)
    nr = interval_norms(grid, ones, rr, a, b, **kw)
    out[live] = nb * nf / nr
    return out


def average_op(f: GridFunction, Q: Interval, beta: VariableExponent, r: VariableExponent) -> float:
    """Value of the averaging operator on ``Q`` (it is constant there)."""
    return float(average_ops(f, CubeFamily.of([Q]), beta, r, skip_zero_mass=False)[0])


@dataclass
class MaximalProfile:
    x: np.ndarray
    values: np.ndarray
    argmax: np.ndarray  # index into the cube family, -1 if no containing cube has a positive value

    def rows(self):
        return zip(self.x.tolist(), self.values.tolist(), self.argmax.tolist())


def sup_over_containing(cubes: CubeFamily, cube_values: np.ndarray, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """For each point, the largest value over cubes whose closure contains it."""
    x = np.asarray(x, dtype=float)
    order_x = np.argsort(x, kind="stable")
    xs = x[order_x]
    lo = np.searchsorted(xs, cubes.a, side="left")
    hi = np.searchsorted(xs, cubes.b, side="right")
    best = np.zeros(x.size)
    arg = -np.ones(x.size, dtype=int)
    # paint ascending so larger values overwrite smaller ones; zero cubes change nothing
    for k in np.argsort(cube_values, kind="stable"):
        if hi[k] > lo[k] and cube_values[k] > 0:
            best[lo[k]:hi[k]] = cube_values[k]
            arg[lo[k]:hi[k]] = k
    out_v = np.empty_like(best)
    out_a = np.empty_like(arg)
    out_v[order_x] = best
    out_a[order_x] = arg
    return out_v, out_a


def maximal_profile(f: GridFunction, cfg: MaximalConfig, x=None, **kw) -> MaximalProfile:
    """``M_{beta, r} f`` at ``x`` (default: all cell midpoints of ``f``'s grid)."""
    x = f.grid.midpoints if x is None else np.atleast_1d(np.asarray(x, dtype=float))
    vals = average_ops(f, cfg.cubes, cfg.beta, cfg.r, **kw)
    v, arg = sup_over_containing(cfg.cubes, vals, x)
    return MaximalProfile(x, v, arg)


def maximal(f: GridFunction, x: float, cfg: MaximalConfig) -> float:
    return float(maximal_profile(f, cfg, [x]).values[0])


def dyadic_maximal(f: GridFunction, x: float, family: DyadicFamily, beta: VariableExponent, r: VariableExponent) -> float:
    return maximal(f, x, MaximalConfig(family.as_cubes(), beta, r))


# -- sharp maximal ----------------------------------------------------------
def mean_oscillations(f: GridFunction, cubes: CubeFamily) -> np.ndarray:
    """``min_a |Q|^-1 int_Q |f - a|`` per cube, minimised at the weighted median."""
    grid = f.grid
    cells, w, starts = grid.cell_overlaps(cubes.a, cubes.b)
    vals = f.values[cells]
    out = np.zeros(len(cubes))
    for i in range(len(cubes)):
        s, e = starts[i], starts[i + 1]
        if e <= s:
            continue
        v, ww = vals[s:e], w[s:e]
        length = cubes.b[i] - cubes.a[i]
        outside = length - ww.sum()
        if outside > 1e-12 * length:  # f vanishes off the window
            v, ww = np.append(v, 0.0), np.append(ww, outside)
        tot = ww.sum()
        if tot <= 0:
            continue
        order = np.argsort(v, kind="stable")
        cw = np.cumsum(ww[order])
        med = v[order][np.searchsorted(cw, 0.5 * tot)]
        out[i] = float(np.dot(ww, np.abs(v - med)) / length)
    return out


def sharp_profile(f: GridFunction, cubes: CubeFamily, x=None) -> MaximalProfile:
    x = f.grid.midpoints if x is None else np.atleast_1d(np.asarray(x, dtype=float))
    v, arg = sup_over_containing(cubes, mean_oscillations(f, cubes), x)
    return MaximalProfile(x, v, arg)


def sharp_maximal(f: GridFunction, x: float, cubes: CubeFamily) -> float:
    return float(sharp_profile(f, cubes, [x]).values[0])
