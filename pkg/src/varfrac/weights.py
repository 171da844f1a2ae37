"""Weights and cube-wise membership tests for Muckenhoupt-type classes.

Every tester returns a :class:`ClassTestReport`: one ratio per cube of the
family, the largest ratio, and the slope of ``log ratio`` against ``log |Q|``
measured on cubes touching the weight's singular points. A finite maximum
with a flat trend is read as "bounded".
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ExponentMismatch, PreconditionError
from .exponent import VariableExponent, complement, conjugate
from .grid import CubeFamily, Grid, GridFunction, Interval
from .luxemburg import cell_recip, interval_norms

SLOPE_TOL = 0.05
MIN_SCALES = 8


@dataclass(frozen=True, eq=False)
class Weight:
    """A strictly positive piecewise-constant function with declared singular points."""

    f: GridFunction
    singular_points: tuple[float, ...] = ()
    label: str = "w"

    def __post_init__(self):
        v = self.f.values
        if not (np.all(v > 0) and np.all(np.isfinite(v))):
            raise PreconditionError("a weight must be positive and finite on every cell")

    @property
    def grid(self) -> Grid:
        return self.f.grid

    @property
    def values(self) -> np.ndarray:
        return self.f.values

    def power(self, s: float) -> "Weight":
        return Weight(GridFunction(self.grid, self.values ** s), self.singular_points, f"{self.label}^{s:g}")

    def inverse(self) -> "Weight":
        return self.power(-1.0)

    @classmethod
    def constant(cls, grid: Grid, c: float = 1.0) -> "Weight":
        return cls(GridFunction.constant(grid, c), (), f"{c:g}")

    @classmethod
    def power_law(cls, delta: float, window: Interval, *, x0: float = 0.0, base_cells: int = 64,
                  floor: float | None = None, band_cells: int = 1, extra=()) -> "Weight":
        """``|x - x0|^delta`` sampled at midpoints of a grid graded at ``x0``."""
        grid = Grid.graded(window, [x0], base_cells=base_cells, floor=floor, band_cells=band_cells, extra=extra)
        return cls.on_grid(delta, grid, x0=x0)

    @classmethod
    def on_grid(cls, delta: float, grid: Grid, *, x0: float = 0.0) -> "Weight":
        return cls(GridFunction(grid, np.abs(grid.midpoints - x0) ** delta), (x0,), f"|x-{x0:g}|^{delta:g}")


# -- closed forms for power weights (independent oracle) ---------------------
def power_integral(delta: float, a: float, b: float, x0: float = 0.0) -> float:
    """``int_a^b |x - x0|^delta dx`` (``inf`` when divergent)."""
    a, b = a - x0, b - x0
    if delta <= -1 and a <= 0 <= b:
        return math.inf

    def F(t):
        return math.copysign(abs(t) ** (delta + 1) / (delta + 1), t)

    return F(b) - F(a)


def power_Ap_ratio(delta: float, p: float, a: float, b: float) -> float:
    """Classical ``A_p`` ratio of ``|x|^delta`` on ``[a, b]``."""
    L = b - a
    m1 = power_integral(delta, a, b) / L
    m2 = power_integral(-delta / (p - 1), a, b) / L
    return m1 * m2 ** (p - 1)


def power_in_Ap(delta: float, p: float) -> bool:
    return -1 < delta < p - 1


def power_in_Apr(delta: float, p: float, r: float) -> bool:
    """Membership of ``|x|^delta`` in the constant-exponent class with parameters ``(p, r)``:
    equivalent to ``|x|^(delta p)`` lying in ``A_(p/r)``."""
    if r == p:
        return delta <= 0 and delta * p > -1
    return power_in_Ap(delta * p, p / r)


# -- reports ---------------------------------------------------------------
@dataclass
class ClassTestReport:
    test: str
    family: str
    ratios: np.ndarray
    max_ratio: float
    slope: float
    verdict: str
    scales: int
    slope_tol: float = SLOPE_TOL
    trend: list[tuple[float, float]] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def bounded(self) -> bool:
        return self.verdict == "bounded"

    def as_dict(self, with_ratios: bool = True) -> dict:
        d = {
            "test": self.test,
            "family": self.family,
            "max_ratio": self.max_ratio,
            "slope": self.slope,
            "slope_tol": self.slope_tol,
            "scales": self.scales,
            "verdict": self.verdict,
            "trend": self.trend,
            "notes": self.notes,
        }
        if with_ratios:
            d["ratios"] = [float(v) for v in self.ratios]
        return d

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)

    def to_csv_rows(self, cubes: CubeFamily):
        for a, b, v in zip(cubes.a, cubes.b, self.ratios):
            yield float(a), float(b), float(v)


def trend_slope(lengths: np.ndarray, ratios: np.ndarray) -> tuple[float, list[tuple[float, float]]]:
    """Least-squares slope of ``log(max ratio per scale)`` against ``log |Q|``."""
    if lengths.size == 0:
        return math.nan, []
    keys = np.round(np.log2(lengths) * 8) / 8
    scales = np.unique(keys)
    pts = []
    for s in scales:
        m = ratios[keys == s].max()
        if m > 0:
            pts.append((float(2.0 ** s), float(m)))
    if len(pts) < 2:
        return 0.0, pts
    xs = np.log([p[0] for p in pts])
    ys = np.log([p[1] for p in pts])
    if not np.all(np.isfinite(ys)):
        return math.inf, pts
    slope = float(np.polyfit(xs, ys, 1)[0])
    return slope, pts


def make_report(test: str, cubes: CubeFamily, ratios: np.ndarray, singular: tuple[float, ...], *,
                slope_tol: float = SLOPE_TOL, min_scales: int = MIN_SCALES) -> ClassTestReport:
    ratios = np.asarray(ratios, dtype=float)
    max_ratio = float(np.max(ratios)) if ratios.size else 0.0
    if singular:
        touch = np.zeros(len(cubes), bool)
        for s in singular:
            touch |= cubes.touching(s)
    else:
        touch = np.ones(len(cubes), bool)
    slope, pts = trend_slope(cubes.lengths[touch], ratios[touch])
    notes = []
    if not math.isfinite(max_ratio) or (math.isfinite(slope) is False):
        verdict = "diverging"
    elif len(pts) < min_scales:
        verdict = "inconclusive"
        notes.append(f"only {len(pts)} scales touch the singular set (need {min_scales})")
    elif abs(slope) <= slope_tol:
        verdict = "bounded"
    else:
        verdict = "diverging"
    return ClassTestReport(test, cubes.description, ratios, max_ratio, slope, verdict, len(pts), slope_tol, pts, notes)


# -- testers -----------------------------------------------------------------
def _integrals(w: Weight, values: np.ndarray, cubes: CubeFamily) -> np.ndarray:
    return w.grid.interval_integrals(values, cubes.a, cubes.b)


def Ap_classical_ratios(omega: Weight, p: float, cubes: CubeFamily) -> np.ndarray:
    L = cubes.lengths
    m1 = _integrals(omega, omega.values, cubes) / L
    m2 = _integrals(omega, omega.values ** (-1.0 / (p - 1)), cubes) / L
    return m1 * m2 ** (p - 1)


def test_Ap_classical(omega: Weight, p: float, cubes: CubeFamily, **kw) -> ClassTestReport:
    """Classical ``A_p``: ``avg(w) * avg(w^(-1/(p-1)))^(p-1)`` per cube."""
    if not p > 1:
        raise PreconditionError("classical A_p needs p > 1")
    return make_report(f"A_{p:g}", cubes, Ap_classical_ratios(omega, p, cubes), omega.singular_points, **kw)


def _check_finite_range(p: VariableExponent, grid: Grid) -> None:
    r = cell_recip(p, grid)
    if np.any(r <= 0) or np.any(r >= 1):
        raise PreconditionError(f"{p.label}: need 1 < p- <= p+ < inf on the weight's grid")


def Ap_variable_ratios(omega: Weight, p: VariableExponent, cubes: CubeFamily) -> np.ndarray:
    g = omega.grid
    rp = cell_recip(p, g)
    rpc = cell_recip(conjugate(p), g)
    n1 = interval_norms(g, omega.values, rp, cubes.a, cubes.b)
    n2 = interval_norms(g, 1.0 / omega.values, rpc, cubes.a, cubes.b)
    return n1 * n2 / cubes.lengths


def test_Ap_variable(omega: Weight, p: VariableExponent, cubes: CubeFamily, **kw) -> ClassTestReport:
    """Variable ``A_p(.)``: ``||w chi_Q||_p ||w^-1 chi_Q||_p' / |Q|``."""
    _check_finite_range(p, omega.grid)
    return make_report(f"A_{p.label}", cubes, Ap_variable_ratios(omega, p, cubes), omega.singular_points, **kw)


def Apr_ratios(omega: Weight, p: VariableExponent, r: VariableExponent, cubes: CubeFamily) -> np.ndarray:
    g = omega.grid
    rp, rr = cell_recip(p, g), cell_recip(r, g)
    if np.any(rr + 1e-12 < rp):
        raise ExponentMismatch("need r <= p pointwise")
    rq = np.clip(rr - rp, 0.0, None)
    ones = np.ones(g.n_cells)
    n1 = interval_norms(g, omega.values, rp, cubes.a, cubes.b)
    n2 = interval_norms(g, 1.0 / omega.values, rq, cubes.a, cubes.b)
    n3 = interval_norms(g, ones, rr, cubes.a, cubes.b)
    return n1 * n2 / n3


def test_Apr(omega: Weight, p: VariableExponent, r: VariableExponent, cubes: CubeFamily, **kw) -> ClassTestReport:
    """The two-exponent class: ``||chi_Q w||_p ||chi_Q w^-1||_q / ||chi_Q||_r`` with ``1/r = 1/p + 1/q``."""
    return make_report(f"A_({p.label},{r.label})", cubes, Apr_ratios(omega, p, r, cubes), omega.singular_points, **kw)


def openness_probe(omega: Weight, p: VariableExponent, cubes: CubeFamily,
                   scan=(0.99, 0.97, 0.95, 0.9), **kw) -> dict:
    """Scan ``s`` and test ``w^(1/s)`` in the variable class of ``s p``."""
    base = test_Ap_variable(omega, p, cubes, **kw)
    if not base.bounded:
        raise PreconditionError(f"weight is not in the class to begin with (verdict {base.verdict})")
    rows = []
    smallest = None
    for s in scan:
        try:
            rep = test_Ap_variable(omega.power(1.0 / s), p.scaled(s, extended=False), cubes, **kw)
            verdict, slope = rep.verdict, rep.slope
        except PreconditionError as exc:
            verdict, slope = f"skipped: {exc}", math.nan
        rows.append({"s": s, "verdict": verdict, "slope": slope})
        if verdict == "bounded":
            smallest = s if smallest is None else min(smallest, s)
    return {"base": base.as_dict(with_ratios=False), "scan": rows, "smallest_passing_s": smallest}


def test_Apr_implies_Ap(omega: Weight, p: VariableExponent, r: VariableExponent, cubes: CubeFamily, **kw) -> dict:
    """Run the two-exponent test and, when bounded, the implied single-exponent tests for ``w`` and ``w^-1``."""
    rep = test_Apr(omega, p, r, cubes, **kw)
    out = {"antecedent": rep.as_dict(with_ratios=False), "antecedent_bounded": rep.bounded}
    if not rep.bounded:
        out.update(holds=True, vacuous=True)
        return out
    a = test_Ap_variable(omega, p, cubes, **kw)
    q = complement(r, p)
    try:
        b = test_Ap_variable(omega.inverse(), q, cubes, **kw)
        b_bounded, b_dict = b.bounded, b.as_dict(with_ratios=False)
    except PreconditionError as exc:
        b_bounded, b_dict = None, {"skipped": str(exc)}
    out.update(p_class=a.as_dict(with_ratios=False), q_class_inverse=b_dict, vacuous=False,
               holds=bool(a.bounded and (b_bounded is not False)))
    return out


for _fn in (test_Ap_classical, test_Ap_variable, test_Apr, test_Apr_implies_Ap):
    _fn.__test__ = False
