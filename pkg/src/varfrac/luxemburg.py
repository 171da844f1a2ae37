"""Modulars, Luxemburg norms and the norm identities built on them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ExponentMismatch
from .exponent import VariableExponent, complement, conjugate
from .grid import Grid, GridFunction, Interval

DEFAULT_TOL = 1e-10
_EPS = 1e-12


@dataclass(frozen=True)
class NormResult:
    value: float
    lambda_bracket: tuple[float, float]
    modular_at_value: float

    def __float__(self) -> float:
        return self.value


# -- batched engine -------------------------------------------------------
@dataclass
class Segments:
    """Many functions at once: element ``k`` has magnitude ``v``, reciprocal
    exponent ``r`` and weight (measure) ``w``; function ``i`` owns elements
    ``starts[i]:starts[i+1]``."""

    v: np.ndarray
    r: np.ndarray
    w: np.ndarray
    starts: np.ndarray

    @property
    def n(self) -> int:
        return self.starts.size - 1

    @property
    def owner(self) -> np.ndarray:
        return np.repeat(np.arange(self.n), np.diff(self.starts))


def _modulars(log_lam: np.ndarray, seg_owner: np.ndarray, lv: np.ndarray, p: np.ndarray, w: np.ndarray,
              fin: np.ndarray, n: int, sup_v: np.ndarray, scaled_sup: bool) -> np.ndarray:
    """Modular of every segment at ``lam = exp(log_lam)``."""
    with np.errstate(over="ignore", invalid="ignore"):
        terms = w[fin] * np.exp(p[fin] * (lv[fin] - log_lam[seg_owner[fin]]))
    out = np.bincount(seg_owner[fin], weights=terms, minlength=n)
    if scaled_sup:
        with np.errstate(over="ignore", divide="ignore"):
            out = out + np.where(sup_v > 0, np.exp(np.log(np.where(sup_v > 0, sup_v, 1.0)) - log_lam), 0.0)
    else:
        out = out + sup_v
    return out


def segment_norms(seg: Segments, *, tol: float = DEFAULT_TOL, scaled_sup: bool = True,
                  fast_constant: bool = False) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Luxemburg norms of all segments by simultaneous geometric bisection.

    Returns ``(hi, lo, modular_at_hi)``; ``hi`` is the reported norm and always
    satisfies ``modular(hi) <= 1``. With ``fast_constant`` segments whose
    exponent is constant use the closed form instead of bisection.
    """
    n = seg.n
    owner = seg.owner
    keep = (seg.v > 0) & (seg.w > 0)
    owner, v, r, w = owner[keep], seg.v[keep], seg.r[keep], seg.w[keep]
    hi_out = np.zeros(n)
    lo_out = np.zeros(n)
    mod_out = np.zeros(n)
    if v.size == 0:
        return hi_out, lo_out, mod_out

    fin = r > 0
    sup_v = np.zeros(n)
    if (~fin).any():
        np.maximum.at(sup_v, owner[~fin], v[~fin])
    vmax = np.zeros(n)
    np.maximum.at(vmax, owner, v)
    meas = np.bincount(owner, weights=w, minlength=n)
    active = vmax > 0

    if fast_constant:
        rmin = np.full(n, np.inf)
        rmax = np.full(n, -np.inf)
        np.minimum.at(rmin, owner, r)
        np.maximum.at(rmax, owner, r)
        const = active & (rmin == rmax)
        if scaled_sup and const.any():
            rc = np.where(const, rmin, 1.0)
            m = const[owner] & fin
            with np.errstate(over="ignore"):
                s = np.bincount(owner[m], weights=w[m] * (v[m] / vmax[owner[m]]) ** (1.0 / r[m]), minlength=n)
            closed = np.where(rc > 0, vmax * s ** rc, vmax)
            closed = np.where(const & (rc == 0), sup_v, closed)
            hi_out[const] = closed[const]
            lo_out[const] = closed[const]
            mod_out[const] = 1.0
            active = active & ~const

    if not scaled_sup:
        blocked = sup_v > 1.0
        blocked |= (sup_v == 1.0) & (np.bincount(owner[fin], minlength=n) > 0)
        hi_out[blocked & active] = np.inf
        lo_out[blocked & active] = np.inf
        mod_out[blocked & active] = np.inf
        active &= ~blocked

    idx = np.nonzero(active)[0]
    if idx.size == 0:
        return hi_out, lo_out, mod_out
    # restrict to active segments and renumber
    remap = -np.ones(n, dtype=int)
    remap[idx] = np.arange(idx.size)
    sel = remap[owner] >= 0
    o2, v2, r2, w2 = remap[owner[sel]], v[sel], r[sel], w[sel]
    fin2 = r2 > 0
    p2 = np.where(fin2, 1.0 / np.where(fin2, r2, 1.0), 0.0)
    lv2 = np.log(v2)
    m = idx.size
    sv = sup_v[idx]

    def rho(log_lam):
        return _modulars(log_lam, o2, lv2, p2, w2, fin2, m, sv, scaled_sup)

    top = np.log(vmax[idx] * (1.0 + meas[idx]))
    hi = top.copy()
    for _ in range(2000):
        bad = rho(hi) > 1.0
        if not bad.any():
            break
        hi[bad] += math.log(2.0) * 4
    lo = top + math.log(_EPS)
    for _ in range(2000):
        good = rho(lo) <= 1.0
        if not good.any():
            break
        hi = np.where(good, lo, hi)
        lo[good] -= math.log(2.0) * 16
    while True:
        width = hi - lo
        if np.all(width <= tol):
            break
        mid = 0.5 * (hi + lo)
        ok = rho(mid) <= 1.0
        hi = np.where(ok, mid, hi)
        lo = np.where(ok, lo, mid)
    hi_out[idx] = np.exp(hi)
    lo_out[idx] = np.exp(lo)
    mod_out[idx] = rho(hi)
    return hi_out, lo_out, mod_out


def interval_segments(grid: Grid, values: np.ndarray, recip: np.ndarray, a, b) -> Segments:
    """Segments for ``values * chi_[a_i, b_i]`` on ``grid`` (partial cells weighted by overlap)."""
    cells, w, starts = grid.cell_overlaps(a, b)
    return Segments(np.abs(values[cells]), recip[cells], w, starts)


def interval_norms(grid: Grid, values: np.ndarray, recip: np.ndarray, a, b, **kw) -> np.ndarray:
    """Norms of ``values * chi_[a_i, b_i]``; ``recip`` holds ``1/p`` per cell."""
    return segment_norms(interval_segments(grid, values, recip, a, b), **kw)[0]


def cell_recip(p: VariableExponent, grid: Grid) -> np.ndarray:
    """Reciprocal exponent per cell, taken at the cell midpoint."""
    return p.recip(grid.midpoints)


# -- public scalar API ----------------------------------------------------
def modular(f: GridFunction, p: VariableExponent, lam: float, *, scaled_sup: bool = True) -> float:
    """``int_{p<inf} |f/lam|^p + ess sup_{p=inf} |f/lam|``.

    With ``scaled_sup=False`` the supremum term is taken of ``|f|`` itself.
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    r = cell_recip(p, f.grid)
    v = np.abs(f.values)
    w = f.grid.widths
    fin = (r > 0) & (v > 0)
    with np.errstate(over="ignore"):
        integral = float(np.sum(w[fin] * np.exp((np.log(v[fin]) - math.log(lam)) / r[fin])))
    inf_cells = (r == 0) & (v > 0)
    sup = float(v[inf_cells].max()) if inf_cells.any() else 0.0
    return integral + (sup / lam if scaled_sup else sup)


def luxemburg_norm(f: GridFunction, p: VariableExponent, *, tol: float = DEFAULT_TOL,
                   scaled_sup: bool = True) -> NormResult:
    """``inf{lam > 0 : modular(f, p, lam) <= 1}`` by bracketing and bisection."""
    r = cell_recip(p, f.grid)
    seg = Segments(np.abs(f.values), r, f.grid.widths.copy(), np.array([0, f.grid.n_cells]))
    hi, lo, mod = segment_norms(seg, tol=tol, scaled_sup=scaled_sup)
    return NormResult(float(hi[0]), (float(lo[0]), float(hi[0])), float(mod[0]))


def norm(f: GridFunction, p: VariableExponent, **kw) -> float:
    return luxemburg_norm(f, p, **kw).value


def indicator_norm(p: VariableExponent, Q: Interval, cells: int = 256, grid: Grid | None = None) -> float:
    """``||chi_Q||_p`` on ``grid`` (or on a uniform grid of ``Q`` refined at ``p``'s breakpoints)."""
    if grid is None:
        grid = Grid.uniform(Q, cells, extra=p.breakpoints)
    return float(interval_norms(grid, np.ones(grid.n_cells), cell_recip(p, grid), [Q.a], [Q.b])[0])


# -- identities and inequalities ------------------------------------------
@dataclass
class IdentityReport:
    left: float
    right: float
    rel_diff: float
    ok: bool


def power_norm_identity_check(f: GridFunction, p: VariableExponent, s0: float, *, rtol: float = 1e-7) -> IdentityReport:
    """Compare ``|| |f|^s0 ||_p`` with ``||f||_{s0 p}^s0``."""
    if s0 <= 0:
        raise ValueError("s0 must be positive")
    left = norm(f.abs().map(lambda v: v ** s0), p)
    right = norm(f, p.scaled(s0)) ** s0
    denom = max(abs(left), abs(right))
    rel = 0.0 if denom == 0 else abs(left - right) / denom
    return IdentityReport(left, right, rel, rel <= rtol)


@dataclass
class HolderReport:
    lhs: float
    rhs: float
    ratio: float
    bound: float | None
    holds: bool | None


def holder(f: GridFunction, g: GridFunction, p: VariableExponent, *, bound: float = 4.0) -> HolderReport:
    """``||fg||_1`` against ``||f||_p ||g||_{p'}``."""
    lhs = (f * g).abs().integrate()
    rhs = norm(f, p) * norm(g, conjugate(p))
    ratio = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else math.inf)
    return HolderReport(lhs, rhs, ratio, bound, ratio <= bound)


def check_triple(r: VariableExponent, p: VariableExponent, q: VariableExponent, x: np.ndarray, atol: float = 1e-12) -> None:
    """Raise :class:`ExponentMismatch` unless ``1/r = 1/p + 1/q`` at every ``x``."""
    gap = np.abs(r.recip(x) - p.recip(x) - q.recip(x))
    if np.any(gap > atol):
        k = int(np.argmax(gap))
        raise ExponentMismatch(f"1/r != 1/p + 1/q at x={float(x[k])!r} (gap {float(gap[k]):.3g})")


def holder_general(f: GridFunction, g: GridFunction, r: VariableExponent, p: VariableExponent,
                   q: VariableExponent) -> HolderReport:
    """``||fg||_r`` against ``||f||_p ||g||_q`` for a Holder triple; the
    bound 4 is asserted only when ``r == 1``."""
    fg = f * g
    check_triple(r, p, q, fg.grid.midpoints)
    lhs = norm(fg, r)
    rhs = norm(f, p) * norm(g, q)
    ratio = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else math.inf)
    unit = r.is_constant and r.constant_recip == 1.0
    return HolderReport(lhs, rhs, ratio, 4.0 if unit else None, (ratio <= 4.0) if unit else None)


# -- conjugate norm -------------------------------------------------------
@dataclass
class ConjugateNormResult:
    value: float
    witness: GridFunction | None
    witness_kind: str
    candidates: int
    values: list[float] = field(default_factory=list)


def _unit_ball(g: GridFunction, q: VariableExponent) -> GridFunction | None:
    n = norm(g, q)
    if n == 0 or not math.isfinite(n):
        return None
    return GridFunction(g.grid, g.values / n)


def conjugate_norm(f: GridFunction, p: VariableExponent, r: VariableExponent, *, candidates: int = 16,
                   seed: int = 0) -> ConjugateNormResult:
    """Certified lower bound for ``sup_{||g||_q <= 1} ||f g||_r`` with ``1/r = 1/p + 1/q``.

    Candidates: the power witnesses ``(|f|/lam)^{(p-r)/r}`` for ``lam`` on a
    geometric ladder around ``||f||_p`` plus ``candidates`` seeded random
    positive functions on the support of ``f``. Each candidate is pushed into
    the unit ball of ``L^q`` by its (upper-bracket) norm and scored by the
    lower bracket of ``||f g||_r``.
    """
    q = complement(r, p)
    grid = f.grid
    rp, rr, rq = cell_recip(p, grid), cell_recip(r, grid), cell_recip(q, grid)
    absf = np.abs(f.values)
    supp = absf > 0
    if not supp.any():
        return ConjugateNormResult(0.0, None, "zero", 0, [])
    base = norm(f, p)
    with np.errstate(divide="ignore", invalid="ignore"):
        expo = np.where(rp > 0, rq / np.where(rp > 0, rp, 1.0), 0.0)
    best, best_g, kind, scores = -1.0, None, "", []

    def score(gvals: np.ndarray, label: str):
        nonlocal best, best_g, kind
        g = _unit_ball(GridFunction(grid, gvals), q)
        if g is None:
            return
        fg = GridFunction(grid, absf * g.values)
        val = luxemburg_norm(fg, r).lambda_bracket[0]
        scores.append(val)
        if val > best:
            best, best_g, kind = val, g, label

    logf = np.log(np.where(supp, absf, 1.0))
    for j in range(-8, 9):
        lam = base * 2.0 ** (j / 4)
        # expo = 0 (q infinite) must give g = 1 even where log|f| is huge
        with np.errstate(over="ignore"):
            gv = np.where(supp, np.exp(np.where(expo > 0, expo * (logf - math.log(lam)), 0.0)), 0.0)
        if np.all(np.isfinite(gv)):
            score(gv, f"power(lam={lam:.6g})")
    rng = np.random.default_rng(seed)
    for k in range(candidates):
        gv = np.where(supp, np.exp(rng.normal(size=grid.n_cells)), 0.0)
        score(gv, f"random#{k}")
    return ConjugateNormResult(max(best, 0.0), best_g, kind, len(scores), scores)


def lemma_constant(p: VariableExponent, r: VariableExponent, grid: Grid, support: np.ndarray | None = None) -> float:
    """``k`` with ``1/k`` the sum of the sup-indicators of ``{q < inf}`` and ``{q = inf}``."""
    q = complement(r, p)
    rq = cell_recip(q, grid)
    mask = np.ones(grid.n_cells, bool) if support is None else support
    has_inf = bool(np.any((rq == 0) & mask))
    has_fin = bool(np.any((rq > 0) & mask))
    return 1.0 / (int(has_inf) + int(has_fin) or 1)


# -- cube norms -----------------------------------------------------------
def cube_norm_estimates(p: VariableExponent, Q: Interval, triple: tuple[VariableExponent, VariableExponent, VariableExponent] | None = None,
                        *, cells: int = 256) -> dict:
    """Indicator norm of ``Q`` next to its harmonic-mean, center and limit surrogates."""
    from .exponent import harmonic_mean

    L = Q.length
    out = {"Q": Q.as_list(), "norm": indicator_norm(p, Q, cells)}
    pq = harmonic_mean(p, Q, cells=max(cells, 1024))
    out["harmonic"] = L ** (1.0 / pq) if math.isfinite(pq) else 1.0
    if L <= 2:
        pc = float(p(np.array(Q.center)))
        out["center"] = L ** (1.0 / pc) if math.isfinite(pc) else 1.0
    if L >= 1:
        out["limit"] = L ** p.recip_infinity
    if triple is not None:
        r, pp, qq = triple
        out["triple_ratio"] = indicator_norm(r, Q, cells) / (indicator_norm(pp, Q, cells) * indicator_norm(qq, Q, cells))
    return out
