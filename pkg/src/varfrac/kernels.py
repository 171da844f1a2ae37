"""Explicit two-variable kernels, their integral operators, and numerical
Hormander-sum / size-condition probes.

Kernel slices are handled in *local coordinates*: a slice ``y -> K(x, y)``
(slot 1) or ``x -> K(x, y)`` (slot 2) carries an anchor point (its singular
point when it has one) and a function of the offset ``u`` from that anchor.
Grading the quadrature grid in ``u`` keeps resolution down to floors far
below the spacing of doubles near the anchor, which matters for the
borderline-integrable factor ``K2``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .exponent import VariableExponent
from .grid import CubeFamily, Grid, GridFunction, Interval, test_cubes
from .luxemburg import Segments, cell_recip, segment_norms
from .maximal import sharp_profile

LocalFn = Callable[[np.ndarray], np.ndarray]


# -- scalar factors ------------------------------------------------------------
def kernel_K1(t):
    """Indicator of ``[2, 3]``."""
    t = np.asarray(t, dtype=float)
    return ((t >= 2.0) & (t <= 3.0)).astype(float)


def kernel_K2(t, beta_param: float = 1.0):
    """``t^(-1/2) (log(e/t))^(-(1+beta)/2)`` on ``(0, 1)``, zero elsewhere."""
    if beta_param <= 0:
        raise ValueError("beta_param must be positive")
    t = np.asarray(t, dtype=float)
    inside = (t > 0) & (t < 1)
    ts = np.where(inside, t, 0.5)
    val = ts ** -0.5 * (1.0 - np.log(ts)) ** (-(1.0 + beta_param) / 2.0)
    return np.where(inside, val, 0.0)


def K2_square_integral_exact(floor: float, beta_param: float = 1.0) -> float:
    """``int_floor^1 K2^2`` from the antiderivative ``-(1/beta) (log(e/t))^(-beta)``."""
    return (1.0 - (1.0 - math.log(floor)) ** -beta_param) / beta_param


# -- slices ---------------------------------------------------------------------
@dataclass(frozen=True)
class Slice:
    """One-variable section of a kernel, expressed around ``anchor``.

    ``fn(u)`` is the value at ``anchor + u``; ``support`` (local, or ``None``
    when the slice vanishes) bounds where it can be nonzero; ``singular`` and
    ``jumps`` are local positions needing graded or aligned breakpoints.
    ``signed_gap`` returns ``x - y`` as a function of ``u`` (used by fractional
    kernels).
    """

    anchor: float
    fn: LocalFn
    support: tuple[float, float] | None
    singular: tuple[float, ...] = ()
    jumps: tuple[float, ...] = ()
    signed_gap: LocalFn | None = None

    def global_support(self) -> Interval | None:
        if self.support is None:
            return None
        return Interval(self.anchor + self.support[0], self.anchor + self.support[1])


def _nonempty(lo: float, hi: float) -> tuple[float, float] | None:
    return (lo, hi) if lo < hi else None


@dataclass(frozen=True)
class Kernel:
    """A kernel ``K(x, y)`` with slice constructors for both argument slots."""

    name: str
    evaluate: Callable[[np.ndarray, np.ndarray], np.ndarray]
    slice_fn: Callable[[float, int], Slice]
    params: dict = field(default_factory=dict)

    def __call__(self, x, y):
        return self.evaluate(np.asarray(x, dtype=float), np.asarray(y, dtype=float))

    def slice(self, fixed: float, slot: int) -> Slice:
        """``slot=1``: ``y -> K(fixed, y)``; ``slot=2``: ``x -> K(x, fixed)``."""
        if slot not in (1, 2):
            raise ValueError("slot must be 1 or 2")
        return self.slice_fn(float(fixed), slot)

    @property
    def singular_points(self) -> str:
        return self.params.get("singular", "")


def zero_kernel() -> Kernel:
    return Kernel("zero", lambda x, y: np.zeros(np.broadcast(x, y).shape),
                  lambda fixed, slot: Slice(0.0, lambda u: np.zeros_like(u), None))


def kernel_K(beta_param: float = 1.0) -> Kernel:
    """``K(x, y) = K1(x - y) K2(y)``."""

    def ev(x, y):
        return kernel_K1(x - y) * kernel_K2(y, beta_param)

    def sl(fixed, slot):
        if slot == 1:  # y -> K(x, y), anchored at the singularity y = 0
            x = fixed
            return Slice(0.0, lambda u: kernel_K1(x - u) * kernel_K2(u, beta_param),
                         _nonempty(max(0.0, x - 3.0), min(1.0, x - 2.0)), (0.0,), (x - 3.0, x - 2.0, 1.0),
                         lambda u: x - u)
        y = fixed  # x -> K(x, y), anchored at x = y + 2
        c = float(kernel_K2(y, beta_param))
        return Slice(y + 2.0, lambda u: kernel_K1(2.0 + u) * c, _nonempty(0.0, 1.0) if c else None, (), (0.0, 1.0),
                     lambda u: 2.0 + u)

    return Kernel("K", ev, sl, {"beta": beta_param, "singular": "y=0"})


def kernel_Ktilde(beta_param: float = 1.0) -> Kernel:
    """``K~(x, y) = K1(y) K2(x - y - 1)``."""

    def ev(x, y):
        return kernel_K1(y) * kernel_K2(x - y - 1.0, beta_param)

    def sl(fixed, slot):
        if slot == 1:  # y -> K~(x, y), anchored at y = x - 1 where K2 blows up
            x = fixed
            s = x - 1.0
            return Slice(s, lambda u: kernel_K1(s + u) * kernel_K2(-u, beta_param),
                         _nonempty(max(2.0 - s, -1.0), min(3.0 - s, 0.0)), (0.0,), (2.0 - s, 3.0 - s, -1.0),
                         lambda u: 1.0 - u)
        y = fixed  # x -> K~(x, y), anchored at x = y + 1
        c = float(kernel_K1(y))
        return Slice(y + 1.0, lambda u: c * kernel_K2(u, beta_param), _nonempty(0.0, 1.0) if c else None, (0.0,), (1.0,),
                     lambda u: 1.0 + u)

    return Kernel("Ktilde", ev, sl, {"beta": beta_param, "singular": "x-y=1"})


def fractional(alpha: float, base: Kernel) -> Kernel:
    """``|x - y|^alpha * base(x, y)``."""
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")

    def ev(x, y):
        return np.abs(x - y) ** alpha * base.evaluate(x, y)

    def sl(fixed, slot):
        s = base.slice(fixed, slot)
        gap = s.signed_gap

        def fn(u):
            return np.abs(gap(u)) ** alpha * s.fn(u)

        return Slice(s.anchor, fn, s.support, s.singular, s.jumps, gap)

    return Kernel(f"fractional({alpha:g},{base.name})", ev, sl, {"alpha": alpha, "base": base.name, **base.params})


def dilated(base: Kernel, lam: float) -> Kernel:
    """``lam^-1 base(x/lam, y/lam)``, the L^1-normalised dilation of ``base``."""

    def ev(x, y):
        return base.evaluate(x / lam, y / lam) / lam

    def sl(fixed, slot):
        s = base.slice(fixed / lam, slot)
        gap = s.signed_gap
        return Slice(
            lam * s.anchor,
            lambda u: s.fn(u / lam) / lam,
            None if s.support is None else (lam * s.support[0], lam * s.support[1]),
            tuple(lam * t for t in s.singular),
            tuple(lam * t for t in s.jumps),
            None if gap is None else (lambda u: lam * gap(u / lam)),
        )

    return Kernel(f"dilated({base.name},{lam:g})", ev, sl, {"lam": lam, **base.params})


def kernel_from_name(name: str, beta_param: float = 1.0, alpha: float = 0.5, lam: float = 1.0) -> Kernel:
    key = name.lower()
    if key == "k":
        k = kernel_K(beta_param)
    elif key in {"ktilde", "k~", "kt"}:
        k = kernel_Ktilde(beta_param)
    elif key in {"fractional", "frac"}:
        k = fractional(alpha, kernel_Ktilde(beta_param))
    elif key == "zero":
        k = zero_kernel()
    else:
        raise ValueError(f"unknown kernel {name!r}")
    return dilated(k, lam) if lam != 1.0 else k


# -- quadrature of slice combinations ------------------------------------------------
@dataclass(frozen=True)
class Quadrature:
    base_cells: int = 16
    band_cells: int = 4
    floor: float = 2.0 ** -40


def _piece_points(lo: float, hi: float, singular: Iterable[float], jumps: Iterable[float], q: Quadrature) -> np.ndarray:
    reach = (hi - lo) / q.base_cells
    pts = [np.linspace(lo, hi, q.base_cells + 1)]
    for s in singular:
        if lo - reach < s < hi + reach:
            lev = max(1, int(math.ceil(math.log2(max(reach / q.floor, 2.0)))))
            edges = reach * 2.0 ** -np.arange(lev + 1)
            if q.band_cells > 1:
                t = np.linspace(0.0, 1.0, q.band_cells + 1)[:-1]
                edges = np.concatenate([(edges[1:, None] + (edges[:-1, None] - edges[1:, None]) * t).ravel(), edges])
            pts.append(s - edges)
            pts.append(s + edges)
            pts.append([s])
    js = [t for t in jumps if lo < t < hi]
    if js:
        pts.append(js)
    p = np.unique(np.concatenate(pts))
    p = p[(p >= lo) & (p <= hi)]
    keep = np.concatenate([[True], np.diff(p) > 0])
    return p[keep]


def combo_elements(slices: Sequence[tuple[float, Slice]], pieces: Sequence[tuple[float, float]], r: VariableExponent,
                   q: Quadrature) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Cell values, reciprocal exponents and widths of ``sum_i c_i * slice_i``
    restricted to the global ``pieces``; local coordinates follow the first slice."""
    slices = [(c, s) for c, s in slices if c != 0 and s.support is not None]
    if not slices:
        return np.empty(0), np.empty(0), np.empty(0)
    anchor = slices[0][1].anchor
    sing, jumps = [], []
    for _, s in slices:
        off = s.anchor - anchor
        sing += [t + off for t in s.singular]
        jumps += [t + off for t in s.jumps]
        if s.support is not None:
            jumps += [s.support[0] + off, s.support[1] + off]
    vs, rs, ws = [], [], []
    for glo, ghi in pieces:
        lo, hi = glo - anchor, ghi - anchor
        if not lo < hi:
            continue
        pts = _piece_points(lo, hi, sing, jumps, q)
        if pts.size < 2:
            continue
        mid = 0.5 * (pts[1:] + pts[:-1])
        val = np.zeros(mid.size)
        for c, s in slices:
            val += c * s.fn(mid - (s.anchor - anchor))
        vs.append(val)
        rs.append(r.recip(anchor + mid))
        ws.append(np.diff(pts))
    if not vs:
        return np.empty(0), np.empty(0), np.empty(0)
    return np.concatenate(vs), np.concatenate(rs), np.concatenate(ws)


class _SegmentBuilder:
    def __init__(self):
        self.v, self.r, self.w, self.lens = [], [], [], []

    def add(self, v, r, w) -> int:
        self.v.append(np.abs(v))
        self.r.append(r)
        self.w.append(w)
        self.lens.append(len(v))
        return len(self.lens) - 1

    def norms(self, **kw) -> np.ndarray:
        if not self.lens:
            return np.empty(0)
        seg = Segments(np.concatenate(self.v), np.concatenate(self.r), np.concatenate(self.w),
                       np.concatenate([[0], np.cumsum(self.lens)]))
        return segment_norms(seg, **kw)[0]


def indicator_norms(p: VariableExponent, a: np.ndarray, b: np.ndarray, cells: int = 64) -> np.ndarray:
    """``||chi_[a_i, b_i]||_p`` on per-interval uniform grids refined at ``p``'s breakpoints."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if p.is_constant:
        rc = p.constant_recip
        return (b - a) ** rc if rc > 0 else np.ones(a.size)
    pairs, inv = np.unique(np.stack([a, b], axis=1), axis=0, return_inverse=True)
    sb = _SegmentBuilder()
    bps = np.asarray(p.breakpoints, dtype=float)
    for lo, hi in pairs:
        pts = np.linspace(lo, hi, cells + 1)
        inner = bps[(bps > lo) & (bps < hi)]
        if inner.size:
            pts = np.unique(np.concatenate([pts, inner]))
        mid = 0.5 * (pts[1:] + pts[:-1])
        sb.add(np.ones(mid.size), p.recip(mid), np.diff(pts))
    return sb.norms(fast_constant=True)[np.ravel(inv)]


# -- operator -------------------------------------------------------------------------
def apply_operator(K: Kernel, f: GridFunction, x, q: Quadrature = Quadrature()) -> np.ndarray:
    """``Tf(x) = int K(x, y) f(y) dy`` on a graded grid aligned with ``f``'s breakpoints."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.zeros(xs.size)
    hull = f.support_hull
    if hull is None:
        return out if np.ndim(x) else out
    fbp = f.grid.breakpoints
    for i, xi in enumerate(xs):
        s = K.slice(xi, 1)
        sup = s.global_support()
        if sup is None:
            continue
        piece = sup.intersect(hull)
        if piece is None:
            continue
        lo, hi = piece.a - s.anchor, piece.b - s.anchor
        inner = fbp[(fbp > piece.a) & (fbp < piece.b)] - s.anchor
        pts = _piece_points(lo, hi, s.singular, tuple(s.jumps) + tuple(inner), q)
        mid = 0.5 * (pts[1:] + pts[:-1])
        out[i] = float(np.sum(s.fn(mid) * f(s.anchor + mid) * np.diff(pts)))
    return out if np.ndim(x) else out


# -- Hormander sums ------------------------------------------------------------------
@dataclass
class HormanderSum:
    Q: Interval
    x: float
    z: float
    terms: list[tuple[int, float]]  # (m, term)
    total: float
    truncated: bool

    @property
    def tail(self) -> float:
        return self.terms[-1][1] if self.terms else 0.0


def _annulus_pieces(Q: Interval, m: int, hull: Interval) -> list[tuple[float, float]]:
    A, B = Q.dilate(2.0 ** m), Q.dilate(2.0 ** (m - 1))
    out = []
    for lo, hi in ((A.a, B.a), (B.b, A.b)):
        lo, hi = max(lo, hull.a), min(hi, hull.b)
        if lo < hi:
            out.append((lo, hi))
    return out


def _hull(*ivs: Interval | None) -> Interval | None:
    ivs = [v for v in ivs if v is not None]
    if not ivs:
        return None
    return Interval(min(v.a for v in ivs), max(v.b for v in ivs))


def hormander_sums(K: Kernel, triples: Sequence[tuple[Interval, float, float]], beta: VariableExponent,
                   r: VariableExponent, variant: int = 1, M_max: int = 40, q: Quadrature = Quadrature()) -> list[HormanderSum]:
    """Truncated Hormander sums for many ``(Q, x, z)`` at once.

    Term ``m`` is ``2^m l(Q) / ||chi_{2^m Q}||_beta * A_m / ||chi_{2^m Q}||_r`` with
    ``A_m`` the ``r``-norm of the slice difference on ``2^m Q minus 2^(m-1) Q``.
    Summation stops exactly once ``2^(m-1) Q`` swallows both slice supports,
    or at ``M_max``.
    """
    sb = _SegmentBuilder()
    plan = []  # (triple index, m, segment id, 2^m Q)
    truncated = []
    for t, (Q, x, z) in enumerate(triples):
        sx, sz = K.slice(x, variant), K.slice(z, variant)
        hull = _hull(sx.global_support(), sz.global_support())
        trunc = False
        if hull is not None and x != z:
            m = 1
            while True:
                if Q.dilate(2.0 ** (m - 1)).covers(hull):
                    break
                if m > M_max:
                    trunc = True
                    break
                pieces = _annulus_pieces(Q, m, hull)
                if pieces:
                    v, rr, w = combo_elements([(1.0, sx), (-1.0, sz)], pieces, r, q)
                    if v.size and np.any(v != 0):
                        plan.append((t, m, sb.add(v, rr, w), Q.dilate(2.0 ** m)))
                m += 1
        truncated.append(trunc)
    inner = sb.norms(fast_constant=True)
    result = [HormanderSum(Q, x, z, [], 0.0, truncated[t]) for t, (Q, x, z) in enumerate(triples)]
    if plan:
        big_a = np.array([p[3].a for p in plan])
        big_b = np.array([p[3].b for p in plan])
        nb = indicator_norms(beta, big_a, big_b)
        nr = indicator_norms(r, big_a, big_b)
        for k, (t, m, sid, A) in enumerate(plan):
            term = A.length / nb[k] * inner[sid] / nr[k]
            result[t].terms.append((m, float(term)))
        for h in result:
            h.total = float(sum(v for _, v in h.terms))
    return result


def hormander_sum(K: Kernel, Q: Interval, x: float, z: float, beta: VariableExponent, r: VariableExponent,
                  variant: int = 1, M_max: int = 40, q: Quadrature = Quadrature()) -> HormanderSum:
    return hormander_sums(K, [(Q, x, z)], beta, r, variant, M_max, q)[0]


def half_cube_points(Q: Interval, samples: int = 5) -> np.ndarray:
    h = 0.25 * Q.length
    return np.linspace(Q.center - h, Q.center + h, samples)


@dataclass(frozen=True)
class FamilySpec:
    """Parameters of a ``test_cubes`` family, so probes can refine it."""

    window: Interval
    depths: tuple[int, int]
    shifts: int = 2

    def build(self) -> CubeFamily:
        return test_cubes(self.window, range(self.depths[0], self.depths[1] + 1), self.shifts)

    def refined(self, extra: int = 2) -> "FamilySpec":
        return FamilySpec(self.window, (self.depths[0], self.depths[1] + extra), self.shifts)


@dataclass
class HormanderReport:
    kernel: str
    variant: int
    family: str
    sup: float
    argsup: tuple[list[float], float, float] | None
    tail: float
    verdict: str
    refined_sup: float | None = None
    truncated: int = 0
    sums: list[HormanderSum] = field(default_factory=list)
    divergence: list[dict] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def as_dict(self, full: bool = True) -> dict:
        d = {
            "kernel": self.kernel,
            "variant": self.variant,
            "family": self.family,
            "sup": self.sup,
            "argsup": self.argsup,
            "tail": self.tail,
            "verdict": self.verdict,
            "refined_sup": self.refined_sup,
            "truncated": self.truncated,
            "divergence": self.divergence,
            "notes": self.notes,
        }
        if full:
            d["sums"] = [
                {"Q": h.Q.as_list(), "x": h.x, "z": h.z, "terms": h.terms, "total": h.total}
                for h in self.sums if h.total > 0
            ]
        return d

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True)


def _pairs(cubes: CubeFamily, samples: int, extra: Iterable[tuple[Interval, float, float]] = ()):
    triples = []
    for Q in cubes:
        pts = half_cube_points(Q, samples)
        for x in pts:
            for z in pts:
                if x != z:
                    triples.append((Q, float(x), float(z)))
    triples.extend(extra)
    return triples


def _sup_of(K, family: CubeFamily, beta, r, variant, samples, M_max, q, extra):
    triples = _pairs(family, samples, extra)
    # drop triples whose slices both vanish before doing any work
    live = []
    cache: dict[float, bool] = {}
    for Q, x, z in triples:
        for t in (x, z):
            if t not in cache:
                cache[t] = K.slice(t, variant).support is not None
        if cache[x] or cache[z]:
            live.append((Q, x, z))
    sums = hormander_sums(K, live, beta, r, variant, M_max, q)
    return sums


def hormander_class_probe(K: Kernel, beta: VariableExponent, r: VariableExponent, variant: int,
                          cube_family: FamilySpec | CubeFamily, pair_samples: int = 5, M_max: int = 40,
                          *, q: Quadrature = Quadrature(), extra_triples: Iterable = (), stab_tol: float = 0.1,
                          refined_family: CubeFamily | None = None) -> HormanderReport:
    """Sup of Hormander sums over a cube family and sampled pairs in each half cube.

    The verdict is "bounded" when the sup is finite, no sum was cut off by
    ``M_max`` and the sup moves by at most ``stab_tol`` (relative) when the
    family is refined by two depths and ``M_max`` is doubled.
    """
    extra_triples = list(extra_triples)
    fam = cube_family.build() if isinstance(cube_family, FamilySpec) else cube_family
    sums = _sup_of(K, fam, beta, r, variant, pair_samples, M_max, q, extra_triples)
    if refined_family is None and isinstance(cube_family, FamilySpec):
        refined_family = cube_family.refined().build()
    sup, arg, tail = 0.0, None, 0.0
    for h in sums:
        if h.total > sup:
            sup, arg, tail = h.total, (h.Q.as_list(), h.x, h.z), h.tail
    trunc = sum(h.truncated for h in sums)
    rep = HormanderReport(K.name, variant, fam.description, sup, arg, tail, "inconclusive", truncated=trunc, sums=sums)
    if refined_family is not None:
        rs = _sup_of(K, refined_family, beta, r, variant, pair_samples, 2 * M_max, q, extra_triples)
        rep.refined_sup = max((h.total for h in rs), default=0.0)
        rep.truncated += sum(h.truncated for h in rs)
    if not math.isfinite(sup):
        rep.verdict = "diverging"
    elif rep.truncated:
        rep.verdict = "inconclusive"
        rep.notes.append(f"{rep.truncated} sums reached M_max before exhausting the kernel support")
    elif rep.refined_sup is None:
        rep.verdict = "bounded" if math.isfinite(sup) else "diverging"
        rep.notes.append("no refinement run; stability not checked")
    elif rep.refined_sup <= (1 + stab_tol) * max(sup, 1e-300) or (sup == 0 and rep.refined_sup == 0):
        rep.verdict = "bounded"
    else:
        rep.verdict = "growing"
        rep.notes.append(f"refined sup {rep.refined_sup:.6g} exceeds {(1 + stab_tol):.2f} x {sup:.6g}")
    return rep


# -- divergence ladder ----------------------------------------------------------------
REFINEMENT_LADDER = (24, 48, 72, 96, 120, 144, 168)


def annulus_norm(K: Kernel, Q: Interval, x: float, z: float, r: VariableExponent, variant: int = 1, m: int = 1,
                 q: Quadrature = Quadrature()) -> float:
    """``|| [K(x,.) - K(z,.)] chi_{2^m Q minus 2^(m-1) Q} ||_r`` (slots swapped for variant 2)."""
    sx, sz = K.slice(x, variant), K.slice(z, variant)
    hull = _hull(sx.global_support(), sz.global_support())
    if hull is None:
        return 0.0
    v, rr, w = combo_elements([(1.0, sx), (-1.0, sz)], _annulus_pieces(Q, m, hull), r, q)
    if v.size == 0:
        return 0.0
    sb = _SegmentBuilder()
    sb.add(v, rr, w)
    return float(sb.norms()[0])


def divergence_ladder(K: Kernel, Q: Interval, x: float, z: float, r: VariableExponent, variant: int = 1, m: int = 1,
                      levels: Sequence[int] = REFINEMENT_LADDER, factor: float = 2.0, band_cells: int = 4) -> dict:
    """Inner annulus norms as the graded floor goes through ``2^-L`` for ``L`` in ``levels``.

    Divergence is witnessed when every rung grows the norm by at least ``factor``.
    """
    norms = [annulus_norm(K, Q, x, z, r, variant, m, Quadrature(floor=2.0 ** -L, band_cells=band_cells)) for L in levels]
    ratios = [b / a if a > 0 else math.inf for a, b in zip(norms, norms[1:])]
    return {
        "Q": Q.as_list(), "x": x, "z": z, "m": m, "variant": variant,
        "levels": list(levels), "norms": norms, "ratios": ratios,
        "factor": factor, "diverging": bool(ratios) and all(t >= factor for t in ratios),
    }


# -- size condition -------------------------------------------------------------------
@dataclass
class SizeReport:
    kernel: str
    variant: int
    family: str
    sup: float
    per_cube: np.ndarray
    lengths: np.ndarray
    scale_sups: list[tuple[float, float]]
    slope: float
    verdict: str
    refined_sup: float | None = None

    def as_dict(self) -> dict:
        return {
            "kernel": self.kernel, "variant": self.variant, "family": self.family, "sup": self.sup,
            "scale_sups": self.scale_sups, "slope": self.slope, "verdict": self.verdict,
            "refined_sup": self.refined_sup,
        }


def size_quantities(K: Kernel, beta: VariableExponent, r: VariableExponent, variant: int, cubes: CubeFamily,
                    samples: int = 5, q: Quadrature = Quadrature()) -> np.ndarray:
    """Per cube: ``sup_x ||K(x,.) chi_{2Q minus Q}||_r / ||chi_Q||_r * |Q| / ||chi_Q||_beta``."""
    sb = _SegmentBuilder()
    owner = []
    for i, Q in enumerate(cubes):
        for x in half_cube_points(Q, samples):
            s = K.slice(float(x), variant)
            sup = s.global_support()
            if sup is None:
                continue
            pieces = _annulus_pieces(Q, 1, sup)
            if not pieces:
                continue
            v, rr, w = combo_elements([(1.0, s)], pieces, r, q)
            if v.size and np.any(v != 0):
                sb.add(v, rr, w)
                owner.append(i)
    out = np.zeros(len(cubes))
    if owner:
        inner = sb.norms(fast_constant=True)
        np.maximum.at(out, np.array(owner), inner)
        nr = indicator_norms(r, cubes.a, cubes.b)
        nb = indicator_norms(beta, cubes.a, cubes.b)
        out = out / nr * cubes.lengths / nb
    return out


def size_condition_probe(K: Kernel, beta: VariableExponent, r: VariableExponent, variant: int,
                         cube_family: FamilySpec | CubeFamily, samples: int = 5, *, q: Quadrature = Quadrature(),
                         stab_tol: float = 0.1) -> SizeReport:
    fam = cube_family.build() if isinstance(cube_family, FamilySpec) else cube_family
    vals = size_quantities(K, beta, r, variant, fam, samples, q)
    lengths = fam.lengths
    keys = np.round(np.log2(lengths) * 8) / 8
    scale_sups = []
    for s in np.unique(keys):
        m = float(vals[keys == s].max())
        if m > 0:
            scale_sups.append((float(2.0 ** s), m))
    slope = math.nan
    if len(scale_sups) >= 2:
        slope = float(np.polyfit(np.log([a for a, _ in scale_sups]), np.log([b for _, b in scale_sups]), 1)[0])
    sup = float(vals.max(initial=0.0))
    rep = SizeReport(K.name, variant, fam.description, sup, vals, lengths, scale_sups, slope, "inconclusive")
    if isinstance(cube_family, FamilySpec):
        rv = size_quantities(K, beta, r, variant, cube_family.refined().build(), samples, q)
        rep.refined_sup = float(rv.max(initial=0.0))
        ok = rep.refined_sup <= (1 + stab_tol) * sup or sup == rep.refined_sup == 0
        rep.verdict = "bounded" if (math.isfinite(sup) and ok) else "growing"
    else:
        rep.verdict = "bounded" if math.isfinite(sup) else "diverging"
    return rep


# -- weighted BMO -------------------------------------------------------------------------
def bmo_seminorm(f: GridFunction, omega, cubes: CubeFamily) -> float:
    """``sup_x w(x) M#f(x)`` over the cell midpoints of ``f``'s grid."""
    prof = sharp_profile(f, cubes)
    wv = omega.f(prof.x) if hasattr(omega, "f") else np.asarray(omega(prof.x))
    return float(np.max(wv * prof.values, initial=0.0))


def beta_summability(beta: VariableExponent, Q: Interval, M: int) -> float:
    """``sum_{m=0}^{M} ||chi_{2^-m Q}||_beta / ||chi_Q||_beta``."""
    sub = [Q.dilate(2.0 ** -m) for m in range(M + 1)]
    n = indicator_norms(beta, np.array([s.a for s in sub]), np.array([s.b for s in sub]), cells=128)
    return float(n.sum() / n[0])


# -- K2 refinement anchor -------------------------------------------------------------
def k2_grid(floor_exp: int, band_cells: int = 8) -> Grid:
    """Breakpoints on ``[2^-floor_exp, 1]``, ``band_cells`` uniform cells per dyadic band."""
    t = np.linspace(0.0, 1.0, band_cells + 1)[:-1]
    lo = 2.0 ** -np.arange(floor_exp, 0, -1)
    pts = np.concatenate([(lo[:, None] * (1.0 + t)).ravel(), [1.0]])
    return Grid.from_points(pts)


def k2_ladder(s: float, beta_param: float = 1.0, levels: Sequence[int] = REFINEMENT_LADDER,
              band_cells: int = 8) -> dict:
    """Truncated ``int K2^2`` and the ``s``-modular of ``K2`` (at ``lambda = 1``) per refinement floor."""
    from .exponent import constant
    from .luxemburg import modular

    sq, mods = [], []
    for L in levels:
        g = GridFunction.sample(k2_grid(L, band_cells), lambda t: kernel_K2(t, beta_param))
        sq.append(float(np.dot(g.values ** 2, g.grid.widths)))
        mods.append(modular(g, constant(s), 1.0))
    return {
        "levels": list(levels), "square_integrals": sq, "modulars": mods,
        "exact_square_integrals": [K2_square_integral_exact(2.0 ** -L, beta_param) for L in levels],
        "growth": [b / a for a, b in zip(mods, mods[1:])],
    }
