"""Variable exponents stored through their reciprocals.

An exponent ``p`` is represented by ``x -> 1/p(x)``. The value ``p = inf`` is
the reciprocal ``0``, which makes conventions such as ``1/inf = 0`` exact and
keeps all algebra (conjugation, Holder triples, fractional gaps) linear.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import ParseError, QuadratureError, RangeError

RecipFn = Callable[[np.ndarray], np.ndarray]

_TOL = 1e-12
# points used to catch invalid exponent algebra eagerly
_PROBE = np.concatenate([np.linspace(-64.0, 64.0, 4097), np.geomspace(64.0, 1e9, 64), -np.geomspace(64.0, 1e9, 64)])


def _to_recip(p: float) -> float:
    if p == math.inf:
        return 0.0
    if p <= 0:
        raise RangeError(f"exponent must be positive, got {p}")
    return 1.0 / p


def _from_recip(r: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.where(r > 0, 1.0 / np.where(r > 0, r, 1.0), np.inf)


@dataclass(frozen=True)
class VariableExponent:
    """A measurable exponent ``p(.)`` on the real line.

    ``recip_fn`` maps an array of points to ``1/p`` at those points. In
    standard mode every value must lie in ``[0, 1]`` (``p >= 1``); extended
    mode accepts any positive exponent.
    """

    recip_fn: RecipFn
    p_infinity: float
    extended: bool = False
    label: str = "p"
    breakpoints: tuple[float, ...] = ()
    constant_recip: float | None = None
    c0: float | None = None
    c_infinity: float | None = None
    domain: tuple[float, float] | None = None

    # -- evaluation ---------------------------------------------------
    def recip(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.constant_recip is not None:
            r = np.full(x.shape, self.constant_recip)
        else:
            r = np.asarray(self.recip_fn(x), dtype=float)
            if r.shape != x.shape:
                r = np.broadcast_to(r, x.shape).copy()
        if not np.all(np.isfinite(r)) or np.any(r < -_TOL):
            raise RangeError(f"{self.label}: reciprocal exponent is not a finite nonnegative number")
        if not self.extended and np.any(r > 1.0 + _TOL):
            bad = x[r > 1.0 + _TOL].ravel()[0] if x.ndim else float(x)
            raise RangeError(f"{self.label}: exponent drops below 1 at x={bad!r}")
        return np.clip(r, 0.0, None)

    def __call__(self, x) -> np.ndarray:
        return _from_recip(self.recip(x))

    evaluate = __call__

    @property
    def recip_infinity(self) -> float:
        return _to_recip(self.p_infinity)

    @property
    def is_constant(self) -> bool:
        return self.constant_recip is not None

    def essential_bounds(self, a: float, b: float, samples: int = 4097) -> tuple[float, float]:
        """Sampled ``(p_minus, p_plus)`` over ``[a, b]`` (breakpoints included)."""
        x = np.linspace(a, b, samples)
        inner = [t for t in self.breakpoints if a <= t <= b]
        if inner:
            x = np.concatenate([x, inner, np.nextafter(inner, -np.inf), np.nextafter(inner, np.inf)])
        r = self.recip(x)
        return float(_from_recip(np.array(r.max()))), float(_from_recip(np.array(r.min())))

    def global_bounds(self) -> tuple[float, float]:
        r = self.recip(np.concatenate([_PROBE, np.asarray(self.breakpoints, dtype=float)]))
        r = np.append(r, self.recip_infinity)
        return float(_from_recip(np.array(r.max()))), float(_from_recip(np.array(r.min())))

    # -- derived exponents --------------------------------------------
    def scaled(self, factor: float, *, extended: bool | None = None) -> "VariableExponent":
        """The exponent ``factor * p(.)``."""
        if factor <= 0:
            raise RangeError("scale factor must be positive")
        ext = (self.extended or factor < 1) if extended is None else extended
        fn = self.recip_fn
        out = VariableExponent(
            recip_fn=lambda x: np.asarray(fn(x), dtype=float) / factor,
            p_infinity=self.p_infinity * factor,
            extended=ext,
            label=f"{factor:g}*{self.label}",
            breakpoints=self.breakpoints,
            constant_recip=None if self.constant_recip is None else self.constant_recip / factor,
            domain=self.domain,
        )
        return _eager_check(out)

    def with_constants(self, c0: float, c_infinity: float) -> "VariableExponent":
        return replace(self, c0=c0, c_infinity=c_infinity)

    def relabel(self, label: str) -> "VariableExponent":
        return replace(self, label=label)


def _merge_domains(*ps: VariableExponent) -> tuple[float, float] | None:
    doms = [p.domain for p in ps if p.domain is not None]
    if not doms:
        return None
    return max(d[0] for d in doms), min(d[1] for d in doms)


def _eager_check(p: VariableExponent) -> VariableExponent:
    pts = np.concatenate([_PROBE, np.asarray(p.breakpoints, dtype=float)])
    if p.domain is not None:
        lo, hi = p.domain
        pts = np.concatenate([pts[(pts >= lo) & (pts <= hi)], np.linspace(lo, hi, 257)])
    p.recip(pts)
    if p.domain is None and not p.extended and p.recip_infinity > 1 + _TOL:
        raise RangeError(f"{p.label}: limit exponent below 1")
    return p


# -- constructors ------------------------------------------------------
def constant(value: float, *, extended: bool = False, label: str | None = None) -> VariableExponent:
    r = _to_recip(value)
    out = VariableExponent(
        recip_fn=lambda x: np.full(np.shape(x), r),
        p_infinity=value,
        extended=extended,
        label=label or f"{value:g}",
        constant_recip=r,
    )
    return _eager_check(out)


def from_function(fn: Callable[[np.ndarray], np.ndarray], p_infinity: float, *, extended: bool = False,
                  label: str = "p", breakpoints: Iterable[float] = (),
                  domain: tuple[float, float] | None = None) -> VariableExponent:
    """Wrap a vectorised ``x -> p(x)`` (``np.inf`` allowed).

    ``domain`` limits where the exponent is promised to be valid; without it
    the exponent must be valid on the whole line.
    """

    def recip_fn(x):
        with np.errstate(divide="ignore"):
            return 1.0 / np.asarray(fn(x), dtype=float)

    return from_recip(recip_fn, p_infinity, extended=extended, label=label, breakpoints=breakpoints, domain=domain)


def from_recip(fn: RecipFn, p_infinity: float, *, extended: bool = False, label: str = "p",
               breakpoints: Iterable[float] = (), domain: tuple[float, float] | None = None) -> VariableExponent:
    """Wrap a vectorised ``x -> 1/p(x)``."""
    return _eager_check(VariableExponent(fn, p_infinity, extended, label, tuple(sorted(breakpoints)), domain=domain))


def pieces(segments: Sequence[tuple], default: float, *, extended: bool = False, label: str = "p") -> VariableExponent:
    """Piecewise exponent.

    Each segment is ``(a, b, value)`` for a constant piece on ``[a, b]`` or
    ``(a, b, p_a, p_b)`` for a piece interpolating linearly in ``p`` (linearly
    in ``1/p`` when an endpoint is infinite). Earlier segments take priority;
    ``default`` applies elsewhere and is the limit ``p_infinity``.
    """
    parsed = []
    for seg in segments:
        if len(seg) == 3:
            a, b, v = seg
            parsed.append((float(a), float(b), float(v), float(v)))
        elif len(seg) == 4:
            parsed.append(tuple(float(t) for t in seg))
        else:
            raise ParseError(f"bad exponent segment {seg!r}")
    for a, b, *_ in parsed:
        if not a < b:
            raise ParseError(f"segment endpoints must satisfy a < b, got {a}, {b}")
    r_default = _to_recip(default)

    def recip_fn(x):
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape, r_default)
        done = np.zeros(x.shape, dtype=bool)
        for a, b, pa, pb in parsed:
            m = (x >= a) & (x <= b) & ~done
            if not m.any():
                continue
            s = (x[m] - a) / (b - a)
            if math.isinf(pa) or math.isinf(pb):
                out[m] = (1 - s) * _to_recip(pa) + s * _to_recip(pb)
            else:
                out[m] = 1.0 / ((1 - s) * pa + s * pb)
            done |= m
        return out

    bps = sorted({t for a, b, *_ in parsed for t in (a, b)})
    return _eager_check(VariableExponent(recip_fn, default, extended, label, tuple(bps)))


def bump(base: float, peak: float, center: float = 0.0, width: float = 1.0, *, label: str = "bump") -> VariableExponent:
    """Lipschitz tent ``base + (peak - base) * max(0, 1 - |x - c| / w)``."""

    def fn(x):
        return base + (peak - base) * np.maximum(0.0, 1.0 - np.abs(np.asarray(x) - center) / width)

    return from_function(fn, base, label=label, breakpoints=(center - width, center, center + width))


def jump(low: float, high: float, a: float = 0.0, b: float = 1.0, *, label: str = "jump") -> VariableExponent:
    """``low`` off ``[a, b]`` and ``high`` on it; not log-Holder continuous."""
    return pieces([(a, b, high)], low, label=label)


# -- algebra -----------------------------------------------------------
def conjugate(p: VariableExponent) -> VariableExponent:
    """Pointwise ``p'`` with ``1/p + 1/p' = 1``."""
    if p.extended:
        raise RangeError("conjugate exponents are defined only for p >= 1")
    fn = p.recip_fn
    return VariableExponent(
        recip_fn=lambda x: 1.0 - np.asarray(fn(x), dtype=float),
        p_infinity=float(_from_recip(np.array(1.0 - p.recip_infinity))),
        extended=False,
        label=f"{p.label}'",
        breakpoints=p.breakpoints,
        constant_recip=None if p.constant_recip is None else 1.0 - p.constant_recip,
        domain=p.domain,
    )


def combine(p: VariableExponent, q: VariableExponent, *, extended: bool = False) -> VariableExponent:
    """``r`` with ``1/r = 1/p + 1/q``; rejected if ``r < 1`` unless extended."""
    fp, fq = p.recip, q.recip
    const = None
    if p.constant_recip is not None and q.constant_recip is not None:
        const = p.constant_recip + q.constant_recip
    out = VariableExponent(
        recip_fn=lambda x: fp(x) + fq(x),
        p_infinity=float(_from_recip(np.array(p.recip_infinity + q.recip_infinity))),
        extended=extended,
        label=f"({p.label}|{q.label})",
        breakpoints=tuple(sorted(set(p.breakpoints) | set(q.breakpoints))),
        constant_recip=const,
        domain=_merge_domains(p, q),
    )
    return _eager_check(out)


def _difference(p: VariableExponent, q: VariableExponent, label: str) -> VariableExponent:
    fp, fq = p.recip, q.recip

    def recip_fn(x):
        d = fp(x) - fq(x)
        if np.any(d < -_TOL):
            raise RangeError(f"{label}: requires {p.label} <= {q.label} pointwise")
        return np.clip(d, 0.0, None)

    const = None
    if p.constant_recip is not None and q.constant_recip is not None:
        const = p.constant_recip - q.constant_recip
        if const < -_TOL:
            raise RangeError(f"{label}: requires {p.label} <= {q.label} pointwise")
        const = max(const, 0.0)
    rinf = p.recip_infinity - q.recip_infinity
    if rinf < -_TOL:
        raise RangeError(f"{label}: requires {p.label} <= {q.label} at infinity")
    out = VariableExponent(
        recip_fn=recip_fn,
        p_infinity=float(_from_recip(np.array(max(rinf, 0.0)))),
        extended=p.extended or q.extended,
        label=label,
        breakpoints=tuple(sorted(set(p.breakpoints) | set(q.breakpoints))),
        constant_recip=const,
        domain=_merge_domains(p, q),
    )
    return _eager_check(out)


def beta_from_pair(p: VariableExponent, q: VariableExponent) -> VariableExponent:
    """``beta`` with ``1/beta = 1/p - 1/q``; infinite exactly where ``p = q``."""
    return _difference(p, q, f"beta({p.label},{q.label})")


def complement(r: VariableExponent, p: VariableExponent) -> VariableExponent:
    """The exponent ``q`` solving ``1/r = 1/p + 1/q`` (requires ``r <= p``)."""
    return _difference(r, p, f"q({r.label},{p.label})")


# -- harmonic mean -----------------------------------------------------
def harmonic_mean(p: VariableExponent, Q, cells: int = 1 << 14) -> float:
    """``p_Q`` with ``1/p_Q`` the mean of ``1/p`` over ``Q``.

    The mean is the exact integral of the piecewise-constant midpoint
    representative of ``1/p`` on a uniform grid refined at ``p``'s breakpoints.
    """
    from .grid import Grid

    a, b = float(Q.a), float(Q.b)
    if not (np.isfinite(a) and np.isfinite(b) and a < b):
        raise QuadratureError("harmonic mean needs a bounded interval of positive length")
    g = Grid.uniform_on(a, b, cells, extra=p.breakpoints)
    try:
        r = p.recip(g.midpoints)
    except RangeError as exc:
        raise QuadratureError(str(exc)) from exc
    mean = float(np.dot(r, g.widths) / (b - a))
    return math.inf if mean == 0 else 1.0 / mean


# -- log-Holder verification -------------------------------------------
@dataclass
class LogHolderReport:
    passed: bool
    c0: float
    c_infinity: float
    witness: tuple[float, float] | None
    samples: int
    cap: float
    note: str = "sampled evidence, not a proof"
    local_profile: list[tuple[float, float]] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "c0": self.c0,
            "c_infinity": self.c_infinity,
            "witness": self.witness,
            "samples": self.samples,
            "cap": self.cap,
            "note": self.note,
        }


def _chain_refine(p: VariableExponent, left: np.ndarray, right: np.ndarray, levels: int):
    """Bisect each interval ``levels`` times, keeping the half with the larger jump in ``1/p``.

    Returns arrays ``(delta, diff, lo, hi)`` of shape ``(levels, n)``.
    """
    lo, hi = left.copy(), right.copy()
    deltas, diffs, los, his = [], [], [], []
    for _ in range(levels):
        mid = 0.5 * (lo + hi)
        rl, rm, rh = p.recip(lo), p.recip(mid), p.recip(hi)
        take_left = np.abs(rm - rl) >= np.abs(rh - rm)
        hi = np.where(take_left, mid, hi)
        lo = np.where(take_left, lo, mid)
        deltas.append(hi - lo)
        diffs.append(np.abs(p.recip(hi) - p.recip(lo)))
        los.append(lo.copy())
        his.append(hi.copy())
    return np.array(deltas), np.array(diffs), np.array(los), np.array(his)


def verify_log_holder(p: VariableExponent, domain, samples: int = 257, *, cap: float = 100.0,
                      random_pairs: int = 20000, levels: int = 45, seed: int = 0) -> LogHolderReport:
    """Measure the smallest log-Holder constants consistent with sampled pairs.

    The local constant ``c0`` is the largest ``|1/p(x) - 1/p(y)| * (-log|x - y|)``
    over (a) all pairs of a uniform sample with ``|x - y| < 1/2``, (b) seeded
    random close pairs, and (c) a bisection ladder inside every sampled cell
    that follows the largest variation. The check fails when the ladder
    quantity keeps growing at the finest levels or exceeds ``cap``; the failing
    pair is returned as witness.
    """
    if samples < 2:
        raise ValueError("samples must be >= 2")
    a, b = float(domain.a), float(domain.b)
    rng = np.random.default_rng(seed)
    x = np.linspace(a, b, samples)
    r = p.recip(x)

    # (a) all sampled pairs closer than 1/2
    dx = np.abs(x[:, None] - x[None, :])
    close = (dx > 0) & (dx < 0.5)
    vals = np.abs(r[:, None] - r[None, :]) * np.where(close, -np.log(np.where(close, dx, 0.5)), 0.0)
    c0 = float(vals.max(initial=0.0))

    # (b) random close pairs
    if random_pairs:
        u = rng.uniform(a, b, random_pairs)
        d = np.exp(rng.uniform(math.log(1e-12), math.log(0.5), random_pairs))
        v = np.clip(u + d * rng.choice([-1.0, 1.0], random_pairs), a, b)
        dd = np.abs(u - v)
        ok = dd > 0
        if ok.any():
            c0 = max(c0, float(np.max(np.abs(p.recip(u[ok]) - p.recip(v[ok])) * -np.log(dd[ok]))))

    # (c) bisection ladders inside sampled cells
    witness = None
    passed = True
    profile: list[tuple[float, float]] = []
    if levels > 0:
        delta, diff, los, his = _chain_refine(p, x[:-1], x[1:], levels)
        g = diff * -np.log(delta)
        c0 = max(c0, float(g.max(initial=0.0)))
        fine = g[-1]
        ref_level = min(levels - 1, max(0, levels - 16))
        ref = g[ref_level]
        growing = (fine > 1.1 * ref) & (fine > 0)
        over = fine > cap
        bad = growing | over
        if bad.any():
            passed = False
            j = int(np.argmax(np.where(bad, fine, -np.inf)))
            witness = (float(los[-1, j]), float(his[-1, j]))
            profile = [(float(delta[k, j]), float(g[k, j])) for k in range(levels)]
    if c0 > cap:
        passed = False
        if witness is None:
            j = int(np.argmax(np.abs(np.diff(r))))
            witness = (float(x[j]), float(x[j + 1]))

    # decay constant: domain samples plus far geometric points
    far = np.geomspace(1.0, 1e12, 400)
    xs = np.concatenate([x, far, -far])
    cinf = float(np.max(np.abs(p.recip(xs) - p.recip_infinity) * np.log(math.e + np.abs(xs))))
    if cinf > cap:
        passed = False
    return LogHolderReport(passed, c0, cinf, witness, samples, cap, local_profile=profile)


# -- JSON --------------------------------------------------------------
def _num(v) -> float:
    if isinstance(v, str) and v.lower() in {"inf", "infinity"}:
        return math.inf
    try:
        return float(v)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"not a number: {v!r}") from exc


def from_spec(spec: Mapping | float | str) -> VariableExponent:
    """Build an exponent from its JSON description.

    Accepted forms: a bare number (or ``"inf"``); ``{"kind": "constant", "value": v}``;
    ``{"kind": "pieces", "pieces": [[a, b, v] | [a, b, pa, pb], ...], "default": v}``;
    ``{"kind": "bump", "base", "peak", "center", "width"}``;
    ``{"kind": "jump", "low", "high", "a", "b"}``.
    """
    if isinstance(spec, (int, float, str)):
        return constant(_num(spec))
    if not isinstance(spec, Mapping):
        raise ParseError(f"exponent spec must be a number or an object, got {type(spec).__name__}")
    kind = spec.get("kind", "constant")
    ext = bool(spec.get("extended", False))
    try:
        if kind == "constant":
            return constant(_num(spec["value"]), extended=ext)
        if kind == "pieces":
            segs = [tuple(_num(t) for t in seg) for seg in spec["pieces"]]
            return pieces(segs, _num(spec["default"]), extended=ext, label=spec.get("label", "p"))
        if kind == "bump":
            return bump(_num(spec["base"]), _num(spec["peak"]), _num(spec.get("center", 0.0)),
                        _num(spec.get("width", 1.0)))
        if kind == "jump":
            return jump(_num(spec["low"]), _num(spec["high"]), _num(spec.get("a", 0.0)), _num(spec.get("b", 1.0)))
    except KeyError as exc:
        raise ParseError(f"exponent spec of kind {kind!r} is missing field {exc.args[0]!r}") from exc
    raise ParseError(f"unknown exponent kind {kind!r}")
