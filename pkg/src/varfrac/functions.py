"""Named test functions, dilation ladders and problem grids for the scenario harness."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import ParseError
from .grid import Grid, GridFunction, Interval


@dataclass(frozen=True)
class TestFunction:
    """A piecewise-smooth function with known breakpoints and compact support."""

    __test__ = False

    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    breakpoints: tuple[float, ...]
    support: Interval

    def __call__(self, x):
        return self.fn(np.asarray(x, dtype=float))

    def dilate(self, t: float) -> "TestFunction":
        """``x -> f(t x)``."""
        fn = self.fn
        return TestFunction(f"{self.name}@t={t:g}", lambda x: fn(t * x),
                            tuple(b / t for b in self.breakpoints), self.support.scaled(1.0 / t))

    def on(self, grid: Grid) -> GridFunction:
        return GridFunction.sample(grid, self.fn)


def indicator(a: float, b: float, height: float = 1.0) -> TestFunction:
    return TestFunction(f"chi[{a:g},{b:g}]", lambda x: np.where((x >= a) & (x <= b), height, 0.0), (a, b), Interval(a, b))


def tent(center: float, width: float) -> TestFunction:
    def fn(x):
        return np.maximum(0.0, 1.0 - np.abs(x - center) / width)

    return TestFunction(f"tent({center:g},{width:g})", fn, (center - width, center, center + width),
                        Interval(center - width, center + width))


def sign_steps(a: float, b: float, n: int) -> TestFunction:
    """``+1, -1, +1, ...`` on ``n`` equal pieces of ``[a, b]``."""
    edges = np.linspace(a, b, n + 1)

    def fn(x):
        k = np.floor((x - a) / (b - a) * n)
        inside = (x >= a) & (x < b)
        return np.where(inside, np.where(k % 2 == 0, 1.0, -1.0), 0.0)

    return TestFunction(f"steps[{a:g},{b:g}]x{n}", fn, tuple(edges), Interval(a, b))


def random_steps(seed: int, a: float, b: float, n: int) -> TestFunction:
    """Seeded random values in ``[-1, 1]`` on ``n`` equal pieces of ``[a, b]``."""
    vals = np.random.default_rng(seed).uniform(-1.0, 1.0, n)
    edges = np.linspace(a, b, n + 1)

    def fn(x):
        k = np.clip(np.floor((x - a) / (b - a) * n).astype(int), 0, n - 1)
        return np.where((x >= a) & (x < b), vals[k], 0.0)

    return TestFunction(f"random#{seed}[{a:g},{b:g}]x{n}", fn, tuple(edges), Interval(a, b))


def from_spec(spec: Mapping) -> TestFunction:
    try:
        kind = spec["name"]
        if kind == "indicator":
            return indicator(float(spec["a"]), float(spec["b"]), float(spec.get("height", 1.0)))
        if kind == "tent":
            return tent(float(spec["center"]), float(spec["width"]))
        if kind == "steps":
            return sign_steps(float(spec["a"]), float(spec["b"]), int(spec["n"]))
        if kind == "random":
            return random_steps(int(spec["seed"]), float(spec["a"]), float(spec["b"]), int(spec["n"]))
    except KeyError as e:
        raise ParseError(f"test function {spec!r} is missing field {e.args[0]!r}") from None
    raise ParseError(f"unknown test function {spec.get('name')!r}")


DEFAULT_SUITE = (
    {"name": "indicator", "a": 0, "b": 4},
    {"name": "indicator", "a": 2, "b": 3},
    {"name": "tent", "center": 2.5, "width": 2},
    {"name": "steps", "a": 0, "b": 4, "n": 8},
    {"name": "random", "seed": 1, "a": 0, "b": 4, "n": 16},
    {"name": "random", "seed": 2, "a": 1, "b": 5, "n": 8},
)

LADDER = tuple(2.0 ** k for k in range(-3, 4))


def problem_grid(window: Interval, breakpoints: Sequence[float] = (), singular: Sequence[float] = (), *,
                 uniform: int = 4096, per_octave: int = 8, floor: float = 2.0 ** -40,
                 refine: Sequence[tuple[float, float, int]] = ()) -> Grid:
    """Uniform cells on ``window`` plus geometric rings around each singular point
    (``per_octave`` per dyadic shell, from ``floor`` out to the window edge) and
    optional dense uniform patches ``(a, b, n)``."""
    parts = [np.linspace(window.a, window.b, uniform + 1), np.asarray(breakpoints, dtype=float)]
    reach = window.length
    for s in singular:
        k = np.arange(int(np.floor(np.log2(floor) * per_octave)), int(np.ceil(np.log2(reach) * per_octave)) + 1)
        g = 2.0 ** (k / per_octave)
        parts += [s - g, s + g, [s]]
    for a, b, n in refine:
        parts.append(np.linspace(a, b, int(n) + 1))
    pts = np.concatenate(parts)
    pts = pts[(pts >= window.a) & (pts <= window.b)]
    return Grid.from_points(pts, window)
