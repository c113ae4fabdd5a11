"""Time scales made of finitely many closed intervals and isolated points.

A :class:`TimeScale` is an ordered union of components starting at 0.  Every
component end except the last one is right-scattered: its graininess is the
gap to the next component.  Points inside an interval (and its left end) are
right-dense.

Literal syntax accepted by :func:`parse_scale`::

    [[0, 0.5], [1, 1.5], 2, 2.5]      intervals and isolated points
    "uniform(0.25, 40)"               {0, 0.25, ..., 40*0.25}
    "stopstart(0.5, 0.5, 6)"          union of [i, i+0.5] for i < 6
    "harmonic(20)"                    {0, 1/2, 1/2+1/3, ...} with 20 gaps
"""

from __future__ import annotations

import bisect
import math
import re
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import (
    HorizonBoundary,
    QuadratureFailure,
    RegressivityViolation,
    TimeNotInScale,
)

SNAP_TOL = 1e-12
DEFAULT_QUAD_TOL = 1e-10
QUAD_BUDGET = 1_000_000
DEFAULT_SAMPLES_PER_INTERVAL = 64


@dataclass(frozen=True)
class Component:
    """A closed interval ``[start, end]``; a point when ``start == end``."""

    start: float
    end: float

    @property
    def is_point(self) -> bool:
        return self.end == self.start

    @property
    def length(self) -> float:
        return self.end - self.start

    def to_literal(self):
        return self.start if self.is_point else [self.start, self.end]


@dataclass(frozen=True)
class TimeScale:
    components: tuple[Component, ...]

    def __post_init__(self):
        comps = tuple(self.components)
        object.__setattr__(self, "components", comps)
        if not comps:
            raise ValueError("a time scale needs at least one component")
        if comps[0].start != 0.0:
            raise ValueError(f"time scale must start at 0, got {comps[0].start!r}")
        for c in comps:
            if not (math.isfinite(c.start) and math.isfinite(c.end)):
                raise ValueError("component endpoints must be finite")
            if c.end < c.start:
                raise ValueError(f"interval [{c.start}, {c.end}] has end < start")
        for prev, nxt in zip(comps, comps[1:]):
            if not nxt.start > prev.end:
                raise ValueError(
                    f"components must be separated by a positive gap: "
                    f"{prev.end} then {nxt.start}"
                )

    # -- construction -------------------------------------------------
    @classmethod
    def from_literal(cls, entries: Iterable) -> "TimeScale":
        comps = []
        for e in entries:
            if isinstance(e, (list, tuple)):
                if len(e) != 2:
                    raise ValueError(f"interval entry must have two endpoints, got {e!r}")
                a, b = float(e[0]), float(e[1])
                if not b > a:
                    raise ValueError(f"interval [{a}, {b}] must satisfy b > a")
                comps.append(Component(a, b))
            else:
                a = float(e)
                comps.append(Component(a, a))
        return cls(tuple(comps))

    @classmethod
    def interval(cls, t_max: float) -> "TimeScale":
        return cls((Component(0.0, float(t_max)),))

    @classmethod
    def uniform(cls, step: float, n: int) -> "TimeScale":
        step = float(step)
        return cls(tuple(Component(i * step, i * step) for i in range(int(n) + 1)))

    @classmethod
    def points(cls, times: Sequence[float]) -> "TimeScale":
        return cls(tuple(Component(float(t), float(t)) for t in times))

    @classmethod
    def from_gaps(cls, gaps: Sequence[float]) -> "TimeScale":
        """Discrete scale ``{0, g1, g1+g2, ...}`` with the given graininess."""
        times = [0.0]
        for g in gaps:
            times.append(times[-1] + float(g))
        return cls.points(times)

    @classmethod
    def stopstart(cls, on: float, off: float, n: int) -> "TimeScale":
        on, off = float(on), float(off)
        period = on + off
        return cls(tuple(Component(i * period, i * period + on) for i in range(int(n))))

    @classmethod
    def harmonic(cls, n: int) -> "TimeScale":
        times = [0.0]
        for i in range(1, int(n) + 1):
            times.append(math.fsum(1.0 / (j + 1) for j in range(1, i + 1)))
        return cls.points(times)

    def extend_periodic(self, periods: int) -> "TimeScale":
        """Repeat the last gap+component pattern ``periods`` more times."""
        if len(self.components) < 2:
            raise ValueError("periodic extension needs at least two components")
        prev, last = self.components[-2], self.components[-1]
        shift = last.start - prev.start
        comps = list(self.components)
        for j in range(1, int(periods) + 1):
            comps.append(Component(last.start + j * shift, last.end + j * shift))
        return TimeScale(tuple(comps))

    def with_horizon(self, t_max: float, periodic: bool = False) -> "TimeScale":
        """Restrict to ``[0, t_max]``, extending periodically first if asked."""
        scale = self
        if t_max > scale.t_max + SNAP_TOL:
            if not periodic:
                raise TimeNotInScale(
                    f"t_max={t_max} lies beyond the scale's last point {scale.t_max}; "
                    f"enable periodic extension or lengthen the scale"
                )
            prev, last = scale.components[-2:] if len(scale.components) > 1 else (None, None)
            if last is None:
                raise ValueError("periodic extension needs at least two components")
            shift = last.start - prev.start
            scale = scale.extend_periodic(math.ceil((t_max - scale.t_max) / shift) + 1)
        i, t_max = scale.locate(t_max)
        comps = list(scale.components[: i + 1])
        comps[-1] = Component(comps[-1].start, t_max)
        return TimeScale(tuple(comps))

    # -- basic queries --------------------------------------------------
    @property
    def t_max(self) -> float:
        return self.components[-1].end

    def to_literal(self) -> list:
        return [c.to_literal() for c in self.components]

    def locate(self, t: float) -> tuple[int, float]:
        """Return ``(component index, snapped t)`` or raise TimeNotInScale."""
        starts = [c.start for c in self.components]
        i = bisect.bisect_right(starts, t + SNAP_TOL) - 1
        if i >= 0:
            c = self.components[i]
            if abs(t - c.start) <= SNAP_TOL:
                return i, c.start
            if abs(t - c.end) <= SNAP_TOL:
                return i, c.end
            if c.start < t < c.end:
                return i, float(t)
        raise TimeNotInScale(f"t={t!r} is not in the time scale")

    def __contains__(self, t: float) -> bool:
        try:
            self.locate(t)
        except TimeNotInScale:
            return False
        return True

    def graininess(self, t: float) -> float:
        i, t = self.locate(t)
        c = self.components[i]
        if t < c.end:
            return 0.0
        if i == len(self.components) - 1:
            raise HorizonBoundary(f"graininess is undefined at the horizon t_max={c.end}")
        return self.components[i + 1].start - c.end

    def sigma(self, t: float) -> float:
        i, t = self.locate(t)
        mu = self.graininess(t)
        return self.components[i + 1].start if mu > 0 else t

    def scattered_points(self) -> list[tuple[float, float]]:
        """All right-scattered points below the horizon as ``(t, mu)`` pairs."""
        return [
            (c.end, nxt.start - c.end)
            for c, nxt in zip(self.components, self.components[1:])
        ]

    def intervals(self) -> list[Component]:
        return [c for c in self.components if not c.is_point]

    def max_graininess(self) -> float:
        return max((mu for _, mu in self.scattered_points()), default=0.0)

    # -- calculus -------------------------------------------------------
    def _pieces(self, t_from: float, t_to: float):
        """Yield ``("dense", a, b)`` and ``("scattered", s, mu)`` covering [t_from, t_to)."""
        i0, t_from = self.locate(t_from)
        i1, t_to = self.locate(t_to)
        if t_to < t_from:
            raise ValueError(f"t_to={t_to} precedes t_from={t_from}")
        last = len(self.components) - 1
        for i in range(i0, i1 + 1):
            c = self.components[i]
            a = max(c.start, t_from)
            b = min(c.end, t_to)
            if b > a:
                yield "dense", a, b
            if i < last and c.end < t_to and c.end >= t_from:
                yield "scattered", c.end, self.components[i + 1].start - c.end

    def dynamic_exp(self, p: float, t: float, t0: float = 0.0) -> float:
        """Dynamic exponential ``e_p(t; t0)`` for a constant rate ``p``."""
        dense_length = 0.0
        factors = []
        for kind, a, b in self._pieces(t0, t):
            if kind == "dense":
                dense_length += b - a
            else:
                f = 1.0 + p * b
                if f == 0.0:
                    raise RegressivityViolation(f"1 + p*mu vanishes at t={a}")
                factors.append(f)
        return math.exp(p * dense_length) * math.prod(factors)

    def delta_integral(
        self,
        f: Callable[[float], float],
        t_from: float,
        t_to: float,
        tol: float = DEFAULT_QUAD_TOL,
    ) -> float:
        """Delta integral of ``f`` over ``[t_from, t_to)`` on the scale."""
        pieces = list(self._pieces(t_from, t_to))
        n_dense = sum(1 for p in pieces if p[0] == "dense") or 1
        terms = []
        for kind, a, b in pieces:
            if kind == "dense":
                terms.append(adaptive_simpson(f, a, b, tol / n_dense))
            else:
                terms.append(b * f(a))
        return math.fsum(terms)


def graininess(ts: TimeScale, t: float) -> float:
    return ts.graininess(t)


def sigma(ts: TimeScale, t: float) -> float:
    return ts.sigma(t)


def dynamic_exp(ts: TimeScale, p: float, t: float, t0: float = 0.0) -> float:
    return ts.dynamic_exp(p, t, t0)


def delta_integral(ts: TimeScale, f, t_from: float, t_to: float, tol: float = DEFAULT_QUAD_TOL) -> float:
    return ts.delta_integral(f, t_from, t_to, tol)


@dataclass(frozen=True)
class RegressivityReport:
    ok: bool
    k: float
    mu_x: float
    failures: tuple[tuple[float, float], ...] = ()

    def describe(self) -> str:
        if self.ok:
            return f"positivity (CFL) condition holds: 1 - k*mu(t)/mu_x > 0 at every scattered point (k={self.k}, mu_x={self.mu_x})"
        worst = max(mu for _, mu in self.failures)
        return (
            f"positivity (CFL) condition 1 - k*mu(t)/mu_x > 0 violated at {len(self.failures)} scattered point(s), "
            f"first t={self.failures[0][0]!r}, max mu={worst!r}; "
            f"need mu(t) < mu_x/k = {self.mu_x / self.k!r}"
        )


def check_regressivity(ts: TimeScale, k: float, mu_x: float) -> RegressivityReport:
    """Check the positivity (CFL) condition at every right-scattered point."""
    if not (k > 0 and mu_x > 0):
        raise ValueError("k and mu_x must be positive")
    failures = tuple(
        (t, mu) for t, mu in ts.scattered_points() if not (1.0 - k * mu / mu_x > 0.0)
    )
    return RegressivityReport(ok=not failures, k=k, mu_x=mu_x, failures=failures)


def adaptive_simpson(
    f: Callable[[float], float],
    a: float,
    b: float,
    tol: float = DEFAULT_QUAD_TOL,
    budget: int = QUAD_BUDGET,
) -> float:
    """Adaptive Simpson quadrature with an evaluation budget.

    Raises:
        QuadratureFailure: if ``tol`` cannot be reached within ``budget``
            function evaluations.
    """
    if b == a:
        return 0.0
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    evals = 3
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    stack = [(a, b, fa, fm, fb, whole, tol, 0)]
    total = []
    while stack:
        lo, hi, flo, fmid, fhi, s, eps, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        fl, fr = f(0.5 * (lo + mid)), f(0.5 * (mid + hi))
        evals += 2
        if evals > budget:
            raise QuadratureFailure(
                f"adaptive Simpson exceeded {budget} evaluations on [{a}, {b}] at tol={tol}"
            )
        left = (mid - lo) / 6.0 * (flo + 4.0 * fl + fmid)
        right = (hi - mid) / 6.0 * (fmid + 4.0 * fr + fhi)
        delta = left + right - s
        # depth floor avoids accepting a lucky coarse estimate on peaked integrands
        if depth >= 4 and abs(delta) <= 15.0 * eps:
            total.append(left + right + delta / 15.0)
        elif hi - lo <= 4 * np.finfo(float).eps * max(1.0, abs(lo)):
            total.append(left + right)
        else:
            stack.append((lo, mid, flo, fl, fmid, left, eps / 2.0, depth + 1))
            stack.append((mid, hi, fmid, fr, fhi, right, eps / 2.0, depth + 1))
    return math.fsum(total)


# -- output grids -------------------------------------------------------

@dataclass(frozen=True)
class GridPoint:
    t: float
    mu: float
    component: int

    @property
    def kind(self) -> str:
        return "right-scattered" if self.mu > 0 else "right-dense"


@dataclass(frozen=True)
class Grid:
    points: tuple[GridPoint, ...]
    times: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        times = np.array([p.t for p in self.points], dtype=float)
        if np.any(np.diff(times) <= 0):
            raise ValueError("grid times must be strictly increasing")
        object.__setattr__(self, "times", times)

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def __getitem__(self, i: int) -> GridPoint:
        return self.points[i]

    def index_of(self, t: float) -> int | None:
        i = int(np.searchsorted(self.times, t - SNAP_TOL))
        if i < len(self.times) and abs(self.times[i] - t) <= SNAP_TOL:
            return i
        return None


def make_grid(
    ts: TimeScale,
    h_out: float | None = None,
    extra_times: Iterable[float] = (),
) -> Grid:
    """Output grid: every scattered point plus samples inside intervals.

    Without ``h_out`` each interval is split into 64 equal pieces.  Times in
    ``extra_times`` that lie in the scale are added as well.
    """
    extras: dict[int, list[float]] = {}
    for t in extra_times:
        i, t = ts.locate(float(t))
        extras.setdefault(i, []).append(t)
    last = len(ts.components) - 1
    pts: list[GridPoint] = []
    for i, c in enumerate(ts.components):
        if c.is_point:
            times = [c.start]
        else:
            n = DEFAULT_SAMPLES_PER_INTERVAL if h_out is None else max(1, math.ceil(c.length / h_out - 1e-9))
            times = [c.start + c.length * j / n for j in range(n)] + [c.end]
            times.extend(extras.get(i, ()))
            times = _dedupe(sorted(times))
        for t in times:
            scattered = t == c.end and i < last
            mu = ts.components[i + 1].start - c.end if scattered else 0.0
            pts.append(GridPoint(t, mu, i))
    return Grid(tuple(pts))


def _dedupe(times: list[float]) -> list[float]:
    out: list[float] = []
    for t in times:
        if out and abs(t - out[-1]) <= SNAP_TOL:
            continue
        out.append(t)
    return out


_CALL = re.compile(r"^\s*(uniform|stopstart|harmonic|interval)\s*\((.*)\)\s*$")


def parse_scale(spec) -> TimeScale:
    """Build a :class:`TimeScale` from a literal list or a shorthand string."""
    if isinstance(spec, TimeScale):
        return spec
    if isinstance(spec, str):
        m = _CALL.match(spec)
        if not m:
            raise ValueError(f"unrecognised time-scale shorthand {spec!r}")
        name, raw = m.group(1), m.group(2)
        try:
            args = [float(a) for a in raw.split(",") if a.strip()]
        except ValueError:
            raise ValueError(f"non-numeric argument in {spec!r}") from None
        arity = {"uniform": 2, "stopstart": 3, "harmonic": 1, "interval": 1}[name]
        if len(args) != arity:
            raise ValueError(f"{name}() takes {arity} argument(s), got {len(args)}")
        if name == "uniform":
            if args[0] <= 0 or args[1] < 0 or args[1] != int(args[1]):
                raise ValueError("uniform(step, n) needs step > 0 and integer n >= 0")
            return TimeScale.uniform(args[0], int(args[1]))
        if name == "stopstart":
            if args[0] <= 0 or args[1] <= 0 or args[2] < 1 or args[2] != int(args[2]):
                raise ValueError("stopstart(on, off, n) needs on, off > 0 and integer n >= 1")
            return TimeScale.stopstart(args[0], args[1], int(args[2]))
        if name == "harmonic":
            if args[0] < 0 or args[0] != int(args[0]):
                raise ValueError("harmonic(n) needs an integer n >= 0")
            return TimeScale.harmonic(int(args[0]))
        if args[0] <= 0:
            raise ValueError("interval(t_max) needs t_max > 0")
        return TimeScale.interval(args[0])
    if isinstance(spec, (list, tuple)):
        return TimeScale.from_literal(spec)
    raise ValueError(f"cannot interpret {spec!r} as a time scale")
