"""Exact solver for ``u^Dt(x, t) + k * nabla_x u(x, t) = 0`` on ``mu_x Z x T``.

The lattice equation reads ``u^Dt(m) = -kappa (u(m) - u(m-1))`` with
``kappa = k / mu_x``.  It is solved component by component:

* across a gap of length ``mu`` the delta derivative is a forward difference,
  giving the two-point update :func:`step_scattered`;
* along an interval it is a linear ODE chain whose solution is the
  convolution of the state with a Poisson kernel, :func:`propagate_interval`.

No time stepping error is introduced; the only approximation is the spatial
truncation of the Poisson kernel, whose discarded mass is tracked.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
from scipy.special import gammainc, gammaln

from .distributions import DENSITY, MASS, MIXED, DistributionTable
from .errors import (
    CFLViolation,
    HorizonEmpty,
    IndexOutOfWindow,
    NegativeDataError,
    TimeNotOnGrid,
)
from .timescale import Grid, TimeScale, check_regressivity, make_grid

DEFAULT_TAIL_TOL = 1e-12


@dataclass(frozen=True)
class Lattice:
    """Finitely supported lattice function: ``values[j]`` sits at index ``lo + j``.

    ``tail_mass`` bounds the (unweighted) sum of values dropped by truncation
    on the way to this state.
    """

    lo: int
    values: np.ndarray
    tail_mass: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))

    @classmethod
    def from_dict(cls, d: Mapping[int, float]) -> "Lattice":
        lo, hi = min(d), max(d)
        vals = np.zeros(hi - lo + 1)
        for m, v in d.items():
            vals[m - lo] = v
        return cls(lo, vals)

    def to_dict(self) -> dict[int, float]:
        return {self.lo + j: float(v) for j, v in enumerate(self.values)}

    @property
    def hi(self) -> int:
        return self.lo + len(self.values) - 1

    def __getitem__(self, m: int) -> float:
        j = m - self.lo
        if 0 <= j < len(self.values):
            return float(self.values[j])
        return 0.0

    def total(self) -> float:
        return math.fsum(self.values.tolist())


def step_scattered(state: Lattice, k: float, mu_x: float, mu_t: float, strict: bool = True) -> Lattice:
    """Advance across a gap: ``new[m] = (1-c) old[m] + c old[m-1]``, ``c = k mu_t / mu_x``."""
    c = k * mu_t / mu_x
    if strict and not 1.0 - c > 0.0:
        raise CFLViolation(f"positivity (CFL) condition fails for step mu_t={mu_t}: 1 - k*mu_t/mu_x = {1.0 - c}")
    old = state.values
    new = np.zeros(len(old) + 1)
    new[:-1] = (1.0 - c) * old
    new[1:] += c * old
    return Lattice(state.lo, new, state.tail_mass)


def poisson_kernel(lam: float, tol: float, length: int | None = None) -> tuple[np.ndarray, float]:
    """Poisson weights ``e^-lam lam^j / j!`` and a bound on the discarded tail.

    Without ``length`` the kernel is extended until the geometric tail bound
    ``term_{J+1} / (1 - lam/(J+2))`` drops to ``tol``.
    """
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    if lam == 0.0:
        n = 1 if length is None else length
        ker = np.zeros(n)
        ker[0] = 1.0
        return ker, 0.0
    log_lam = math.log(lam)
    use_log = lam >= 500.0

    def term(j, prev):
        if use_log:
            return math.exp(-lam + j * log_lam - math.lgamma(j + 1))
        return math.exp(-lam) if j == 0 else prev * lam / j

    terms = []
    t = 0.0
    j = 0
    while True:
        t = term(j, t)
        terms.append(t)
        nxt = term(j + 1, t)
        ratio = lam / (j + 2)
        if length is not None:
            if j + 1 >= length:
                bound = nxt / (1.0 - ratio) if ratio < 1.0 else 1.0
                break
        elif ratio < 1.0 and nxt / (1.0 - ratio) <= tol:
            bound = nxt / (1.0 - ratio)
            break
        j += 1
    return np.array(terms), min(bound, 1.0)


def propagate_interval(
    state: Lattice,
    k: float,
    mu_x: float,
    dt: float,
    tail_tol: float = DEFAULT_TAIL_TOL,
    length: int | None = None,
) -> Lattice:
    """Advance along a continuous stretch of length ``dt`` by Poisson convolution."""
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    ker, tail = poisson_kernel(k / mu_x * dt, tail_tol, length)
    new = np.convolve(state.values, ker)
    dropped = tail * float(np.abs(state.values).sum())
    return Lattice(state.lo, new, state.tail_mass + dropped)


# -- problems ----------------------------------------------------------------

@dataclass(frozen=True)
class TransportProblem:
    """Transport problem on ``mu_x Z x scale``.

    ``initial`` is either ``None`` (point mass ``A`` at ``m = 0``) or a mapping
    ``m -> C_m`` of finitely many initial values.
    """

    k: float
    mu_x: float
    scale: TimeScale
    A: float = 1.0
    initial: Mapping[int, float] | None = None
    tail_tol: float = DEFAULT_TAIL_TOL

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError(f"k must be positive, got {self.k}")
        if not self.mu_x > 0:
            raise ValueError(f"mu_x must be positive, got {self.mu_x}")
        if self.initial is None and not self.A > 0:
            raise ValueError(f"A must be positive, got {self.A}")
        if self.initial is not None:
            init = {int(m): float(c) for m, c in dict(self.initial).items()}
            if not init:
                raise ValueError("general initial condition needs at least one value")
            object.__setattr__(self, "initial", init)
        if not self.tail_tol > 0:
            raise ValueError("tail_tol must be positive")

    @property
    def kappa(self) -> float:
        return self.k / self.mu_x

    @property
    def is_point_mass(self) -> bool:
        return self.initial is None

    def initial_lattice(self) -> Lattice:
        if self.initial is None:
            return Lattice(0, np.array([self.A]))
        return Lattice.from_dict(self.initial)

    def initial_values(self) -> dict[int, float]:
        return {0: self.A} if self.initial is None else dict(self.initial)

    @property
    def initial_mass(self) -> float:
        """``mu_x * sum C_m`` (equals ``A mu_x`` for a point mass)."""
        return self.mu_x * math.fsum(self.initial_values().values())

    @property
    def has_negative_data(self) -> bool:
        return any(v < 0 for v in self.initial_values().values())

    def regressivity(self):
        return check_regressivity(self.scale, self.k, self.mu_x)


@dataclass(frozen=True)
class Segment:
    """A continuous stretch ``[start, end]`` and the state at its left end."""

    start: float
    end: float
    state: Lattice


@dataclass(frozen=True)
class SolutionField:
    problem: TransportProblem
    grid: Grid
    states: tuple[Lattice, ...]
    segments: tuple[Segment, ...]
    tail_mass: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(
            self, "tail_mass", np.array([self.problem.mu_x * s.tail_mass for s in self.states])
        )

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    def window(self, g: int) -> tuple[int, int]:
        s = self.states[g]
        return s.lo, s.hi

    @property
    def m_range(self) -> tuple[int, int]:
        return min(s.lo for s in self.states), max(s.hi for s in self.states)

    def grid_index(self, t: float) -> int:
        g = self.grid.index_of(t)
        if g is None:
            raise TimeNotOnGrid(f"t={t!r} is not an output time")
        return g

    def at(self, t: float) -> Lattice:
        return self.states[self.grid_index(t)]

    def _segment_for(self, t: float) -> Segment | None:
        for seg in self.segments:
            if seg.start - 1e-12 <= t <= seg.end + 1e-12:
                return seg
        return None

    def value(self, m: int, t: float) -> float:
        """``u(m*mu_x, t)``; exact at any ``m`` for times on a continuous stretch."""
        seg = self._segment_for(t)
        if seg is not None:
            return _poisson_eval(seg.state, m, self.problem.kappa * max(0.0, t - seg.start))
        return self.at(t)[m]

    def matrix(self) -> tuple[np.ndarray, np.ndarray]:
        """Dense ``(m indices, u[m, g])`` array over the union of windows."""
        lo, hi = self.m_range
        out = np.zeros((hi - lo + 1, len(self.states)))
        for g, s in enumerate(self.states):
            out[s.lo - lo: s.hi - lo + 1, g] = s.values
        return np.arange(lo, hi + 1), out

    def time_integral(self, m: int, t_to: float | None = None) -> float:
        """Exact delta integral of ``u(m, .)`` over ``[0, t_to)``."""
        ts = self.problem.scale
        t_to = ts.t_max if t_to is None else ts.locate(t_to)[1]
        kappa = self.problem.kappa
        terms = []
        for seg in self.segments:
            if seg.start >= t_to:
                break
            lam = kappa * (min(seg.end, t_to) - seg.start)
            j = m - np.arange(seg.state.lo, seg.state.hi + 1)
            ok = j >= 0
            if np.any(ok):
                terms.extend((seg.state.values[ok] * gammainc(j[ok] + 1, lam) / kappa).tolist())
        for s, mu in ts.scattered_points():
            if s < t_to:
                terms.append(mu * self.at(s)[m])
        return math.fsum(terms)


def _poisson_eval(state: Lattice, m: int, lam: float) -> float:
    j = m - np.arange(state.lo, state.hi + 1)
    ok = j >= 0
    if not np.any(ok):
        return 0.0
    if lam == 0.0:
        return state[m]
    jj = j[ok].astype(float)
    w = np.exp(-lam + jj * math.log(lam) - gammaln(jj + 1))
    return math.fsum((state.values[ok] * w).tolist())


def solve(
    problem: TransportProblem,
    grid: Grid | None = None,
    strict: bool = True,
) -> SolutionField:
    """Sweep the time scale left to right and record the state at every grid time.

    With ``strict=False`` a failing positivity condition only warns; the
    resulting field is still the exact solution but carries no sign or
    probability guarantees.
    """
    ts = problem.scale
    if grid is None:
        grid = make_grid(ts)
    if len(grid) == 0:
        raise HorizonEmpty("output grid is empty")
    report = problem.regressivity()
    if not report.ok:
        if strict:
            raise CFLViolation(report.describe())
        warnings.warn(report.describe(), stacklevel=2)
    if problem.has_negative_data:
        warnings.warn(
            "negative initial data: sign and conservation guarantees do not apply",
            stacklevel=2,
        )

    k, mu_x = problem.k, problem.mu_x
    n_int = max(1, len(ts.intervals()))
    per_interval_tol = problem.tail_tol / n_int
    by_component: dict[int, list[int]] = {}
    for g, p in enumerate(grid):
        by_component.setdefault(p.component, []).append(g)

    states: list[Lattice | None] = [None] * len(grid)
    segments: list[Segment] = []
    state = problem.initial_lattice()
    last = len(ts.components) - 1
    for i, comp in enumerate(ts.components):
        if comp.is_point:
            for g in by_component.get(i, ()):
                states[g] = state
        else:
            start = state
            ker_len = len(poisson_kernel(problem.kappa * comp.length, per_interval_tol)[0])
            for g in by_component.get(i, ()):
                dt = grid[g].t - comp.start
                if dt == 0.0:
                    states[g] = start
                else:
                    states[g] = propagate_interval(start, k, mu_x, dt, length=ker_len)
            state = propagate_interval(start, k, mu_x, comp.length, length=ker_len)
            segments.append(Segment(comp.start, comp.end, start))
        if i < last:
            gap = ts.components[i + 1].start - comp.end
            state = step_scattered(state, k, mu_x, gap, strict=False)
    if any(s is None for s in states):
        raise HorizonEmpty("grid does not belong to the problem's time scale")
    return SolutionField(problem, grid, tuple(states), tuple(segments))


# -- sections -------------------------------------------------------------------

def _require_nonnegative(field_: SolutionField) -> None:
    if field_.problem.has_negative_data:
        raise NegativeDataError("sections of fields with negative initial data are not distributions")


def time_section(field_: SolutionField, m: int) -> DistributionTable:
    """``u(m, .)`` over the grid with delta-measure weights.

    Atoms (right-scattered grid points) carry ``mu(t) u``; interval samples
    carry trapezoid weights.  ``total`` is the exact delta integral over
    ``[0, t_max)``.
    """
    _require_nonnegative(field_)
    lo, hi = field_.m_range
    if not lo <= m <= hi:
        raise IndexOutOfWindow(f"m={m} outside stored window [{lo}, {hi}]")
    grid = field_.grid
    ts = field_.problem.scale
    measure = np.zeros(len(grid))
    for g, p in enumerate(grid):
        comp = ts.components[p.component]
        if not comp.is_point:
            prev_t = grid[g - 1].t if g > 0 and grid[g - 1].component == p.component else p.t
            next_t = grid[g + 1].t if g + 1 < len(grid) and grid[g + 1].component == p.component else p.t
            measure[g] += 0.5 * (next_t - prev_t)
        measure[g] += p.mu
    values = np.array([field_.value(m, p.t) for p in grid])
    has_int = bool(ts.intervals())
    has_gap = bool(ts.scattered_points())
    kind = MIXED if has_int and has_gap else (DENSITY if has_int else MASS)
    keep = measure > 0 if kind == MASS else np.ones(len(grid), dtype=bool)
    total = field_.time_integral(m)
    # residual mass beyond the horizon, see conservation.check_time_conservation
    residual = field_.problem.mu_x / field_.problem.k * math.fsum(
        field_.states[-1][j] for j in range(field_.states[-1].lo, m + 1)
    )
    p = field_.problem
    return DistributionTable(
        grid.times[keep],
        (values * measure)[keep],
        kind,
        total,
        max(0.0, residual),
        {"section": "time", "m": m, "k": p.k, "A": p.A, "mu_x": p.mu_x},
    )


def space_section(field_: SolutionField, t: float) -> DistributionTable:
    """``u(., t)`` with weight ``mu_x`` per lattice point."""
    _require_nonnegative(field_)
    g = field_.grid_index(t)
    s = field_.states[g]
    p = field_.problem
    m = np.arange(s.lo, s.hi + 1)
    return DistributionTable(
        m * p.mu_x,
        p.mu_x * s.values,
        MASS,
        p.mu_x * s.total(),
        float(field_.tail_mass[g]),
        {"section": "space", "t": field_.grid[g].t, "k": p.k, "A": p.A, "mu_x": p.mu_x},
    )


def shifted(field_: SolutionField, shift: int, scale: float = 1.0) -> list[Lattice]:
    """States of ``field_`` moved ``shift`` lattice sites up and scaled."""
    return [Lattice(s.lo + shift, scale * s.values, abs(scale) * s.tail_mass) for s in field_.states]


def solve_scenario(
    problem: TransportProblem,
    h_out: float | None = None,
    extra_times: Iterable[float] = (),
    strict: bool = True,
) -> SolutionField:
    return solve(problem, make_grid(problem.scale, h_out, extra_times), strict=strict)
