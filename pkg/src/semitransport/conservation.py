"""Verdicts for sign conservation, space/time mass conservation and the
probability-density conditions, evaluated on a computed field.

All checks run on a finite horizon.  Mass that has not yet passed a branch by
``t_max`` is accounted for explicitly: integrating the lattice equation over
``[0, T)`` gives the exact identity

    int_0^T u(m, t) Dt + (mu_x/k) * sum_{j<=m} u(j, T) = (mu_x/k) * sum_{j<=m} C_j,

so the second term (the *residual*) is what an infinite horizon would still add.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import HorizonTooShort
from .transport import SolutionField, TransportProblem

SIGN_FLOOR = -1e-14
DEFAULT_SPACE_TOL = 1e-10
DEFAULT_TIME_TOL = 1e-8
HORIZON_FRACTION = 0.1
DEFAULT_BRANCHES = 10


def check_sign(field_: SolutionField) -> bool:
    return all(float(s.values.min(initial=0.0)) >= SIGN_FLOOR for s in field_.states)


@dataclass(frozen=True)
class SpaceReport:
    times: np.ndarray
    sums: np.ndarray
    expected: float
    tail: np.ndarray
    tol: float

    @property
    def drift(self) -> np.ndarray:
        return np.abs(self.sums - self.expected)

    @property
    def max_drift(self) -> float:
        return float(self.drift.max(initial=0.0))

    @property
    def ok(self) -> bool:
        return bool(np.all(self.drift <= self.tol + self.tail))


def check_space_conservation(
    field_: SolutionField,
    A: float | None = None,
    mu_x: float | None = None,
    tol: float = DEFAULT_SPACE_TOL,
) -> SpaceReport:
    """Compare ``S(t) = mu_x * sum_m u(m, t)`` with its initial value at every grid time."""
    p = field_.problem
    mu_x = p.mu_x if mu_x is None else mu_x
    expected = p.initial_mass if A is None else A * mu_x
    sums = np.array([mu_x * s.total() for s in field_.states])
    return SpaceReport(field_.times.copy(), sums, expected, field_.tail_mass.copy(), tol)


@dataclass(frozen=True)
class TimeReport:
    branches: tuple[int, ...]
    integrals: np.ndarray
    residuals: np.ndarray
    expected: np.ndarray
    tol: float
    short: tuple[int, ...] = ()

    @property
    def accounted(self) -> np.ndarray:
        return self.integrals + self.residuals

    @property
    def max_error(self) -> float:
        return float(np.abs(self.accounted - self.expected).max(initial=0.0))

    @property
    def spread(self) -> float:
        """Largest pairwise difference of accounted integrals across branches."""
        acc = self.accounted
        return float(acc.max() - acc.min()) if len(acc) else 0.0

    @property
    def within_bounds(self) -> bool:
        """Finite-horizon integral lies in ``[expected - residual, expected + tol]``."""
        lo = self.expected - self.residuals - self.tol
        hi = self.expected + self.tol
        return bool(np.all((self.integrals >= lo) & (self.integrals <= hi)))

    @property
    def ok(self) -> bool:
        return self.within_bounds and self.max_error <= self.tol and self.spread <= 2 * self.tol


def check_time_conservation(
    field_: SolutionField,
    tol: float = DEFAULT_TIME_TOL,
    branches: Iterable[int] | None = None,
) -> TimeReport:
    """Delta integrals of ``u(m, .)`` over ``[0, t_max)`` with residual accounting.

    Explicitly requested branches whose residual exceeds 10% of the expected
    value raise :class:`HorizonTooShort`; for the default branch set
    (``0..10`` within the window) such branches are only listed in ``short``.
    """
    p = field_.problem
    init = p.initial_values()
    final = field_.states[-1]
    lo = min(init)
    explicit = branches is not None
    if branches is None:
        branches = range(max(lo, 0), min(DEFAULT_BRANCHES, field_.m_range[1]) + 1)
    branches = tuple(int(m) for m in branches)
    scale = p.mu_x / p.k
    integrals, residuals, expected, short = [], [], [], []
    for m in branches:
        exp_m = scale * math.fsum(c for j, c in init.items() if j <= m)
        res_m = scale * math.fsum(final[j] for j in range(min(lo, final.lo), m + 1))
        if res_m > HORIZON_FRACTION * abs(exp_m):
            if explicit:
                raise HorizonTooShort(
                    f"branch m={m}: mass {res_m:.3g} has not passed by t_max={p.scale.t_max} "
                    f"(> {HORIZON_FRACTION:.0%} of {exp_m:.6g})"
                )
            short.append(m)
        integrals.append(field_.time_integral(m))
        residuals.append(res_m)
        expected.append(exp_m)
    return TimeReport(
        branches, np.array(integrals), np.array(residuals), np.array(expected), tol, tuple(short)
    )


# -- probability density conditions ----------------------------------------------

@dataclass(frozen=True)
class PdfVerdict:
    k_is_one: bool
    mass_is_one: bool
    time_norm_is_one: bool
    positivity: bool
    mu_below_mu_x: bool
    nonnegative_data: bool

    @property
    def space_sections(self) -> bool:
        return self.mass_is_one and self.positivity and self.nonnegative_data

    @property
    def time_sections(self) -> bool:
        return self.time_norm_is_one and self.positivity and self.nonnegative_data

    @property
    def both(self) -> bool:
        return self.k_is_one and self.mass_is_one and self.mu_below_mu_x and self.nonnegative_data

    @property
    def sections(self) -> str:
        if self.space_sections and self.time_sections:
            return "both"
        if self.space_sections:
            return "space"
        if self.time_sections:
            return "time"
        return "neither"


def _is_one(x: float) -> bool:
    return math.isclose(x, 1.0, rel_tol=1e-12, abs_tol=1e-12)


def check_pdf_conditions(problem: TransportProblem) -> PdfVerdict:
    """Which sections are dynamic probability densities for this problem.

    Space sections need unit mass ``A mu_x = 1``; time sections need
    ``A mu_x / k = 1``; both additionally need positivity of every step.
    Both hold together exactly when ``k = 1``, ``A mu_x = 1`` and every
    graininess is below ``mu_x``.
    """
    mass = problem.initial_mass
    return PdfVerdict(
        k_is_one=_is_one(problem.k),
        mass_is_one=_is_one(mass),
        time_norm_is_one=_is_one(mass / problem.k),
        positivity=problem.regressivity().ok,
        mu_below_mu_x=problem.scale.max_graininess() < problem.mu_x,
        nonnegative_data=not problem.has_negative_data,
    )


@dataclass(frozen=True)
class MeasuredSections:
    sign_ok: bool
    space_totals: np.ndarray
    space_tails: np.ndarray
    time_totals: np.ndarray
    time_tails: np.ndarray
    tol: float

    @property
    def space_sections(self) -> bool:
        return self.sign_ok and bool(np.all(np.abs(self.space_totals - 1.0) <= self.tol + self.space_tails))

    @property
    def time_sections(self) -> bool:
        return self.sign_ok and bool(np.all(np.abs(self.time_totals - 1.0) <= self.tol + self.time_tails))


def measure_sections(
    field_: SolutionField,
    branches: Sequence[int] = range(6),
    tol: float = DEFAULT_TIME_TOL,
) -> MeasuredSections:
    """Measure section totals directly from the field, without residual credit
    beyond using the residual as the admissible tail."""
    p = field_.problem
    space = np.array([p.mu_x * s.total() for s in field_.states])
    final = field_.states[-1]
    time = np.array([field_.time_integral(m) for m in branches])
    residual = np.array([
        max(0.0, p.mu_x / p.k * math.fsum(final[j] for j in range(final.lo, m + 1)))
        for m in branches
    ])
    return MeasuredSections(check_sign(field_), space, field_.tail_mass.copy(), time, residual, tol)


# -- combined report ---------------------------------------------------------------

@dataclass(frozen=True)
class ConservationReport:
    sign_ok: bool
    space: SpaceReport
    time: TimeReport
    pdf: PdfVerdict
    problem: TransportProblem = field(repr=False)

    @property
    def ok(self) -> bool:
        return self.sign_ok and self.space.ok and self.time.ok

    def to_kv(self) -> str:
        items = [
            ("sign_ok", self.sign_ok),
            ("space_ok", self.space.ok),
            ("space_expected", self.space.expected),
            ("space_max_drift", self.space.max_drift),
            ("space_max_tail", float(self.space.tail.max(initial=0.0))),
            ("time_ok", self.time.ok),
            ("time_branches", ",".join(map(str, self.time.branches))),
            ("time_max_error", self.time.max_error),
            ("time_spread", self.time.spread),
            ("time_short_branches", ",".join(map(str, self.time.short))),
        ]
        for m, i, r in zip(self.time.branches, self.time.integrals, self.time.residuals):
            items.append((f"time_integral_m{m}", float(i)))
            items.append((f"time_residual_m{m}", float(r)))
        items += [
            ("pdf_k_is_one", self.pdf.k_is_one),
            ("pdf_mass_is_one", self.pdf.mass_is_one),
            ("pdf_time_norm_is_one", self.pdf.time_norm_is_one),
            ("pdf_positivity", self.pdf.positivity),
            ("pdf_mu_below_mu_x", self.pdf.mu_below_mu_x),
            ("pdf_sections", self.pdf.sections),
            ("ok", self.ok),
        ]
        return "".join(f"{k}={_kv(v)}\n" for k, v in items)

    def to_text(self) -> str:
        p = self.problem
        t = self.time
        lines = [
            f"Conservation report (k={p.k}, A={p.A}, mu_x={p.mu_x}, t_max={p.scale.t_max})",
            f"  sign:          {'ok' if self.sign_ok else 'FAILED'} (floor {SIGN_FLOOR:g})",
            f"  space sums:    {'ok' if self.space.ok else 'FAILED'}; S(t) target {self.space.expected:.17g}, "
            f"max drift {self.space.max_drift:.3e} over {len(self.space.sums)} times",
            f"  time integral: {'ok' if t.ok else 'FAILED'}; branches {t.branches[0] if t.branches else '-'}.."
            f"{t.branches[-1] if t.branches else '-'}, max error {t.max_error:.3e}, spread {t.spread:.3e}",
        ]
        if t.short:
            lines.append(f"                 horizon short (>10% residual) for m = {', '.join(map(str, t.short))}")
        lines.append(f"  pdf sections:  {self.pdf.sections}")
        return "\n".join(lines) + "\n"


def _kv(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def check_conservation(
    field_: SolutionField,
    space_tol: float = DEFAULT_SPACE_TOL,
    time_tol: float = DEFAULT_TIME_TOL,
    branches: Iterable[int] | None = None,
) -> ConservationReport:
    return ConservationReport(
        check_sign(field_),
        check_space_conservation(field_, tol=space_tol),
        check_time_conservation(field_, tol=time_tol, branches=branches),
        check_pdf_conditions(field_.problem),
        field_.problem,
    )
