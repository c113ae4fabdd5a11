"""Built-in verification suite run by ``semitransport selftest``.

Each check returns a :class:`Verdict`; the suite stops at nothing and reports
every verdict, the CLI turns the first failure into a nonzero exit.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from .conservation import (
    check_pdf_conditions,
    check_sign,
    check_space_conservation,
    check_time_conservation,
    measure_sections,
)
from .distributions import (
    HeterogeneousTrialPlan,
    first_success_pmf,
    heterogeneous_oracle,
    heterogeneous_solution,
    stopstart_branch,
)
from .oracles import binomial_closed_form, poisson_closed_form, rk4_reference
from .timescale import Component, TimeScale, make_grid
from .transport import Lattice, SolutionField, TransportProblem, solve


@dataclass(frozen=True)
class Verdict:
    name: str
    ok: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.ok else 'FAIL'}  {self.name}: {self.detail}"


def canonical_scales() -> dict[str, TimeScale]:
    return {
        "interval": TimeScale.interval(40.0),
        "uniform": TimeScale.uniform(0.25, 240),
        "harmonic": TimeScale.harmonic(200),
        "stopstart": TimeScale.stopstart(0.5, 0.5, 40),
        "mixed": TimeScale.from_literal(
            [[0, 1.5], 1.9, 2.2, [2.6, 4.0], 4.5, [4.8, 5.0], 5.3, 5.7, [6.0, 20.0]]
        ),
    }


def random_scale(rng: np.random.Generator, max_gap: float, n_components: int | None = None) -> TimeScale:
    """Random mix of intervals and isolated points with gaps below ``max_gap``."""
    n = int(rng.integers(6, 25)) if n_components is None else n_components
    comps = []
    t = 0.0
    for i in range(n):
        if rng.random() < 0.5:
            length = float(rng.uniform(0.05, 1.5))
            comps.append(Component(t, t + length))
            t += length
        else:
            comps.append(Component(t, t))
        if i < n - 1:
            t += float(rng.uniform(0.02, 0.98)) * max_gap
    # a long closing interval lets most of the mass pass the first branches
    comps.append(Component(t + 0.5 * max_gap, t + 0.5 * max_gap + 25.0))
    return TimeScale(tuple(comps))


def _injected(field_: SolutionField, fault: str | None) -> SolutionField:
    if fault != "sign-flip":
        return field_
    states = list(field_.states)
    s = states[len(states) // 2]
    vals = s.values.copy()
    vals[0] = -abs(vals[0]) - 1e-3
    states[len(states) // 2] = Lattice(s.lo, vals, s.tail_mass)
    return SolutionField(field_.problem, field_.grid, tuple(states), field_.segments)


def check_poisson_closed_form() -> Verdict:
    ts = TimeScale.interval(20.0)
    times = (0.1, 1.0, 5.0, 20.0)
    f = solve(TransportProblem(1.0, 1.0, ts), make_grid(ts, extra_times=times))
    worst = max(
        abs(f.value(m, t) / poisson_closed_form(1.0, 1.0, m, t) - 1.0) for m in range(41) for t in times
    )
    return Verdict("continuous-time closed form", worst <= 1e-12, f"max rel err {worst:.2e} (m<=40)")


def check_binomial_closed_form() -> Verdict:
    ts = TimeScale.uniform(0.25, 60)
    f = solve(TransportProblem(1.0, 1.0, ts))
    worst = 0.0
    for n in range(61):
        s = f.at(0.25 * n)
        for m in range(n + 1):
            exact = float(binomial_closed_form(Fraction(1), 1, 1, Fraction(1, 4), m, n))
            worst = max(worst, abs(s[m] / exact - 1.0))
    return Verdict("discrete-time closed form", worst <= 1e-12, f"max rel err {worst:.2e} (n<=60)")


def _fields(fault: str | None) -> list[tuple[str, SolutionField]]:
    out = []
    for name, ts in canonical_scales().items():
        out.append((name, _injected(solve(TransportProblem(1.0, 1.0, ts)), fault)))
    rng = np.random.default_rng(20240601)
    for i in range(10):
        k = float(rng.uniform(0.5, 2.0))
        mu_x = float(rng.uniform(0.5, 2.0))
        ts = random_scale(rng, mu_x / k)
        out.append((f"random{i}", solve(TransportProblem(k, mu_x, ts, A=float(rng.uniform(0.5, 2))))))
    return out


def check_sign_all(fields) -> Verdict:
    bad = [name for name, f in fields if not check_sign(f)]
    return Verdict("sign conservation", not bad, "all values >= -1e-14" if not bad else f"negative values on {', '.join(bad)}")


def check_space_all(fields) -> Verdict:
    reports = [(name, check_space_conservation(f)) for name, f in fields]
    bad = [name for name, r in reports if not r.ok]
    drift = max(r.max_drift for _, r in reports)
    return Verdict("space-sum conservation", not bad, f"max drift {drift:.2e}" + (f"; failed on {', '.join(bad)}" if bad else ""))


def check_time_all(fields) -> Verdict:
    reports = [(name, check_time_conservation(f)) for name, f in fields]
    bad = [name for name, r in reports if not r.ok]
    spread = max(r.spread for _, r in reports)
    # quadrature cross-check of the closed-form integrals on one mixed field
    name, f = fields[4]
    quad = max(
        abs(f.problem.scale.delta_integral(lambda t, m=m: f.value(m, t), 0.0, f.problem.scale.t_max, 1e-11)
            - f.time_integral(m))
        for m in range(3)
    )
    ok = not bad and quad <= 1e-8
    return Verdict(
        "time-integral conservation", ok,
        f"max branch spread {spread:.2e}, quadrature cross-check {quad:.2e}"
        + (f"; failed on {', '.join(bad)}" if bad else ""),
    )


def check_pdf_sweep() -> Verdict:
    mismatches = 0
    cases = 0
    for k in (0.5, 1.0, 2.0):
        for A in (0.5, 1.0, 2.0):
            for mu_x in (0.5, 1.0, 2.0):
                for frac in (0.2, 0.9, 1.1):
                    ts = TimeScale.uniform(frac * mu_x, 400)
                    prob = TransportProblem(k, mu_x, ts, A=A)
                    verdict = check_pdf_conditions(prob)
                    with warnings.catch_warnings():
                        warnings.simplefilter("ignore")
                        meas = measure_sections(solve(prob, strict=False))
                    cases += 1
                    if (verdict.space_sections, verdict.time_sections, verdict.both) != (
                        meas.space_sections, meas.time_sections, meas.space_sections and meas.time_sections
                    ):
                        mismatches += 1
    return Verdict("probability-density conditions", mismatches == 0, f"{cases - mismatches}/{cases} verdicts match measurement")


def check_heterogeneous() -> Verdict:
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(30):
        plan = HeterogeneousTrialPlan(tuple(rng.uniform(0.01, 0.99, 12)))
        for n in range(13):
            for m in range(n + 1):
                worst = max(worst, abs(heterogeneous_solution(plan, m, n) - heterogeneous_oracle(plan, m, n)))
    f = first_success_pmf(HeterogeneousTrialPlan.harmonic(50), 50)
    harm = max(abs(f[j - 1] - 1.0 / (j * (j + 1))) for j in range(1, 51))
    ts = TimeScale.harmonic(12)
    field_ = solve(TransportProblem(1.0, 1.0, ts))
    plan = HeterogeneousTrialPlan.harmonic(12)
    solver = max(
        abs(field_.at(ts.components[n].start)[m] - heterogeneous_solution(plan, m, n))
        for n in range(13) for m in range(n + 1)
    )
    ok = worst <= 1e-13 and harm <= 1e-13 and solver <= 1e-13
    return Verdict("heterogeneous discrete solution", ok,
                   f"recurrence vs enumeration {worst:.1e}, harmonic first success {harm:.1e}, solver {solver:.1e}")


def check_stopstart() -> Verdict:
    ts = TimeScale.stopstart(0.5, 0.5, 6)
    times = [n + 0.5 * j / 49 for n in range(6) for j in range(50)]
    f = solve(TransportProblem(1.0, 1.0, ts), make_grid(ts, extra_times=times))
    worst = max(
        abs(f.value(x, t) - stopstart_branch(x, int(math.floor(t + 1e-9)), t)) for t in times for x in range(4)
    )
    return Verdict("stop-start branches", worst <= 1e-10, f"max abs err {worst:.1e} over 4 branches x 300 times")


def check_ode_oracle() -> Verdict:
    worst = 0.0
    for ts in (TimeScale.stopstart(0.5, 0.5, 6), TimeScale.harmonic(40)):
        f = solve(TransportProblem(1.0, 1.0, ts))
        pts = [s for s, _ in ts.scattered_points()]
        ref = rk4_reference(ts, 1.0, 1.0, {0: 1.0}, pts, 15, h=1e-4)
        for i, s in enumerate(pts):
            st = f.at(s)
            worst = max(worst, max(abs(ref[i, m] - st[m]) for m in range(16)))
    return Verdict("ODE oracle agreement", worst <= 1e-6, f"max abs diff vs RK4 {worst:.1e}")


def run_all(fault: str | None = None, log: Callable[[str], None] = print) -> list[Verdict]:
    start = time.perf_counter()
    fields = _fields(fault)
    checks: list[Callable[[], Verdict]] = [
        check_poisson_closed_form,
        check_binomial_closed_form,
        lambda: check_sign_all(fields),
        lambda: check_time_all(fields),
        lambda: check_space_all(fields),
        check_pdf_sweep,
        check_heterogeneous,
        check_stopstart,
        check_ode_oracle,
    ]
    verdicts = []
    for c in checks:
        v = c()
        log(v.line())
        verdicts.append(v)
    log(f"selftest finished in {time.perf_counter() - start:.1f} s")
    return verdicts
