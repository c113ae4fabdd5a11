"""Invariants over generated time scales and parameters."""

import math
import warnings

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from semitransport import HeterogeneousTrialPlan, TimeScale, TransportProblem, solve
from semitransport.conservation import check_sign, check_space_conservation, check_time_conservation
from semitransport.distributions import heterogeneous_table
from semitransport.timescale import Component

FAST = settings(max_examples=40, deadline=None)


@st.composite
def scales(draw, max_gap=1.0, tail=0.0):
    """Mixed time scales; every gap stays below ``max_gap``."""
    n = draw(st.integers(1, 8))
    comps, t = [], 0.0
    for i in range(n):
        if draw(st.booleans()):
            length = draw(st.floats(0.05, 2.0))
            comps.append(Component(t, t + length))
            t += length
        else:
            comps.append(Component(t, t))
        if i < n - 1 or tail:
            t += draw(st.floats(0.02, 0.98)) * max_gap
    if tail:
        comps.append(Component(t, t + tail))
    return TimeScale(tuple(comps))


@st.composite
def problems(draw, tail=0.0):
    k = draw(st.floats(0.2, 3.0))
    mu_x = draw(st.floats(0.2, 3.0))
    A = draw(st.floats(0.1, 5.0))
    return TransportProblem(k, mu_x, draw(scales(max_gap=mu_x / k, tail=tail)), A=A)


@FAST
@given(problems())
def test_sign_and_space_sum(problem):
    field = solve(problem)
    assert check_sign(field)
    report = check_space_conservation(field)
    assert report.ok, report.max_drift


@FAST
@given(problems(tail=60.0))
def test_time_integrals_equal_across_branches(problem):
    report = check_time_conservation(solve(problem), branches=[0, 1, 2])
    assert report.ok
    np.testing.assert_allclose(report.accounted, problem.A * problem.mu_x / problem.k, atol=1e-8)


@FAST
@given(problems(), st.floats(-2.0, 2.0), st.floats(-2.0, 2.0), st.integers(-3, 3))
def test_linear_in_initial_data(problem, a, b, shift):
    base = problem.initial_values()
    other = {m + shift: 0.5 * c for m, c in base.items()}
    combined = dict.fromkeys(set(base) | set(other), 0.0)
    for m, c in base.items():
        combined[m] += a * c
    for m, c in other.items():
        combined[m] += b * c
    kw = dict(k=problem.k, mu_x=problem.mu_x, scale=problem.scale)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        f = solve(TransportProblem(**kw, initial=combined))
    f1 = solve(TransportProblem(**kw, initial=base))
    f2 = solve(TransportProblem(**kw, initial=other))
    for s, s1, s2 in zip(f.states, f1.states, f2.states):
        for m in range(min(s1.lo, s2.lo), max(s1.hi, s2.hi) + 1):
            assert math.isclose(s[m], a * s1[m] + b * s2[m], rel_tol=1e-9, abs_tol=1e-12)


@FAST
@given(scales(max_gap=1.0), st.floats(-0.95, 3.0))
def test_dynamic_exp_semigroup(ts, p):
    pts = [c.start for c in ts.components] + [ts.t_max]
    t0, t1, t = pts[0], pts[len(pts) // 2], pts[-1]
    lhs = ts.dynamic_exp(p, t, t0)
    rhs = ts.dynamic_exp(p, t, t1) * ts.dynamic_exp(p, t1, t0)
    assert math.isclose(lhs, rhs, rel_tol=1e-12)


@FAST
@given(scales(max_gap=1.0), st.floats(0.0, 1.0))
def test_delta_integral_additive(ts, frac):
    cut = ts.components[int(frac * (len(ts.components) - 1))].start
    f = lambda t: 1.0 + t * t
    whole = ts.delta_integral(f, 0.0, ts.t_max)
    assert math.isclose(whole, ts.delta_integral(f, 0.0, cut) + ts.delta_integral(f, cut, ts.t_max), abs_tol=1e-9)


@FAST
@given(st.lists(st.floats(0.01, 0.99), min_size=1, max_size=40), st.floats(0.1, 10.0))
def test_heterogeneous_rows_are_distributions(probs, A):
    plan = HeterogeneousTrialPlan(tuple(probs))
    row = heterogeneous_table(plan, len(probs), A)
    assert np.all(row >= 0)
    assert math.isclose(math.fsum(row.tolist()), A, rel_tol=1e-12)
