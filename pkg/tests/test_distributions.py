import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from semitransport import (
    HeterogeneousTrialPlan,
    TimeScale,
    TransportProblem,
    binomial_pmf,
    erlang_density,
    heterogeneous_oracle,
    heterogeneous_solution,
    negbinomial_pmf,
    poisson_limit_distance,
    poisson_pmf,
    solve,
    stopstart_branch,
    time_section,
)
from semitransport.distributions import (
    DistributionTable,
    first_success_pmf,
    heterogeneous_table,
    poisson_weights,
    total_variation,
)
from semitransport.errors import BranchUnavailable, TooLarge


class TestPoissonErlang:
    @pytest.mark.parametrize("lam", [0.0, 0.5, 3.0, 40.0, 900.0])
    def test_poisson_matches_scipy(self, lam):
        m = np.arange(int(lam + 200))
        np.testing.assert_allclose(poisson_weights(lam, len(m) - 1), stats.poisson.pmf(m, lam), rtol=1e-11, atol=1e-300)

    def test_poisson_table(self):
        tab = poisson_pmf(2.0, 30)
        assert tab.weights[2] == pytest.approx(2 * math.exp(-2), rel=1e-15)
        assert tab.tail_bound < 1e-15

    def test_erlang(self):
        assert erlang_density(2.0, 0, 0.5) == pytest.approx(2 * math.exp(-1), rel=1e-15)
        assert erlang_density(1.0, 3, 2.0) == pytest.approx(8 * math.exp(-2) / 6, rel=1e-14)
        assert erlang_density(1.0, 3, 0.0) == 0.0
        assert erlang_density(1.5, 4, 3.0) == pytest.approx(stats.gamma.pdf(3.0, 5, scale=1 / 1.5), rel=1e-13)

    def test_erlang_is_time_section(self):
        # with A = mu_x = 1 the branch u(x, .) is the Erlang density divided by k
        k = 1.0
        f = solve(TransportProblem(k, 1.0, TimeScale.interval(5.0)))
        for t in (0.3, 2.0, 4.5):
            assert f.value(3, t) == pytest.approx(erlang_density(k, 3, t) / k, rel=1e-13)

    @pytest.mark.parametrize("args", [(0.0, 1, 1.0), (1.0, -1, 1.0), (1.0, 1.5, 1.0), (1.0, 1, -1.0)])
    def test_erlang_domain(self, args):
        with pytest.raises(ValueError):
            erlang_density(*args)


class TestBinomial:
    def test_exact_small_case(self):
        tab = binomial_pmf(3, 0.25)
        np.testing.assert_allclose(tab.weights, [27 / 64, 27 / 64, 9 / 64, 1 / 64], rtol=1e-15)
        assert tab.total == pytest.approx(1.0, abs=1e-15)

    def test_negative_binomial_convention(self):
        p = 0.25
        tab = negbinomial_pmf(2, p, 6)
        assert tab.locations.tolist() == [2, 3, 4, 5, 6]
        assert tab.weights[0] == pytest.approx(p**3, rel=1e-15)
        # trials-indexed: the (m+1)-th success lands on trial n+1
        ref = stats.nbinom.pmf(np.arange(0, 5), 3, p)
        np.testing.assert_allclose(tab.weights, ref, rtol=1e-13)

    def test_negative_binomial_is_time_section(self):
        f = solve(TransportProblem(1.0, 1.0, TimeScale.uniform(0.25, 400)))
        tab = time_section(f, 2)
        nb = negbinomial_pmf(2, 0.25, 399)
        np.testing.assert_allclose(tab.weights[2:], nb.weights, rtol=1e-12, atol=1e-300)
        assert tab.total == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("p", [0.0, 1.0, -0.2])
    def test_probability_range(self, p):
        with pytest.raises(ValueError):
            binomial_pmf(3, p)


class TestHeterogeneous:
    def test_two_trials_by_hand(self):
        plan = HeterogeneousTrialPlan((0.5, 0.25))
        np.testing.assert_allclose(heterogeneous_table(plan, 2), [0.375, 0.5, 0.125], rtol=1e-15)

    def test_recurrence_matches_oracle(self):
        plan = HeterogeneousTrialPlan((0.1, 0.7, 0.3, 0.55, 0.9))
        for n in range(6):
            for m in range(n + 1):
                assert heterogeneous_solution(plan, m, n) == pytest.approx(heterogeneous_oracle(plan, m, n), abs=1e-15)

    def test_rows_sum_to_A(self):
        plan = HeterogeneousTrialPlan(tuple(np.linspace(0.05, 0.95, 30)))
        for n in (0, 10, 30):
            assert math.fsum(heterogeneous_table(plan, n, A=2.5).tolist()) == pytest.approx(2.5, rel=1e-14)

    def test_harmonic_exact(self):
        # with p_i = 1/(i+1) the stay-on-branch-0 product telescopes to 1/(k+1)
        plan = HeterogeneousTrialPlan.harmonic(8)
        row = heterogeneous_table(plan, 8)
        assert row[0] == pytest.approx(1 / 9, rel=1e-15)
        f = first_success_pmf(plan, 8)
        np.testing.assert_allclose(f, [float(Fraction(1, k * (k + 1))) for k in range(1, 9)], rtol=1e-14)

    def test_matches_solver_on_harmonic_scale(self):
        ts = TimeScale.harmonic(10)
        f = solve(TransportProblem(1.0, 1.0, ts))
        plan = HeterogeneousTrialPlan.harmonic(10)
        for n, c in enumerate(ts.components):
            np.testing.assert_allclose([f.at(c.start)[m] for m in range(n + 1)], heterogeneous_table(plan, n), atol=1e-15)

    def test_plan_validation(self):
        with pytest.raises(ValueError):
            HeterogeneousTrialPlan((0.5, 1.0))
        with pytest.raises(ValueError):
            HeterogeneousTrialPlan((0.6,), k=2.0)

    def test_enumeration_limit(self):
        plan = HeterogeneousTrialPlan((0.5,) * 20)
        with pytest.raises(TooLarge):
            heterogeneous_oracle(plan, 3, 20)
        with pytest.raises(IndexError):
            heterogeneous_solution(plan, 5, 3)


class TestStopStart:
    def test_hand_values(self):
        # hand-evaluated at the ends of the first continuous parts
        assert stopstart_branch(0, 0, 0.0) == 1.0
        assert stopstart_branch(1, 0, 0.5) == pytest.approx(0.5 * math.exp(-0.5), rel=1e-15)
        assert stopstart_branch(1, 1, 1.0) == pytest.approx(0.75 * math.exp(-0.5), rel=1e-15)

    def test_fourth_branch_unavailable(self):
        with pytest.raises(BranchUnavailable):
            stopstart_branch(4, 0, 0.0)

    def test_time_outside_part(self):
        with pytest.raises(ValueError):
            stopstart_branch(1, 1, 0.7)


class TestConvergence:
    def test_total_variation(self):
        assert total_variation([0.5, 0.5], [1.0]) == 0.5
        assert total_variation([0.2, 0.8], [0.2, 0.8]) == 0.0

    def test_known_value(self):
        ref = 0.5 * (
            abs(0.25 - math.exp(-1))
            + abs(0.5 - math.exp(-1))
            + abs(0.25 - 0.5 * math.exp(-1))
            + (1 - 2.5 * math.exp(-1))
        )
        assert poisson_limit_distance(2, 1.0) == pytest.approx(ref, rel=1e-13)

    def test_monotone(self):
        d = [poisson_limit_distance(n, 2.0) for n in (4, 8, 16, 32, 64)]
        assert all(b < a for a, b in zip(d, d[1:]))

    def test_bad_rate(self):
        with pytest.raises(ValueError):
            poisson_limit_distance(2, 3.0)


class TestTable:
    def test_dynamic_pdf(self):
        assert DistributionTable([0, 1], [0.25, 0.75]).is_dynamic_pdf()
        assert not DistributionTable([0, 1], [-0.25, 1.25]).is_dynamic_pdf()
        assert DistributionTable([0], [0.9], total=0.9, tail_bound=0.1).is_dynamic_pdf()

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            DistributionTable([0, 1], [1.0])
