import math
import warnings

import numpy as np
import pytest

from semitransport import (
    Lattice,
    TimeScale,
    TransportProblem,
    make_grid,
    propagate_interval,
    solve,
    space_section,
    step_scattered,
    time_section,
)
from semitransport.distributions import DENSITY, MASS, MIXED, DistributionTable
from semitransport.errors import CFLViolation, IndexOutOfWindow, NegativeDataError, TimeNotOnGrid
from semitransport.oracles import rk4_reference
from semitransport.transport import poisson_kernel, shifted

E = math.exp(-1.0)


class TestLattice:
    def test_dict_round_trip(self):
        lat = Lattice.from_dict({-2: 1.0, 1: 3.0})
        assert lat.lo == -2 and lat.hi == 1
        assert lat.to_dict() == {-2: 1.0, -1: 0.0, 0: 0.0, 1: 3.0}
        assert lat[5] == 0.0 and lat[-3] == 0.0
        assert lat.total() == 4.0


class TestStepScattered:
    def test_point_mass(self):
        s = step_scattered(Lattice(0, [2.0]), 1.0, 1.0, 0.25)
        assert s.to_dict() == {0: 1.5, 1: 0.5}

    def test_two_steps(self):
        s = Lattice(0, [1.0])
        for _ in range(2):
            s = step_scattered(s, 1.0, 1.0, 0.25)
        assert s[1] == pytest.approx(0.375, abs=1e-16)
        assert s.to_dict() == pytest.approx({0: 0.5625, 1: 0.375, 2: 0.0625}, abs=1e-16)

    def test_ratio_only(self):
        a = step_scattered(Lattice(3, [1.0, 2.0]), 2.0, 4.0, 0.5)
        b = step_scattered(Lattice(3, [1.0, 2.0]), 1.0, 2.0, 0.5)
        np.testing.assert_array_equal(a.values, b.values)
        assert a.lo == 3

    def test_cfl(self):
        with pytest.raises(CFLViolation):
            step_scattered(Lattice(0, [1.0]), 1.0, 1.0, 1.0)
        s = step_scattered(Lattice(0, [1.0]), 1.0, 1.0, 1.5, strict=False)
        assert s.to_dict() == {0: -0.5, 1: 1.5}


class TestPropagateInterval:
    def test_tiny_step_is_identity(self):
        s = propagate_interval(Lattice(0, [0.75, 0.25]), 1.0, 1.0, 1e-12)
        assert s[0] == pytest.approx(0.75, abs=1e-9)
        assert s[1] == pytest.approx(0.25, abs=1e-9)

    def test_unit_time(self):
        s = propagate_interval(Lattice(0, [0.75, 0.25]), 1.0, 1.0, 1.0)
        assert s[0] == pytest.approx(0.75 * E, rel=1e-14)
        assert s[1] == pytest.approx(E, rel=1e-14)
        assert s[2] == pytest.approx(0.375 * E + 0.25 * E, rel=1e-14)

    def test_against_rk4(self):
        ts = TimeScale.interval(1.0)
        ref = rk4_reference(ts, 1.0, 1.0, {0: 0.75, 1: 0.25}, [1.0], 10)
        s = propagate_interval(Lattice(0, [0.75, 0.25]), 1.0, 1.0, 1.0)
        np.testing.assert_allclose([s[m] for m in range(11)], ref[0], atol=1e-12)

    def test_tail_bound(self):
        s = propagate_interval(Lattice(0, [1.0]), 1.0, 1.0, 3.0, tail_tol=1e-6)
        assert 0 < s.tail_mass <= 1e-6
        assert abs(1.0 - s.total()) <= s.tail_mass

    @pytest.mark.parametrize("lam", [0.0, 0.3, 7.0, 800.0])
    def test_kernel_sums_to_one(self, lam):
        ker, tail = poisson_kernel(lam, 1e-13)
        assert abs(math.fsum(ker.tolist()) - 1.0) <= tail + 1e-12


class TestSolve:
    def test_first_branch_is_dynamic_exponential(self):
        ts = TimeScale.from_literal([[0, 1.5], 1.9, 2.2, [2.6, 4.0]])
        f = solve(TransportProblem(0.8, 1.3, ts, A=2.0))
        for t in f.times:
            assert f.value(0, t) == pytest.approx(2.0 * ts.dynamic_exp(-0.8 / 1.3, t), rel=1e-13)

    def test_superposition(self):
        ts = TimeScale.stopstart(0.7, 0.3, 8)
        general = solve(TransportProblem(1.0, 1.0, ts, initial={-1: 0.4, 2: 1.3}))
        point = solve(TransportProblem(1.0, 1.0, ts))
        parts = [shifted(point, -1, 0.4), shifted(point, 2, 1.3)]
        for g, s in enumerate(general.states):
            for m in range(s.lo, s.hi + 1):
                assert s[m] == pytest.approx(parts[0][g][m] + parts[1][g][m], abs=1e-12)

    def test_depends_on_k_over_mu_x(self):
        ts = TimeScale.from_literal([[0, 1], 1.2, [1.5, 3]])
        a = solve(TransportProblem(1.0, 1.0, ts))
        b = solve(TransportProblem(2.5, 2.5, ts))
        for sa, sb in zip(a.states, b.states):
            np.testing.assert_allclose(sa.values, sb.values, rtol=0, atol=1e-15)

    def test_time_rescaling_on_interval(self):
        fast = solve(TransportProblem(2.0, 1.0, TimeScale.interval(5.0)))
        slow = solve(TransportProblem(1.0, 1.0, TimeScale.interval(10.0)))
        for m in range(8):
            assert fast.value(m, 1.7) == pytest.approx(slow.value(m, 3.4), rel=1e-12)

    def test_value_matches_stored_state(self):
        ts = TimeScale.stopstart(0.5, 0.5, 4)
        f = solve(TransportProblem(1.0, 1.0, ts))
        for g, t in enumerate(f.times):
            s = f.states[g]
            for m in range(s.lo, min(s.hi, 12) + 1):
                assert f.value(m, t) == pytest.approx(s[m], rel=1e-12, abs=1e-300)

    def test_cfl_refused(self):
        with pytest.raises(CFLViolation, match="positivity"):
            solve(TransportProblem(1.0, 1.0, TimeScale.uniform(1.0, 3)))

    def test_nonstrict_warns(self):
        with pytest.warns(UserWarning):
            f = solve(TransportProblem(1.0, 1.0, TimeScale.uniform(1.5, 2)), strict=False)
        assert f.at(3.0).to_dict() == pytest.approx({0: 0.25, 1: -1.5, 2: 2.25})

    def test_negative_data_warns(self):
        with pytest.warns(UserWarning, match="negative"):
            solve(TransportProblem(1.0, 1.0, TimeScale.interval(1.0), initial={0: 1.0, 1: -0.5}))

    def test_unknown_time(self):
        f = solve(TransportProblem(1.0, 1.0, TimeScale.interval(1.0)), make_grid(TimeScale.interval(1.0), 0.5))
        with pytest.raises(TimeNotOnGrid):
            f.at(0.3)

    def test_time_integral_closed_form(self):
        # int_0^T t^m e^-t / m! dt is the regularized lower incomplete gamma P(m+1, T)
        f = solve(TransportProblem(1.0, 1.0, TimeScale.interval(3.0)))
        assert f.time_integral(0) == pytest.approx(1 - math.exp(-3), rel=1e-14)
        assert f.time_integral(1) == pytest.approx(1 - 4 * math.exp(-3), rel=1e-14)
        assert f.time_integral(1, 1.0) == pytest.approx(1 - 2 * E, rel=1e-14)

    def test_time_integral_discrete(self):
        f = solve(TransportProblem(1.0, 1.0, TimeScale.uniform(0.25, 3)))
        # 0.25 * (1 + 3/4 + 9/16)
        assert f.time_integral(0) == pytest.approx(0.25 * (1 + 0.75 + 0.5625), rel=1e-15)


class TestSections:
    @pytest.fixture
    def mixed_field(self):
        ts = TimeScale.from_literal([[0, 1], 1.5, [2, 6]])
        return solve(TransportProblem(1.0, 1.0, ts), make_grid(ts, 0.5))

    def test_space_section(self, mixed_field):
        tab = space_section(mixed_field, 2.0)
        assert tab.kind == MASS
        assert tab.total == pytest.approx(1.0, abs=1e-12)
        assert math.fsum(tab.weights.tolist()) == pytest.approx(1.0, abs=1e-12)

    def test_space_section_lattice_spacing(self):
        f = solve(TransportProblem(1.0, 0.5, TimeScale.uniform(0.25, 2)))
        tab = space_section(f, 0.5)
        # c = 1/2 per step
        np.testing.assert_allclose(tab.locations, [0.0, 0.5, 1.0])
        np.testing.assert_allclose(tab.weights, [0.125, 0.25, 0.125])

    def test_time_section_kinds(self, mixed_field):
        assert time_section(mixed_field, 0).kind == MIXED
        f = solve(TransportProblem(1.0, 1.0, TimeScale.interval(3.0)))
        assert time_section(f, 0).kind == DENSITY
        f = solve(TransportProblem(1.0, 1.0, TimeScale.uniform(0.25, 8)))
        tab = time_section(f, 1)
        assert tab.kind == MASS
        assert len(tab) == 8
        assert math.fsum(tab.weights.tolist()) == pytest.approx(tab.total, rel=1e-14)

    def test_time_section_total_and_residual(self, mixed_field):
        tab = time_section(mixed_field, 1)
        assert tab.total + tab.tail_bound == pytest.approx(1.0, abs=1e-12)

    def test_window(self, mixed_field):
        with pytest.raises(IndexOutOfWindow):
            time_section(mixed_field, 10_000)

    def test_negative_data_refused(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            f = solve(TransportProblem(1.0, 1.0, TimeScale.interval(1.0), initial={0: -1.0}))
        with pytest.raises(NegativeDataError):
            time_section(f, 0)
        with pytest.raises(NegativeDataError):
            space_section(f, 1.0)

    def test_csv_round_trip(self, mixed_field):
        tab = time_section(mixed_field, 2)
        back = DistributionTable.from_csv(tab.to_csv())
        np.testing.assert_array_equal(back.locations, tab.locations)
        np.testing.assert_array_equal(back.weights, tab.weights)
        assert back.kind == tab.kind and back.total == tab.total
