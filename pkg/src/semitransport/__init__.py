"""Exact solutions of the transport equation on discrete space and time scales."""

from .distributions import (
    DistributionTable,
    HeterogeneousTrialPlan,
    binomial_pmf,
    erlang_density,
    heterogeneous_oracle,
    heterogeneous_solution,
    negbinomial_pmf,
    poisson_limit_distance,
    poisson_pmf,
    stopstart_branch,
)
from .timescale import Grid, TimeScale, check_regressivity, make_grid, parse_scale
from .transport import (
    Lattice,
    SolutionField,
    TransportProblem,
    propagate_interval,
    solve,
    space_section,
    step_scattered,
    time_section,
)

__version__ = "0.1.0"
