"""Probability families generated by the semidiscrete transport equation.

Everything here is closed-form and independent of :mod:`semitransport.transport`,
so these functions double as oracles for the solver:

* space sections on a continuous time line are Poisson pmfs, time sections are
  Erlang densities (exponential for the first branch);
* on a uniform discrete time scale with step ``p`` (and ``k = mu_x = A = 1``)
  space sections are binomial and time sections are negative binomial
  (geometric for the first branch);
* on a heterogeneous discrete scale the solution is a sum over success/failure
  patterns, see :func:`heterogeneous_solution`;
* on the stop-start scale ``[0, 1/2] U [1, 3/2] U ...`` the first four
  branches have explicit formulas, see :func:`stopstart_branch`.

Negative binomial convention: ``negbinomial_pmf(m, p, n_max)`` lists
``p * C(n, m) (1-p)^(n-m) p^m`` for ``n = m..n_max``.  This is the time section
of branch ``m`` weighted by the step ``p``, i.e. the probability that the
``(m+1)``-th success happens on trial ``n+1``.  It is *not* the textbook
"failures before the r-th success" parametrisation.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import BranchUnavailable, TooLarge

MASS = "mass"
DENSITY = "density-sampled"
MIXED = "mixed"


@dataclass(frozen=True)
class DistributionTable:
    """A section of a solution (or a closed-form family) as weighted points.

    ``weights`` is the probability attributed to each location: ``mu * u`` at
    atoms, and ``u`` times a trapezoid weight at density samples.  ``total``
    is the exact mass (sum of atoms plus exact integrals of the continuous
    parts), so it may differ slightly from ``weights.sum()`` for sampled
    densities.
    """

    locations: np.ndarray
    weights: np.ndarray
    kind: str = MASS
    total: float | None = None
    tail_bound: float = 0.0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        loc = np.asarray(self.locations, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if loc.shape != w.shape:
            raise ValueError("locations and weights must have the same length")
        object.__setattr__(self, "locations", loc)
        object.__setattr__(self, "weights", w)
        if self.total is None:
            object.__setattr__(self, "total", math.fsum(w.tolist()))

    def __len__(self) -> int:
        return len(self.locations)

    def as_dict(self) -> dict[float, float]:
        return dict(zip(self.locations.tolist(), self.weights.tolist()))

    def is_dynamic_pdf(self, tol: float = 1e-8) -> bool:
        return bool(np.all(self.weights >= -1e-14)) and abs(self.total - 1.0) <= tol + self.tail_bound

    def to_csv(self) -> str:
        buf = io.StringIO()
        params = " ".join(f"{k}={_fmt(v)}" for k, v in self.params.items())
        buf.write(
            f"# kind={self.kind} total={_fmt(self.total)} "
            f"tail_bound={_fmt(self.tail_bound)}{' ' + params if params else ''}\n"
        )
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["location", "weight"])
        for x, y in zip(self.locations.tolist(), self.weights.tolist()):
            w.writerow([_fmt(x), _fmt(y)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "DistributionTable":
        lines = text.splitlines()
        meta = {}
        if lines and lines[0].startswith("#"):
            for tok in lines[0][1:].split():
                key, _, val = tok.partition("=")
                meta[key] = val
            lines = lines[1:]
        rows = list(csv.reader(lines))[1:]
        loc = [float(r[0]) for r in rows]
        wts = [float(r[1]) for r in rows]
        kind = meta.pop("kind", MASS)
        total = float(meta.pop("total")) if "total" in meta else None
        tail = float(meta.pop("tail_bound", 0.0))
        return cls(np.array(loc), np.array(wts), kind, total, tail, meta)


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v)) if not math.isfinite(v) else f"{float(v):.17g}"
    return str(v)


# -- continuous time: Poisson / Erlang ----------------------------------------

def poisson_weights(lam: float, m_max: int) -> np.ndarray:
    """``e^-lam lam^m / m!`` for ``m = 0..m_max``; recurrence, log-space for big lam."""
    if lam < 0:
        raise ValueError("rate*time must be nonnegative")
    out = np.zeros(m_max + 1)
    if lam == 0:
        out[0] = 1.0
        return out
    if lam < 500:
        term = math.exp(-lam)
        for m in range(m_max + 1):
            out[m] = term
            term *= lam / (m + 1)
    else:
        log_lam = math.log(lam)
        for m in range(m_max + 1):
            out[m] = math.exp(-lam + m * log_lam - math.lgamma(m + 1))
    return out


def poisson_pmf(rate_time: float, m_max: int) -> DistributionTable:
    w = poisson_weights(rate_time, m_max)
    tail = max(0.0, 1.0 - math.fsum(w.tolist()))
    return DistributionTable(
        np.arange(m_max + 1, dtype=float), w, MASS, None, tail, {"family": "poisson", "lambda": rate_time}
    )


def erlang_density(k: float, x: int, t: float) -> float:
    """Density ``k^(x+1) t^x e^(-k t) / x!`` (exponential for ``x = 0``)."""
    if not k > 0:
        raise ValueError("k must be positive")
    if x < 0 or int(x) != x:
        raise ValueError("shape index x must be a nonnegative integer")
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return k if x == 0 else 0.0
    return math.exp((x + 1) * math.log(k) + x * math.log(t) - k * t - math.lgamma(x + 1))


# -- uniform discrete time: binomial / negative binomial -------------------------

def _binom_term(n: int, m: int, p: float) -> float:
    return math.comb(n, m) * (1.0 - p) ** (n - m) * p**m


def binomial_pmf(n: int, p: float) -> DistributionTable:
    if n < 0:
        raise ValueError("n must be nonnegative")
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    w = np.array([_binom_term(n, m, p) for m in range(n + 1)])
    return DistributionTable(
        np.arange(n + 1, dtype=float), w, MASS, None, 0.0, {"family": "binomial", "n": n, "p": p}
    )


def negbinomial_pmf(m: int, p: float, n_max: int) -> DistributionTable:
    """Trials-indexed negative binomial, ``p*C(n,m)(1-p)^(n-m)p^m`` for ``n = m..n_max``."""
    if m < 0 or n_max < m:
        raise ValueError("need 0 <= m <= n_max")
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    w = np.array([p * _binom_term(n, m, p) for n in range(m, n_max + 1)])
    tail = max(0.0, 1.0 - math.fsum(w.tolist()))
    return DistributionTable(
        np.arange(m, n_max + 1, dtype=float), w, MASS, None, tail,
        {"family": "negbinomial", "m": m, "p": p},
    )


# -- heterogeneous discrete time ----------------------------------------------------

@dataclass(frozen=True)
class HeterogeneousTrialPlan:
    """Per-trial success probabilities; trial ``i`` uses graininess ``p_i``."""

    probs: tuple[float, ...]
    k: float = 1.0
    mu_x: float = 1.0

    def __post_init__(self):
        probs = tuple(float(p) for p in self.probs)
        object.__setattr__(self, "probs", probs)
        for i, p in enumerate(probs, 1):
            if not 0.0 < p < 1.0:
                raise ValueError(f"p_{i}={p} must lie strictly inside (0, 1)")
            if not 1.0 - p * self.k / self.mu_x > 0.0:
                raise ValueError(f"p_{i}={p} violates 1 - p*k/mu_x > 0")

    def __len__(self) -> int:
        return len(self.probs)

    @property
    def stay(self) -> np.ndarray:
        """Per-trial weights of staying on the current branch."""
        return 1.0 - np.asarray(self.probs) * self.k / self.mu_x

    @property
    def move(self) -> np.ndarray:
        """Per-trial weights of moving one branch up."""
        return np.asarray(self.probs) * self.k / self.mu_x

    @classmethod
    def harmonic(cls, n: int) -> "HeterogeneousTrialPlan":
        return cls(tuple(1.0 / (i + 1) for i in range(1, n + 1)))


def _check_mn(plan: HeterogeneousTrialPlan, m: int, n: int) -> None:
    if not (0 <= m <= n and n <= len(plan)):
        raise IndexError(f"need 0 <= m <= n <= {len(plan)}, got m={m}, n={n}")


def heterogeneous_table(plan: HeterogeneousTrialPlan, n: int, A: float = 1.0) -> np.ndarray:
    """Row ``u(0..n, after n trials)`` by the two-term recurrence."""
    if not 0 <= n <= len(plan):
        raise IndexError(f"n={n} outside 0..{len(plan)}")
    row = np.zeros(n + 1)
    row[0] = A
    K, L = plan.stay, plan.move
    for j in range(n):
        # descending m so row[m-1] is still the previous step's value
        for m in range(j + 1, 0, -1):
            row[m] = K[j] * row[m] + L[j] * row[m - 1]
        row[0] = K[j] * row[0]
    return row


def heterogeneous_solution(plan: HeterogeneousTrialPlan, m: int, n: int, A: float = 1.0) -> float:
    """Value on branch ``m`` after ``n`` heterogeneous steps (O(n*m) recurrence)."""
    _check_mn(plan, m, n)
    return float(heterogeneous_table(plan, n, A)[m])


MAX_ENUMERATION = 14


def heterogeneous_oracle(plan: HeterogeneousTrialPlan, m: int, n: int, A: float = 1.0) -> float:
    """Literal sum over all arrangements of ``n-m`` stays and ``m`` moves."""
    if n > MAX_ENUMERATION:
        raise TooLarge(f"enumeration limited to n <= {MAX_ENUMERATION}, got {n}")
    _check_mn(plan, m, n)
    K, L = plan.stay, plan.move
    terms = []
    for moves in itertools.combinations(range(n), m):
        chosen = set(moves)
        terms.append(math.prod(float(L[i]) if i in chosen else float(K[i]) for i in range(n)))
    return A * math.fsum(terms)


def first_success_pmf(plan: HeterogeneousTrialPlan, k_max: int) -> np.ndarray:
    """``f(k) = p_k * u(0, after k-1 trials)`` for ``k = 1..k_max``."""
    if k_max > len(plan):
        raise IndexError("plan too short")
    K = plan.stay
    survive = np.concatenate([[1.0], np.cumprod(K[: k_max - 1])])
    return np.asarray(plan.probs[:k_max]) * survive


# -- stop-start scale ---------------------------------------------------------------

def stopstart_branch(x: int, n: int, t: float) -> float:
    """Explicit branches ``u(x, t)`` for ``x <= 3`` on ``U [i, i+1/2]``, ``A = k = mu_x = 1``.

    ``n`` is the index of the continuous part containing ``t``.
    """
    if x < 0:
        raise ValueError("branch index must be nonnegative")
    if x > 3:
        raise BranchUnavailable(f"no explicit formula for branch x={x}; use the solver")
    if not (n - 1e-12 <= t <= n + 0.5 + 1e-12):
        raise ValueError(f"t={t} is not in the continuous part [{n}, {n + 0.5}]")
    if x == 0:
        poly = 1.0
    elif x == 1:
        poly = 2 * t + n
    elif x == 2:
        poly = 4 * t**2 + 4 * n * t + (n**2 - 4 * n)
    else:
        poly = 8 * t**3 + 12 * n * t**2 + 6 * (n**2 - 4 * n) * t + (n**3 - 12 * n**2 + 16 * n)
    return poly / (math.factorial(x) * 2.0 ** (n + x)) * math.exp(n / 2 - t)


# -- convergence ---------------------------------------------------------------------

def total_variation(p: Sequence[float], q: Sequence[float]) -> float:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    size = max(len(p), len(q))
    p = np.pad(p, (0, size - len(p)))
    q = np.pad(q, (0, size - len(q)))
    return 0.5 * math.fsum(np.abs(p - q).tolist())


def poisson_limit_distance(n: int, rate: float) -> float:
    """TV distance between binomial(n, rate/n) and Poisson(rate).

    The Poisson tail beyond the compared support is added exactly (via its
    complement) so the result is the full distance.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if rate < 0 or rate > n:
        raise ValueError("need 0 <= rate <= n")
    if rate == 0:
        return 0.0
    p = rate / n
    binom = np.array([_binom_term(n, m, p) for m in range(n + 1)])
    m_max = max(n, int(rate + 40 * math.sqrt(rate) + 40))
    pois = poisson_weights(rate, m_max)
    head = total_variation(binom, pois[: n + 1])
    # beyond n the binomial is zero, so the distance there is the Poisson tail
    tail = math.fsum(pois[n + 1:].tolist())
    return head + 0.5 * tail
