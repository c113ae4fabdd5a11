"""Reference computations that share no code with the exact solver.

Used by the test-suite and by ``semitransport selftest``.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Sequence

import numpy as np

from .timescale import TimeScale


def rk4_reference(
    scale: TimeScale,
    k: float,
    mu_x: float,
    initial: dict[int, float],
    times: Sequence[float],
    m_max: int,
    h: float = 1e-4,
) -> np.ndarray:
    """Integrate the truncated ODE chain with classical RK4 on every interval.

    Gaps are crossed with the forward-difference update written out densely.
    The chain only couples ``m`` to ``m - 1``, so truncating above ``m_max``
    does not perturb the retained branches.  Returns ``u[i, m]`` for each
    requested time (sorted) and ``m = 0..m_max``.
    """
    kappa = k / mu_x
    y = np.zeros(m_max + 1)
    for m, c in initial.items():
        if 0 <= m <= m_max:
            y[m] = c
    wanted = sorted(float(t) for t in times)
    out = np.full((len(wanted), m_max + 1), np.nan)

    def rhs(v):
        d = -kappa * v
        d[1:] += kappa * v[:-1]
        return d

    def record(t, v):
        for i, w in enumerate(wanted):
            if abs(w - t) <= 1e-12:
                out[i] = v

    comps = scale.components
    for ci, c in enumerate(comps):
        t = c.start
        record(t, y)
        stops = [w for w in wanted if c.start + 1e-12 < w < c.end - 1e-12] + ([c.end] if not c.is_point else [])
        for stop in stops:
            n = max(1, math.ceil((stop - t) / h))
            dt = (stop - t) / n
            for _ in range(n):
                k1 = rhs(y)
                k2 = rhs(y + 0.5 * dt * k1)
                k3 = rhs(y + 0.5 * dt * k2)
                k4 = rhs(y + dt * k3)
                y = y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            t = stop
            record(t, y)
        if ci + 1 < len(comps):
            c_step = kappa * (comps[ci + 1].start - c.end)
            nxt = np.empty_like(y)
            for m in range(m_max + 1):
                below = y[m - 1] if m > 0 else 0.0
                nxt[m] = (1.0 - c_step) * y[m] + c_step * below
            y = nxt
    return out


def binomial_closed_form(A, k, mu_x, mu_t, m: int, n: int) -> Fraction | float:
    """``A C(n,m) (1 - k mu_t/mu_x)^(n-m) (k mu_t/mu_x)^m``; exact for Fraction inputs."""
    if m < 0 or m > n:
        return 0 * A
    c = k * mu_t / mu_x
    return A * math.comb(n, m) * (1 - c) ** (n - m) * c**m


def poisson_closed_form(A: float, k: float, m: int, t: float) -> float:
    """``A (k t)^m e^(-k t) / m!`` evaluated with mpmath at 40 digits."""
    import mpmath

    with mpmath.workdps(40):
        v = mpmath.mpf(A) * (mpmath.mpf(k) * t) ** m * mpmath.e ** (-mpmath.mpf(k) * t) / mpmath.factorial(m)
        return float(v)
