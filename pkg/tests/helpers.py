"""Shared fixtures data: potential profiles and the shooting oracle."""

import numpy as np
from scipy.integrate import solve_ivp

from radialmp.potentials import parse_potential

# (A, V, K, N, p, rMax) for the pointwise suite
PROFILES = [
    ("1", "1", "1", 3, 2.0, 1e3),
    ("min(r^(1/2), r^(3/2))", "min(1, r^(-3/2))", "max(r^(1/2), r^(3/2))", 4, 2.0, 1e3),
    ("max(r^-2, r^-1)", "exp(2*r)", "exp(r)", 4, 1.5, 50.0),
    ("1+r^2", "1", "1", 3, 2.5, 1e3),
    ("r^-1*(1+r)", "1", "1", 5, 3.0, 1e3),
]

# three triples for the eigenproblem oracle
TRIPLES = [
    ("1", "1", "1"),
    ("min(r^(1/2), r^(3/2))", "min(1, r^(-3/2))", "max(r^(1/2), r^(3/2))"),
    ("1+r", "1+r^2", "exp(-r)"),
]


def pots(A, V, K):
    from radialmp.probe import Potentials
    return Potentials(parse_potential(A), parse_potential(V), parse_potential(K, positive=True))


def _shoot(a, rmax=30.0, r0=1e-6):
    """u'' + (2/r)u' - u + u^3 = 0, u(0) = a, u'(0) = 0, by DOP853 from a series start."""
    def rhs(r, y):
        return [y[1], -2 / r * y[1] + y[0] - y[0] ** 3]

    u0 = a + (a - a ** 3) * r0 ** 2 / 6
    du0 = (a - a ** 3) * r0 / 3

    def crossing(r, y):
        return y[0]
    crossing.terminal = True

    def turning(r, y):
        return y[1]
    turning.terminal = True
    turning.direction = 1
    return solve_ivp(rhs, (r0, rmax), [u0, du0], method="DOP853", rtol=1e-12, atol=1e-14,
                     events=[crossing, turning], dense_output=True)


def shooting_ground_state(lo=4.0, hi=4.6, iters=60):
    """Bisect on u(0): overshoot crosses zero, undershoot turns back up.

    Returns (u_of_r, r_valid) where the two bracketing trajectories agree to 1e-6
    relative on r < r_valid.
    """
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if _shoot(mid).t_events[0].size:
            hi = mid
        else:
            lo = mid
    s_lo, s_hi = _shoot(lo), _shoot(hi)
    end = min(s_lo.t[-1], s_hi.t[-1])
    r = np.linspace(1e-3, end, 4000)
    a, b = s_lo.sol(r)[0], s_hi.sol(r)[0]
    bad = np.abs(a - b) > 1e-6 * np.max(a)
    r_valid = float(r[np.argmax(bad)]) if bad.any() else float(end)

    def u(x):
        return 0.5 * (s_lo.sol(x)[0] + s_hi.sol(x)[0])
    return u, r_valid, 0.5 * (lo + hi)
