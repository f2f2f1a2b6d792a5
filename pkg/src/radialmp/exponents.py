"""Exponent maps and admissibility windows.

All maps are plain arithmetic, so they accept ``fractions.Fraction`` inputs and
then return exact rationals.  ``max`` is taken with Python semantics, which keeps
exactness for mixed Fraction/int arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .potentials import (INFINITY_CEILING, ORIGIN_FLOOR, PotentialExpr, ess_sup_ratio,
                         log_evaluate)


class WindowError(ValueError):
    """An exponent lies outside the window where the requested quantity is defined."""


def alpha_star_branches(a, beta, p, N):
    """The two affine branches of alpha*; the first is active for beta <= 1/p."""
    return p * beta - 1 - (p - 1) * N / p - a * beta + a / p, -(1 - beta) * N


def alpha_star(a, beta, p, N):
    """Threshold exponent: max{p*beta - 1 - (p-1)N/p - a*beta + a/p, -(1-beta)N}."""
    return max(*alpha_star_branches(a, beta, p, N))


def q_star(a, alpha, beta, p, N):
    """Upper (origin) or lower (infinity) critical exponent p(alpha - p*beta + N + a*beta)/(N - p + a)."""
    den = N - p + a
    if den <= 0:
        raise ValueError("q_star requires N - p + a > 0")
    return p * (alpha - p * beta + N + a * beta) / den


def casewise_decay_exponent(a, alpha, beta, p, N, q):
    """Decay exponent recomputed case by case in beta.

    Used by the tests to cross-check the single closed form of ``decay_rate``.
    """
    nu = (N - p + a) / p
    if p * beta <= 1:
        d = N * (p - 1) + p * (1 - p * beta + a * beta) - a
        e = (alpha - nu * (q - 1)) * p * N / d
        return (e + N) * d / (p * N)
    if beta < 1:
        return ((alpha - nu * (q - p * beta)) / (1 - beta) + N) * (1 - beta)
    return alpha - nu * (q - p)


def decay_rate(a, alpha, beta, p, N, q):
    return (N + a - p) / p * (q_star(a, alpha, beta, p, N) - q)


@dataclass(frozen=True)
class ProblemParams:
    N: int
    p: float
    a0: float
    aInf: float
    alpha0: float = 0.0
    beta0: float = 0.0
    alphaInf: float = 0.0
    betaInf: float = 0.0
    R1: float = 1.0
    R2: float = 1.0

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise ValueError("; ".join(problems))

    def problems(self) -> list[str]:
        out = []
        if int(self.N) != self.N or self.N < 3:
            out.append(f"N must be an integer >= 3, got {self.N}")
        if not 1 < self.p < self.N:
            out.append(f"p must lie in (1, N), got {self.p}")
        for name in ("a0", "aInf"):
            v = getattr(self, name)
            if not self.p - self.N < v <= self.p:
                out.append(f"{name}={float(v):.6g} outside (p-N, p] = ({float(self.p - self.N):g}, {float(self.p):g}]")
        for name in ("beta0", "betaInf"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                out.append(f"{name} must lie in [0, 1], got {v}")
        if not 0 < self.R1 <= self.R2:
            out.append(f"radii must satisfy 0 < R1 <= R2, got R1={self.R1}, R2={self.R2}")
        return out

    def with_(self, **kw) -> "ProblemParams":
        return replace(self, **kw)


def sobolev_exponents(params: ProblemParams):
    N, p = params.N, params.p
    return p * N / (N + params.a0 - p), p * N / (N + params.aInf - p)


def window_at_origin(params: ProblemParams):
    lo = max(1, params.p * params.beta0)
    hi = q_star(params.a0, params.alpha0, params.beta0, params.p, params.N)
    return lo, hi


def window_at_infinity(params: ProblemParams):
    return max(1, params.p * params.betaInf,
               q_star(params.aInf, params.alphaInf, params.betaInf, params.p, params.N))


def decay_rate_origin(params: ProblemParams, q1):
    lo, hi = window_at_origin(params)
    if not lo < q1 < hi:
        raise WindowError(f"q1={float(q1):.6g} outside the origin window ({float(lo):.6g}, {float(hi):.6g})")
    return decay_rate(params.a0, params.alpha0, params.beta0, params.p, params.N, q1)


def decay_rate_infinity(params: ProblemParams, q2):
    lo = window_at_infinity(params)
    if not q2 > lo:
        raise WindowError(f"q2={float(q2):.6g} not above the infinity bound {float(lo):.6g}")
    return decay_rate(params.aInf, params.alphaInf, params.betaInf, params.p, params.N, q2)


@dataclass(frozen=True)
class ExponentWindow:
    q1Lo: float
    q1Hi: float
    q2Lo: float
    delta0: Callable[[float], float]
    deltaInf: Callable[[float], float]

    @property
    def feasible(self) -> bool:
        return self.q1Lo < self.q1Hi

    def existence_window(self, p):
        """The q1 interval and q2 bound once q1, q2 > p is also imposed."""
        return max(self.q1Lo, p), self.q1Hi, max(self.q2Lo, p)


def exponent_window(params: ProblemParams) -> ExponentWindow:
    lo, hi = window_at_origin(params)
    return ExponentWindow(
        q1Lo=lo,
        q1Hi=hi,
        q2Lo=window_at_infinity(params),
        delta0=lambda q: decay_rate_origin(params, q),
        deltaInf=lambda q: decay_rate_infinity(params, q),
    )


@dataclass
class Admissibility:
    ok: bool
    diagnosis: list[str] = field(default_factory=list)

    def __bool__(self):
        return self.ok


def admissible_pair(params: ProblemParams, q1, q2, existence: bool = True) -> Admissibility:
    diag = []
    lo, hi = window_at_origin(params)
    if not lo < q1:
        diag.append(f"q1={float(q1):.6g} must exceed max(1, p*beta0)={float(lo):.6g}")
    if not q1 < hi:
        diag.append(f"q1={float(q1):.6g} must be below q*(a0, alpha0, beta0)={float(hi):.6g}")
    lo_inf = window_at_infinity(params)
    if not q2 > lo_inf:
        diag.append(f"q2={float(q2):.6g} must exceed max(1, p*betaInf, q*(aInf, alphaInf, betaInf))={float(lo_inf):.6g}")
    if existence:
        if not q1 > params.p:
            diag.append(f"q1={float(q1):.6g} must exceed p={float(params.p):.6g} for existence")
        if not q2 > params.p:
            diag.append(f"q2={float(q2):.6g} must exceed p={float(params.p):.6g} for existence")
    return Admissibility(not diag, diag)


# ---------------------------------------------------------------------------
# (alpha, beta) derivation by finiteness scans of the ess-sup ratio
# ---------------------------------------------------------------------------

SCAN_STEP = Fraction(1, 4)
SCAN_LIMIT = 32
SCAN_BETAS = (Fraction(0), Fraction(1, 4), Fraction(1, 2), Fraction(3, 4), Fraction(1))
SCAN_SAMPLES = 1200
# growth of log(ratio) over the last two decades that counts as divergence;
# catches slow power growth that never reaches the ess-sup threshold
TREND_TOL = 1e-3


def _finite(K, V, alpha, beta, interval):
    res = ess_sup_ratio(K, V, float(alpha), float(beta), interval, samples=SCAN_SAMPLES)
    if res.infinite:
        return False
    lo, hi = interval
    lo = ORIGIN_FLOOR if lo <= 0 else lo
    hi = INFINITY_CEILING if not math.isfinite(hi) else hi
    r = np.geomspace(lo, hi, SCAN_SAMPLES)
    lr = log_evaluate(K, r)
    if beta > 0:
        lr = lr - float(beta) * log_evaluate(V, r)
    lr = lr - float(alpha) * np.log(r)
    if np.any(np.isnan(lr)) or np.any(lr == np.inf):
        return False
    span = max(int(2 * SCAN_SAMPLES / math.log10(hi / lo)), 1)
    end = lr[:span + 1][::-1] if interval[0] <= 0 else lr[-span - 1:]
    return not end[-1] - end[0] > TREND_TOL


def scan_alpha(K: PotentialExpr, V: PotentialExpr, side: str, beta=0, R: float = 1.0,
               step=SCAN_STEP, limit=SCAN_LIMIT):
    """Best alpha on a grid of mesh ``step`` for which the ess-sup ratio is finite.

    At the origin larger alpha is better (supremum over finite alphas); at
    infinity smaller alpha is better.  Returns None when no grid value in
    [-limit, limit] gives a finite ratio.
    """
    n = int(limit / step)
    grid = [k * step for k in range(-n, n + 1)]
    if side == "origin":
        interval = (0.0, R)
        ordered = grid[::-1]
    elif side == "infinity":
        interval = (R, math.inf)
        ordered = grid
    else:
        raise ValueError("side must be 'origin' or 'infinity'")
    for alpha in ordered:
        if _finite(K, V, alpha, beta, interval):
            return alpha
    return None


@dataclass(frozen=True)
class DerivedPair:
    alpha: Fraction
    beta: Fraction
    bound: float


def derive_origin_pair(K, V, a0, p, N, R1=1.0) -> DerivedPair | None:
    """beta0 = 0 and the supremal alpha0 on the scan grid."""
    alpha = scan_alpha(K, V, "origin", 0, R1)
    if alpha is None:
        return None
    return DerivedPair(alpha, Fraction(0), q_star(a0, alpha, 0, p, N))


def derive_infinity_pair(K, V, aInf, p, N, R2=1.0, betas: Sequence = SCAN_BETAS) -> DerivedPair | None:
    """Pair minimising the infinity bound max{1, p*beta, q*} over a small beta ladder."""
    best = None
    for beta in betas:
        alpha = scan_alpha(K, V, "infinity", beta, R2)
        if alpha is None:
            continue
        bound = max(1, p * beta, q_star(aInf, alpha, beta, p, N))
        if best is None or bound < best.bound:
            best = DerivedPair(alpha, beta, bound)
    return best
