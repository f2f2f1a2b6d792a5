"""Cross-module invariant suites: exponent identities, pointwise and annulus bounds, nonlinearity audits."""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .exponents import alpha_star, alpha_star_branches, q_star
from .grid import GridFunction, RadialGrid, WeightedSpace, check_pointwise_bound
from .nonlinearity import KINDS, Nonlinearity, audit
from .potentials import AsymptoticProfile, PotentialExpr
from .probe import annulus_audit, annulus_bound


def random_exponent_tuples(count: int, rng: np.random.Generator):
    """(a, beta, p, N) with N in 3..8, p in (1, N), a in (p-N, p], beta in [0, 1]."""
    N = rng.integers(3, 9, size=count)
    p = 1 + (N - 1) * rng.uniform(1e-6, 1 - 1e-6, size=count)
    a = p - N * rng.uniform(0.0, 1.0, size=count)
    beta = rng.uniform(0, 1, size=count)
    return a, beta, p, N


FLOAT_RECHECK = 1e-13


def exponent_identity_audit(count: int = 1000, seed: int = 0, tol: float = 1e-12) -> dict:
    """Branch continuity of alpha* at beta = 1/p and q*(a, alpha*(a, beta), beta) = max{1, p*beta}.

    Maps are evaluated in floats; any tuple whose float error exceeds
    FLOAT_RECHECK is re-evaluated exactly on the rational value of its floats,
    which separates cancellation near N - p + a = 0 from a genuine failure.
    """
    rng = np.random.default_rng(seed)
    a, beta, p, N = random_exponent_tuples(count, rng)
    worst_cont = worst_id = worst_float = 0.0
    rechecked = 0
    for ai, bi, pi, Ni in zip(a.tolist(), beta.tolist(), p.tolist(), N.tolist()):
        first, second = alpha_star_branches(ai, 1 / pi, pi, Ni)
        gap = abs(first - second)
        err = abs(q_star(ai, alpha_star(ai, bi, pi, Ni), bi, pi, Ni) - max(1.0, pi * bi))
        worst_float = max(worst_float, err)
        if max(gap, err) > FLOAT_RECHECK:
            rechecked += 1
            fa, fb, fp = Fraction(ai), Fraction(bi), Fraction(pi)
            first, second = alpha_star_branches(fa, 1 / fp, fp, Ni)
            gap = float(abs(first - second))
            err = float(abs(q_star(fa, alpha_star(fa, fb, fp, Ni), fb, fp, Ni) - max(Fraction(1), fp * fb)))
        worst_cont = max(worst_cont, gap)
        worst_id = max(worst_id, err)
    return {"pass": worst_cont <= tol and worst_id <= tol, "tuples": count, "exactRechecks": rechecked,
            "maxBranchGap": worst_cont, "maxIdentityError": worst_id, "maxFloatError": worst_float}


def random_smooth_functions(grid: RadialGrid, count: int, rng: np.random.Generator, lo=None, hi=None):
    """Sums of a few Gaussian bumps in log r, times a smooth cutoff vanishing at rMax."""
    r = grid.nodes
    lr = np.log(r)
    lo = np.log(lo if lo is not None else r[0])
    hi = np.log(hi if hi is not None else r[-1])
    x = (r - r[0]) / (r[-1] - r[0])
    cutoff = np.where(x < 1, np.exp(1 - 1 / np.maximum(1 - x * x, 1e-300)), 0.0)
    out = []
    for _ in range(count):
        k = rng.integers(1, 5)
        u = np.zeros_like(r)
        for _ in range(k):
            c = rng.uniform(lo, hi)
            w = rng.uniform(0.2, 2.0)
            u += rng.uniform(-1, 1) * np.exp(-(((lr - c) / w) ** 2))
        u *= cutoff
        u[-1] = 0.0
        out.append(GridFunction(grid, u))
    return out


def pointwise_audit(grid: RadialGrid, A: PotentialExpr, profile: AsymptoticProfile, R0: float, p: float,
                    count: int = 100, seed: int = 0, slack: float = 1e-8) -> dict:
    rng = np.random.default_rng(seed)
    violations = 0
    worst = 0.0
    for u in random_smooth_functions(grid, count, rng):
        rep = check_pointwise_bound(u, A, profile, R0, p, slack)
        violations += rep.violations
        worst = max(worst, rep.maxRatio)
    return {"pass": violations == 0, "functions": count, "violations": violations, "maxRatio": worst}


def annulus_suite(grid: RadialGrid, A, V, K, params, q, s_values, annuli, count: int = 100,
                  seed: int = 0) -> dict:
    rng = np.random.default_rng(seed)
    funcs = random_smooth_functions(grid, count, rng)
    space = WeightedSpace.build(grid, A, V, K)
    violations, checks = 0, 0
    worst = 0.0
    for (r, R) in annuli:
        for s in s_values:
            b = annulus_bound(r, R, q, s, K, A, params, grid)
            for u in funcs:
                au = annulus_audit(u, b, r, R, q, space, params.p)
                checks += 1
                if not au.ok:
                    violations += 1
                if au.rhs > 0:
                    worst = max(worst, au.lhs / au.rhs)
    return {"pass": violations == 0, "checks": checks, "violations": violations, "maxRatio": worst}


def nonlinearity_suite(nls=None, p: float = 2.0, points: int = 100_000) -> dict:
    if nls is None:
        nls = [Nonlinearity(k, p + 1, p + 1 if k == "purePower" else p + 2) for k in KINDS]
    out = {}
    for nl in nls:
        a = audit(nl, points)
        out[nl.kind] = {"pass": a.ok, "f1": a.f1_ok, "f2": a.f2_ok, "growth": a.growth_ok,
                        "f1Worst": a.f1_worst, "growthWorst": a.growth_worst, "F_t0": a.F_at_t0}
    if any(nl.kind == "doublePowerMin" for nl in nls):
        nl = next(n for n in nls if n.kind == "doublePowerMin")
        below = float(nl.F(np.array([1.0]))[0])
        above = 1 / nl.q2 + (1.0 ** nl.q1 - 1) / nl.q1
        out["doublePowerMin"]["branchContinuity"] = below == above
        out["doublePowerMin"]["pass"] = out["doublePowerMin"]["pass"] and below == above
    return {"pass": all(v["pass"] for v in out.values()), "kinds": out}
