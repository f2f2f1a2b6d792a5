"""Numerical lower bounds for the embedding suprema S0(q, R) and Sinf(q, R).

S0(q, R) is the supremum of the integral of K|u|^q over the ball of radius R,
and Sinf(q, R) the same outside it, both over the unit sphere of X.  On the grid
both are maximisations of a diagonal functional J(u) = sum_i c_i |u_i|^q over
{||u|| = 1}, done here as unconstrained maximisation of the scale invariant
ratio J(u) / ||u||^q.

The ascent works in coordinates v = L^T u, where L L^T is the Cholesky factor of
the p = 2 norm matrix.  In these coordinates the p = q = 2 problem is a plain
Rayleigh quotient, which keeps L-BFGS well conditioned on strongly graded grids.
The outer node is pinned to zero (compact support); the inner node is free.
"""

from __future__ import annotations

import json
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, linalg, optimize

from .exponents import ProblemParams, WindowError, decay_rate_infinity, decay_rate_origin
from .grid import GridFunction, PointwiseConstants, RadialGrid, WeightedSpace, omega, pointwise_constants
from .potentials import AsymptoticProfile, PotentialExpr, evaluate

DEFAULT_STARTS = 8
MAX_ITER = 2000
REL_TOL = 1e-10
THREADS_ENV = "RADIALMP_THREADS"


class ProbeWarning(UserWarning):
    pass


def thread_cap(default: int | None = None) -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            return max(int(raw), 1)
        except ValueError:
            pass
    return default or min(8, os.cpu_count() or 1)


@dataclass(frozen=True)
class Potentials:
    A: PotentialExpr
    V: PotentialExpr
    K: PotentialExpr


@dataclass
class Estimate:
    value: float
    maximizer: GridFunction
    converged: bool
    iterations: int
    start: int


class EmbeddingProblem:
    """max J(u)/||u||^q on a fixed grid, window and exponent."""

    def __init__(self, space: WeightedSpace, p: float, q: float, interval):
        if q <= 1:
            raise ValueError("q must exceed 1")
        self.space = space
        self.grid = space.grid
        self.p, self.q = float(p), float(q)
        self.interval = interval
        self.free = self.grid.n - 1
        self.c = space.massK(interval)[: self.free]
        diag, off = space.quadratic_form()
        # upper banded Cholesky of the p = 2 norm matrix on the free nodes
        ab = np.zeros((2, self.free))
        ab[1] = diag[: self.free]
        ab[0, 1:] = off[: self.free - 1]
        self.chol = linalg.cholesky_banded(ab, lower=False)

    # u = U^{-1} v and grad_v = U^{-T} grad_u where U is the upper factor
    def to_u(self, v):
        return linalg.solve_banded((0, 1), self.chol, v)

    def to_v(self, u):
        U = self.chol
        out = U[1] * u
        out[:-1] += U[0, 1:] * u[1:]
        return out

    def _grad_to_v(self, g):
        lower = np.zeros_like(self.chol)
        lower[0] = self.chol[1]
        lower[1, :-1] = self.chol[0, 1:]
        return linalg.solve_banded((1, 0), lower, g)

    def full(self, u_free):
        return np.append(u_free, 0.0)

    def objective(self, u_free) -> float:
        return float(np.dot(self.c, np.abs(u_free) ** self.q))

    def norm_p(self, u_free) -> float:
        return self.space.norm_p(self.full(u_free), self.p)

    def ratio(self, u_free) -> float:
        return self.objective(u_free) / self.norm_p(u_free) ** (self.q / self.p)

    def _neg_log_ratio(self, v):
        u = self.to_u(v)
        J = self.objective(u)
        Phi = self.norm_p(u)
        if J <= 0 or Phi <= 0:
            return math.inf, np.zeros_like(v)
        gJ = self.c * self.q * np.abs(u) ** (self.q - 1) * np.sign(u)
        gPhi = self.space.norm_p_grad(self.full(u), self.p)[: self.free]
        g = gJ / J - (self.q / self.p) * gPhi / Phi
        return -(math.log(J) - (self.q / self.p) * math.log(Phi)), -self._grad_to_v(g)

    def normalize(self, u_free):
        return u_free / self.norm_p(u_free) ** (1 / self.p)

    def ascend(self, u0_free, max_iter=MAX_ITER, rel_tol=REL_TOL, start=0) -> Estimate:
        v = self.to_v(self.normalize(np.asarray(u0_free, dtype=float)))
        v /= np.linalg.norm(v)
        res = optimize.minimize(
            self._neg_log_ratio, v, jac=True, method="L-BFGS-B",
            options={"maxiter": max_iter, "ftol": rel_tol * 1e-2, "gtol": 1e-12, "maxcor": 20},
        )
        u = self.normalize(self.to_u(res.x))
        # L-BFGS minimises; its iterate never ends below the start, but guard the warm start anyway
        start_u = self.normalize(np.asarray(u0_free, dtype=float))
        if self.ratio(start_u) > self.ratio(u):
            u = start_u
        converged = bool(res.success) or res.status == 2  # 2: line search stalled at optimum precision
        if res.nit >= max_iter:
            converged = False
        return Estimate(self.ratio(u), GridFunction(self.grid, self.full(u)), converged, int(res.nit), start)


def _bump_starts(grid: RadialGrid, interval, starts: int, seed) -> list[np.ndarray]:
    lo = max(interval[0], grid.rMin)
    hi = min(interval[1], grid.rMax)
    log_r = np.log(grid.nodes[:-1])
    out = []
    for child in np.random.SeedSequence(seed).spawn(starts):
        rng = np.random.default_rng(child)
        centre = math.exp(rng.uniform(math.log(lo), math.log(hi)))
        width = rng.uniform(0.2, 1.5)
        u = np.exp(-(((log_r - math.log(centre)) / width) ** 2))
        u += 1e-3 * rng.standard_normal(u.size) * u.max()
        u = np.abs(u) + 1e-300
        out.append(u)
    return out


def _reduce(results: list[Estimate]) -> Estimate:
    # max value, ties broken by lowest start index
    return sorted(results, key=lambda e: (-e.value, e.start))[0]


def estimate_window(q, interval, pots: Potentials, params: ProblemParams, grid: RadialGrid,
                    starts=DEFAULT_STARTS, seed=0, warm: GridFunction | None = None,
                    threads=None, space: WeightedSpace | None = None) -> Estimate:
    space = space or WeightedSpace.build(grid, pots.A, pots.V, pots.K)
    prob = EmbeddingProblem(space, params.p, q, interval)
    if not np.any(prob.c > 0):
        raise ValueError(f"window {interval} contains no grid weight; refine or extend the grid")
    inits = _bump_starts(grid, interval, starts, seed)
    jobs = list(enumerate(inits))
    if warm is not None:
        jobs.append((len(inits), warm.values[:-1].copy()))
    workers = min(thread_cap(threads), len(jobs))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda j: prob.ascend(j[1], start=j[0]), jobs))
    else:
        results = [prob.ascend(u, start=i) for i, u in jobs]
    best = _reduce(results)
    if not best.converged:
        warnings.warn(f"ascent hit the iteration cap at window {interval}", ProbeWarning)
    return best


def estimate_S0(q, R, pots: Potentials, params: ProblemParams, grid: RadialGrid, starts=DEFAULT_STARTS,
                seed=0, warm=None, threads=None, space=None) -> Estimate:
    if R <= grid.rMin:
        raise ValueError("the grid must extend below R")
    return estimate_window(q, (0.0, R), pots, params, grid, starts, seed, warm, threads, space)


def estimate_Sinf(q, R, pots: Potentials, params: ProblemParams, grid: RadialGrid, starts=DEFAULT_STARTS,
                  seed=0, warm=None, threads=None, space=None) -> Estimate:
    if R >= grid.rMax:
        raise ValueError("the grid must extend beyond R")
    return estimate_window(q, (R, math.inf), pots, params, grid, starts, seed, warm, threads, space)


# ---------------------------------------------------------------------------
# decay study
# ---------------------------------------------------------------------------

SLOPE_TOL = 0.25
MONOTONE_TOL = 1e-6


@dataclass
class ProbeResult:
    side: str
    q: float
    radii: list
    estimates: list
    fittedSlope: float
    predictedSlope: float | None
    passed: bool
    monotone: bool
    warnings: list = field(default_factory=list)
    maximizers: list | None = None

    def to_dict(self) -> dict:
        return {
            "side": self.side,
            "q": self.q,
            "radii": list(self.radii),
            "estimates": list(self.estimates),
            "fittedSlope": self.fittedSlope,
            "predictedSlope": self.predictedSlope,
            "pass": self.passed,
            "monotone": self.monotone,
            "warnings": list(self.warnings),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_csv(self) -> str:
        rows = ["R,estimate"] + [f"{R!r},{e!r}" for R, e in zip(self.radii, self.estimates)]
        return "\n".join(rows) + "\n"


def decay_study(side: str, q, radii, pots: Potentials, params: ProblemParams, grid: RadialGrid,
                starts=DEFAULT_STARTS, seed=0, slope_tol=SLOPE_TOL, keep_maximizers=False,
                threads=None) -> ProbeResult:
    """Estimates along a radius ladder with warm starts, plus a log-log slope fit.

    Radii are processed from the smallest window to the largest (increasing R
    at the origin, decreasing R at infinity), each run warm started from the
    previous maximiser, so the estimates are monotone by construction.
    """
    radii = [float(R) for R in radii]
    if len(radii) < 2:
        raise ValueError("need at least two radii")
    if side not in ("origin", "infinity"):
        raise ValueError("side must be 'origin' or 'infinity'")
    d = np.diff(radii)
    if not (np.all(d > 0) or np.all(d < 0)):
        raise ValueError("radii must be strictly monotone")
    try:
        predicted = float(decay_rate_origin(params, q) if side == "origin" else decay_rate_infinity(params, q))
    except WindowError:
        predicted = None

    space = WeightedSpace.build(grid, pots.A, pots.V, pots.K)
    order = sorted(range(len(radii)), key=lambda i: radii[i], reverse=(side == "infinity"))
    est = [0.0] * len(radii)
    maxi = [None] * len(radii)
    msgs = []
    warm = None
    fn = estimate_S0 if side == "origin" else estimate_Sinf
    for i in order:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", ProbeWarning)
            e = fn(q, radii[i], pots, params, grid, starts, seed, warm, threads, space)
        msgs.extend(str(w.message) for w in caught)
        est[i], maxi[i], warm = e.value, e.maximizer, e.maximizer

    seq = [est[i] for i in order]
    monotone = all(b >= a * (1 - MONOTONE_TOL) for a, b in zip(seq, seq[1:]))
    x, y = np.log(radii), np.log(np.maximum(est, 1e-300))
    fitted = float(np.polyfit(x, y, 1)[0])
    if predicted is None:
        passed = False
    elif side == "origin":
        passed = monotone and fitted >= predicted - slope_tol
    else:
        passed = monotone and fitted <= predicted + slope_tol
    return ProbeResult(side, float(q), radii, est, fitted, predicted, bool(passed), monotone, msgs,
                       maxi if keep_maximizers else None)


# ---------------------------------------------------------------------------
# witness bumps
# ---------------------------------------------------------------------------


@dataclass
class WitnessFamily:
    side: str
    q: float
    radii: list
    members: list
    objectives: list

    @property
    def inf_objective(self) -> float:
        return float(min(self.objectives))


def _profile(s):
    out = np.zeros_like(s)
    inside = (s > 0) & (s < 1)
    out[inside] = (1 - s[inside] ** 2) ** 2
    return out


def witness_nonvanishing(side: str, q, radii, pots: Potentials, params: ProblemParams,
                         grid: RadialGrid) -> WitnessFamily:
    """Normalised bumps u_R(r) = phi(r/R) and their window objectives.

    Origin: phi supported in (0, 1), objective over the ball of radius R.
    Infinity: phi supported in (1, 2), objective outside that ball.
    """
    space = WeightedSpace.build(grid, pots.A, pots.V, pots.K)
    r = grid.nodes
    members, objs = [], []
    for R in radii:
        if side == "origin":
            vals = _profile(r / R)
            interval = (0.0, R)
        elif side == "infinity":
            vals = _profile(r / R - 1)
            interval = (R, math.inf)
        else:
            raise ValueError("side must be 'origin' or 'infinity'")
        vals[-1] = 0.0
        nrm = space.norm_p(vals, params.p)
        if nrm <= 0:
            raise ValueError(f"radius {R} is not resolved by the grid")
        vals = vals / nrm ** (1 / params.p)
        members.append(GridFunction(grid, vals))
        objs.append(float(np.dot(space.massK(interval), np.abs(vals) ** q)))
    return WitnessFamily(side, float(q), [float(R) for R in radii], members, objs)


# ---------------------------------------------------------------------------
# annulus bound
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AnnulusBound:
    Ctilde: float
    l: float
    t: float
    Knorm: float
    volume: float
    constants: PointwiseConstants


def annulus_volume(r, R, N) -> float:
    return omega(N) * (R ** N - r ** N) / N


def choose_t(s, q, p) -> float:
    t = (1 + s) / 2
    tp = t / (t - 1)
    if tp * q <= p:
        # shrink t toward 1 until t' q > p
        tp = 2 * p / q
        t = tp / (tp - 1)
    return t


def annulus_bound(r, R, q, s, K: PotentialExpr, A: PotentialExpr, params: ProblemParams,
                  grid: RadialGrid) -> AnnulusBound:
    """Constants of the annulus inequality

        int_{r<|x|<R} K|u|^q <= Ctilde ||K||_{L^s(annulus)} ||u||^(q - l p) (int_annulus |u|^p)^l.

    Ctilde = |annulus|^(1/t - 1/s) (M r^(-nu0))^(q - p/t'), with M the interior
    pointwise constant for R0 = R, t = (1+s)/2 and l = 1/t'.
    """
    if not 0 < r < R:
        raise ValueError("annulus needs 0 < r < R")
    if q <= 1 or s <= 1:
        raise ValueError("need q > 1 and s > 1")
    N, p = params.N, params.p
    t = choose_t(s, q, p)
    if not 1 < t < s:
        raise ValueError(f"no admissible t in (1, {s}) for q={q}, p={p}")
    tp = t / (t - 1)
    l = 1 / tp
    profile = AsymptoticProfile(params.a0, params.aInf, 1.0, 1.0)
    const = pointwise_constants(grid, A, profile, R, p)
    vol = annulus_volume(r, R, N)
    Ks, _ = integrate.quad(lambda x: float(evaluate(K, x)) ** s * x ** (N - 1), r, R, limit=200)
    Knorm = (omega(N) * Ks) ** (1 / s)
    Ct = vol ** (1 / t - 1 / s) * (const.M_int * r ** (-const.nu0)) ** (q - p / tp)
    return AnnulusBound(float(Ct), float(l), float(t), float(Knorm), float(vol), const)


@dataclass
class AnnulusAudit:
    lhs: float
    rhs: float

    @property
    def ok(self):
        return self.lhs <= self.rhs


def annulus_audit(u: GridFunction, bound: AnnulusBound, r, R, q, space: WeightedSpace, p) -> AnnulusAudit:
    """Both sides of the annulus inequality for one grid function."""
    lhs = float(np.dot(space.massK((r, R)), np.abs(u.values) ** q))
    g = u.grid
    lp = float(g.omega * np.dot(g.clipped_weights((r, R)), np.abs(u.values) ** p * g.jacobian))
    nrm = space.norm_p(u.values, p) ** (1 / p)
    rhs = bound.Ctilde * bound.Knorm * nrm ** (q - bound.l * p) * lp ** bound.l
    return AnnulusAudit(lhs, rhs)
