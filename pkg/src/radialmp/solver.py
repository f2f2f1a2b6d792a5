"""Mountain-pass critical points of the discrete Euler functional.

Pipeline: mountain-pass geometry (rho from probe estimates, far point lambda*u0),
maximum along the segment 0 -> far point, descent on the Nehari set
(I restricted to {I'(u)u = 0} has the mountain-pass level as its infimum for the
model nonlinearities), then damped Newton polishing of I'(u) = 0.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, optimize

from .exponents import ProblemParams, admissible_pair
from .functional import EPS_REG, EnergyFunctional
from .grid import GridFunction, RadialGrid, WeightedSpace, derivative
from .nonlinearity import Nonlinearity
from .probe import Potentials, estimate_S0, estimate_Sinf, estimate_window


class SolverError(RuntimeError):
    pass


class GeometryError(SolverError):
    """No far point with negative energy was found: the problem is mis-specified."""


class NonConvergence(SolverError):
    def __init__(self, message, report: "SolutionReport | None" = None):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class GridSpec:
    rMin: float = 1e-4
    rMax: float = 1e3
    nodesPerDecade: int = 64
    maxSpacing: float | None = None

    def build(self, N: int) -> RadialGrid:
        return RadialGrid.geometric(self.rMin, self.rMax, self.nodesPerDecade, N, self.maxSpacing)


@dataclass(frozen=True)
class SolverConfig:
    grid: GridSpec
    nonlinearity: Nonlinearity
    maxIterations: int = 200
    residualTol: float = 1e-8
    pathResolution: int = 32
    seed: int = 0
    initialAmplitude: float = 2.0
    restarts: int = 3
    probeStarts: int = 8

    def __post_init__(self):
        if not self.residualTol > 0:
            raise ValueError("residualTol must be positive")
        if self.pathResolution < 8:
            raise ValueError("pathResolution must be at least 8")
        if self.maxIterations < 1:
            raise ValueError("maxIterations must be positive")


# ---------------------------------------------------------------------------
# mountain-pass geometry
# ---------------------------------------------------------------------------

T0 = 1.0
LAMBDA_MAX = 1e6


def reference_bump(grid: RadialGrid, amplitude=2.0, centre=1.0, half_width=0.5) -> np.ndarray:
    """Smooth nonnegative bump (1 - x^2)^2 scaled to ``amplitude``, x = (r - centre)/half_width."""
    x = (grid.nodes - centre) / half_width
    u = np.where(np.abs(x) < 1, amplitude * (1 - x * x) ** 2, 0.0)
    u[-1] = 0.0
    if np.count_nonzero(u >= T0) < 2:
        raise GeometryError("reference bump is not resolved by the grid near r = 1")
    return u


@dataclass
class MPGeometry:
    rho: float
    infValue: float
    farPoint: GridFunction
    lam: float
    c1: float
    c2: float
    S0: float
    Sinf: float
    Sannulus: float

    def g(self, rho, p, q1, q2):
        return rho ** p / p - self.c1 * rho ** q1 - self.c2 * rho ** q2


def _rho_max(c1, c2, p, q1, q2) -> float:
    # g'(rho) = rho^(p-1) (1 - q1 c1 rho^(q1-p) - q2 c2 rho^(q2-p)); root of the bracket in log rho
    def h(x):
        rho = math.exp(x)
        return 1 - q1 * c1 * rho ** (q1 - p) - q2 * c2 * rho ** (q2 - p)

    lo, hi = -1.0, 1.0
    while h(lo) <= 0:
        lo *= 2
    while h(hi) >= 0:
        hi *= 2
    return math.exp(optimize.brentq(h, lo, hi, xtol=1e-14))


def mp_geometry(pots: Potentials, nl: Nonlinearity, params: ProblemParams, grid: RadialGrid,
                fun: EnergyFunctional | None = None, amplitude=2.0, seed=0, starts=8) -> MPGeometry:
    """rho maximising g(rho) = rho^p/p - c1 rho^q1 - c2 rho^q2, and a far point with I < 0.

    c1 = (S0(q1, R1) + S(q1; R1 < r < R2)) / q1 and c2 = Sinf(q2, R2) / q2, using
    F(t) <= min(t^q1/q1, t^q2/q2) for all three kinds.  The estimates are lower
    bounds of the discrete suprema, so rho is a numerical certificate only.
    """
    p, q1, q2 = params.p, nl.q1, nl.q2
    fun = fun or EnergyFunctional.build(grid, pots, p, nl)
    space = fun.space
    S0 = estimate_S0(q1, params.R1, pots, params, grid, starts, seed, space=space).value
    Sinf = estimate_Sinf(q2, params.R2, pots, params, grid, starts, seed, space=space).value
    Sann = 0.0
    if params.R1 < params.R2:
        Sann = estimate_window(q1, (params.R1, params.R2), pots, params, grid, starts, seed, space=space).value
    c1, c2 = (S0 + Sann) / q1, Sinf / q2
    rho = _rho_max(c1, c2, p, q1, q2)
    inf_value = rho ** p / p - c1 * rho ** q1 - c2 * rho ** q2

    u0 = reference_bump(grid, amplitude)
    lam = 1.0
    while lam <= LAMBDA_MAX:
        u = lam * u0
        if fun.energy(u) < 0 and fun.norm_p(u) ** (1 / p) > rho:
            return MPGeometry(rho, inf_value, GridFunction(grid, u), lam, c1, c2, S0, Sinf, Sann)
        lam *= 2
    raise GeometryError(f"no far point with negative energy for lambda <= {LAMBDA_MAX:g}")


# ---------------------------------------------------------------------------
# Nehari descent
# ---------------------------------------------------------------------------


class NehariProblem:
    """I(tau(w) w) on the free nodes, in Cholesky coordinates of the p = 2 norm."""

    def __init__(self, fun: EnergyFunctional):
        self.fun = fun
        self.n = fun.grid.n
        self.free = self.n - 1
        diag, off = fun.space.quadratic_form()
        ab = np.zeros((2, self.free))
        ab[1] = diag[: self.free]
        ab[0, 1:] = off[: self.free - 1]
        self.U = linalg.cholesky_banded(ab, lower=False)
        self.L = np.zeros_like(self.U)
        self.L[0] = self.U[1]
        self.L[1, :-1] = self.U[0, 1:]

    def full(self, w):
        return np.append(w, 0.0)

    def to_w(self, v):
        return linalg.solve_banded((0, 1), self.U, v)

    def to_v(self, w):
        out = self.U[1] * w
        out[:-1] += self.U[0, 1:] * w[1:]
        return out

    def tau(self, w_full) -> float | None:
        fun = self.fun
        Phi = fun.norm_p(w_full)
        if Phi <= 0 or not np.any((w_full > 0) & (fun.mK > 0)):
            return None
        nl, p = fun.nl, fun.p
        if nl.kind == "purePower":
            P = float(np.dot(fun.mK, np.maximum(w_full, 0) ** nl.q1))
            return (Phi / P) ** (1 / (nl.q1 - p))

        def h(x):
            t = math.exp(x)
            return float(np.dot(fun.mK, nl.f(t * w_full) * w_full)) / t ** (p - 1) - Phi

        lo, hi = -1.0, 1.0
        while h(lo) >= 0:
            lo *= 2
            if lo < -700:
                return None
        while h(hi) <= 0:
            hi *= 2
            if hi > 700:
                return None
        return math.exp(optimize.brentq(h, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps))

    def project(self, w_full) -> np.ndarray:
        t = self.tau(w_full)
        if t is None:
            raise SolverError("direction has no positive part carrying K mass; cannot project to the Nehari set")
        return t * w_full

    def value_and_grad(self, v):
        w = self.full(self.to_w(v))
        t = self.tau(w)
        if t is None:
            return 1e300, np.zeros_like(v)
        u = t * w
        g = t * self.fun.gradient(u)[: self.free]
        return self.fun.energy(u), linalg.solve_banded((1, 0), self.L, g)

    def descend(self, u_full, max_iter) -> tuple[np.ndarray, int]:
        v = self.to_v(u_full[: self.free])
        v = v / np.linalg.norm(v)
        res = optimize.minimize(self.value_and_grad, v, jac=True, method="L-BFGS-B",
                                options={"maxiter": max_iter, "ftol": 1e-15, "gtol": 1e-14, "maxcor": 30})
        return self.project(self.full(self.to_w(res.x))), int(res.nit)


# ---------------------------------------------------------------------------
# Newton polish
# ---------------------------------------------------------------------------


def values_from_increments(d: np.ndarray) -> np.ndarray:
    """Nodal values with u_n = 0 and u_{i+1} - u_i = d_i."""
    u = np.zeros(d.size + 1)
    u[:-1] = -np.cumsum(d[::-1])[::-1]
    return u


def _newton(fun: EnergyFunctional, u: np.ndarray, tol: float, max_iter: int, single_step=False):
    """Damped Newton on I'(u) = 0 with element increments as the unknowns.

    Slopes are taken from the increments themselves rather than from
    differences of nodal values.  For p < 2 the flux |u'|^(p-1) would otherwise
    amplify rounding of nearly equal nodal values into a residual floor in flat
    regions.  Returns (u, increments, residual history).
    """
    h = fun.grid.h
    free = fun.grid.n - 1
    d = np.diff(u)
    u = values_from_increments(d)
    history = []
    eps = EPS_REG

    def res(dd):
        uu = values_from_increments(dd)
        return uu, fun.gradient(uu, dd / h)[:free]

    u, r = res(d)
    for it in range(max_iter):
        rn = float(np.max(np.abs(r)))
        history.append(rn)
        if rn <= tol and not single_step:
            break
        diag, off = fun.hessian_bands(u, eps, d / h)
        ab = np.zeros((3, free))
        ab[0, 1:] = off[: free - 1]
        ab[1] = diag[:free]
        ab[2, :-1] = off[: free - 1]
        try:
            du = linalg.solve_banded((1, 1), ab, -r)
        except (linalg.LinAlgError, ValueError):
            break
        if not np.all(np.isfinite(du)):
            break
        dd = np.diff(np.append(du, 0.0))
        merit = np.linalg.norm(r)
        lam, accepted = 1.0, False
        while lam > 1e-10:
            ut, rt = res(d + lam * dd)
            if np.linalg.norm(rt) < (1 - 1e-4 * lam) * merit:
                d, u, r, accepted = d + lam * dd, ut, rt, True
                break
            lam /= 2
        eps = max(eps * 1e-2, 1e-30)  # anneal the Hessian regularisation
        if single_step or not accepted:
            history.append(float(np.max(np.abs(r))))
            break
    else:
        history.append(float(np.max(np.abs(r))))
    return u, d, history


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------


@dataclass
class SolutionReport:
    profile: GridFunction
    energy: float
    residualNorm: float
    residualNodal: float
    nehariGap: float
    normP: float
    negativePartNorm: float
    nonnegative: bool
    rho: float
    infValue: float
    farLambda: float
    pathMaxEnergy: float
    decayFitOrigin: float
    decayFitInfinity: float
    decayPredOrigin: float
    decayPredInfinity: float
    verified: bool
    converged: bool
    iterations: dict = field(default_factory=dict)
    residualHistory: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "converged": self.converged,
            "verified": self.verified,
            "energy": self.energy,
            "residualNorm": self.residualNorm,
            "residualNodal": self.residualNodal,
            "nehariGap": self.nehariGap,
            "normP": self.normP,
            "negativePartNorm": self.negativePartNorm,
            "nonnegative": self.nonnegative,
            "maxValue": float(np.max(self.profile.values)),
            "rho": self.rho,
            "infValue": self.infValue,
            "farLambda": self.farLambda,
            "pathMaxEnergy": self.pathMaxEnergy,
            "decayFitOrigin": self.decayFitOrigin,
            "decayFitInfinity": self.decayFitInfinity,
            "decayPredOrigin": self.decayPredOrigin,
            "decayPredInfinity": self.decayPredInfinity,
            "nodes": self.profile.grid.n,
            "iterations": dict(self.iterations),
            "residualHistory": list(self.residualHistory),
            "notes": list(self.notes),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def profile_csv(self) -> str:
        return self.profile.to_csv({"du": derivative(self.profile).values})


def _decay_fit(grid: RadialGrid, u: np.ndarray, side: str) -> float:
    r = grid.nodes
    logr = np.log(r)
    span = logr[-1] - logr[0]
    if side == "origin":
        sel = logr <= logr[0] + 0.1 * span
    else:
        sel = (logr >= logr[-1] - 0.1 * span) & (np.arange(r.size) < r.size - 1)
    sel &= u > 1e-300
    if np.count_nonzero(sel) < 3:
        return float("nan")
    return float(np.polyfit(logr[sel], np.log(u[sel]), 1)[0])


def solve(config: SolverConfig, pots: Potentials, params: ProblemParams,
          grid: RadialGrid | None = None, check_admissible: bool = True) -> SolutionReport:
    nl = config.nonlinearity
    if check_admissible:
        adm = admissible_pair(params, nl.q1, nl.q2, existence=True)
        if not adm:
            raise ValueError("exponents are not admissible: " + "; ".join(adm.diagnosis))
    grid = grid or config.grid.build(params.N)
    space = WeightedSpace.build(grid, pots.A, pots.V, pots.K)
    fun = EnergyFunctional(space, params.p, nl)
    p = fun.p
    tol = config.residualTol
    unverified = math.isinf(tol)

    geo = mp_geometry(pots, nl, params, grid, fun, config.initialAmplitude, config.seed, config.probeStarts)

    # maximum of I along the segment 0 -> far point
    ts = np.linspace(0.0, 1.0, config.pathResolution)
    far = geo.farPoint.values
    path_energy = np.array([fun.energy(t * far) for t in ts])
    k = int(np.argmax(path_energy))
    u = ts[k] * far

    neh = NehariProblem(fun)
    u = neh.project(u)
    rng = np.random.default_rng(config.seed)
    best_u, best_E = u, fun.energy(u)
    descent_iters = 0
    for attempt in range(config.restarts + 1):
        start = best_u
        if attempt > 0:
            # local perturbation of the current best, then descend again
            bump = 1 + 1e-3 * rng.standard_normal(best_u.size)
            start = neh.project(np.abs(best_u * bump))
        cand, nit = neh.descend(start, config.maxIterations * 10)
        descent_iters += nit
        E = fun.energy(cand)
        if E < best_E - 1e-14 * abs(best_E):
            improvement = best_E - E
            best_u, best_E = cand, E
            if attempt > 0 and improvement <= 1e-12 * abs(E):
                break
        elif attempt > 0:
            break
    u = best_u

    u, incr, hist = _newton(fun, u, tol, config.maxIterations, single_step=unverified)

    free = grid.n - 1
    residual = float(np.max(np.abs(fun.gradient(u, incr / grid.h)[:free])))
    residual_nodal = float(np.max(np.abs(fun.gradient(u)[:free])))
    neg = np.minimum(u, 0.0)
    neg_norm = fun.norm_p(neg) ** (1 / p)
    nonneg = bool(np.min(u) >= -1e-12)
    if nonneg:
        u = np.maximum(u, 0.0)
    nP = fun.norm_p(u)
    E = fun.energy(u)
    gap = fun.nehari_gap(u)
    nu0 = -(params.N + params.a0 - p) / p
    nuI = -(params.N + params.aInf - p) / p
    converged = (not unverified) and residual <= tol
    notes = []
    verified = converged and nonneg and E > 0 and gap <= tol * nP and np.max(u) > 0
    if unverified:
        notes.append("residual tolerance is infinite; returned after one polish step without verification")
    report = SolutionReport(
        profile=GridFunction(grid, u), energy=E, residualNorm=residual, residualNodal=residual_nodal,
        nehariGap=gap, normP=nP,
        negativePartNorm=float(neg_norm), nonnegative=nonneg, rho=geo.rho, infValue=geo.infValue,
        farLambda=geo.lam, pathMaxEnergy=float(path_energy[k]),
        decayFitOrigin=_decay_fit(grid, u, "origin"), decayFitInfinity=_decay_fit(grid, u, "infinity"),
        decayPredOrigin=nu0, decayPredInfinity=nuI, verified=bool(verified), converged=bool(converged),
        iterations={"descent": descent_iters, "newton": len(hist) - 1}, residualHistory=hist, notes=notes,
    )
    if not unverified and not converged:
        raise NonConvergence(f"residual {residual:.3e} above tolerance {tol:.3e} after polishing", report)
    return report
