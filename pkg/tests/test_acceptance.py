"""Acceptance gate: one test and one printed pass/fail line per primary criterion.

Runtime budgets are part of each criterion and are asserted together with the
numerical tolerance.
"""

import time
from fractions import Fraction as Fr

import numpy as np
import pytest
from scipy import linalg

from conftest import ACCEPTANCE_LINES, config_path
from helpers import PROFILES, TRIPLES, pots, shooting_ground_state
from radialmp.config import load_config, resolve_params
from radialmp.exponents import ProblemParams, exponent_window, q_star
from radialmp.functional import EnergyFunctional
from radialmp.grid import RadialGrid, WeightedSpace
from radialmp.nonlinearity import KINDS, Nonlinearity
from radialmp.potentials import AsymptoticProfile, estimate_asymptotics, parse_potential
from radialmp.probe import decay_study, estimate_S0
from radialmp.solver import GridSpec, SolverConfig, solve
from radialmp import verify as suites


def record(key, title, ok, detail, elapsed, budget):
    ok = bool(ok) and elapsed < budget
    line = f"[{'PASS' if ok else 'FAIL'}] {key} {title}: {detail}; {elapsed:.2f}s (budget {budget:g}s)"
    ACCEPTANCE_LINES[key] = line
    print(line)
    assert ok, line


def test_ac01_exponent_identities():
    t = time.perf_counter()
    res = suites.exponent_identity_audit(10_000, seed=0, tol=1e-12)
    el = time.perf_counter() - t
    record("AC01", "exponent identities", res["pass"],
           f"{res['tuples']} tuples, branch gap {res['maxBranchGap']:.1e}, identity error "
           f"{res['maxIdentityError']:.1e} ({res['exactRechecks']} exact rechecks)", el, 1.0)


def test_ac02_example_one():
    t = time.perf_counter()
    res = resolve_params(load_config(config_path("ex1.json")))
    prm = res.params
    win = exponent_window(prm)
    el = time.perf_counter() - t
    p, N = 2, 4
    lo_closed = Fr(p * (2 * N + 1), 2 * N + 3 - 2 * p)
    inf_closed = Fr(p * (2 * N + 3), 2 * N + 1 - 2 * p)
    ok = (prm.a0 == Fr(3, 2) and prm.aInf == Fr(1, 2) and win.existence_window(prm.p)[0] == 2
          and win.q1Hi == lo_closed == Fr(18, 7) and win.q2Lo == inf_closed == Fr(22, 5))
    record("AC02", "example ex1 windows", ok,
           f"a0={prm.a0}, aInf={prm.aInf}, q1 in ({win.existence_window(prm.p)[0]}, {win.q1Hi}), q2 > {win.q2Lo}",
           el, 1.0)


def test_ac03_example_two_partial():
    t = time.perf_counter()
    N, p = 4, Fr(3, 2)
    origin = q_star(-2, 0, 0, p, N)
    infinity = q_star(-1, 0, Fr(1, 2), p, N)
    stated = p * N / (N - p - 1)
    pinned = p * (2 * N - p - 1) / (2 * (N - p - 1))
    prm = ProblemParams(N, p, -2, -1, 0, 0, 0, Fr(1, 2))
    el = time.perf_counter() - t
    ok = (origin == p * N / (N - p - 2) == 12 and infinity == pinned == Fr(11, 4)
          and infinity != stated and exponent_window(prm).q2Lo == pinned)
    record("AC03", "example ex2 partial", ok,
           f"origin q*={origin}; infinity q*={infinity} (pinned {pinned}, differs from stated {stated})", el, 1.0)


def test_ac04_pointwise_suite():
    t = time.perf_counter()
    total, worst, details = 0, 0.0, []
    for k, (A, V, K, N, p, rMax) in enumerate(PROFILES):
        grid = RadialGrid.geometric(1e-4, rMax, 32, N=N)
        Ae = parse_potential(A)
        prof = estimate_asymptotics(Ae)
        res = suites.pointwise_audit(grid, Ae, prof, 1.0, p, count=100, seed=k, slack=1e-8)
        total += res["violations"]
        worst = max(worst, res["maxRatio"])
    el = time.perf_counter() - t
    record("AC04", "pointwise estimates", total == 0,
           f"5 profiles x 100 functions, {total} violations, max ratio {worst:.3f}", el, 30.0)


def _dense(space, R):
    m = space.grid.n - 1
    d, o = space.quadratic_form()
    B = np.diag(d[:m]) + np.diag(o[:m - 1], 1) + np.diag(o[:m - 1], -1)
    M = np.diag(space.massK((0, R))[:m])
    return float(linalg.eigh(M, B, eigvals_only=True, subset_by_index=[m - 1, m - 1])[0])


def test_ac05_probe_oracle():
    t = time.perf_counter()
    prm = ProblemParams(3, 2, 0, 0, 0, 0, 0, 1)
    worst = 0.0
    for triple in TRIPLES:
        P = pots(*triple)
        for n in (50, 200):
            grid = RadialGrid(np.geomspace(1e-3, 20, n), 3)
            space = WeightedSpace.build(grid, P.A, P.V, P.K)
            lam = _dense(space, 1.0)
            est = estimate_S0(2.0, 1.0, P, prm, grid, 8, seed=0, space=space).value
            worst = max(worst, abs(est - lam) / lam)
    el = time.perf_counter() - t
    record("AC05", "probe vs eigenproblem", worst <= 1e-8,
           f"3 triples x n in {{50, 200}}, max relative gap {worst:.1e}", el, 60.0)


def test_ac06_decay_rates():
    t = time.perf_counter()
    cfg = load_config(config_path("ex1.json"))
    prm = resolve_params(cfg).params
    P = cfg.potentials
    g0 = RadialGrid.geometric(1e-6, 10, 64, N=4)
    gI = RadialGrid.geometric(1e-2, 1e4, 64, N=4)
    origin = decay_study("origin", 2.3, [2.0 ** -k for k in range(11)], P, prm, g0, 8, 0, 0.25)
    infinity = decay_study("infinity", 5.0, [2.0 ** k for k in range(11)], P, prm, gI, 8, 0, 0.25)
    el = time.perf_counter() - t
    ok = origin.passed and infinity.passed and origin.monotone and infinity.monotone
    record("AC06", "decay rates ex1", ok,
           f"origin slope {origin.fittedSlope:.3f} vs {origin.predictedSlope:.3f}, infinity slope "
           f"{infinity.fittedSlope:.3f} vs {infinity.predictedSlope:.3f}, monotone "
           f"{origin.monotone and infinity.monotone}", el, 300.0)


def test_ac07_annulus():
    t = time.perf_counter()
    cfg = load_config(config_path("ex1.json"))
    prm = resolve_params(cfg).params
    P = cfg.potentials
    grid = RadialGrid.geometric(1e-4, 100, 32, N=4)
    res = suites.annulus_suite(grid, P.A, P.V, P.K, prm, 2.3, [2.0, 4.0],
                               [(0.25, 0.5), (0.5, 2.0), (2.0, 8.0)], count=100, seed=0)
    el = time.perf_counter() - t
    record("AC07", "annulus inequality", res["pass"],
           f"{res['checks']} checks, {res['violations']} violations, max ratio {res['maxRatio']:.3f}", el, 10.0)


def test_ac08_nonlinearity_audits():
    t = time.perf_counter()
    nls = [Nonlinearity("purePower", 3, 3), Nonlinearity("doublePowerMin", 3, 5),
           Nonlinearity("smoothQuotient", 3, 5)]
    res = suites.nonlinearity_suite(nls, p=2.0, points=100_000)
    el = time.perf_counter() - t
    cont = res["kinds"]["doublePowerMin"]["branchContinuity"]
    record("AC08", "nonlinearity audits", res["pass"] and cont and set(res["kinds"]) == set(KINDS),
           ", ".join(f"{k}={v['pass']}" for k, v in res["kinds"].items()) + f", branch continuity {cont}", el, 1.0)


def test_ac09_gradient_consistency():
    t = time.perf_counter()
    rng = np.random.default_rng(0)
    worst = 0.0
    for p in (1.5, 2.0):
        grid = RadialGrid.geometric(1e-3, 10, 16, N=4)
        P = pots("min(r^(1/2), r^(3/2))", "min(1, r^(-3/2))", "max(r^(1/2), r^(3/2))")
        fun = EnergyFunctional.build(grid, P, p, Nonlinearity("doublePowerMin", p + 1, p + 2))
        for _ in range(20):
            u = rng.normal(size=grid.n)
            d = rng.normal(size=grid.n)
            u[-1] = d[-1] = 0.0
            h = 1e-5
            fd = (fun.energy(u + h * d) - fun.energy(u - h * d)) / (2 * h)
            g = float(fun.gradient(u) @ d)
            worst = max(worst, abs(g - fd) / abs(fd))
    el = time.perf_counter() - t
    record("AC09", "gradient consistency", worst <= 1e-6,
           f"40 pairs, p in {{3/2, 2}}, max relative error {worst:.1e}", el, 10.0)


def test_ac10_existence_example_two():
    t = time.perf_counter()
    cfg = load_config(config_path("ex2.json"))
    prm = resolve_params(cfg).params
    rep = solve(cfg.solver_config(), cfg.potentials, prm)
    el = time.perf_counter() - t
    u = rep.profile.values
    ok = (np.max(np.abs(u)) > 0 and rep.nonnegative and rep.residualNorm <= 1e-6
          and rep.nehariGap <= 1e-6 * rep.normP and rep.energy > 0)
    record("AC10", "existence run ex2", ok,
           f"max u {np.max(u):.4f}, min u {np.min(u):.1e}, residual {rep.residualNorm:.1e}, "
           f"Nehari gap {rep.nehariGap:.1e} (norm^p {rep.normP:.2f}), I(u) {rep.energy:.4f}", el, 300.0)


def test_ac11_classical_benchmark():
    t = time.perf_counter()
    ref, r_valid, centre = shooting_ground_state()
    cfg = load_config(config_path("benchmark.json"))
    prm = resolve_params(cfg).params
    rep = solve(cfg.solver_config(), cfg.potentials, prm)
    el = time.perf_counter() - t
    r = rep.profile.grid.nodes
    sel = r < r_valid
    exact = ref(r[sel])
    err = float(np.max(np.abs(rep.profile.values[sel] - exact)) / np.max(exact))
    record("AC11", "classical benchmark", err <= 1e-3,
           f"u(0) shooting {centre:.6f}, relative Linf error {err:.1e} on r < {r_valid:.1f}", el, 120.0)
