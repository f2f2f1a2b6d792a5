import math

import numpy as np
import pytest
from scipy import linalg

from helpers import TRIPLES, pots
from radialmp.exponents import ProblemParams
from radialmp.grid import RadialGrid, WeightedSpace
from radialmp.probe import (
    annulus_bound,
    choose_t,
    decay_study,
    estimate_S0,
    estimate_Sinf,
    thread_cap,
    witness_nonvanishing,
)

PRM = ProblemParams(3, 2, 0, 0, 0, 0, 0, 1)


def dense_value(grid, P, R):
    sp = WeightedSpace.build(grid, P.A, P.V, P.K)
    m = grid.n - 1
    d, o = sp.quadratic_form()
    B = np.diag(d[:m]) + np.diag(o[:m - 1], 1) + np.diag(o[:m - 1], -1)
    M = np.diag(sp.massK((0, R))[:m])
    return float(linalg.eigh(M, B, eigvals_only=True)[-1])


def test_seed_determinism_and_threads(monkeypatch):
    g = RadialGrid.geometric(1e-3, 20, 12, N=3)
    P = pots(*TRIPLES[1])
    a = estimate_S0(2.4, 1.0, P, PRM, g, 4, seed=7, threads=1).value
    b = estimate_S0(2.4, 1.0, P, PRM, g, 4, seed=7, threads=4).value
    assert a == b
    monkeypatch.setenv("RADIALMP_THREADS", "2")
    assert thread_cap() == 2


def test_estimates_are_lower_bounds_of_dense_value():
    g = RadialGrid.geometric(1e-3, 20, 10, N=3)
    P = pots(*TRIPLES[0])
    v = estimate_S0(2.0, 1.0, P, PRM, g, 8).value
    assert v <= dense_value(g, P, 1.0) * (1 + 1e-10)


def test_window_monotone_in_radius():
    g = RadialGrid.geometric(1e-3, 50, 12, N=3)
    P = pots(*TRIPLES[0])
    s_small = estimate_S0(3.0, 0.25, P, PRM, g, 4).value
    s_big = estimate_S0(3.0, 1.0, P, PRM, g, 4).value
    assert s_small <= s_big
    i_near = estimate_Sinf(5.0, 1.0, P, PRM, g, 4).value
    i_far = estimate_Sinf(5.0, 4.0, P, PRM, g, 4).value
    assert i_far <= i_near


def test_radius_must_lie_in_grid():
    g = RadialGrid.geometric(1e-2, 10, 8, N=3)
    with pytest.raises(ValueError):
        estimate_Sinf(3.0, 20.0, pots(*TRIPLES[0]), PRM, g)


def test_witness_family_stays_away_from_zero_at_critical_exponent():
    # all-ones, q = 6 = critical Sobolev exponent in N = 3: the scaled bumps keep a fixed objective
    g = RadialGrid.geometric(1e-6, 10, 48, N=3)
    P = pots("1", "0", "1")
    fam = witness_nonvanishing("origin", 6.0, [2.0 ** -k for k in range(1, 6)], P, PRM, g)
    assert fam.inf_objective > 0.5 * max(fam.objectives)


def test_decay_study_report_fields():
    g = RadialGrid.geometric(1e-4, 10, 24, N=3)
    res = decay_study("origin", 3.0, [1, 0.5, 0.25, 0.125], pots(*TRIPLES[0]), PRM, g, 4, 0)
    d = res.to_dict()
    assert list(d) == ["side", "q", "radii", "estimates", "fittedSlope", "predictedSlope", "pass",
                       "monotone", "warnings"]
    assert res.to_csv().splitlines()[0] == "R,estimate"
    assert d["monotone"]


def test_choose_t_range():
    for s, q, p in [(2, 3, 2), (1.5, 2.5, 1.5), (4, 6, 3)]:
        t = choose_t(s, q, p)
        assert 1 < t < s


def test_annulus_bound_positive_and_finite():
    g = RadialGrid.geometric(1e-3, 20, 16, N=3)
    P = pots(*TRIPLES[1])
    b = annulus_bound(0.5, 2.0, 3.0, 2.0, P.K, P.A, PRM, g)
    assert b.Ctilde > 0 and math.isfinite(b.Ctilde) and b.Knorm > 0
