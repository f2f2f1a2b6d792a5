import numpy as np
import pytest

from helpers import pots
from radialmp.exponents import ProblemParams
from radialmp.nonlinearity import Nonlinearity
from radialmp.solver import (
    GridSpec,
    NonConvergence,
    SolverConfig,
    mp_geometry,
    solve,
    values_from_increments,
)

ONES = ProblemParams(3, 2, 0, 0, 0, 0, 0, 1)
COARSE = GridSpec(1e-3, 20.0, 32, 0.05)


def test_increment_roundtrip():
    u = np.array([3.0, 2.5, 1.0, 0.25, 0.0])
    assert np.array_equal(values_from_increments(np.diff(u)), u)


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(COARSE, Nonlinearity.pure(4), residualTol=0)
    with pytest.raises(ValueError):
        SolverConfig(COARSE, Nonlinearity.pure(4), pathResolution=2)


def test_geometry_certificates():
    P = pots("1", "1", "1")
    grid = COARSE.build(3)
    geo = mp_geometry(P, Nonlinearity.pure(4), ONES, grid)
    assert geo.rho > 0 and geo.infValue > 0 and geo.lam >= 1


@pytest.mark.parametrize("nl", [Nonlinearity.pure(4), Nonlinearity("doublePowerMin", 3, 4),
                                Nonlinearity("smoothQuotient", 3, 4)], ids=lambda n: n.kind)
def test_solve_all_ones_certificates(nl):
    rep = solve(SolverConfig(COARSE, nl), pots("1", "1", "1"), ONES)
    u = rep.profile.values
    assert rep.converged and rep.verified and rep.nonnegative
    assert rep.residualNorm <= 1e-8 and rep.energy > 0 and np.max(u) > 0
    assert rep.nehariGap <= 1e-6 * rep.normP
    assert rep.pathMaxEnergy >= rep.energy * (1 - 1e-6)


def test_unreachable_tolerance_reports_best_residual():
    with pytest.raises(NonConvergence) as info:
        solve(SolverConfig(COARSE, Nonlinearity.pure(4), residualTol=1e-30), pots("1", "1", "1"), ONES)
    rep = info.value.report
    assert not rep.converged and rep.residualNorm > 1e-30 and np.isfinite(rep.residualNorm)


def test_inadmissible_pair_rejected():
    with pytest.raises(ValueError):
        solve(SolverConfig(COARSE, Nonlinearity.pure(1.5)), pots("1", "1", "1"), ONES)


def test_same_seed_same_profile():
    cfg = SolverConfig(COARSE, Nonlinearity.pure(4), seed=3)
    a = solve(cfg, pots("1", "1", "1"), ONES)
    b = solve(cfg, pots("1", "1", "1"), ONES)
    assert np.array_equal(a.profile.values, b.profile.values)
    assert a.to_json() == b.to_json()


def test_energy_examples():
    from radialmp.functional import EnergyFunctional
    from radialmp.solver import reference_bump
    grid = COARSE.build(3)
    fun = EnergyFunctional.build(grid, pots("1", "1", "1"), 2.0, Nonlinearity.pure(4))
    zero = np.zeros(grid.n)
    assert fun.energy(zero) == 0 and not np.any(fun.gradient(zero))
    bump = reference_bump(grid)
    assert fun.energy(1e-3 * bump) > 0
    assert fun.energy(1e3 * bump) < -1e6


def test_infinite_tolerance_single_polish_unverified():
    rep = solve(SolverConfig(COARSE, Nonlinearity.pure(4), residualTol=float("inf")), pots("1", "1", "1"), ONES)
    assert not rep.verified and np.isfinite(rep.residualNorm)


def test_negative_part_annihilated():
    rep = solve(SolverConfig(COARSE, Nonlinearity.pure(4)), pots("1", "1", "1"), ONES)
    assert rep.negativePartNorm <= 1e-8 ** 0.5
