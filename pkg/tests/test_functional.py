import numpy as np
import pytest

from helpers import pots
from radialmp.functional import EnergyFunctional
from radialmp.grid import RadialGrid
from radialmp.nonlinearity import Nonlinearity


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
@pytest.mark.parametrize("kind", ["purePower", "doublePowerMin", "smoothQuotient"])
def test_hessian_matches_gradient_differences(p, kind):
    g = RadialGrid.geometric(1e-2, 5, 8, N=3)
    nl = Nonlinearity(kind, p + 1, p + 1 if kind == "purePower" else p + 2)
    fun = EnergyFunctional.build(g, pots("1+r", "1", "1"), p, nl)
    rng = np.random.default_rng(3)
    u = np.abs(rng.normal(size=g.n)) + 0.5
    u[-1] = 0
    d = rng.normal(size=g.n)
    d[-1] = 0
    diag, off = fun.hessian_bands(u, eps=1e-30)
    Hd = diag * d
    Hd[:-1] += off * d[1:]
    Hd[1:] += off * d[:-1]
    eps = 1e-6
    fd = (fun.gradient(u + eps * d) - fun.gradient(u - eps * d)) / (2 * eps)
    assert np.allclose(Hd[:-1], fd[:-1], rtol=1e-5, atol=1e-7 * np.max(np.abs(fd)))


def test_nehari_identity_for_scaling():
    g = RadialGrid.geometric(1e-2, 5, 16, N=3)
    fun = EnergyFunctional.build(g, pots("1", "1", "1"), 2.0, Nonlinearity.pure(4))
    u = np.exp(-g.nodes ** 2)
    u[-1] = 0
    # for pure powers the Nehari scaling is explicit: t^(q-p) = ||u||^p / int K u^q
    t = (fun.norm_p(u) / fun.nonlinear_pairing(u)) ** (1 / 2)
    assert fun.nehari_gap(t * u) == pytest.approx(0, abs=1e-10 * fun.norm_p(t * u))
