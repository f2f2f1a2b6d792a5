"""Discrete Euler functional I(u) = (1/p)||u||^p - int K F(u), its gradient and Hessian.

The gradient is the exact derivative of the discrete energy, so finite
differences of ``energy`` reproduce ``gradient`` up to rounding.
"""

from __future__ import annotations

import numpy as np

from .grid import GridFunction, RadialGrid, WeightedSpace
from .nonlinearity import Nonlinearity

EPS_REG = 1e-10


class EnergyFunctional:
    def __init__(self, space: WeightedSpace, p: float, nl: Nonlinearity):
        self.space = space
        self.grid: RadialGrid = space.grid
        self.p = float(p)
        self.nl = nl
        self.mK = space.massK()

    @classmethod
    def build(cls, grid, pots, p, nl):
        return cls(WeightedSpace.build(grid, pots.A, pots.V, pots.K), p, nl)

    def norm_p(self, u: np.ndarray) -> float:
        return self.space.norm_p(u, self.p)

    def energy(self, u: np.ndarray) -> float:
        return self.norm_p(u) / self.p - float(np.dot(self.mK, self.nl.F(u)))

    def gradient(self, u: np.ndarray, slopes: np.ndarray | None = None) -> np.ndarray:
        return self.space.norm_p_grad(u, self.p, slopes) / self.p - self.mK * self.nl.f(u)

    def nonlinear_pairing(self, u: np.ndarray) -> float:
        """int K f(u) u."""
        return float(np.dot(self.mK, self.nl.f(u) * u))

    def nehari_gap(self, u: np.ndarray) -> float:
        return abs(self.norm_p(u) - self.nonlinear_pairing(u))

    def hessian_bands(self, u: np.ndarray, eps: float = EPS_REG, slopes: np.ndarray | None = None):
        """Tridiagonal Hessian as (diag, offdiag).

        |s|^(p-2) and |u|^(p-2) are replaced by (s^2 + eps^2)^((p-2)/2), which
        only matters for p < 2 near zero slopes or values.
        """
        p, h = self.p, self.grid.h
        s = np.diff(u) / h if slopes is None else slopes
        k = self.space.stiff * (p - 1) * (s * s + eps * eps) ** ((p - 2) / 2) / h ** 2
        diag = np.zeros_like(u)
        diag[:-1] += k
        diag[1:] += k
        diag += self.space.massV * (p - 1) * (u * u + eps * eps) ** ((p - 2) / 2)
        diag -= self.mK * self.nl.df(u)
        return diag, -k


def energy(u: GridFunction, pots, nl: Nonlinearity, p: float) -> float:
    return EnergyFunctional.build(u.grid, pots, p, nl).energy(u.values)


def gradient(u: GridFunction, pots, nl: Nonlinearity, p: float) -> GridFunction:
    return GridFunction(u.grid, EnergyFunctional.build(u.grid, pots, p, nl).gradient(u.values))
