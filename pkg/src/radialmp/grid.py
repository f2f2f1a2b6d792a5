"""Graded radial grids, grid functions, weighted quadrature and the X norm.

Functions live on nodes r_1 < ... < r_n and are read as piecewise linear
interpolants, extended by zero beyond r_n.  Integrals of nodal quantities use
the trapezoid rule.  The gradient term of the norm uses the exact slope of the
interpolant on each element, weighted by the trapezoid average of A r^(N-1)
over that element.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import gamma

from .potentials import AsymptoticProfile, PotentialExpr, evaluate


def omega(N: int) -> float:
    """Surface measure of the unit sphere in R^N."""
    return 2 * math.pi ** (N / 2) / gamma(N / 2)


DEFAULT_RMIN = 1e-4
DEFAULT_RMAX = 1e3
DEFAULT_NODES_PER_DECADE = 64


class RadialGrid:
    """Immutable strictly increasing set of radii plus the dimension N."""

    def __init__(self, nodes, N: int, grading: str = "custom"):
        nodes = np.array(nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 3:
            raise ValueError("a grid needs at least 3 nodes")
        if nodes[0] <= 0 or np.any(np.diff(nodes) <= 0):
            raise ValueError("nodes must be positive and strictly increasing")
        nodes.setflags(write=False)
        self.nodes = nodes
        self.N = int(N)
        self.grading = grading

    @classmethod
    def geometric(cls, rMin=DEFAULT_RMIN, rMax=DEFAULT_RMAX, nodesPerDecade=DEFAULT_NODES_PER_DECADE,
                  N=3, maxSpacing=None):
        """Geometric grid; with ``maxSpacing`` the tail switches to uniform spacing."""
        n = max(int(math.ceil(nodesPerDecade * math.log10(rMax / rMin))), 2) + 1
        nodes = np.geomspace(rMin, rMax, n)
        if maxSpacing is None or np.all(np.diff(nodes) <= maxSpacing):
            return cls(nodes, N, "geometric")
        ratio = nodes[1] / nodes[0]
        # switch where the geometric step would exceed maxSpacing
        r_switch = maxSpacing / (ratio - 1)
        head = nodes[nodes <= r_switch]
        m = max(int(math.ceil((rMax - head[-1]) / maxSpacing)), 1)
        tail = np.linspace(head[-1], rMax, m + 1)[1:]
        return cls(np.concatenate([head, tail]), N, "hybrid")

    @classmethod
    def uniform(cls, rMin, rMax, n, N=3):
        return cls(np.linspace(rMin, rMax, n), N, "uniform")

    @property
    def n(self) -> int:
        return self.nodes.size

    @property
    def rMin(self) -> float:
        return float(self.nodes[0])

    @property
    def rMax(self) -> float:
        return float(self.nodes[-1])

    @cached_property
    def h(self) -> np.ndarray:
        return np.diff(self.nodes)

    @cached_property
    def omega(self) -> float:
        return omega(self.N)

    @cached_property
    def jacobian(self) -> np.ndarray:
        """r^(N-1) at the nodes."""
        return self.nodes ** (self.N - 1)

    @cached_property
    def trapezoid_weights(self) -> np.ndarray:
        w = np.zeros(self.n)
        w[:-1] += self.h / 2
        w[1:] += self.h / 2
        return w

    def clipped_weights(self, interval=None) -> np.ndarray:
        """Trapezoid weights with each element scaled by its overlap with ``interval``."""
        if interval is None:
            return self.trapezoid_weights
        lo, hi = interval
        left, right = self.nodes[:-1], self.nodes[1:]
        overlap = np.clip(np.minimum(right, hi) - np.maximum(left, lo), 0.0, None)
        w = np.zeros(self.n)
        w[:-1] += overlap / 2
        w[1:] += overlap / 2
        return w

    def function(self, values) -> "GridFunction":
        return GridFunction(self, values)

    def sample(self, fn) -> "GridFunction":
        return GridFunction(self, fn(self.nodes))

    def __repr__(self):
        return f"RadialGrid(n={self.n}, rMin={self.rMin:g}, rMax={self.rMax:g}, N={self.N}, {self.grading})"


class GridFunction:
    """Nodal values on a grid; arithmetic returns new grid functions."""

    def __init__(self, grid: RadialGrid, values):
        values = np.array(values, dtype=float)
        if values.shape != (grid.n,):
            raise ValueError(f"expected {grid.n} values, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("grid function values must be finite")
        self.grid = grid
        self.values = values

    def __mul__(self, c):
        return GridFunction(self.grid, self.values * c)

    __rmul__ = __mul__

    def __add__(self, other):
        return GridFunction(self.grid, self.values + other.values)

    def __sub__(self, other):
        return GridFunction(self.grid, self.values - other.values)

    def __neg__(self):
        return GridFunction(self.grid, -self.values)

    def slopes(self) -> np.ndarray:
        return np.diff(self.values) / self.grid.h

    def to_csv(self, extra: dict | None = None) -> str:
        cols = {"r": self.grid.nodes, "u": self.values}
        cols.update(extra or {})
        buf = io.StringIO()
        buf.write(",".join(cols) + "\n")
        for row in zip(*cols.values()):
            buf.write(",".join(repr(float(x)) for x in row) + "\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, N: int) -> "GridFunction":
        lines = [ln for ln in text.strip().splitlines() if ln]
        header = lines[0].split(",")
        if header[:2] != ["r", "u"]:
            raise ValueError("expected a CSV header starting with r,u")
        data = np.array([[float(x) for x in ln.split(",")[:2]] for ln in lines[1:]])
        return cls(RadialGrid(data[:, 0], N), data[:, 1])


def derivative(u: GridFunction) -> GridFunction:
    """Second order nodal derivative: three-point formula, one-sided at the ends."""
    r, y = u.grid.nodes, u.values
    d = np.empty_like(y)
    h0, h1 = np.diff(r)[:-1], np.diff(r)[1:]
    d[1:-1] = (-h1 / (h0 * (h0 + h1)) * y[:-2] + (h1 - h0) / (h0 * h1) * y[1:-1]
               + h0 / (h1 * (h0 + h1)) * y[2:])
    a, b = r[1] - r[0], r[2] - r[1]
    d[0] = -(2 * a + b) / (a * (a + b)) * y[0] + (a + b) / (a * b) * y[1] - a / (b * (a + b)) * y[2]
    a, b = r[-1] - r[-2], r[-2] - r[-3]
    d[-1] = (2 * a + b) / (a * (a + b)) * y[-1] - (a + b) / (a * b) * y[-2] + a / (b * (a + b)) * y[-3]
    return GridFunction(u.grid, d)


def _weight_values(grid: RadialGrid, w) -> np.ndarray:
    if w is None:
        return np.ones(grid.n)
    if isinstance(w, PotentialExpr):
        return np.asarray(evaluate(w, grid.nodes), dtype=float)
    return np.broadcast_to(np.asarray(w, dtype=float), (grid.n,))


def weighted_integral(g: GridFunction, w=None, exponent: float = 1.0, interval=None) -> float:
    """omega_N * integral of w |g|^exponent r^(N-1) dr by the trapezoid rule.

    ``w`` may be a PotentialExpr, an array of nodal values, or None for 1.
    ``interval`` restricts integration to (lo, hi) by clipping elements.
    """
    grid = g.grid
    with np.errstate(over="ignore", invalid="ignore"):
        integrand = _weight_values(grid, w) * np.abs(g.values) ** exponent * grid.jacobian
    if not np.all(np.isfinite(integrand)):
        raise OverflowError("weighted integrand overflows; shrink the grid or lower the exponent")
    return float(grid.omega * np.dot(grid.clipped_weights(interval), integrand))


@dataclass(frozen=True)
class WeightedSpace:
    """Discrete X-norm data on a grid: element weights for A and nodal weights for V and K.

    ``stiff[e]`` multiplies |slope_e|^p, ``massV[i]`` and ``massK[i]`` multiply
    |u_i|^p and nodal integrands.  All include omega_N and r^(N-1).
    """

    grid: RadialGrid
    stiff: np.ndarray
    massV: np.ndarray
    Kvals: np.ndarray

    @classmethod
    def build(cls, grid: RadialGrid, A: PotentialExpr, V: PotentialExpr, K: PotentialExpr | None = None):
        aw = _weight_values(grid, A) * grid.jacobian
        stiff = grid.omega * grid.h * (aw[:-1] + aw[1:]) / 2
        massV = grid.omega * grid.trapezoid_weights * _weight_values(grid, V) * grid.jacobian
        kv = _weight_values(grid, K) if K is not None else np.ones(grid.n)
        return cls(grid, stiff, massV, np.array(kv, dtype=float))

    def massK(self, interval=None) -> np.ndarray:
        g = self.grid
        return g.omega * g.clipped_weights(interval) * self.Kvals * g.jacobian

    def gradient_term(self, values: np.ndarray, p: float) -> float:
        s = np.diff(values) / self.grid.h
        return float(np.dot(self.stiff, np.abs(s) ** p))

    def potential_term(self, values: np.ndarray, p: float) -> float:
        return float(np.dot(self.massV, np.abs(values) ** p))

    def norm_p(self, values: np.ndarray, p: float) -> float:
        """||u||^p = ||u||_A^p + ||u||_{L^p_V}^p."""
        return self.gradient_term(values, p) + self.potential_term(values, p)

    def norm_p_grad(self, values: np.ndarray, p: float, slopes: np.ndarray | None = None) -> np.ndarray:
        """Gradient of ||u||^p; ``slopes`` overrides diff(values)/h when increments are tracked exactly."""
        h = self.grid.h
        s = np.diff(values) / h if slopes is None else slopes
        flux = self.stiff * p * np.abs(s) ** (p - 1) * np.sign(s) / h
        g = np.zeros_like(values)
        g[:-1] -= flux
        g[1:] += flux
        g += self.massV * p * np.abs(values) ** (p - 1) * np.sign(values)
        return g

    def quadratic_form(self):
        """Tridiagonal p = 2 norm matrix in (diag, offdiag) form."""
        h = self.grid.h
        k = self.stiff / h ** 2
        diag = self.massV.copy()
        diag[:-1] += k
        diag[1:] += k
        return diag, -k


def norm_A(u: GridFunction, A: PotentialExpr, p: float) -> float:
    space = WeightedSpace.build(u.grid, A, 0.0)
    return space.gradient_term(u.values, p) ** (1 / p)


def norm_X(u: GridFunction, A: PotentialExpr, V: PotentialExpr, p: float) -> float:
    space = WeightedSpace.build(u.grid, A, V)
    return space.norm_p(u.values, p) ** (1 / p)


# ---------------------------------------------------------------------------
# pointwise decay bounds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PointwiseConstants:
    C0: float
    CInf: float
    M_ext: float
    M_A2: float
    M_int: float
    nu0: float
    nuInf: float


def pointwise_constants(grid: RadialGrid, A: PotentialExpr, profile: AsymptoticProfile,
                        R0: float, p: float) -> PointwiseConstants:
    """Explicit constants of the interior and exterior decay estimates.

    C0 and CInf are the smallest ratios A(r)/r^a0 on r <= R0 and A(r)/r^aInf on
    r >= R0 over the grid nodes, so the lower bounds on A used by the
    estimates hold on the whole discrete domain.
    """
    N = grid.N
    r = grid.nodes
    a = np.asarray(evaluate(A, r))
    inner, outer = r <= R0, r >= R0
    C0 = float(np.min(a[inner] / r[inner] ** profile.a0)) if np.any(inner) else profile.c0
    CInf = float(np.min(a[outer] / r[outer] ** profile.aInf)) if np.any(outer) else profile.cInf
    w = omega(N)
    nu0 = (N + profile.a0 - p) / p
    nuInf = (N + profile.aInf - p) / p
    M_ext = CInf ** (-1 / p) * w ** (-1 / p) * ((p - 1) / (profile.aInf + N - p)) ** ((p - 1) / p)
    M_A2 = w ** (-1 / p) * C0 ** (-1 / p) * ((p - 1) / (N + profile.a0 - p)) ** ((p - 1) / p)
    M_int = M_A2 + M_ext * R0 ** (nu0 - nuInf)
    return PointwiseConstants(C0, CInf, M_ext, M_A2, M_int, nu0, nuInf)


@dataclass
class PointwiseReport:
    maxRatio: float
    maxRatioInterior: float
    maxRatioExterior: float
    violations: int
    constants: PointwiseConstants

    @property
    def ok(self) -> bool:
        return self.violations == 0


def check_pointwise_bound(u: GridFunction, A: PotentialExpr, profile: AsymptoticProfile,
                          R0: float, p: float, slack: float = 1e-8) -> PointwiseReport:
    """Compare |u(r)| with M r^(-nu) ||u||_A on both sides of R0.

    ``u`` must vanish at the last node (compact support).  The ratio reported
    is |u(r)| / bound(r); a violation is a ratio above 1 + slack.
    """
    if u.values[-1] != 0:
        raise ValueError("pointwise bounds need u to vanish at the outer node")
    c = pointwise_constants(u.grid, A, profile, R0, p)
    r = u.grid.nodes
    nA = norm_A(u, A, p)
    interior = r < R0
    bound = np.where(interior, c.M_int * r ** (-c.nu0), c.M_ext * r ** (-c.nuInf)) * nA
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(bound > 0, np.abs(u.values) / bound, 0.0)
    ri = float(np.max(ratio[interior])) if np.any(interior) else 0.0
    re = float(np.max(ratio[~interior])) if np.any(~interior) else 0.0
    return PointwiseReport(max(ri, re), ri, re, int(np.sum(ratio > 1 + slack)), c)
