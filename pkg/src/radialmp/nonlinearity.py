"""Model nonlinearities f and their primitives F(t) = int_0^t f.

All kinds vanish for t < 0, so critical points of the energy are nonnegative.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import numpy as np

KINDS = ("doublePowerMin", "smoothQuotient", "purePower")


@dataclass(frozen=True)
class Nonlinearity:
    kind: str
    q1: float
    q2: float
    _table: "_QuotientPrimitive | None" = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown nonlinearity kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "purePower" and self.q1 != self.q2:
            raise ValueError("purePower uses q1 = q2 = q")
        if not 1 < self.q1 <= self.q2:
            raise ValueError(f"need 1 < q1 <= q2, got q1={self.q1}, q2={self.q2}")
        if self.kind == "smoothQuotient" and self._table is None:
            object.__setattr__(self, "_table", _QuotientPrimitive(self.q1, self.q2))

    @classmethod
    def pure(cls, q):
        return cls("purePower", q, q)

    @property
    def theta(self) -> float:
        return self.q1

    def check_exponents(self, p) -> list[str]:
        return [] if self.q1 > p else [f"nonlinearity needs q1 > p, got q1={self.q1}, p={p}"]

    def f(self, t):
        t = np.asarray(t, dtype=float)
        tp = np.maximum(t, 0.0)
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            if self.kind == "purePower":
                out = tp ** (self.q1 - 1)
            elif self.kind == "doublePowerMin":
                out = np.minimum(tp ** (self.q1 - 1), tp ** (self.q2 - 1))
            else:
                out = tp ** (self.q2 - 1) / (1 + tp ** (self.q2 - self.q1))
                big = tp > 1
                out = np.where(big, tp ** (self.q1 - 1) / (tp ** (self.q1 - self.q2) + 1), out)
        return np.where(t > 0, out, 0.0)

    def df(self, t):
        """f'(t) for t > 0 (0 for t <= 0); used by Newton polishing."""
        t = np.asarray(t, dtype=float)
        tp = np.maximum(t, 1e-300)
        q1, q2 = self.q1, self.q2
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            if self.kind == "purePower":
                out = (q1 - 1) * tp ** (q1 - 2)
            elif self.kind == "doublePowerMin":
                out = np.where(tp < 1, (q2 - 1) * tp ** (q2 - 2), (q1 - 1) * tp ** (q1 - 2))
            else:
                d = q2 - q1
                x = tp ** d
                # derivative of t^(q2-1)/(1+t^d), rearranged to avoid overflow for large t
                out = np.where(
                    tp <= 1,
                    tp ** (q2 - 2) * ((q2 - 1) + (q1 - 1) * x) / (1 + x) ** 2,
                    tp ** (q1 - 2) * ((q2 - 1) / x + (q1 - 1)) / (1 / x + 1) ** 2,
                )
        return np.where(t > 0, out, 0.0)

    def F(self, t):
        t = np.asarray(t, dtype=float)
        tp = np.maximum(t, 0.0)
        q1, q2 = self.q1, self.q2
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            if self.kind == "purePower":
                out = tp ** q1 / q1
            elif self.kind == "doublePowerMin":
                out = np.where(tp <= 1, tp ** q2 / q2, 1 / q2 + (tp ** q1 - 1) / q1)
            else:
                out = self._table(tp)
        return np.where(t > 0, out, 0.0)

    def growth_bound(self, t):
        """min{|t|^(q1-1), |t|^(q2-1)}, the comparison function of the growth condition."""
        a = np.abs(np.asarray(t, dtype=float))
        return np.minimum(a ** (self.q1 - 1), a ** (self.q2 - 1))

    def to_dict(self):
        return {"kind": self.kind, "q1": self.q1, "q2": self.q2}


class _QuotientPrimitive:
    """F(t) for f(s) = s^(q2-1)/(1+s^d), d = q2 - q1.

    In y = ln s the integrand is e^(q2 y)/(1 + e^(d y)), analytic in a strip of
    half width pi/d.  Composite 16-point Gauss-Legendre on panels of width
    min(1/2, pi/(2d)) is accurate to rounding; cumulative panel sums are cached
    from y = Y_LO upward and extended lazily.  Below e^Y_LO the alternating
    series sum_k (-1)^k t^(q2+kd)/(q2+kd) is used.
    """

    Y_LO = -40.0
    ORDER = 16

    def __init__(self, q1, q2):
        self.q1, self.q2, self.d = float(q1), float(q2), float(q2 - q1)
        self.width = min(0.5, math.pi / (2 * self.d)) if self.d > 0 else 0.5
        x, w = np.polynomial.legendre.leggauss(self.ORDER)
        self.gx, self.gw = (x + 1) / 2, w / 2
        self.base = self._series(math.exp(self.Y_LO))
        self.edges = np.array([self.Y_LO])
        self.cum = np.array([self.base])
        self._lock = threading.Lock()

    def _integrand(self, y):
        # e^(q2 y)/(1+e^(d y)) written stably for both signs of d*y
        dy = self.d * y
        with np.errstate(over="ignore"):
            return np.where(dy <= 0, np.exp(self.q2 * y) / (1 + np.exp(dy)),
                            np.exp(self.q1 * y) / (np.exp(-dy) + 1))

    def _series(self, t):
        q2, d = self.q2, self.d
        total, k = 0.0, 0
        while True:
            term = (-1) ** k * t ** (q2 + k * d) / (q2 + k * d)
            total += term
            k += 1
            if abs(term) <= 1e-18 * abs(total) or k > 200 or d == 0:
                break
        if d == 0:
            return t ** q2 / (2 * q2)
        return total

    def _panel(self, a, b):
        y = a[..., None] + (b - a)[..., None] * self.gx
        return (b - a) * np.sum(self.gw * self._integrand(y), axis=-1)

    def _extend(self, ymax):
        with self._lock:
            top = self.edges[-1]
            if top >= ymax:
                return
            n = int(math.ceil((ymax - top) / self.width)) + 1
            new = top + self.width * np.arange(1, n + 1)
            lefts = np.concatenate([[top], new[:-1]])
            inc = self._panel(lefts, new)
            self.cum = np.concatenate([self.cum, self.cum[-1] + np.cumsum(inc)])
            self.edges = np.concatenate([self.edges, new])

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        pos = t > 0
        if not np.any(pos):
            return out
        y = np.log(t[pos])
        low = y < self.Y_LO
        vals = np.empty_like(y)
        if np.any(low):
            vals[low] = [self._series(math.exp(v)) for v in y[low]]
        hi = ~low
        if np.any(hi):
            yh = y[hi]
            self._extend(float(yh.max()))
            edges, cum = self.edges, self.cum
            k = np.clip(np.searchsorted(edges, yh, side="right") - 1, 0, edges.size - 1)
            vals[hi] = cum[k] + self._panel(edges[k], yh)
        out[pos] = vals
        return out


# ---------------------------------------------------------------------------
# audits
# ---------------------------------------------------------------------------


@dataclass
class NonlinearityAudit:
    f1_ok: bool
    f2_ok: bool
    growth_ok: bool
    f1_worst: float
    growth_worst: float
    F_at_t0: float

    @property
    def ok(self):
        return self.f1_ok and self.f2_ok and self.growth_ok


AUDIT_SLACK = 1e-12


def audit(nl: Nonlinearity, points: int = 100_000, lo=1e-8, hi=1e8, t0=1.0,
          growth_const=1.0) -> NonlinearityAudit:
    """Superlinearity (theta F <= f t), positivity of F(t0) and the double power growth bound.

    Comparisons allow a relative slack of 1e-12 because purePower gives equality
    in the first check.
    """
    t = np.geomspace(lo, hi, points)
    F, f = nl.F(t), nl.f(t)
    lhs, rhs = nl.theta * F, f * t
    excess = (lhs - rhs) / np.maximum(np.abs(rhs), 1e-300)
    f1_ok = bool(np.all(F >= 0) and np.all(excess <= AUDIT_SLACK))
    g = growth_const * nl.growth_bound(t)
    gx = (np.abs(f) - g) / np.maximum(g, 1e-300)
    F0 = float(nl.F(np.array([t0]))[0])
    return NonlinearityAudit(f1_ok, F0 > 0, bool(np.all(gx <= AUDIT_SLACK)),
                             float(excess.max()), float(gx.max()), F0)
