"""Radial potentials A, V, K: expression trees, parsing, asymptotics and hypothesis checks.

Expressions are small immutable trees over the radial variable ``r``.  Every node
can be evaluated directly (vectorized over numpy arrays) and, when all
intermediate values are positive, in log space.  Log-space evaluation is what
the asymptotic and essential-sup machinery uses, so potentials such as
``exp(2*r)`` can be probed far beyond the float overflow threshold.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate


class PotentialSyntaxError(ValueError):
    """Raised on malformed potential text; ``position`` is the 0-based column."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class PotentialValueError(ValueError):
    """Raised when a potential takes a forbidden value (non-positive K, overflow)."""


# ---------------------------------------------------------------------------
# expression tree
# ---------------------------------------------------------------------------


class PotentialExpr:
    """Base class of expression nodes."""

    def _eval(self, r: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _log_eval(self, r: np.ndarray, log_r: np.ndarray) -> np.ndarray:
        # generic fallback, only valid where the direct value is finite and positive
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return np.log(self._eval(r))

    @property
    def depth(self) -> int:
        return 1 + max((c.depth for c in self.children), default=0)

    @property
    def children(self) -> tuple["PotentialExpr", ...]:
        return ()

    def constants(self) -> list[float]:
        out = []
        for c in self.children:
            out.extend(c.constants())
        return out

    def __call__(self, r):
        return evaluate(self, r)


@dataclass(frozen=True)
class Const(PotentialExpr):
    value: float

    def __post_init__(self):
        if not math.isfinite(self.value) or self.value < 0:
            raise PotentialValueError(f"constant must be finite and nonnegative, got {self.value}")

    def _eval(self, r):
        return np.full_like(r, self.value, dtype=float)

    def _log_eval(self, r, log_r):
        with np.errstate(divide="ignore"):
            return np.full_like(r, math.log(self.value) if self.value > 0 else -np.inf, dtype=float)

    def constants(self):
        return [self.value]

    def __str__(self):
        return repr(self.value)


@dataclass(frozen=True)
class Var(PotentialExpr):
    def _eval(self, r):
        return np.asarray(r, dtype=float)

    def _log_eval(self, r, log_r):
        return log_r

    def __str__(self):
        return "r"


@dataclass(frozen=True)
class Pow(PotentialExpr):
    base: PotentialExpr
    exponent: float

    @property
    def children(self):
        return (self.base,)

    def _eval(self, r):
        b = self.base._eval(r)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            return np.power(b, self.exponent)

    def _log_eval(self, r, log_r):
        lb = self.base._log_eval(r, log_r)
        if self.exponent == 0:
            return np.zeros_like(lb)
        with np.errstate(invalid="ignore"):
            return self.exponent * lb

    def __str__(self):
        return f"({self.base})^({self.exponent!r})"


@dataclass(frozen=True)
class Scale(PotentialExpr):
    """Scalar multiple ``factor * expr``; the factor may be negative (subtraction)."""

    factor: float
    expr: PotentialExpr

    @property
    def children(self):
        return (self.expr,)

    def constants(self):
        return self.expr.constants()

    def _eval(self, r):
        return self.factor * self.expr._eval(r)

    def _log_eval(self, r, log_r):
        if self.factor <= 0:
            return super()._log_eval(r, log_r)
        return math.log(self.factor) + self.expr._log_eval(r, log_r)

    def __str__(self):
        return f"{self.factor!r}*({self.expr})"


@dataclass(frozen=True)
class Product(PotentialExpr):
    factors: tuple[PotentialExpr, ...]

    @property
    def children(self):
        return self.factors

    def _eval(self, r):
        out = np.ones_like(np.asarray(r, dtype=float))
        with np.errstate(over="ignore", invalid="ignore"):
            for f in self.factors:
                out = out * f._eval(r)
        return out

    def _log_eval(self, r, log_r):
        out = np.zeros_like(np.asarray(r, dtype=float))
        with np.errstate(invalid="ignore"):
            for f in self.factors:
                out = out + f._log_eval(r, log_r)
        return out

    def __str__(self):
        return "*".join(f"({f})" for f in self.factors)


@dataclass(frozen=True)
class Sum(PotentialExpr):
    terms: tuple[PotentialExpr, ...]

    @property
    def children(self):
        return self.terms

    def _eval(self, r):
        out = np.zeros_like(np.asarray(r, dtype=float))
        with np.errstate(over="ignore", invalid="ignore"):
            for t in self.terms:
                out = out + t._eval(r)
        return out

    def _log_eval(self, r, log_r):
        if any(isinstance(t, Scale) and t.factor < 0 for t in self.terms):
            return super()._log_eval(r, log_r)
        logs = np.stack([t._log_eval(r, log_r) for t in self.terms])
        with np.errstate(invalid="ignore"):
            return np.logaddexp.reduce(logs, axis=0)

    def __str__(self):
        return " + ".join(f"({t})" for t in self.terms)


@dataclass(frozen=True)
class Min(PotentialExpr):
    left: PotentialExpr
    right: PotentialExpr

    @property
    def children(self):
        return (self.left, self.right)

    def _eval(self, r):
        return np.minimum(self.left._eval(r), self.right._eval(r))

    def _log_eval(self, r, log_r):
        return np.minimum(self.left._log_eval(r, log_r), self.right._log_eval(r, log_r))

    def __str__(self):
        return f"min({self.left}, {self.right})"


@dataclass(frozen=True)
class Max(PotentialExpr):
    left: PotentialExpr
    right: PotentialExpr

    @property
    def children(self):
        return (self.left, self.right)

    def _eval(self, r):
        return np.maximum(self.left._eval(r), self.right._eval(r))

    def _log_eval(self, r, log_r):
        return np.maximum(self.left._log_eval(r, log_r), self.right._log_eval(r, log_r))

    def __str__(self):
        return f"max({self.left}, {self.right})"


@dataclass(frozen=True)
class Exp(PotentialExpr):
    arg: PotentialExpr

    @property
    def children(self):
        return (self.arg,)

    def _eval(self, r):
        with np.errstate(over="ignore"):
            return np.exp(self.arg._eval(r))

    def _log_eval(self, r, log_r):
        return self.arg._eval(r)

    def __str__(self):
        return f"exp({self.arg})"


@dataclass(frozen=True)
class Log(PotentialExpr):
    arg: PotentialExpr

    @property
    def children(self):
        return (self.arg,)

    def _eval(self, r):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.log(self.arg._eval(r))

    def _log_eval(self, r, log_r):
        inner = self.arg._log_eval(r, log_r)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.log(inner)

    def __str__(self):
        return f"log({self.arg})"


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]+)|(?P<op>[-+*/^(),]))"
)
_FUNCS = {"min", "max", "exp", "log"}


def _tokenize(text: str):
    pos = 0
    tokens = []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            col = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise PotentialSyntaxError(f"unexpected character {text[col]!r}", col)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    # expr := term (('+'|'-') term)*
    # term := factor ('*' factor)*
    # factor := atom ('^' exponent)?
    # atom := number | 'r' | '(' expr ')' | func '(' expr (',' expr)? ')' | '-' factor

    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self, value=None):
        tok = self.tokens[self.i]
        if value is not None and tok[1] != value:
            got = tok[1] or "end of input"
            raise PotentialSyntaxError(f"expected {value!r}, got {got!r}", tok[2])
        self.i += 1
        return tok

    def parse(self) -> PotentialExpr:
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise PotentialSyntaxError(f"unexpected token {val!r}", pos)
        return node

    def expr(self):
        terms = [self.term()]
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            t = self.term()
            terms.append(t if op == "+" else Scale(-1.0, t))
        return terms[0] if len(terms) == 1 else Sum(tuple(terms))

    def term(self):
        factors = [self.factor()]
        while self.peek()[1] == "*":
            self.take()
            factors.append(self.factor())
        if len(factors) == 1:
            return factors[0]
        consts = [f for f in factors if isinstance(f, Const)]
        rest = [f for f in factors if not isinstance(f, Const)]
        if len(consts) == 1 and len(rest) == 1:
            return Scale(consts[0].value, rest[0])
        return Product(tuple(factors))

    def factor(self):
        base = self.atom()
        if self.peek()[1] == "^":
            self.take()
            return Pow(base, self.exponent())
        return base

    def exponent(self) -> float:
        # signed literal, optionally parenthesised and optionally a ratio: r^-2, r^(1/2)
        paren = self.peek()[1] == "("
        if paren:
            self.take()
        sign = 1.0
        if self.peek()[1] in ("+", "-"):
            sign = -1.0 if self.take()[1] == "-" else 1.0
        kind, val, pos = self.take()
        if kind != "num":
            raise PotentialSyntaxError("exponent must be a number", pos)
        value = float(val)
        if paren and self.peek()[1] == "/":
            self.take()
            kind, den, pos = self.take()
            if kind != "num" or float(den) == 0:
                raise PotentialSyntaxError("bad exponent denominator", pos)
            value /= float(den)
        if paren:
            self.take(")")
        return sign * value

    def atom(self):
        kind, val, pos = self.take()
        if kind == "num":
            return Const(float(val))
        if kind == "name":
            if val == "r":
                return Var()
            if val not in _FUNCS:
                raise PotentialSyntaxError(f"unknown name {val!r}", pos)
            self.take("(")
            first = self.expr()
            second = None
            if self.peek()[1] == ",":
                self.take()
                second = self.expr()
            self.take(")")
            if val in ("min", "max"):
                if second is None:
                    raise PotentialSyntaxError(f"{val} takes two arguments", pos)
                return (Min if val == "min" else Max)(first, second)
            if second is not None:
                raise PotentialSyntaxError(f"{val} takes one argument", pos)
            return Exp(first) if val == "exp" else Log(first)
        if val == "(":
            node = self.expr()
            self.take(")")
            return node
        if val == "-":
            return Scale(-1.0, self.factor())
        raise PotentialSyntaxError(f"unexpected token {val or 'end of input'!r}", pos)


_POSITIVITY_PROBES = np.array([1e-3, 1e-1, 1.0, 10.0, 1e3])


def parse_potential(text: str, positive: bool = False) -> PotentialExpr:
    """Parse ``text`` into a :class:`PotentialExpr`.

    With ``positive=True`` (used for K) the expression must be strictly positive
    at a handful of probe radii; otherwise :class:`PotentialValueError` is raised.
    """
    node = _Parser(text).parse()
    if positive:
        with np.errstate(all="ignore"):
            vals = node._eval(_POSITIVITY_PROBES)
        # an underflowed value with a finite logarithm (exp(-r) at large r) is positive
        bad = ~(vals > 0) & ~np.isfinite(log_evaluate(node, _POSITIVITY_PROBES))
        if np.any(bad):
            r_bad = _POSITIVITY_PROBES[bad][0]
            raise PotentialValueError(f"potential {text!r} is not positive at r={r_bad:g}")
    return node


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


def evaluate(expr: PotentialExpr, r):
    """Evaluate ``expr`` at ``r`` (scalar or array, all entries > 0).

    Raises :class:`PotentialValueError` on a non-finite result, which signals an
    out-of-range sample: the caller should shrink the domain.
    """
    arr = np.asarray(r, dtype=float)
    if np.any(arr <= 0):
        raise ValueError("potentials are evaluated at r > 0 only")
    with np.errstate(all="ignore"):
        out = expr._eval(arr)
    if not np.all(np.isfinite(out)):
        where = arr[~np.isfinite(out)] if out.ndim else arr
        raise PotentialValueError(f"non-finite potential value at r={np.ravel(where)[0]:g}")
    return float(out) if np.ndim(r) == 0 else out


def log_evaluate(expr: PotentialExpr, r) -> np.ndarray:
    """``log(expr(r))`` computed without forming ``expr(r)`` where possible.

    Zero values map to ``-inf``; negative values give ``nan``.
    """
    arr = np.asarray(r, dtype=float)
    with np.errstate(all="ignore"):
        out = expr._log_eval(arr, np.log(arr))
    return np.asarray(out, dtype=float)


# ---------------------------------------------------------------------------
# asymptotics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AsymptoticProfile:
    """Power-law behaviour of a potential at the origin and at infinity."""

    a0: float
    aInf: float
    c0: float
    cInf: float
    fitResidual0: float = 0.0
    fitResidualInf: float = 0.0
    reliable: bool = True

    def valid_for_A(self, N: int, p: float) -> bool:
        return (p - N < self.a0 <= p) and (p - N < self.aInf <= p) and self.c0 > 0 and self.cInf > 0


def geometric_samples(lo: float, hi: float, per_decade: int = 32) -> np.ndarray:
    n = max(int(round(per_decade * math.log10(hi / lo))), 1) + 1
    return np.geomspace(lo, hi, n)


DEFAULT_R0_SAMPLES = geometric_samples(1e-6, 1e-2)[::-1]
DEFAULT_RINF_SAMPLES = geometric_samples(1e2, 1e6)


def estimate_asymptotics(
    expr: PotentialExpr,
    rGrid0: Sequence[float] | None = None,
    rGridInf: Sequence[float] | None = None,
    residual_threshold: float = 1e-2,
) -> AsymptoticProfile:
    """Least-squares log-log slopes of ``expr`` near 0 and near infinity."""
    r0 = np.asarray(DEFAULT_R0_SAMPLES if rGrid0 is None else rGrid0, dtype=float)
    rinf = np.asarray(DEFAULT_RINF_SAMPLES if rGridInf is None else rGridInf, dtype=float)
    if r0.size < 8 or rinf.size < 8:
        raise ValueError("need at least 8 samples per side")

    def fit(rs):
        lv = log_evaluate(expr, rs)
        if not np.all(np.isfinite(lv)):
            raise PotentialValueError("potential is not positive and finite on the sample set")
        x = np.log(rs)
        slope, intercept = np.polyfit(x, lv, 1)
        resid = float(np.max(np.abs(lv - (slope * x + intercept))))
        c = float(np.exp(np.min(lv - slope * x)))
        return float(slope), c, resid

    a0, c0, res0 = fit(r0)
    ainf, cinf, resinf = fit(rinf)
    return AsymptoticProfile(
        a0=a0, aInf=ainf, c0=c0, cInf=cinf,
        fitResidual0=res0, fitResidualInf=resinf,
        reliable=max(res0, resinf) <= residual_threshold,
    )


# ---------------------------------------------------------------------------
# essential-sup ratios
# ---------------------------------------------------------------------------

DIVERGENCE_THRESHOLD = 1e12
ORIGIN_FLOOR = 1e-12
INFINITY_CEILING = 1e12


@dataclass(frozen=True)
class EssSupResult:
    value: float
    infinite: bool
    argmax: float
    zero_v_samples: int = 0

    def __float__(self):
        return math.inf if self.infinite else self.value


def ess_sup_ratio(
    K: PotentialExpr,
    V: PotentialExpr,
    alpha: float,
    beta: float,
    interval: tuple[float, float],
    samples: int = 2048,
    origin_floor: float = ORIGIN_FLOOR,
    infinity_ceiling: float = INFINITY_CEILING,
) -> EssSupResult:
    """Sampled ess-sup of ``K(r) / (r**alpha * V(r)**beta)`` over ``interval``.

    A lower endpoint of 0 (or an upper endpoint of inf) is replaced by
    ``origin_floor`` (``infinity_ceiling``).  ``V**0`` is taken as 1 even where V
    vanishes.  The result is flagged infinite when the maximal ratio exceeds
    ``DIVERGENCE_THRESHOLD`` and is still growing over the last decade of samples
    toward the endpoint where it is attained.
    """
    if not 0 <= beta <= 1:
        raise ValueError("beta must lie in [0, 1]")
    lo, hi = interval
    lo = origin_floor if lo <= 0 else lo
    hi = infinity_ceiling if not math.isfinite(hi) else hi
    if not 0 < lo < hi:
        raise ValueError("interval must satisfy 0 <= lo < hi")
    r = np.geomspace(lo, hi, samples)
    log_r = np.log(r)
    log_ratio = log_evaluate(K, r)
    zero_v = 0
    if beta > 0:
        lv = log_evaluate(V, r)
        zero_v = int(np.sum(lv == -np.inf))
        # exponential parts of K and V cancel here before the small power term enters
        log_ratio = log_ratio - beta * lv
    log_ratio = log_ratio - alpha * log_r
    log_ratio = np.where(np.isnan(log_ratio), np.inf, log_ratio)
    k = int(np.argmax(log_ratio))
    top = float(log_ratio[k])
    if top == np.inf:
        return EssSupResult(math.inf, True, float(r[k]), zero_v)

    infinite = False
    if top > math.log(DIVERGENCE_THRESHOLD):
        decade = max(int(samples / math.log10(hi / lo)), 1)
        decade = min(decade, samples - 1)
        if k <= samples // 2:
            trend = log_ratio[0] - log_ratio[decade]
        else:
            trend = log_ratio[-1] - log_ratio[-1 - decade]
        infinite = bool(trend > 1e-9)
    with np.errstate(over="ignore"):
        value = math.inf if infinite else float(np.exp(top))
    return EssSupResult(value, infinite, float(r[k]), zero_v)


# ---------------------------------------------------------------------------
# hypotheses (A), (V), (K)
# ---------------------------------------------------------------------------


@dataclass
class HypothesisReport:
    A_ok: bool
    V_ok: bool
    K_ok: bool
    profile: AsymptoticProfile | None
    A_positive: bool
    K_positive: bool
    V_nonnegative: bool
    continuity_ok: bool
    V_integral: float
    K_s_integral: float
    notes: list[str] = field(default_factory=list)

    @property
    def all_ok(self) -> bool:
        return self.A_ok and self.V_ok and self.K_ok

    def to_dict(self) -> dict:
        return {
            "A_ok": self.A_ok,
            "V_ok": self.V_ok,
            "K_ok": self.K_ok,
            "a0": None if self.profile is None else self.profile.a0,
            "aInf": None if self.profile is None else self.profile.aInf,
            "A_positive": self.A_positive,
            "K_positive": self.K_positive,
            "V_nonnegative": self.V_nonnegative,
            "continuity_ok": self.continuity_ok,
            "V_integral": self.V_integral,
            "K_s_integral": self.K_s_integral,
            "notes": list(self.notes),
        }


_CHECK_SAMPLES = np.geomspace(1e-4, 1e4, 801)


def _quad_finite(fn, lo=0.5, hi=2.0) -> float:
    try:
        val, _ = integrate.quad(fn, lo, hi, limit=200)
    except Exception:
        return math.inf
    return float(val) if math.isfinite(val) else math.inf


def verify_hypotheses(
    A: PotentialExpr,
    V: PotentialExpr,
    K: PotentialExpr,
    N: int,
    p: float,
    s: float = 2.0,
    profile: AsymptoticProfile | None = None,
) -> HypothesisReport:
    """Numerical audit of the standing hypotheses on A, V, K.

    Never raises for a failing hypothesis; failures are carried by the report.
    Integrability is only checked on [1/2, 2], which is advisory by nature.
    """
    if s <= 1:
        raise ValueError("s must exceed 1")
    notes: list[str] = []
    with np.errstate(all="ignore"):
        a_vals = A._eval(_CHECK_SAMPLES)
        v_vals = V._eval(_CHECK_SAMPLES)
        k_vals = K._eval(_CHECK_SAMPLES)

    A_pos = bool(np.all(a_vals > 0))
    K_pos = bool(np.all(k_vals > 0))
    V_nonneg = bool(np.all(v_vals >= 0))
    if not A_pos:
        notes.append("A is not strictly positive on the sample set")
    if not K_pos:
        notes.append("K is not strictly positive on the sample set")
    if not V_nonneg:
        notes.append("V takes negative values on the sample set")

    # continuity of A: relative jumps between neighbouring samples stay bounded
    finite_a = a_vals[np.isfinite(a_vals) & (a_vals > 0)]
    continuity = finite_a.size == a_vals.size and bool(np.all(np.abs(np.diff(np.log(finite_a))) < 1.0))
    if not continuity:
        notes.append("A shows a jump or non-finite value between samples")

    if profile is None:
        try:
            profile = estimate_asymptotics(A)
        except PotentialValueError as exc:
            notes.append(f"asymptotic fit failed: {exc}")
            profile = None
    exponent_ok = profile is not None and profile.valid_for_A(N, p)
    if profile is not None and not exponent_ok:
        notes.append(
            f"exponents a0={profile.a0:.6g}, aInf={profile.aInf:.6g} outside ({p - N:g}, {p:g}]"
        )
    if profile is not None and not profile.reliable:
        notes.append("asymptotic fit residual above threshold; consider manual exponents")

    def v_fn(x):
        return float(V._eval(np.array([x]))[0])

    def ks_fn(x):
        return float(K._eval(np.array([x]))[0]) ** s

    with np.errstate(all="ignore"):
        v_int = _quad_finite(v_fn)
        ks_int = _quad_finite(ks_fn)
    if not math.isfinite(v_int):
        notes.append("V failed the local integrability quadrature on [1/2, 2]")
    if not math.isfinite(ks_int):
        notes.append(f"K^{s:g} failed the local integrability quadrature on [1/2, 2]")

    return HypothesisReport(
        A_ok=A_pos and continuity and exponent_ok,
        V_ok=V_nonneg and math.isfinite(v_int),
        K_ok=K_pos and math.isfinite(ks_int),
        profile=profile,
        A_positive=A_pos,
        K_positive=K_pos,
        V_nonnegative=V_nonneg,
        continuity_ok=continuity,
        V_integral=v_int,
        K_s_integral=ks_int,
        notes=notes,
    )
