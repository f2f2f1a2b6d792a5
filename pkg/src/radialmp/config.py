"""Run configuration: strict JSON schema, rational literals and hypothesis derivation.

Numbers may be given as JSON numbers or as strings holding a rational such as
"3/2"; rationals stay exact through the exponent maps.  Unknown keys anywhere
are errors.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

from .exponents import ProblemParams, derive_infinity_pair, derive_origin_pair
from .nonlinearity import KINDS, Nonlinearity
from .potentials import PotentialExpr, PotentialSyntaxError, PotentialValueError, estimate_asymptotics, parse_potential
from .probe import Potentials
from .solver import GridSpec, SolverConfig


class ConfigError(ValueError):
    """Malformed configuration (exit code 3)."""


class HypothesisError(ValueError):
    """Configuration is well formed but violates a standing hypothesis (exit code 1)."""


SCHEMA: dict[str, set[str]] = {
    "problem": {"N", "p", "s"},
    "potentials": {"A", "V", "K"},
    "hypotheses": {"R1", "R2", "alpha0", "beta0", "alphaInf", "betaInf", "a0", "aInf"},
    "grid": {"rMin", "rMax", "nodesPerDecade", "maxSpacing"},
    "exponents": {"q1", "q2"},
    "nonlinearity": {"kind", "q1", "q2", "q"},
    "solver": {"maxIterations", "residualTol", "pathResolution", "seed", "initialAmplitude", "restarts", "probeStarts"},
    "probe": {"starts", "seed", "radiiOrigin", "radiiInfinity", "slopeTol", "gridOrigin", "gridInfinity"},
}
GRID_KEYS = SCHEMA["grid"]
REQUIRED = ("problem", "potentials")


def number(value, where: str):
    """JSON number or rational string -> int, float or Fraction."""
    if isinstance(value, bool):
        raise ConfigError(f"{where}: expected a number, got a boolean")
    if isinstance(value, (int, float)):
        if isinstance(value, float) and not math.isfinite(value) and value != math.inf:
            raise ConfigError(f"{where}: number must be finite")
        return value
    if isinstance(value, str):
        text = value.strip()
        if text.lower() in ("inf", "infinity"):
            return math.inf
        try:
            return Fraction(text)
        except (ValueError, ZeroDivisionError):
            pass
    raise ConfigError(f"{where}: expected a number or a rational string like '3/2', got {value!r}")


def snap(x: float, tol: float = 1e-9, max_den: int = 64):
    """Replace a float within tol of a small-denominator rational by that rational."""
    fr = Fraction(x).limit_denominator(max_den)
    return fr if abs(float(fr) - x) <= tol else x


def _grid_spec(d: dict, where: str, base: GridSpec | None = None) -> GridSpec:
    unknown = set(d) - GRID_KEYS
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    base = base or GridSpec()
    kw = {}
    for k in ("rMin", "rMax", "maxSpacing"):
        if k in d and d[k] is not None:
            kw[k] = float(number(d[k], f"{where}.{k}"))
    if "nodesPerDecade" in d:
        v = d["nodesPerDecade"]
        if not isinstance(v, int) or isinstance(v, bool) or v < 4:
            raise ConfigError(f"{where}.nodesPerDecade must be an integer >= 4")
        kw["nodesPerDecade"] = v
    spec = GridSpec(**{**base.__dict__, **kw})
    if not 0 < spec.rMin < spec.rMax:
        raise ConfigError(f"{where}: need 0 < rMin < rMax")
    if spec.maxSpacing is not None and spec.maxSpacing <= 0:
        raise ConfigError(f"{where}.maxSpacing must be positive")
    return spec


@dataclass
class RunConfig:
    N: int
    p: Any
    s: Any
    potentials_text: dict
    potentials: Potentials
    hypotheses: dict
    grid: GridSpec
    exponents: dict | None
    nonlinearity: Nonlinearity | None
    solver: dict
    probe: dict
    raw: dict = field(repr=False, default_factory=dict)

    def solver_config(self, seed: int | None = None) -> SolverConfig:
        if self.nonlinearity is None:
            raise ConfigError("missing nonlinearity section")
        kw = dict(self.solver)
        if seed is not None:
            kw["seed"] = seed
        return SolverConfig(grid=self.grid, nonlinearity=self.nonlinearity, **kw)


def parse_config(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(data) - set(SCHEMA)
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    for sec in REQUIRED:
        if sec not in data:
            raise ConfigError(f"missing required section {sec!r}")
    for sec, val in data.items():
        if not isinstance(val, dict):
            raise ConfigError(f"section {sec!r} must be an object")
        bad = set(val) - SCHEMA[sec]
        if bad:
            raise ConfigError(f"{sec}: unknown keys {sorted(bad)}")

    prob = data["problem"]
    if "N" not in prob or "p" not in prob:
        raise ConfigError("problem needs N and p")
    N = prob["N"]
    if not isinstance(N, int) or isinstance(N, bool):
        raise ConfigError("problem.N must be an integer")
    p = number(prob["p"], "problem.p")
    s = number(prob.get("s", 2), "problem.s")
    if s <= 1:
        raise ConfigError("problem.s must exceed 1")

    pt = data["potentials"]
    texts = {}
    exprs = {}
    for name in ("A", "V", "K"):
        if name not in pt:
            raise ConfigError(f"potentials.{name} is required")
        if not isinstance(pt[name], str):
            raise ConfigError(f"potentials.{name} must be a string")
        try:
            exprs[name] = parse_potential(pt[name], positive=(name == "K"))
        except (PotentialSyntaxError, PotentialValueError) as exc:
            raise ConfigError(f"potentials.{name}: {exc}") from exc
        texts[name] = pt[name]

    hyp = {k: number(v, f"hypotheses.{k}") for k, v in data.get("hypotheses", {}).items()}
    grid = _grid_spec(data.get("grid", {}), "grid")

    exps = None
    if "exponents" in data:
        exps = {k: number(v, f"exponents.{k}") for k, v in data["exponents"].items()}

    nl = None
    if "nonlinearity" in data:
        d = data["nonlinearity"]
        kind = d.get("kind")
        if kind not in KINDS:
            raise ConfigError(f"nonlinearity.kind must be one of {KINDS}")
        if kind == "purePower":
            if "q" in d:
                q1 = q2 = number(d["q"], "nonlinearity.q")
            elif "q1" in d:
                q1 = number(d["q1"], "nonlinearity.q1")
                q2 = number(d.get("q2", d["q1"]), "nonlinearity.q2")
            else:
                raise ConfigError("purePower needs q")
        else:
            if "q1" not in d or "q2" not in d:
                raise ConfigError(f"{kind} needs q1 and q2")
            q1, q2 = number(d["q1"], "nonlinearity.q1"), number(d["q2"], "nonlinearity.q2")
        try:
            nl = Nonlinearity(kind, float(q1), float(q2))
        except ValueError as exc:
            raise ConfigError(f"nonlinearity: {exc}") from exc

    solver = {}
    for k, v in data.get("solver", {}).items():
        if k in ("maxIterations", "pathResolution", "seed", "restarts", "probeStarts"):
            if not isinstance(v, int) or isinstance(v, bool):
                raise ConfigError(f"solver.{k} must be an integer")
            solver[k] = v
        else:
            solver[k] = float(number(v, f"solver.{k}"))
    try:
        SolverConfig(grid=grid, nonlinearity=nl or Nonlinearity.pure(2.0), **solver)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"solver: {exc}") from exc

    probe = {}
    for k, v in data.get("probe", {}).items():
        if k in ("gridOrigin", "gridInfinity"):
            if not isinstance(v, dict):
                raise ConfigError(f"probe.{k} must be an object")
            probe[k] = _grid_spec(v, f"probe.{k}", grid)
        elif k in ("radiiOrigin", "radiiInfinity"):
            if not isinstance(v, list) or len(v) < 2:
                raise ConfigError(f"probe.{k} must be a list of at least two radii")
            probe[k] = [float(number(x, f"probe.{k}")) for x in v]
        elif k in ("starts", "seed"):
            if not isinstance(v, int) or isinstance(v, bool) or v < 0:
                raise ConfigError(f"probe.{k} must be a nonnegative integer")
            probe[k] = v
        else:
            probe[k] = float(number(v, f"probe.{k}"))

    return RunConfig(N, p, s, texts, Potentials(exprs["A"], exprs["V"], exprs["K"]), hyp, grid,
                     exps, nl, solver, probe, data)


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return parse_config(data)


@dataclass
class Resolved:
    params: ProblemParams
    sources: dict
    notes: list


def resolve_params(cfg: RunConfig, validate: bool = True) -> Resolved:
    """Fill in a0, aInf, (alpha, beta) pairs and radii, deriving what is absent.

    Order: asymptotic fit of A for a0/aInf; the supremal alpha0 with beta0 = 0 at
    the origin; at infinity the (alpha, beta) pair on the scan grid with the
    smallest bound; R1 = R2 = 1.
    """
    h = dict(cfg.hypotheses)
    sources = {}
    notes = []
    p, N = cfg.p, cfg.N
    if "a0" not in h or "aInf" not in h:
        try:
            prof = estimate_asymptotics(cfg.potentials.A)
        except PotentialValueError as exc:
            raise HypothesisError(f"asymptotic fit of A failed: {exc}") from exc
        if not prof.reliable:
            notes.append("asymptotic fit of A has a large residual; consider setting a0/aInf manually")
        for key, val in (("a0", prof.a0), ("aInf", prof.aInf)):
            if key not in h:
                h[key] = snap(val)
                sources[key] = "fit"
    for key in ("a0", "aInf"):
        sources.setdefault(key, "config")
    h.setdefault("R1", 1)
    h.setdefault("R2", 1)

    bad = [k for k in ("a0", "aInf") if not p - N < h[k] <= p]
    if bad and validate:
        raise HypothesisError("; ".join(f"{k}={float(h[k]):.6g} outside (p-N, p]" for k in bad))

    if "alpha0" not in h:
        if bad:
            h["alpha0"], h["beta0"] = 0, h.get("beta0", 0)
        else:
            pair = derive_origin_pair(cfg.potentials.K, cfg.potentials.V, h["a0"], p, N, float(h["R1"]))
            if pair is None:
                raise HypothesisError("no alpha0 with a finite ess-sup ratio near the origin")
            h["alpha0"], h["beta0"] = pair.alpha, pair.beta
            sources["alpha0"] = sources["beta0"] = "scan"
    h.setdefault("beta0", 0)
    if "alphaInf" not in h:
        if bad:
            h["alphaInf"], h["betaInf"] = 0, h.get("betaInf", 0)
        else:
            betas = [h["betaInf"]] if "betaInf" in h else None
            kw = {"betas": betas} if betas else {}
            pair = derive_infinity_pair(cfg.potentials.K, cfg.potentials.V, h["aInf"], p, N, float(h["R2"]), **kw)
            if pair is None:
                raise HypothesisError("no (alphaInf, betaInf) with a finite ess-sup ratio at infinity")
            h["alphaInf"], h["betaInf"] = pair.alpha, pair.beta
            sources["alphaInf"] = sources["betaInf"] = "scan"
    h.setdefault("betaInf", 0)
    for k in ("alpha0", "beta0", "alphaInf", "betaInf", "R1", "R2"):
        sources.setdefault(k, "config" if k in cfg.hypotheses else "default")

    kwargs = dict(N=N, p=p, a0=h["a0"], aInf=h["aInf"], alpha0=h["alpha0"], beta0=h["beta0"],
                  alphaInf=h["alphaInf"], betaInf=h["betaInf"], R1=h["R1"], R2=h["R2"])
    if validate:
        try:
            params = ProblemParams(**kwargs)
        except ValueError as exc:
            raise HypothesisError(str(exc)) from exc
    else:
        params = object.__new__(ProblemParams)
        for k, v in kwargs.items():
            object.__setattr__(params, k, v)
    return Resolved(params, sources, notes)
