"""Command line front end: window, probe, solve and verify.

Exit codes: 0 success, 1 infeasible window or failed hypothesis/check,
2 solver non-convergence, 3 configuration or parse error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import warnings
from fractions import Fraction

import numpy as np
from scipy import linalg

from .config import ConfigError, HypothesisError, RunConfig, load_config, resolve_params
from .exponents import (
    ProblemParams,
    WindowError,
    admissible_pair,
    decay_rate_infinity,
    decay_rate_origin,
    exponent_window,
    sobolev_exponents,
)
from .grid import RadialGrid, WeightedSpace
from .nonlinearity import Nonlinearity
from .potentials import AsymptoticProfile, verify_hypotheses
from .probe import ProbeWarning, decay_study, estimate_S0
from .solver import GeometryError, NonConvergence, SolverError, solve
from . import verify as suites

EXIT_OK, EXIT_INFEASIBLE, EXIT_NONCONVERGED, EXIT_CONFIG = 0, 1, 2, 3


def _num(x):
    """JSON-friendly number: exact rationals become floats, infinities become strings."""
    if isinstance(x, Fraction):
        x = float(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
    if isinstance(x, np.integer):
        return int(x)
    return x


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return _num(obj)


def _rational(x) -> str | None:
    if isinstance(x, (int, Fraction)) and not isinstance(x, bool):
        x = Fraction(x)
        return f"{x.numerator}/{x.denominator}"
    return None


def _params_dict(params: ProblemParams) -> dict:
    keys = ("N", "p", "a0", "aInf", "alpha0", "beta0", "alphaInf", "betaInf", "R1", "R2")
    return {k: getattr(params, k) for k in keys}


def write_outputs(out_dir: str | None, report: dict, files: dict | None = None) -> str:
    text = json.dumps(_clean(report), indent=2, ensure_ascii=False) + "\n"
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fh:
            fh.write(text)
        for name, content in (files or {}).items():
            with open(os.path.join(out_dir, name), "w", encoding="utf-8") as fh:
                fh.write(content)
    return text


# ---------------------------------------------------------------------------
# window
# ---------------------------------------------------------------------------


def window_report(cfg: RunConfig, res) -> tuple[dict, bool]:
    params = res.params
    win = exponent_window(params)
    p = params.p
    e_lo, e_hi, e_inf = win.existence_window(p)
    p0, pInf = sobolev_exponents(params)
    notes = list(res.notes)
    diagnosis = []
    if not win.feasible:
        diagnosis.append(
            f"origin window empty: max(1, p*beta0)={float(win.q1Lo):.6g} >= q*(a0, alpha0, beta0)={float(win.q1Hi):.6g}")
    elif not e_lo < e_hi:
        diagnosis.append(f"existence window empty: need p={float(p):.6g} < q1 < {float(win.q1Hi):.6g}")
    if params.betaInf > 0 and win.q2Lo != pInf:
        notes.append(
            f"infinity bound uses q*(aInf, alphaInf, betaInf) with betaInf={float(params.betaInf):g}; "
            f"it differs from the Sobolev-type value pN/(N+aInf-p)={float(pInf):.6g}")
    report = {
        "command": "window",
        "params": _params_dict(params),
        "sources": res.sources,
        "origin": {"lo": win.q1Lo, "hi": win.q1Hi, "loRational": _rational(win.q1Lo),
                   "hiRational": _rational(win.q1Hi), "existenceLo": e_lo, "feasible": win.feasible},
        "infinity": {"lo": win.q2Lo, "loRational": _rational(win.q2Lo), "existenceLo": e_inf},
        "sobolev": {"p0": p0, "pInf": pInf},
    }
    feasible = win.feasible and e_lo < e_hi
    if cfg.exponents:
        q1, q2 = cfg.exponents.get("q1"), cfg.exponents.get("q2")
        dec = {}
        if q1 is not None:
            try:
                dec["origin"] = decay_rate_origin(params, q1)
            except WindowError as exc:
                dec["origin"] = None
                diagnosis.append(str(exc))
        if q2 is not None:
            try:
                dec["infinity"] = decay_rate_infinity(params, q2)
            except WindowError as exc:
                dec["infinity"] = None
                diagnosis.append(str(exc))
        report["decay"] = dec
        if q1 is not None and q2 is not None:
            adm = admissible_pair(params, q1, q2, existence=False)
            ex = admissible_pair(params, q1, q2, existence=True)
            report["admissible"] = adm.ok
            report["existenceAdmissible"] = ex.ok
            diagnosis.extend(d for d in adm.diagnosis if d not in diagnosis)
            if adm.ok and not ex.ok:
                notes.extend(ex.diagnosis)
            feasible = win.feasible and adm.ok
    report["feasible"] = feasible
    report["diagnosis"] = diagnosis
    report["notes"] = notes
    return report, feasible


def cmd_window(cfg: RunConfig, out: str | None, seed: int | None) -> int:
    res = resolve_params(cfg)
    report, feasible = window_report(cfg, res)
    print(write_outputs(out, report), end="")
    return EXIT_OK if feasible else EXIT_INFEASIBLE


# ---------------------------------------------------------------------------
# probe
# ---------------------------------------------------------------------------


def _default_radii(side, params: ProblemParams, grid: RadialGrid):
    if side == "origin":
        radii = [params.R1 / 2 ** k for k in range(11) if params.R1 / 2 ** k > 100 * grid.rMin]
    else:
        radii = [params.R2 * 2 ** k for k in range(11) if params.R2 * 2 ** k < grid.rMax / 10]
    return radii


def probe_oracle(cfg: RunConfig, params: ProblemParams, grid: RadialGrid, seed: int) -> dict:
    """Dense generalized eigenvalue for S0(2, R1) when p = q1 = 2, against the ascent."""
    space = WeightedSpace.build(grid, cfg.potentials.A, cfg.potentials.V, cfg.potentials.K)
    m = grid.n - 1
    diag, off = space.quadratic_form()
    B = np.diag(diag[:m]) + np.diag(off[: m - 1], 1) + np.diag(off[: m - 1], -1)
    M = np.diag(space.massK((0.0, params.R1))[:m])
    lam = float(linalg.eigh(M, B, eigvals_only=True, subset_by_index=[m - 1, m - 1])[0])
    est = estimate_S0(2.0, params.R1, cfg.potentials, params, grid, cfg.probe.get("starts", 8), seed,
                      space=space).value
    return {"R": params.R1, "eigenvalue": lam, "ascent": est, "relativeError": abs(est - lam) / lam,
            "pass": abs(est - lam) <= 1e-8 * lam}


def cmd_probe(cfg: RunConfig, out: str | None, seed: int | None) -> int:
    if not cfg.exponents or "q1" not in cfg.exponents or "q2" not in cfg.exponents:
        raise ConfigError("probe needs exponents.q1 and exponents.q2")
    res = resolve_params(cfg)
    params = res.params
    q1, q2 = cfg.exponents["q1"], cfg.exponents["q2"]
    win = exponent_window(params)
    problems = []
    if not win.q1Lo < q1 < win.q1Hi:
        problems.append(f"q1={float(q1):.6g} outside the open origin window ({float(win.q1Lo):.6g}, {float(win.q1Hi):.6g})")
    if not q2 > win.q2Lo:
        problems.append(f"q2={float(q2):.6g} not above the infinity bound {float(win.q2Lo):.6g}")
    if problems:
        raise ConfigError("; ".join(problems))
    seed = cfg.probe.get("seed", 0) if seed is None else seed
    starts = cfg.probe.get("starts", 8)
    tol = cfg.probe.get("slopeTol", 0.25)
    g0 = cfg.probe.get("gridOrigin", cfg.grid).build(params.N)
    gI = cfg.probe.get("gridInfinity", cfg.grid).build(params.N)
    r0 = cfg.probe.get("radiiOrigin") or _default_radii("origin", params, g0)
    rI = cfg.probe.get("radiiInfinity") or _default_radii("infinity", params, gI)
    if len(r0) < 2 or len(rI) < 2:
        raise ConfigError("grid too short for a radius ladder; set probe.radiiOrigin/radiiInfinity")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ProbeWarning)
            origin = decay_study("origin", float(q1), r0, cfg.potentials, params, g0, starts, seed, tol)
            infinity = decay_study("infinity", float(q2), rI, cfg.potentials, params, gI, starts, seed, tol)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    report = {
        "command": "probe",
        "params": _params_dict(params),
        "origin": origin.to_dict(),
        "infinity": infinity.to_dict(),
        "warnings": origin.warnings + infinity.warnings,
    }
    if params.p == 2 and q1 == 2:
        report["oracle"] = probe_oracle(cfg, params, g0, seed)
    report["pass"] = origin.passed and infinity.passed
    print(write_outputs(out, report, {"probe_origin.csv": origin.to_csv(),
                                      "probe_infinity.csv": infinity.to_csv()}), end="")
    return EXIT_OK if report["pass"] else EXIT_INFEASIBLE


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------


def cmd_solve(cfg: RunConfig, out: str | None, seed: int | None) -> int:
    if cfg.nonlinearity is None:
        raise ConfigError("solve needs a nonlinearity section")
    res = resolve_params(cfg)
    params = res.params
    nl = cfg.nonlinearity
    adm = admissible_pair(params, nl.q1, nl.q2, existence=True)
    base = {"command": "solve", "params": _params_dict(params), "nonlinearity": nl.to_dict()}
    if not adm:
        report = {**base, "admissible": False, "diagnosis": adm.diagnosis}
        print(write_outputs(out, report), end="")
        return EXIT_INFEASIBLE
    scfg = cfg.solver_config(seed)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ProbeWarning)
            sol = solve(scfg, cfg.potentials, params, check_admissible=False)
        code = EXIT_OK
    except NonConvergence as exc:
        sol = exc.report
        code = EXIT_NONCONVERGED
    except GeometryError as exc:
        report = {**base, "admissible": True, "error": str(exc)}
        print(write_outputs(out, report), end="")
        return EXIT_INFEASIBLE
    except SolverError as exc:
        report = {**base, "admissible": True, "error": str(exc)}
        print(write_outputs(out, report), end="")
        return EXIT_NONCONVERGED
    report = {**base, "admissible": True, **sol.to_dict()}
    if code == EXIT_NONCONVERGED:
        report["error"] = f"residual {sol.residualNorm:.3e} above tolerance {scfg.residualTol:.3e}"
    print(write_outputs(out, report, {"profile.csv": sol.profile_csv()}), end="")
    return code


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


def cmd_verify(cfg: RunConfig, out: str | None, seed: int | None) -> int:
    seed = 0 if seed is None else seed
    checks = {}
    checks["exponentIdentities"] = suites.exponent_identity_audit(1000, seed)

    res = resolve_params(cfg, validate=False)
    params = res.params
    profile = AsymptoticProfile(float(params.a0), float(params.aInf), 1.0, 1.0)
    hyp = verify_hypotheses(cfg.potentials.A, cfg.potentials.V, cfg.potentials.K, cfg.N, float(cfg.p),
                            float(cfg.s), profile if "a0" in cfg.hypotheses or "aInf" in cfg.hypotheses else None)
    checks["hypotheses"] = {"pass": hyp.all_ok, **hyp.to_dict()}
    valid = not params.problems()
    grid = cfg.grid.build(cfg.N)
    if valid:
        p = float(params.p)
        checks["pointwise"] = suites.pointwise_audit(grid, cfg.potentials.A, profile, float(params.R1), p,
                                                     100, seed)
        q = float(cfg.nonlinearity.q1) if cfg.nonlinearity else (
            float(cfg.exponents["q1"]) if cfg.exponents and "q1" in cfg.exponents else 2 * p)
        R = float(params.R1)
        annuli = [(R / 2, R), (R, 2 * R), (R / 4, 4 * R)]
        annuli = [(a, b) for a, b in annuli if grid.rMin < a and b < grid.rMax]
        s = float(cfg.s)
        checks["annulus"] = suites.annulus_suite(grid, cfg.potentials.A, cfg.potentials.V, cfg.potentials.K,
                                                 params, q, [s, 2 * s], annuli, 100, seed)
    else:
        reason = "; ".join(params.problems())
        checks["pointwise"] = {"pass": False, "skipped": reason}
        checks["annulus"] = {"pass": False, "skipped": reason}
    nls = [cfg.nonlinearity] if cfg.nonlinearity else None
    checks["nonlinearity"] = suites.nonlinearity_suite(nls, float(cfg.p))
    ok = all(c["pass"] for c in checks.values())
    report = {"command": "verify", "params": _params_dict(params), "checks": checks, "pass": ok}
    print(write_outputs(out, report), end="")
    return EXIT_OK if ok else EXIT_INFEASIBLE


COMMANDS = {"window": cmd_window, "probe": cmd_probe, "solve": cmd_solve, "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="radialmp",
                                 description="Exponent windows, embedding probes and mountain-pass solutions "
                                             "for radial weighted p-Laplacian problems.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--out", help="directory for report.json and CSV files")
    ap.add_argument("--seed", type=int, help="seed for randomized starts (overrides the config)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed is not None and args.seed < 0:
        print("error: --seed must be nonnegative", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](cfg, args.out, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except HypothesisError as exc:
        print(f"hypothesis violated: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
