"""Command-line front end: ``caldet <command> --scenario <path> [--out <dir>] [flags]``.

Exit codes: 0 success, 2 validation failure, 3 numeric failure (including a
verification that misses its tolerance).  Diagnostics go to stderr.
"""
from __future__ import annotations

import argparse
import dataclasses
import math
import sys
from pathlib import Path

import numpy as np

from .boundary import wellposed_check
from .calderon import calderon_frame, s_matrix
from .errors import CaldetError, InputError, NumericError
from .fredholm import index_check
from .operators import hat_system
from .oracle import (eigenvalues, relative_log_det_first_order, signed_zeta_prime,
                     spectral_zeta_det, zeta_det, zeta_values)
from .quillen import (FamilyGrid, curvature_difference, dirac_laplacian, log_quillen_metric,
                      metric_ratio_check, parallel_map)
from .reldet import (AsymptoticModel, RayConfig, characteristic_ratio, canonical_det,
                     pick_normalization, relative_zeta_det, verify_trace_identity)
from .report import (CURVATURE_HEADER, CURVE_HEADER, SPECTRUM_HEADER, build_report,
                     canonical_json, csv_text, curve_rows, write_text)
from .scenario import Scenario, ScenarioError, load_scenario

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERIC = 3

DEFAULT_TOL = {
    "verify-parametrix": 1e-6,
    "verify-thm1": 1e-5,
    "metrics": 1e-5,
    "curvature": 1e-3,
}


class VerificationFailed(NumericError):
    """A verification command produced a discrepancy above its tolerance."""


@dataclasses.dataclass
class Outcome:
    result: dict
    csv: dict = dataclasses.field(default_factory=dict)
    passed: bool | None = None
    message: str = ""


def _threaded_map(fn, items):
    return parallel_map(fn, list(items))


def _require_self_adjoint(sc: Scenario, what: str):
    if not sc.self_adjoint:
        raise ScenarioError(f"{what} needs a scenario flagged self_adjoint "
                            "(the eigenvalue oracle handles real spectra only)", None, sc.source)


# ---------------------------------------------------------------------------
# commands


def cmd_describe(sc: Scenario, tol: float | None) -> Outcome:
    frame = calderon_frame(hat_system(sc.operator, 0.0), sc.steps)
    conds = {}
    mismatch = []
    for key, p in sorted(sc.conditions.items()):
        ok, diag = wellposed_check(p, frame)
        idx = index_check(sc.operator, p)
        conds[key] = {"kind": sc.condition_specs[key].describe(), "rank": p.rank,
                      "wellposed_at_zero": ok,
                      "min_singular_value": diag["min_singular_value"],
                      "index": idx.to_dict()}
        if sc.invertible and not ok:
            mismatch.append(key)
    result = {"N": sc.N, "r": sc.r, "m": sc.m, "conditions": conds,
              "description": sc.description}
    if mismatch:
        return Outcome(result, passed=False,
                       message=f"scenario is flagged invertible but {', '.join(mismatch)} "
                               "is not well posed at lam=0")
    return Outcome(result)


def _spectrum_entry(sc: Scenario, key: str, count: int, steps: int | None):
    p = sc.condition(key)
    found = eigenvalues(sc.operator, p, count, steps=steps)
    entry = {"values": found.values, "multiplicities": found.multiplicities,
             "window": list(found.window), "winding": found.winding,
             "count": found.count, "zero_mode": found.has_zero_mode()}
    if not found.has_zero_mode():
        if np.all(found.values > 0):
            rep = zeta_det(zeta_values(found, [1.0, 2.0], r=sc.r, head_count=count))
            entry["zeta"] = rep.to_dict()
        else:
            z0, zp = signed_zeta_prime(found.expanded(), sc.r, sc.ray.theta)
            entry["zeta"] = {"cut_angle": sc.ray.theta, "zeta_at_zero": z0,
                             "zeta_prime_at_zero": zp, "log_det": -zp}
    return entry, found


def cmd_spectrum(sc: Scenario, tol: float | None) -> Outcome:
    _require_self_adjoint(sc, "spectrum")
    result, csvs = {}, {}
    for key in sorted(sc.conditions):
        entry, found = _spectrum_entry(sc, key, sc.oracle_count, None)
        result[key] = entry
        csvs[f"spectrum.{key}"] = (SPECTRUM_HEADER, found.rows())
    return Outcome(result, csvs)


def cmd_canonical_det(sc: Scenario, tol: float | None) -> Outcome:
    p1, p2 = sc.condition("P1"), sc.condition("P2")
    frame = calderon_frame(hat_system(sc.operator, 0.0), sc.steps)
    norm = pick_normalization(p1, p2)
    result = {"normalization": norm,
              "characteristic_ratio": characteristic_ratio(frame, p1, p2),
              "singular_values": {k: np.linalg.svd(s_matrix(frame, p), compute_uv=False)
                                  for k, p in (("P1", p1), ("P2", p2))},
              "steps": frame.steps}
    result["canonical_det"] = canonical_det(frame, p1, p2) if norm == "canonical" else None
    return Outcome(result)


def _relative(sc: Scenario, oracle_ratio=None):
    return relative_zeta_det(sc.operator, sc.condition("P1"), sc.condition("P2"), sc.ray,
                             sc.model, sc.equal_zeta_zero, oracle_ratio, sc.steps,
                             map_fn=_threaded_map)


def cmd_relative_det(sc: Scenario, tol: float | None) -> Outcome:
    rep = _relative(sc, sc.expected_ratio)
    return Outcome(rep.to_dict(), {"curve": (CURVE_HEADER, curve_rows(rep.curve))})


def cmd_verify_parametrix(sc: Scenario, tol: float) -> Outcome:
    checks = verify_trace_identity(sc.operator, sc.condition("P1"), sc.condition("P2"),
                                   sc.parametrix_lambdas, sc.steps)
    rows = [{"lambda": c.lam, "trace_difference": c.trace,
             "minus_log_derivative": c.log_derivative, "relative_error": c.relative_error}
            for c in checks]
    worst = max(c.relative_error for c in checks)
    return Outcome({"checks": rows, "max_relative_error": worst}, passed=worst < tol,
                   message=f"max relative error {worst:.3e} (tolerance {tol:.1e})")


def cmd_verify_thm1(sc: Scenario, tol: float) -> Outcome:
    p1, p2 = sc.condition("P1"), sc.condition("P2")
    result: dict = {}
    oracle = None
    if sc.self_adjoint:
        if sc.r == 1:
            s1 = eigenvalues(sc.operator, p1, sc.oracle_count)
            s2 = eigenvalues(sc.operator, p2, sc.oracle_count)
            oracle = complex(np.exp(relative_log_det_first_order(s1, s2, sc.ray.theta, sc.r)))
            result["oracle_route"] = "signed spectrum"
        else:
            d1 = spectral_zeta_det(sc.operator, p1, sc.oracle_count)
            d2 = spectral_zeta_det(sc.operator, p2, sc.oracle_count)
            oracle = complex(math.exp(d1.log_det - d2.log_det))
            result["oracle_route"] = "positive spectrum"
    elif sc.expected_ratio is None:
        raise ScenarioError("verify-thm1 needs a self_adjoint scenario or oracle.expected_ratio",
                            None, sc.source)
    rep = _relative(sc, oracle)
    result["determinant"] = rep.to_dict()
    errs = {}
    if oracle is not None:
        errs["oracle"] = rep.oracle_discrepancy
    if sc.expected_ratio is not None:
        errs["expected"] = float(abs(rep.relative_zeta_det / sc.expected_ratio - 1.0))
    if sc.self_adjoint and sc.r == 1:
        # squared modulus against the quotient of Laplacian zeta determinants
        base = sc.operator.factors[0]
        lq = [log_quillen_metric(dirac_laplacian(base, p), sc.oracle_count) for p in (p1, p2)]
        lap = math.exp(lq[0] - lq[1])
        result["laplacian_ratio"] = lap
        result["squared_modulus"] = abs(rep.relative_zeta_det) ** 2
        errs["laplacian"] = abs(abs(rep.relative_zeta_det) ** 2 / lap - 1.0)
    result["relative_errors"] = errs
    worst = max(errs.values())
    result["max_relative_error"] = worst
    return Outcome(result, {"curve": (CURVE_HEADER, curve_rows(rep.curve))}, worst < tol,
                   f"max relative error {worst:.3e} (tolerance {tol:.1e})")


def cmd_metrics(sc: Scenario, tol: float) -> Outcome:
    if sc.r != 1:
        raise ScenarioError("metrics needs a first-order operator (one factor)", None, sc.source)
    rep = metric_ratio_check(sc.operator.factors[0], sc.condition("P1"), sc.condition("P2"),
                             sc.oracle_count, sc.steps)
    return Outcome(rep.to_dict(), passed=rep.discrepancy < tol,
                   message=f"metric-ratio discrepancy {rep.discrepancy:.3e} (tolerance {tol:.1e})")


def cmd_curvature(sc: Scenario, tol: float, halving: bool = False) -> Outcome:
    if sc.family is None:
        raise ScenarioError("curvature needs a 'family' block", None, sc.source)
    fam = sc.family
    grid = FamilyGrid(sc.family_factor, sc.condition("P1"), sc.condition("P2"), fam.center,
                      fam.h, fam.half_width)
    rep = curvature_difference(grid, count=sc.oracle_count, steps=sc.steps)
    result = {"grid": rep.to_dict()}
    csvs = {"curvature": (CURVATURE_HEADER, rep.rows())}
    if halving:
        fine = curvature_difference(grid.refined(), count=sc.oracle_count, steps=sc.steps)
        result["refined"] = fine.to_dict()
        result["halving_ratio"] = (rep.discrepancy / fine.discrepancy
                                   if fine.discrepancy > 0 else None)
        csvs["curvature.refined"] = (CURVATURE_HEADER, fine.rows())
    d = rep.discrepancy
    return Outcome(result, csvs, d < tol, f"max curvature discrepancy {d:.3e} (tolerance {tol:.1e})")


COMMANDS = {
    "describe": cmd_describe,
    "spectrum": cmd_spectrum,
    "canonical-det": cmd_canonical_det,
    "relative-det": cmd_relative_det,
    "verify-parametrix": cmd_verify_parametrix,
    "verify-thm1": cmd_verify_thm1,
    "metrics": cmd_metrics,
    "curvature": cmd_curvature,
}


# ---------------------------------------------------------------------------
# argument handling


def _parse_radii(text: str, theta: float, min_gap: float) -> RayConfig:
    """``RMIN:RMAX[:COUNT]`` (geometric) or a comma-separated list."""
    try:
        if ":" in text:
            parts = text.split(":")
            if len(parts) not in (2, 3):
                raise ValueError
            count = int(parts[2]) if len(parts) == 3 else 24
            return RayConfig.geometric(theta, float(parts[0]), float(parts[1]), count, min_gap)
        vals = tuple(float(x) for x in text.split(","))
    except ValueError:
        raise InputError(f"--radii: cannot parse {text!r}; use RMIN:RMAX[:COUNT] or r1,r2,...") from None
    return RayConfig(theta, vals, min_gap)


def apply_overrides(sc: Scenario, args) -> Scenario:
    changes = {}
    if args.steps is not None:
        if args.steps < 2 or args.steps % 2:
            raise InputError("--steps must be an even integer >= 2")
        changes["steps"] = args.steps
    if args.radii is not None:
        changes["ray"] = _parse_radii(args.radii, sc.ray.theta, sc.ray.min_gap)
    if args.fit_terms is not None:
        if args.fit_terms < 1:
            raise InputError("--fit-terms must be positive")
        changes["model"] = AsymptoticModel(sc.r, J=args.fit_terms, log_terms=sc.model.log_terms,
                                           include_log=sc.model.include_log)
    if args.count is not None:
        if args.count < 1:
            raise InputError("--count must be positive")
        changes["oracle_count"] = args.count
    if args.tol is not None:
        if not args.tol > 0:
            raise InputError("--tol must be positive")
        changes["tol"] = args.tol
    return dataclasses.replace(sc, **changes) if changes else sc


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="caldet",
        description="Canonical and zeta-regularized determinants of 1-D Dirac-type "
                    "boundary value problems.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--scenario", required=True, help="scenario JSON file")
    ap.add_argument("--out", help="directory for the JSON report and CSV files "
                                  "(default: print the report on stdout)")
    ap.add_argument("--steps", type=int, help="transport step count (even)")
    ap.add_argument("--radii", help="ray radii: RMIN:RMAX[:COUNT] or r1,r2,...")
    ap.add_argument("--fit-terms", type=int, help="number of power terms in the asymptotic fit")
    ap.add_argument("--tol", type=float, help="verification tolerance")
    ap.add_argument("--count", type=int, help="eigenvalues used by the oracle")
    ap.add_argument("--halving", action="store_true",
                    help="curvature: repeat on the grid with half the spacing")
    return ap


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    args = build_parser().parse_args(argv)
    command = args.command
    try:
        sc = apply_overrides(load_scenario(args.scenario), args)
        tol = sc.tol if sc.tol is not None else DEFAULT_TOL.get(command)
        fn = COMMANDS[command]
        outcome = fn(sc, tol, args.halving) if command == "curvature" else fn(sc, tol)
    except InputError as exc:
        print(f"caldet: validation error: {exc}", file=stderr)
        return EXIT_VALIDATION
    except NumericError as exc:
        print(f"caldet: numeric error ({type(exc).__name__}): {exc}", file=stderr)
        return EXIT_NUMERIC
    except CaldetError as exc:  # pragma: no cover - every error is one of the two kinds
        print(f"caldet: error: {exc}", file=stderr)
        return EXIT_NUMERIC

    status = "ok" if outcome.passed in (None, True) else "failed"
    report = canonical_json(build_report(command, sc.to_dict(), outcome.result, status, tol))
    out_dir = args.out or sc.output_dir
    if out_dir:
        out = Path(out_dir)
        written = [write_text(out / f"{sc.name}.{command}.json", report)]
        for tag, (header, rows) in sorted(outcome.csv.items()):
            written.append(write_text(out / f"{sc.name}.{tag}.csv", csv_text(header, rows)))
        for path in written:
            print(str(path), file=stdout)
    else:
        stdout.write(report)
    if outcome.message:
        print(f"caldet: {outcome.message}", file=stderr)
    if outcome.passed is False:
        code = EXIT_VALIDATION if command == "describe" else EXIT_NUMERIC
        print(f"caldet: {command} failed", file=stderr)
        return code
    return EXIT_OK


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":  # pragma: no cover
    main()
