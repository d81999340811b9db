"""Deterministic JSON reports and CSV plot data.

Reports are canonical JSON: keys sorted, two-space indentation, floats in
shortest round-trip form, complex numbers as ``[re, im]``.  Identical inputs
therefore produce byte-identical files.
"""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import InputError
from .reldet import DeterminantReport, LogCurve

REPORT_SCHEMA = "caldet-report/1"


def to_jsonable(obj):
    """Convert numpy scalars/arrays and complex numbers to plain JSON values."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [_finite(float(obj.real)), _finite(float(obj.imag))]
    if isinstance(obj, (float, np.floating)):
        return _finite(float(obj))
    if obj is None or isinstance(obj, str):
        return obj
    raise InputError(f"cannot serialize {type(obj).__name__}")


def _finite(x: float) -> float | None:
    return x if math.isfinite(x) else None


def canonical_json(obj) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2, ensure_ascii=True,
                      allow_nan=False) + "\n"


def build_report(command: str, scenario: dict, result: dict, status: str = "ok",
                 tolerance: float | None = None) -> dict:
    return {"schema": REPORT_SCHEMA, "command": command, "scenario": scenario,
            "status": status, "tolerance": tolerance, "result": result}


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    """CSV with ``\\n`` line endings; ``None`` becomes an empty field."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if v is None else (repr(float(v)) if isinstance(v, (float, np.floating))
                                          else v) for v in row])
    return buf.getvalue()


CURVE_HEADER = ("abs_lambda", "re_log", "im_log")
SPECTRUM_HEADER = ("index", "eigenvalue", "multiplicity")
CURVATURE_HEADER = ("x", "y", "log_canonical_P1", "log_canonical_P2", "log_quillen_P1",
                    "log_quillen_P2", "curv_diff_zeta", "curv_diff_canonical")


def curve_rows(curve: LogCurve | None) -> list[tuple]:
    if curve is None:
        return []
    return [(float(r), float(v.real), float(v.imag)) for r, v in zip(curve.radii, curve.values)]


def write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path


# ---------------------------------------------------------------------------
# round trip


def _c(v):
    return None if v is None else complex(v[0], v[1])


def determinant_report_from_dict(d: dict) -> DeterminantReport:
    """Inverse of :meth:`DeterminantReport.to_dict`."""
    curve = None
    if d.get("curve") is not None:
        cv = d["curve"]
        radii = np.array(cv["radii"], dtype=float)
        vals = np.array([_c(v) for v in cv["log_values"]], dtype=np.complex128)
        curve = LogCurve(cv["theta"], radii, radii * np.exp(1j * cv["theta"]), vals,
                         cv["refinements"], d["branch_winding"], [], None, d["normalization"])
    return DeterminantReport(
        canonical_det_at_zero=_c(d["canonical_det_at_zero"]),
        lim_value=_c(d["lim_value"]),
        lim_residual=d["lim_residual"],
        lim_condition=d["lim_condition"],
        relative_zeta_det=_c(d["relative_zeta_det"]),
        branch_winding=d["branch_winding"],
        plain_limit=_c(d["plain_limit"]),
        limit_route=d["limit_route"],
        oracle_ratio=_c(d["oracle_ratio"]),
        oracle_discrepancy=d["oracle_discrepancy"],
        curve=curve,
        lim_fit_value=_c(d["lim_fit_value"]),
        normalization=d["normalization"],
    )
