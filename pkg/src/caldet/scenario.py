"""Scenario files: JSON descriptions of an operator, its boundary conditions
and the numerical settings used by the command-line tool.

Every JSON object and array remembers the line it starts on, so validation
errors point at the offending part of the file.  Complex numbers are
``[re, im]`` pairs; matrices are row-major nested arrays of such pairs.
"""
from __future__ import annotations

import json
import json.decoder
import json.scanner
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .boundary import (BoundaryProjection, anti_aps_projection, aps_projection,
                       dirichlet_projection, neumann_projection, twisted_projection)
from .errors import InputError
from .operators import ComposedOperator, DiracFactor, compose, factor_preset
from .reldet import AsymptoticModel, RayConfig

SCENARIO_SCHEMA = "caldet-scenario/1"


class ScenarioError(InputError):
    """Validation failure tied to a line of the scenario file."""

    def __init__(self, msg: str, line: int | None = None, source: str = "<scenario>"):
        self.line = line
        self.source = source
        where = f"{source}:{line}" if line is not None else source
        super().__init__(f"{where}: {msg}")


# ---------------------------------------------------------------------------
# line-tracking JSON


class _Obj(dict):
    line = 1


class _Arr(list):
    line = 1


def _line_of(s: str, idx: int) -> int:
    return s.count("\n", 0, idx) + 1


def _reject_duplicates(pairs):
    out = {}
    for k, v in pairs:
        if k in out:
            raise ValueError(f"duplicate key {k!r}")
        out[k] = v
    return out


class _LineDecoder(json.JSONDecoder):
    def __init__(self):
        super().__init__(object_pairs_hook=_reject_duplicates,
                         parse_constant=self._no_constant)
        self.parse_object = self._object
        self.parse_array = self._array
        self.scan_once = json.scanner.py_make_scanner(self)

    @staticmethod
    def _no_constant(name):
        raise ValueError(f"{name} is not allowed")

    @staticmethod
    def _object(s_and_end, strict, scan_once, object_hook, object_pairs_hook, memo=None):
        s, idx = s_and_end
        try:
            val, end = json.decoder.JSONObject(s_and_end, strict, scan_once, object_hook,
                                               object_pairs_hook, memo)
        except ValueError as exc:
            if isinstance(exc, json.JSONDecodeError):
                raise
            raise json.JSONDecodeError(str(exc), s, idx) from None
        out = _Obj(val)
        out.line = _line_of(s, idx - 1)
        return out, end

    @staticmethod
    def _array(s_and_end, scan_once):
        s, idx = s_and_end
        val, end = json.decoder.JSONArray(s_and_end, scan_once)
        out = _Arr(val)
        out.line = _line_of(s, idx - 1)
        return out, end


def load_json(text: str, source: str = "<scenario>") -> Any:
    try:
        return _LineDecoder().decode(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(exc.msg, exc.lineno, source) from None


# ---------------------------------------------------------------------------
# typed scenario


@dataclass(frozen=True)
class ConditionSpec:
    kind: str
    theta: float | None = None
    matrix: np.ndarray | None = field(default=None, compare=False)

    def describe(self) -> str:
        if self.kind == "twisted":
            return f"twisted({self.theta:.17g})"
        return self.kind


@dataclass(frozen=True)
class FamilySpec:
    center: complex
    h: float
    half_width: int = 2


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    operator: ComposedOperator
    factor_labels: tuple
    conditions: dict
    condition_specs: dict
    ray: RayConfig
    model: AsymptoticModel
    oracle_count: int
    expected_ratio: complex | None
    parametrix_lambdas: tuple
    self_adjoint: bool
    equal_zeta_zero: bool
    invertible: bool
    family: FamilySpec | None
    steps: int | None
    tol: float | None
    output_dir: str | None
    description: str = ""
    source: str = "<scenario>"

    @property
    def r(self) -> int:
        return self.operator.r

    @property
    def m(self) -> int:
        return self.operator.m

    @property
    def N(self) -> int:
        return self.operator.N

    def condition(self, key: str) -> BoundaryProjection:
        if key not in self.conditions:
            raise ScenarioError(f"condition {key} is required for this command", None, self.source)
        return self.conditions[key]

    def family_factor(self, b: complex) -> DiracFactor:
        """The single factor with ``A + b I`` (holomorphic shift family)."""
        f = self.operator.factors[0]
        if f.poly is not None:
            cs = (f.poly[0] + b * np.eye(f.m),) + tuple(f.poly[1:])
            return DiracFactor.polynomial(f.sigma, cs, label=f"{f.label}+b")
        coeff = lambda u, g=f.coeff: np.asarray(g(u)) + b * np.eye(f.m)
        return DiracFactor(f.sigma, coeff, f.m, f.constant_near_boundary, None, f"{f.label}+b")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "r": self.r,
            "m": self.m,
            "N": self.N,
            "factors": list(self.factor_labels),
            "conditions": {k: {"kind": s.describe(), "rank": self.conditions[k].rank}
                           for k, s in sorted(self.condition_specs.items())},
            "flags": {"self_adjoint": self.self_adjoint, "equal_zeta_zero": self.equal_zeta_zero,
                      "invertible": self.invertible},
            "ray": {"theta": self.ray.theta, "radii": list(self.ray.radii)},
            "fit": {"power_terms": self.model.J, "log_terms": self.model.log_terms},
        }


class _Reader:
    """Validation helpers bound to one source file."""

    def __init__(self, source: str, text: str = ""):
        self.source = source
        self.lines = text.splitlines()

    def key_line(self, node, key: str) -> int | None:
        """Line of ``"key"`` at or after the start of ``node``."""
        start = getattr(node, "line", 1)
        needle = json.dumps(key)
        for i in range(start - 1, len(self.lines)):
            if needle in self.lines[i]:
                return i + 1
        return getattr(node, "line", None)

    def fail(self, msg: str, node=None, line: int | None = None):
        ln = line if line is not None else getattr(node, "line", None)
        raise ScenarioError(msg, ln, self.source)

    def obj(self, node, what: str, allowed: set, required: set = frozenset()) -> dict:
        if not isinstance(node, dict):
            self.fail(f"{what} must be an object", node)
        unknown = sorted(set(node) - allowed)
        if unknown:
            self.fail(f"unknown key {unknown[0]!r} in {what} "
                      f"(allowed: {', '.join(sorted(allowed))})", node,
                      self.key_line(node, unknown[0]))
        missing = sorted(required - set(node))
        if missing:
            self.fail(f"missing key {missing[0]!r} in {what}", node)
        return node

    def number(self, v, what: str, parent) -> float:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.fail(f"{what} must be a number", parent)
        if not math.isfinite(v):
            self.fail(f"{what} must be finite", parent)
        return float(v)

    def integer(self, v, what: str, parent, lo: int = 1) -> int:
        if isinstance(v, bool) or not isinstance(v, int):
            self.fail(f"{what} must be an integer", parent)
        if v < lo:
            self.fail(f"{what} must be at least {lo}", parent)
        return int(v)

    def boolean(self, v, what: str, parent) -> bool:
        if not isinstance(v, bool):
            self.fail(f"{what} must be true or false", parent)
        return v

    def string(self, v, what: str, parent) -> str:
        if not isinstance(v, str):
            self.fail(f"{what} must be a string", parent)
        return v

    def complex_pair(self, v, what: str, parent) -> complex:
        if (not isinstance(v, list) or len(v) != 2
                or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in v)):
            self.fail(f"{what} must be an [re, im] pair of numbers", v if isinstance(v, list) else parent)
        if not all(math.isfinite(x) for x in v):
            self.fail(f"{what} has non-finite entries", v)
        return complex(v[0], v[1])

    def matrix(self, v, what: str, parent, size: int | None = None) -> np.ndarray:
        if not isinstance(v, list) or not v:
            self.fail(f"{what} must be a non-empty array of rows", v if isinstance(v, list) else parent)
        n = len(v)
        rows = []
        for i, row in enumerate(v):
            if not isinstance(row, list):
                self.fail(f"{what} row {i} must be an array of [re, im] pairs", v)
            if len(row) != n:
                self.fail(f"{what} must be square: row {i} has {len(row)} entries, expected {n}",
                          row)
            rows.append([self.complex_pair(x, f"{what}[{i}][{j}]", row) for j, x in enumerate(row)])
        if size is not None and n != size:
            self.fail(f"{what} must be {size} x {size}, got {n} x {n}", v)
        return np.array(rows, dtype=np.complex128)

    def angle(self, node, what: str) -> float:
        """``theta`` or ``theta_over_pi`` (exactly one)."""
        has_a, has_b = "theta" in node, "theta_over_pi" in node
        if has_a == has_b:
            self.fail(f"{what} needs exactly one of 'theta' and 'theta_over_pi'", node)
        if has_a:
            return self.number(node["theta"], f"{what}.theta", node)
        return math.pi * self.number(node["theta_over_pi"], f"{what}.theta_over_pi", node)


_TWISTED = re.compile(r"^twisted\(\s*([^)]+?)\s*\)$")
_PI_MULT = re.compile(r"^([-+]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][-+]?\d+)?)?\s*\*?\s*pi(?:\s*/\s*(\d+))?$")


def _parse_angle_text(text: str) -> float | None:
    """``1.57``, ``pi``, ``pi/3``, ``2pi/3`` or ``0.5*pi``."""
    text = text.strip()
    try:
        return float(text)
    except ValueError:
        pass
    mt = _PI_MULT.match(text)
    if not mt:
        return None
    k = float(mt.group(1)) if mt.group(1) else 1.0
    d = int(mt.group(2)) if mt.group(2) else 1
    if d == 0:
        return None
    return k * math.pi / d


_NAMED = {"aps", "anti_aps", "dirichlet", "neumann"}


def _condition(rd: _Reader, node, key: str, op: ComposedOperator,
               parent) -> tuple[ConditionSpec, BoundaryProjection]:
    what = f"conditions.{key}"
    n = op.N
    line = getattr(node, "line", getattr(parent, "line", None))
    if isinstance(node, str):
        if node in _NAMED:
            cspec = ConditionSpec(node)
        else:
            mt = _TWISTED.match(node)
            theta = _parse_angle_text(mt.group(1)) if mt else None
            if theta is None:
                rd.fail(f"{what}: unknown condition {node!r}; use aps, anti_aps, dirichlet, "
                        "neumann, twisted(theta) or an object with kind 'custom'", None, line)
            cspec = ConditionSpec("twisted", theta)
    else:
        obj = rd.obj(node, what, {"kind", "theta", "theta_over_pi", "matrix"}, {"kind"})
        kind = rd.string(obj["kind"], f"{what}.kind", obj)
        if kind == "twisted":
            rd.obj(node, what, {"kind", "theta", "theta_over_pi"})
            cspec = ConditionSpec("twisted", rd.angle(obj, what))
        elif kind == "custom":
            rd.obj(node, what, {"kind", "matrix"}, {"kind", "matrix"})
            cspec = ConditionSpec("custom", None, rd.matrix(obj["matrix"], f"{what}.matrix", obj, 2 * n))
        elif kind in _NAMED:
            rd.obj(node, what, {"kind"})
            cspec = ConditionSpec(kind)
        else:
            rd.fail(f"{what}: unknown condition kind {kind!r}", obj)
    try:
        if cspec.kind == "twisted":
            p = twisted_projection(cspec.theta, n)
        elif cspec.kind == "custom":
            p = BoundaryProjection.from_matrix(cspec.matrix, "custom")
        elif cspec.kind in ("aps", "anti_aps"):
            a0, a1 = op.tangential_sum(0.0), op.tangential_sum(1.0)
            p = (aps_projection if cspec.kind == "aps" else anti_aps_projection)(a0, a1)
        elif cspec.kind == "dirichlet":
            p = dirichlet_projection(op.r, op.m)
        else:
            p = neumann_projection(op.r, op.m)
    except InputError as exc:
        rd.fail(f"{what}: {exc}", None, line)
    if p.rank != n:
        rd.fail(f"{what}: condition has rank {p.rank}, an admissible condition has rank N={n}",
                None, line)
    return cspec, p


def _factor(rd: _Reader, node, idx: int, m: int | None) -> list[DiracFactor]:
    what = f"operator.factors[{idx}]"
    obj = rd.obj(node, what, {"preset", "sigma", "A", "A_poly", "label"})
    label = rd.string(obj.get("label", ""), f"{what}.label", obj)
    if "preset" in obj:
        if len(set(obj) - {"label"}) != 1:
            rd.fail(f"{what}: 'preset' cannot be combined with explicit matrices", obj)
        name = rd.string(obj["preset"], f"{what}.preset", obj)
        try:
            return factor_preset(name, m or 1)
        except InputError as exc:
            rd.fail(f"{what}: {exc}", obj)
    if "sigma" not in obj:
        rd.fail(f"{what} needs 'preset' or 'sigma'", obj)
    if ("A" in obj) == ("A_poly" in obj):
        rd.fail(f"{what} needs exactly one of 'A' and 'A_poly'", obj)
    sigma = rd.matrix(obj["sigma"], f"{what}.sigma", obj, m)
    size = sigma.shape[0]
    if np.max(np.abs(sigma @ sigma.conj().T - np.eye(size))) > 1e-12:
        rd.fail(f"{what}.sigma is not unitary", obj["sigma"])
    try:
        if "A" in obj:
            a = rd.matrix(obj["A"], f"{what}.A", obj, size)
            return [DiracFactor.constant(sigma, a, label or f"factor{idx}")]
        polys = obj["A_poly"]
        if not isinstance(polys, list) or not polys:
            rd.fail(f"{what}.A_poly must be a non-empty array of matrices", obj)
        cs = [rd.matrix(c, f"{what}.A_poly[{k}]", polys, size) for k, c in enumerate(polys)]
        return [DiracFactor.polynomial(sigma, cs, label or f"factor{idx}")]
    except InputError as exc:
        if isinstance(exc, ScenarioError):
            raise
        rd.fail(f"{what}: {exc}", obj)


def _operator(rd: _Reader, node) -> tuple[ComposedOperator, tuple]:
    obj = rd.obj(node, "operator", {"fibre_dim", "factors", "preset"})
    m = rd.integer(obj["fibre_dim"], "operator.fibre_dim", obj) if "fibre_dim" in obj else None
    if ("factors" in obj) == ("preset" in obj):
        rd.fail("operator needs exactly one of 'factors' and 'preset'", obj)
    if "preset" in obj:
        name = rd.string(obj["preset"], "operator.preset", obj)
        try:
            factors = factor_preset(name, m or 1)
        except InputError as exc:
            rd.fail(f"operator: {exc}", obj)
    else:
        fl = obj["factors"]
        if not isinstance(fl, list) or not fl:
            rd.fail("operator.factors must be a non-empty array", obj)
        factors = []
        for i, f in enumerate(fl):
            new = _factor(rd, f, i, m)
            if m is None:
                m = new[0].m
            if any(x.m != m for x in new):
                rd.fail(f"operator.factors[{i}] has fibre dimension {new[0].m}, expected {m}", f)
            factors.extend(new)
    if len(factors) > 4:
        rd.fail(f"operator order {len(factors)} exceeds the supported maximum of 4", obj)
    op = compose(factors)
    return op, tuple(f.label for f in factors)


def _ray(rd: _Reader, node, r: int) -> RayConfig:
    if node is None:
        return RayConfig.default(r)
    obj = rd.obj(node, "ray", {"theta", "theta_over_pi", "radii", "rmin", "rmax", "count",
                               "min_gap"})
    if "theta" in obj or "theta_over_pi" in obj:
        theta = rd.angle(obj, "ray")
    else:
        theta = math.pi / 2 if r == 1 else math.pi
    min_gap = rd.number(obj.get("min_gap", 1e-3), "ray.min_gap", obj)
    try:
        if "radii" in obj:
            if any(k in obj for k in ("rmin", "rmax", "count")):
                rd.fail("ray: give either 'radii' or 'rmin'/'rmax'/'count'", obj)
            radii = obj["radii"]
            if not isinstance(radii, list):
                rd.fail("ray.radii must be an array", obj)
            vals = tuple(rd.number(x, "ray.radii entry", radii) for x in radii)
            return RayConfig(theta, vals, min_gap)
        default = RayConfig.default(r, theta)
        rmin = rd.number(obj.get("rmin", default.radii[0]), "ray.rmin", obj)
        rmax = rd.number(obj.get("rmax", default.radii[-1]), "ray.rmax", obj)
        count = rd.integer(obj.get("count", len(default.radii)), "ray.count", obj)
        return RayConfig.geometric(theta, rmin, rmax, count, min_gap)
    except InputError as exc:
        if isinstance(exc, ScenarioError):
            raise
        rd.fail(f"ray: {exc}", obj)


def parse_scenario(text: str, source: str = "<scenario>") -> Scenario:
    """Validate a scenario document and build the operator and conditions."""
    rd = _Reader(source, text)
    doc = load_json(text, source)
    top = {"schema", "name", "description", "operator", "conditions", "ray", "fit", "oracle",
           "flags", "parametrix", "family", "numerics", "output"}
    rd.obj(doc, "scenario", top, {"name", "operator", "conditions"})
    if "schema" in doc and doc["schema"] != SCENARIO_SCHEMA:
        rd.fail(f"schema must be {SCENARIO_SCHEMA!r}", doc)
    name = rd.string(doc["name"], "name", doc)
    if not re.fullmatch(r"[A-Za-z0-9_.-]+", name):
        rd.fail("name may only contain letters, digits, '_', '.' and '-'", doc)
    desc = rd.string(doc.get("description", ""), "description", doc)
    op, labels = _operator(rd, doc["operator"])

    conds_node = rd.obj(doc["conditions"], "conditions", {"P1", "P2"}, {"P1"})
    specs, conds = {}, {}
    for key in ("P1", "P2"):
        if key in conds_node:
            specs[key], conds[key] = _condition(rd, conds_node[key], key, op, conds_node)

    ray = _ray(rd, doc.get("ray"), op.r)

    fit = rd.obj(doc.get("fit", _Obj()), "fit", {"power_terms", "log_terms", "include_log"})
    try:
        model = AsymptoticModel(op.r,
                                J=rd.integer(fit.get("power_terms", 6), "fit.power_terms", fit),
                                log_terms=rd.integer(fit.get("log_terms", 4), "fit.log_terms", fit),
                                include_log=rd.boolean(fit.get("include_log", True),
                                                       "fit.include_log", fit))
    except InputError as exc:
        if isinstance(exc, ScenarioError):
            raise
        rd.fail(f"fit: {exc}", fit)

    orc = rd.obj(doc.get("oracle", _Obj()), "oracle", {"count", "expected_ratio"})
    count = rd.integer(orc.get("count", 200), "oracle.count", orc)
    expected = (rd.complex_pair(orc["expected_ratio"], "oracle.expected_ratio", orc)
                if "expected_ratio" in orc else None)

    flags = rd.obj(doc.get("flags", _Obj()), "flags", {"self_adjoint", "equal_zeta_zero",
                                                       "invertible"})
    sa = rd.boolean(flags.get("self_adjoint", False), "flags.self_adjoint", flags)
    eq0 = rd.boolean(flags.get("equal_zeta_zero", False), "flags.equal_zeta_zero", flags)
    inv = rd.boolean(flags.get("invertible", True), "flags.invertible", flags)

    par = rd.obj(doc.get("parametrix", _Obj()), "parametrix", {"lambdas"})
    if "lambdas" in par:
        lams = par["lambdas"]
        if not isinstance(lams, list) or not lams:
            rd.fail("parametrix.lambdas must be a non-empty array of [re, im] pairs", par)
        plams = tuple(rd.complex_pair(x, "parametrix.lambdas entry", lams) for x in lams)
    else:
        plams = tuple(complex(rho * np.exp(1j * ray.theta)) for rho in (1.0, 10.0, 100.0))

    family = None
    if "family" in doc:
        fam = rd.obj(doc["family"], "family", {"center", "h", "half_width"}, {"center", "h"})
        if op.r != 1:
            rd.fail("family requires a single first-order factor", fam)
        h = rd.number(fam["h"], "family.h", fam)
        if h <= 0:
            rd.fail("family.h must be positive", fam)
        family = FamilySpec(rd.complex_pair(fam["center"], "family.center", fam), h,
                            rd.integer(fam.get("half_width", 2), "family.half_width", fam))

    num = rd.obj(doc.get("numerics", _Obj()), "numerics", {"steps", "tol"})
    steps = rd.integer(num["steps"], "numerics.steps", num, 2) if "steps" in num else None
    if steps is not None and steps % 2:
        rd.fail("numerics.steps must be even", num)
    tol = rd.number(num["tol"], "numerics.tol", num) if "tol" in num else None
    if tol is not None and tol <= 0:
        rd.fail("numerics.tol must be positive", num)

    out = rd.obj(doc.get("output", _Obj()), "output", {"dir"})
    out_dir = rd.string(out["dir"], "output.dir", out) if "dir" in out else None

    return Scenario(name, op, labels, conds, specs, ray, model, count, expected, plams, sa, eq0,
                    inv, family, steps, tol, out_dir, desc, source)


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario: {exc.strerror}", None, str(path)) from None
    return parse_scenario(text, str(path))
