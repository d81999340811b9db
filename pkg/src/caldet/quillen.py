"""Dirac Laplacians, canonical and Quillen metrics, and curvature over a family.

For a first-order ``D = sigma (d/du + A)`` with condition ``P`` the Dirac
Laplacian is ``D* D`` on ``P gamma s = 0`` and ``P* gamma D s = 0`` where
``P* = Sigma (I - P) Sigma*`` and ``Sigma = diag(-sigma, sigma)`` is the
boundary unitary of the Green form.  The canonical squared norm is
``det(S(P)* S(P))`` on the Calderon space at ``lam = 0``; the Quillen squared
norm is ``det_zeta`` of the Laplacian.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .boundary import BoundaryProjection, adjoint_condition, block_condition, boundary_sigma
from .calderon import EIGEN_HIT_TOL, CalderonFrame, calderon_frame, s_matrix
from .errors import GridHoleError, InputError, NonInvertibleError, NumericError
from .operators import ComposedOperator, DiracFactor, compose, hat_system
from .oracle import DEFAULT_HEAD, CharacteristicFunction, spectral_zeta_det

ADJOINT_TOL = 1e-8
CR_TOL = 1e-6


def thread_count() -> int:
    """Worker threads from ``CALDET_THREADS`` (default 1)."""
    raw = os.environ.get("CALDET_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise InputError(f"CALDET_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise InputError("CALDET_THREADS must be at least 1")
    return n


def parallel_map(fn, items, threads: int | None = None) -> list:
    n = thread_count() if threads is None else threads
    if n == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True, eq=False)
class LaplacianEBVP:
    base: DiracFactor
    adjoint_factor: DiracFactor
    condition: BoundaryProjection
    adjoint_cond: BoundaryProjection
    hat_condition: BoundaryProjection
    operator: ComposedOperator


def _adjointness_defect(base: DiracFactor, adj: DiracFactor, n: int = 40, seed: int = 7) -> float:
    """``|<D f, g> - <f, D* g> - boundary form|`` for random polynomial ``f, g``."""
    rng = np.random.default_rng(seed)
    m = base.m
    cf = rng.normal(size=(4, m)) + 1j * rng.normal(size=(4, m))
    cg = rng.normal(size=(4, m)) + 1j * rng.normal(size=(4, m))

    def poly(c):
        return lambda u: sum(c[k] * u ** k for k in range(c.shape[0]))

    f, g = poly(cf), poly(cg)
    xs, ws = np.polynomial.legendre.leggauss(n)
    us, ws = 0.5 * (xs + 1), 0.5 * ws
    df = compose([base]).apply(f, us).reshape(n, m)
    dg = compose([adj]).apply(g, us).reshape(n, m)
    fv = np.array([np.atleast_1d(f(u)) for u in us])
    gv = np.array([np.atleast_1d(g(u)) for u in us])
    lhs = np.sum(ws * np.einsum("ij,ij->i", df, gv.conj())) - \
        np.sum(ws * np.einsum("ij,ij->i", fv, dg.conj()))
    s = base.sigma
    bnd = np.vdot(g(1.0), s @ f(1.0)) - np.vdot(g(0.0), s @ f(0.0))
    scale = max(1.0, abs(lhs))
    return float(abs(lhs - bnd) / scale)


def dirac_laplacian(base: DiracFactor, p: BoundaryProjection) -> LaplacianEBVP:
    """``D* D`` with the coupled conditions, as a second-order composition."""
    if p.dim != 2 * base.m or p.rank != base.m:
        raise InputError(f"condition must have rank {base.m} on the {2 * base.m}-dim trace space")
    adj = base.adjoint()
    defect = _adjointness_defect(base, adj)
    if defect > ADJOINT_TOL:
        raise InputError(f"formal adjoint check failed (defect {defect:.2e})")
    p_star = adjoint_condition(p, boundary_sigma(base.sigma))
    hat = block_condition([p, p_star])
    return LaplacianEBVP(base, adj, p, p_star, hat, compose([base, adj]))


def first_order_frame(base: DiracFactor, steps: int | None = None) -> CalderonFrame:
    return calderon_frame(hat_system(compose([base]), 0.0), steps)


def log_canonical_metric(frame: CalderonFrame, p: BoundaryProjection) -> float:
    """``log det(S(P)* S(P))``; raises when ``S(P)`` is singular."""
    s = s_matrix(frame, p)
    if np.linalg.svd(s, compute_uv=False)[-1] < EIGEN_HIT_TOL:
        raise NonInvertibleError("S(P) is not invertible")
    sign, logdet = np.linalg.slogdet(s.conj().T @ s)
    if sign.real <= 0 or not np.isfinite(logdet):
        raise NonInvertibleError("S(P) is not invertible")
    return float(logdet)


def canonical_metric(frame: CalderonFrame, p: BoundaryProjection) -> float:
    """Canonical squared norm ``det(S(P)* S(P))``."""
    return math.exp(log_canonical_metric(frame, p))


def log_quillen_metric(ebvp: LaplacianEBVP, count: int = DEFAULT_HEAD,
                       steps: int | None = None) -> float:
    """``log det_zeta(Delta_P) = -zeta'(0)``."""
    rep = spectral_zeta_det(ebvp.operator, ebvp.hat_condition, count, steps)
    return float(rep.log_det)


def quillen_metric(ebvp: LaplacianEBVP, count: int = DEFAULT_HEAD, steps: int | None = None) -> float:
    return math.exp(log_quillen_metric(ebvp, count, steps))


@dataclass
class MetricRatioReport:
    log_quillen: tuple
    log_canonical: tuple
    quillen_ratio: float
    canonical_ratio: float
    discrepancy: float

    def to_dict(self) -> dict:
        return {
            "log_quillen_norm_sq": list(self.log_quillen),
            "log_canonical_norm_sq": list(self.log_canonical),
            "quillen_ratio": self.quillen_ratio,
            "canonical_ratio": self.canonical_ratio,
            "norm_ratio_quillen": math.sqrt(self.quillen_ratio),
            "norm_ratio_canonical": math.sqrt(self.canonical_ratio),
            "relative_discrepancy": self.discrepancy,
        }


def metric_ratio_check(base: DiracFactor, p1: BoundaryProjection, p2: BoundaryProjection,
                       count: int = DEFAULT_HEAD, steps: int | None = None) -> MetricRatioReport:
    """Both sides of ``|det D_P1|^2_z / |det D_P2|^2_z = |det D_P1|^2_C / |det D_P2|^2_C``."""
    frame = first_order_frame(base, steps)
    lc = (log_canonical_metric(frame, p1), log_canonical_metric(frame, p2))
    if p1 is p2 or np.array_equal(p1.matrix, p2.matrix):
        return MetricRatioReport((0.0, 0.0), lc, 1.0, 1.0, 0.0)
    lq = tuple(log_quillen_metric(dirac_laplacian(base, p), count, steps) for p in (p1, p2))
    dq, dc = lq[0] - lq[1], lc[0] - lc[1]
    return MetricRatioReport(lq, lc, math.exp(dq), math.exp(dc), abs(math.expm1(dq - dc)))


# ---------------------------------------------------------------------------
# families and curvature


@dataclass(frozen=True, eq=False)
class FamilyGrid:
    """Square grid ``b = center + h (j + i k)``, ``j, k = -n..n``, of a holomorphic family."""

    builder: Callable[[complex], DiracFactor]
    p1: BoundaryProjection
    p2: BoundaryProjection
    center: complex
    h: float
    half_width: int = 2

    @property
    def size(self) -> int:
        return 2 * self.half_width + 1

    def points(self) -> np.ndarray:
        k = np.arange(-self.half_width, self.half_width + 1)
        x = self.center.real + self.h * k
        y = self.center.imag + self.h * k
        return x[None, :] + 1j * y[:, None]        # rows: y, columns: x

    def refined(self) -> "FamilyGrid":
        return FamilyGrid(self.builder, self.p1, self.p2, self.center, self.h / 2, self.half_width)


def cauchy_riemann_defect(grid: FamilyGrid, delta: float = 1e-4) -> float:
    """Largest relative d/d(conj b) of the coefficients and of the holomorphic
    characteristic function ``det(U_P* [Y(0); Y(1)])`` at the grid centre."""
    b = grid.center
    us = np.linspace(0.0, 1.0, 5)

    def coeffs(z):
        f = grid.builder(z)
        return np.concatenate([f.sample(us).ravel(), f.sigma.ravel()])

    def dbar(fun):
        dx = (fun(b + delta) - fun(b - delta)) / (2 * delta)
        dy = (fun(b + 1j * delta) - fun(b - 1j * delta)) / (2 * delta)
        return 0.5 * (dx + 1j * dy), 0.5 * (dx - 1j * dy)

    worst = 0.0
    bar, hol = dbar(coeffs)
    worst = max(worst, float(np.max(np.abs(bar)) / max(1.0, np.max(np.abs(hol)))))
    for p in (grid.p1, grid.p2):
        def char(z, p=p):
            cf = CharacteristicFunction(compose([grid.builder(z)]), p)
            return np.array([cf.complex_value(0.0, normalize=False)])
        bar, hol = dbar(char)
        scale = max(abs(char(b)[0]), abs(hol[0]), 1e-300)
        worst = max(worst, float(abs(bar[0]) / scale))
    return worst


def _nine_point(f: np.ndarray, h: float) -> np.ndarray:
    """``(1/4) Laplacian`` (that is ``d dbar``) at interior points, nine-point stencil."""
    c = f[1:-1, 1:-1]
    edge = f[:-2, 1:-1] + f[2:, 1:-1] + f[1:-1, :-2] + f[1:-1, 2:]
    corner = f[:-2, :-2] + f[:-2, 2:] + f[2:, :-2] + f[2:, 2:]
    lap = (4 * edge + corner - 20 * c) / (6 * h * h)
    return 0.25 * lap


@dataclass
class CurvatureReport:
    points: np.ndarray
    log_canonical: dict
    log_quillen: dict
    curv_diff_zeta: np.ndarray
    curv_diff_canonical: np.ndarray
    h: float
    cr_defect: float

    @property
    def discrepancy(self) -> float:
        return float(np.max(np.abs(self.curv_diff_zeta - self.curv_diff_canonical)))

    def rows(self) -> list[tuple]:
        out = []
        n = self.points.shape[0]
        for k in range(n):
            for j in range(n):
                b = self.points[k, j]
                inner = 0 < k < n - 1 and 0 < j < n - 1
                cz = self.curv_diff_zeta[k - 1, j - 1] if inner else None
                cc = self.curv_diff_canonical[k - 1, j - 1] if inner else None
                out.append((float(b.real), float(b.imag),
                            float(self.log_canonical["P1"][k, j]),
                            float(self.log_canonical["P2"][k, j]),
                            float(self.log_quillen["P1"][k, j]),
                            float(self.log_quillen["P2"][k, j]), cz, cc))
        return out

    def to_dict(self) -> dict:
        return {"h": self.h, "cauchy_riemann_defect": self.cr_defect,
                "max_discrepancy": self.discrepancy,
                "curv_diff_zeta": self.curv_diff_zeta.tolist(),
                "curv_diff_canonical": self.curv_diff_canonical.tolist()}


def curvature_difference(grid: FamilyGrid, which_metric: str = "both",
                         count: int = DEFAULT_HEAD, steps: int | None = None,
                         threads: int | None = None) -> CurvatureReport:
    """``d dbar log |det|^2`` for both conditions and both metrics on the grid.

    Returns the differences ``R1 - R2`` per metric at interior points.
    """
    if which_metric not in ("both", "zeta", "canonical"):
        raise InputError("which_metric must be 'both', 'zeta' or 'canonical'")
    cr = cauchy_riemann_defect(grid)
    if cr > CR_TOL:
        raise InputError(f"family fails the Cauchy-Riemann check (defect {cr:.2e})")
    pts = grid.points()
    flat = pts.ravel()
    conds = {"P1": grid.p1, "P2": grid.p2}

    def at(b):
        base = grid.builder(b)
        out = {}
        try:
            frame = first_order_frame(base, steps)
            for key, p in conds.items():
                c = log_canonical_metric(frame, p) if which_metric != "zeta" else 0.0
                q = (log_quillen_metric(dirac_laplacian(base, p), count, steps)
                     if which_metric != "canonical" else 0.0)
                out[key] = (c, q)
        except NumericError as exc:
            raise GridHoleError(f"grid point b={b:.6g} is not invertible: {exc}", b) from exc
        return out

    vals = parallel_map(at, list(flat), threads)
    shape = pts.shape
    lc = {k: np.array([v[k][0] for v in vals]).reshape(shape) for k in conds}
    lq = {k: np.array([v[k][1] for v in vals]).reshape(shape) for k in conds}
    dz = _nine_point(lq["P1"], grid.h) - _nine_point(lq["P2"], grid.h)
    dc = _nine_point(lc["P1"], grid.h) - _nine_point(lc["P2"], grid.h)
    return CurvatureReport(pts, lc, lq, dz, dc, grid.h, cr)


def single_curvature(values: np.ndarray, h: float) -> np.ndarray:
    """``d dbar`` of one log-norm table (used for the single-condition control)."""
    return _nine_point(np.asarray(values, dtype=float), h)
