"""Canonical relative determinants, their log curves along a ray, and the
zeta-determinant quotient assembled from the regularized limit.

For conditions ``P1, P2`` the canonical determinant is

    F(lam) = det_K[(P1 S_lam(P2))^{-1} S_lam(P1)]

and the quotient of zeta determinants is ``F(0) exp(-LIM log F(lam))`` with
the limit taken along the ray ``arg lam = theta``.  Along the ray,
``Tr[(D_P1 - lam)^{-1} - (D_P2 - lam)^{-1}] = -d/dlam log F(lam)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from .boundary import BoundaryProjection
from .calderon import (CalderonFrame, calderon_frame, condition_basis, relative_resolvent_trace,
                       resolve_steps, s_matrix)
from .errors import (BasepointError, BranchError, FitError, InputError, IntegrationError,
                     SpectralCutError)
from .operators import ComposedOperator, HatSystem, hat_system

FIT_COND_MAX = 1e12


@dataclass(frozen=True)
class RayConfig:
    """Spectral cut ``arg lam = theta`` and the radii sampled along it."""

    theta: float
    radii: tuple
    min_gap: float = 1e-3

    def __post_init__(self):
        r = np.asarray(self.radii, dtype=float)
        if r.size < 12:
            raise InputError("a ray needs at least 12 radii")
        if np.any(np.diff(r) <= 0) or r[0] <= 0:
            raise InputError("radii must be positive and strictly increasing")
        if r[-1] / r[0] < 100.0 * (1 - 1e-12):
            raise InputError("radii must span at least two decades")

    @classmethod
    def geometric(cls, theta: float, rmin: float = 10.0, rmax: float = 1000.0,
                  count: int = 24, min_gap: float = 1e-3) -> "RayConfig":
        return cls(theta, tuple(np.geomspace(rmin, rmax, count).tolist()), min_gap)

    @classmethod
    def default(cls, r: int, theta: float | None = None, count: int = 24) -> "RayConfig":
        """Geometric radii from ``30**r`` to ``100 * 30**r``.

        The default cut is ``pi/2`` for first-order operators (real spectrum
        of both signs) and ``pi`` otherwise (spectrum on the positive axis).
        """
        if theta is None:
            theta = math.pi / 2 if r == 1 else math.pi
        lo = 30.0 ** r
        return cls.geometric(theta, lo, 100.0 * lo, count)

    def points(self, radii=None) -> np.ndarray:
        r = np.asarray(self.radii if radii is None else radii, dtype=float)
        return r * np.exp(1j * self.theta)


@dataclass(frozen=True)
class AsymptoticModel:
    """Terms ``(-lam)^alpha`` and ``(-lam)^(-k/r) log(-lam)`` of a log-determinant.

    Power exponents are ``(1 - j)/r`` for ``j = 0..J`` (the constant term is
    ``j = 1``); log terms use ``k = 0..log_terms-1``.
    """

    r: int
    J: int = 6
    log_terms: int = 4
    include_log: bool = True
    n: int = 1
    m_deriv: int = 0

    @property
    def power_exponents(self) -> list[float]:
        return [(self.n - j) / self.r for j in range(self.J + 1)]

    @property
    def log_exponents(self) -> list[float]:
        if not self.include_log:
            return []
        return [-k / self.r for k in range(self.log_terms)]

    @property
    def exponent_list(self) -> list[tuple[float, int]]:
        terms = [(a, 0) for a in self.power_exponents] + [(b, 1) for b in self.log_exponents]
        return sorted(terms, key=lambda t: (-t[0], -t[1]))

    @property
    def size(self) -> int:
        return len(self.power_exponents) + len(self.log_exponents)

    def design(self, lam: np.ndarray) -> np.ndarray:
        z = -np.asarray(lam, dtype=np.complex128)
        lz = np.log(z)
        cols = [np.exp(a * lz) for a in self.power_exponents]
        cols += [np.exp(b * lz) * lz for b in self.log_exponents]
        return np.column_stack(cols)

    def constant_index(self) -> int:
        exps = self.power_exponents
        for i, a in enumerate(exps):
            if abs(a) < 1e-14:
                return i
        raise InputError("model has no constant term")

    def derivative_terms(self, coeffs: np.ndarray) -> list[tuple[complex, float, int]]:
        """``-d/dlam`` of the fitted expansion as ``(coef, gamma, has_log)`` terms.

        A term ``(c, g, 0)`` is ``c (-lam)^g``; ``(c, g, 1)`` is
        ``c (-lam)^g log(-lam)``.
        """
        out = []
        pe, le = self.power_exponents, self.log_exponents
        for a, c in zip(pe, coeffs[:len(pe)]):
            if a != 0:
                out.append((c * a, a - 1, 0))
        for b, c in zip(le, coeffs[len(pe):]):
            out.append((c * b, b - 1, 1))
            out.append((c, b - 1, 0))
        return out


def canonical_det(frame: CalderonFrame, p1: BoundaryProjection, p2: BoundaryProjection) -> complex:
    """``det_K[(P1 S(P2))^{-1} S(P1)]`` with ``P1 S(P2) = P1 P2 P(D_hat)`` on K."""
    if p1 is p2 or np.array_equal(p1.matrix, p2.matrix):
        return 1.0 + 0j
    s1 = s_matrix(frame, p1)
    u1 = condition_basis(p1)
    base = u1.conj().T @ p2.matrix @ frame.basis
    sv = np.linalg.svd(base, compute_uv=False)
    if sv[-1] < 1e-10 * max(sv[0], 1.0):
        raise BasepointError(f"P1 S(P2) is not invertible at lam={frame.lam}")
    return complex(np.linalg.det(np.linalg.solve(base, s1)))


def characteristic_ratio(frame: CalderonFrame, p1: BoundaryProjection,
                         p2: BoundaryProjection) -> complex:
    """``det S(P1) / det S(P2)`` in one common basis of K.

    This differs from :func:`canonical_det` by the lam-independent factor
    ``det(U1* U2)`` and stays defined when ``P1 P2`` is singular between the
    two ranges.  Log-derivatives and the determinant quotient are unaffected
    by that factor.
    """
    if p1 is p2 or np.array_equal(p1.matrix, p2.matrix):
        return 1.0 + 0j
    d2 = np.linalg.det(s_matrix(frame, p2))
    if d2 == 0:
        raise BasepointError(f"S(P2) is singular at lam={frame.lam}")
    return complex(np.linalg.det(s_matrix(frame, p1)) / d2)


def _normalized(frame, p1, p2, normalization: str) -> complex:
    if normalization == "canonical":
        return canonical_det(frame, p1, p2)
    if normalization == "characteristic":
        return characteristic_ratio(frame, p1, p2)
    raise InputError(f"unknown normalization {normalization!r}")


def pick_normalization(p1: BoundaryProjection, p2: BoundaryProjection) -> str:
    """``canonical`` when ``P1`` maps range(P2) isomorphically, else ``characteristic``."""
    if p1.rank != p2.rank:
        raise InputError("conditions have different ranks")
    u1, u2 = condition_basis(p1), condition_basis(p2)
    sv = np.linalg.svd(u1.conj().T @ u2, compute_uv=False)
    return "canonical" if sv[-1] > 1e-10 else "characteristic"


def _hat_builder(source) -> Callable[[complex], HatSystem]:
    if isinstance(source, ComposedOperator):
        return lambda lam: hat_system(source, lam)
    if callable(source):
        return source
    raise InputError("expected a ComposedOperator or a lam -> HatSystem callable")


def log_det_ratio(source, p1, p2, lam: complex, steps: int | None = None,
                  normalization: str = "canonical") -> complex:
    """Principal log of the canonical determinant (or characteristic ratio) at ``lam``."""
    hat = _hat_builder(source)(lam)
    return complex(np.log(_normalized(calderon_frame(hat, steps), p1, p2, normalization)))


def _gap_estimate(builder, p: BoundaryProjection, lam: complex, steps: int) -> float:
    """Newton estimate of the distance from ``lam`` to the spectrum of ``D_P``."""
    d = 1e-6 * max(1.0, abs(lam))
    f0 = np.linalg.det(s_matrix(calderon_frame(builder(lam), steps), p))
    f1 = np.linalg.det(s_matrix(calderon_frame(builder(lam + d), steps), p))
    f2 = np.linalg.det(s_matrix(calderon_frame(builder(lam - d), steps), p))
    deriv = abs(f1 - f2) / (2 * d)
    if abs(f0) == 0.0:
        return 0.0
    return float(abs(f0) / deriv) if deriv > 0 else math.inf


@dataclass
class LogCurve:
    """Continuously unwound ``log F`` along a ray."""

    theta: float
    radii: np.ndarray
    lam: np.ndarray
    values: np.ndarray
    refinements: int = 0
    winding: int = 0
    steps: list = field(default_factory=list)
    requested: np.ndarray | None = None
    normalization: str = "canonical"

    def at_requested(self) -> tuple[np.ndarray, np.ndarray]:
        """Samples at the configured radii (dropping refinement points)."""
        if self.requested is None:
            return self.lam, self.values
        idx = [int(np.argmin(np.abs(self.radii - r))) for r in self.requested]
        return self.lam[idx], self.values[idx]


def _unwind(vals: np.ndarray) -> np.ndarray:
    out = vals.copy()
    for k in range(1, out.size):
        d = out[k].imag - out[k - 1].imag
        out[k] = out[k] - 2j * np.pi * np.round(d / (2 * np.pi))
    return out


def lambda_log_curve(source, p1: BoundaryProjection, p2: BoundaryProjection, ray: RayConfig,
                     steps: int | None = None, max_refine: int = 4,
                     check_gap: bool = True, map_fn=map,
                     normalization: str = "auto") -> LogCurve:
    """Sample ``log F(lam)`` along the ray with a continuous branch.

    The branch starts from the principal value at ``lam = 0`` and is followed
    through a linear pre-segment to the first radius.  Where adjacent samples
    differ in phase by more than ``pi/2`` the grid is refined (at most
    ``max_refine`` times).
    """
    builder = _hat_builder(source)
    if normalization == "auto":
        normalization = pick_normalization(p1, p2)
    requested = np.asarray(ray.radii, dtype=float)
    pre = np.linspace(0.0, requested[0], 17)[:-1]
    radii = np.concatenate([pre, requested])
    same = p1 is p2 or np.array_equal(p1.matrix, p2.matrix)

    def resolve(rho):
        return resolve_steps(builder(rho * np.exp(1j * ray.theta)), steps)

    def sample(rho):
        lam = rho * np.exp(1j * ray.theta)
        n = resolve(rho)
        if same:
            return 0j, n
        if check_gap and rho > 0:
            for p in (p1, p2):
                g = _gap_estimate(builder, p, lam, n)
                if g < ray.min_gap:
                    raise SpectralCutError(
                        f"eigenvalue within {g:.3e} of the ray at lam={lam:.6g}")
        frame = calderon_frame(builder(lam), n)
        return complex(np.log(_normalized(frame, p1, p2, normalization))), n

    res = list(map_fn(sample, radii))
    vals = np.array([v for v, _ in res])
    nsteps = [n for _, n in res]
    refinements = 0
    while True:
        un = _unwind(vals)
        jumps = np.abs(np.diff(un.imag))
        bad = np.flatnonzero(jumps > np.pi / 2)
        if bad.size == 0:
            break
        if refinements >= max_refine:
            raise BranchError(f"phase step {jumps.max():.3f} unresolved after {max_refine} refinements")
        refinements += 1
        mids = 0.5 * (radii[bad] + radii[bad + 1])
        extra = list(map_fn(sample, mids))
        radii = np.concatenate([radii, mids])
        vals = np.concatenate([vals, [v for v, _ in extra]])
        nsteps += [n for _, n in extra]
        order = np.argsort(radii)
        radii, vals = radii[order], vals[order]
        nsteps = [nsteps[i] for i in order]
    un = _unwind(vals)
    winding = int(np.round((un[-1].imag - vals[-1].imag) / (2 * np.pi)))
    keep = radii >= requested[0] * (1 - 1e-12)
    return LogCurve(ray.theta, radii[keep], radii[keep] * np.exp(1j * ray.theta), un[keep],
                    refinements, winding, [n for n, k in zip(nsteps, keep) if k], requested,
                    normalization)


@dataclass
class LimResult:
    value: complex
    residual: float
    condition: float
    coefficients: np.ndarray
    model: AsymptoticModel

    def tail(self, lam) -> np.ndarray:
        return self.model.design(np.atleast_1d(lam)) @ self.coefficients


def lim_extract(curve, model: AsymptoticModel, weights=None) -> LimResult:
    """Regularized limit: the constant coefficient of a least-squares fit.

    ``curve`` is a ``LogCurve`` or a pair ``(lam, values)``.
    """
    if isinstance(curve, LogCurve):
        lam, vals = curve.at_requested()
    else:
        lam, vals = (np.asarray(c, dtype=np.complex128) for c in curve)
    if lam.size < 2 * model.size:
        raise InputError(f"need at least {2 * model.size} samples for {model.size} terms")
    a = model.design(lam)
    w = np.ones(lam.size) if weights is None else np.asarray(weights, dtype=float)
    aw = a * w[:, None]
    scale = np.linalg.norm(aw, axis=0)
    scale[scale == 0] = 1.0
    an = aw / scale
    cond = float(np.linalg.cond(an))
    resid_diag = {"condition": cond, "terms": model.size, "samples": int(lam.size)}
    if not np.isfinite(cond) or cond > FIT_COND_MAX:
        raise FitError(f"asymptotic fit is ill-conditioned (cond={cond:.3e})", resid_diag)
    sol, *_ = np.linalg.lstsq(an, vals * w, rcond=None)
    coef = sol / scale
    resid = float(np.linalg.norm(a @ coef - vals) / math.sqrt(lam.size))
    return LimResult(complex(coef[model.constant_index()]), resid, cond, coef, model)


@dataclass
class DeterminantReport:
    canonical_det_at_zero: complex
    lim_value: complex
    lim_residual: float
    lim_condition: float
    relative_zeta_det: complex
    branch_winding: int
    plain_limit: complex | None = None
    limit_route: str = "lim"
    oracle_ratio: complex | None = None
    oracle_discrepancy: float | None = None
    curve: LogCurve | None = None
    lim_fit_value: complex | None = None
    normalization: str = "canonical"

    def to_dict(self) -> dict:
        c = lambda z: None if z is None else [float(np.real(z)), float(np.imag(z))]
        out = {
            "canonical_det_at_zero": c(self.canonical_det_at_zero),
            "lim_value": c(self.lim_value),
            "lim_fit_value": c(self.lim_fit_value),
            "lim_residual": self.lim_residual,
            "lim_condition": self.lim_condition,
            "relative_zeta_det": c(self.relative_zeta_det),
            "branch_winding": self.branch_winding,
            "plain_limit": c(self.plain_limit),
            "limit_route": self.limit_route,
            "normalization": self.normalization,
            "oracle_ratio": c(self.oracle_ratio),
            "oracle_discrepancy": self.oracle_discrepancy,
        }
        if self.curve is not None:
            out["curve"] = {
                "theta": self.curve.theta,
                "radii": [float(x) for x in self.curve.radii],
                "log_values": [c(v) for v in self.curve.values],
                "refinements": self.curve.refinements,
            }
        return out


def relative_zeta_det(source, p1: BoundaryProjection, p2: BoundaryProjection, ray: RayConfig,
                      model: AsymptoticModel, equal_zeta_zero: bool = False,
                      oracle_ratio: complex | None = None, steps: int | None = None,
                      map_fn=map, normalization: str = "auto") -> DeterminantReport:
    """``det_zeta(D_P1)/det_zeta(D_P2) = F(0) exp(-LIM log F)``.

    ``F`` is the canonical determinant when ``P1 P2`` is invertible between
    the ranges and otherwise the characteristic ratio; the quotient does not
    depend on this choice because a constant factor cancels.
    """
    builder = _hat_builder(source)
    if normalization == "auto":
        normalization = pick_normalization(p1, p2)
    frame0 = calderon_frame(builder(0.0), steps)
    for p, name in ((p1, "P1"), (p2, "P2")):
        if np.linalg.svd(s_matrix(frame0, p), compute_uv=False)[-1] < 1e-10:
            raise BasepointError(f"D_{name} is not invertible at lam=0")
    f0 = _normalized(frame0, p1, p2, normalization)
    if p1 is p2 or np.array_equal(p1.matrix, p2.matrix):
        rep = DeterminantReport(f0, 0j, 0.0, 1.0, complex(f0), 0, 0j, "lim", oracle_ratio)
    else:
        curve = lambda_log_curve(source, p1, p2, ray, steps, map_fn=map_fn,
                                 normalization=normalization)
        fit = lim_extract(curve, model)
        plain = complex(curve.values[-1])
        lim, route = fit.value, "lim"
        if equal_zeta_zero:
            if abs(plain - fit.value) > max(10 * fit.residual, 1e-6):
                raise FitError(
                    f"plain limit {plain:.8g} disagrees with LIM {fit.value:.8g} "
                    f"beyond the fit residual {fit.residual:.2e}",
                    {"residual": fit.residual, "condition": fit.condition})
            lim, route = plain, "limit"
        # the log at 0 sits on the principal branch where the curve starts
        ratio = complex(np.exp(np.log(f0) - lim))
        rep = DeterminantReport(f0, lim, fit.residual, fit.condition, ratio, curve.winding,
                                plain, route, oracle_ratio, None, curve, fit.value)
    rep.normalization = normalization
    if oracle_ratio is not None:
        rep.oracle_discrepancy = float(abs(rep.relative_zeta_det / oracle_ratio - 1.0))
    return rep


# ---------------------------------------------------------------------------
# contour route


def _tail_integral(terms, omega: complex, big_r: float, s: complex) -> complex:
    """Analytic continuation of ``int_R^inf rho^{-s} T_tail(rho e^{i theta}) d rho``.

    ``T_tail = sum c (-lam)^g [log(-lam)]``, ``-lam = rho * omega``.
    """
    total = 0j
    lr, lo = math.log(big_r), np.log(omega)
    for c, g, has_log in terms:
        e = g - s + 1.0
        base = omega ** g * big_r ** e
        if not has_log:
            total += c * base * (-1.0 / e)
        else:
            total += c * (omega ** g) * ((-big_r ** e * lr / e + big_r ** e / e ** 2)
                                         + lo * big_r ** e * (-1.0 / e))
    return total


def _panels(big_r: float, first: float, ratio: float = 1.5) -> list[tuple[float, float]]:
    edges = [first]
    while edges[-1] < big_r:
        edges.append(min(edges[-1] * ratio, big_r))
    return list(zip(edges[:-1], edges[1:]))


@dataclass
class ContourResult:
    s_values: np.ndarray
    zeta_values: np.ndarray
    zeta_prime_at_zero: complex
    log_det_ratio: complex
    cutoff: float
    tail_mismatch: float
    quadrature_error: float


def relative_zeta_contour(source, p1: BoundaryProjection, p2: BoundaryProjection,
                          ray: RayConfig, s_values: Sequence[float] | None = None,
                          model: AsymptoticModel | None = None, steps: int | None = None,
                          nodes: int = 20, tol: float = 1e-10,
                          fit: LimResult | None = None) -> ContourResult:
    """Relative zeta function from the resolvent-trace contour integral.

    For ``0 < s < 1`` the contour collapses onto the two sides of the cut::

        zeta(s) = (1 - e^{2 pi i s}) e^{i theta (1 - s)} / (2 pi i)
                  * int_0^inf rho^{-s} T(rho e^{i theta}) d rho

    with ``T`` the relative resolvent trace.  Beyond a cutoff ``R`` the trace
    is replaced by the derivative of the fitted asymptotic expansion and
    integrated in closed form.  ``s = 1`` uses ``zeta(1) = T(0)``.  The
    derivative at 0 is obtained by polynomial (Richardson) extrapolation.
    """
    builder = _hat_builder(source)
    theta = ray.theta
    eth = np.exp(1j * theta)
    omega = -eth
    if p1 is p2 or np.array_equal(p1.matrix, p2.matrix):
        sv = np.asarray(s_values if s_values is not None else [], dtype=float)
        return ContourResult(sv, np.zeros(sv.size, complex), 0j, 0j, 0.0, 0.0, 0.0)
    cache: dict = {}

    def trace(rho: float) -> complex:
        if rho not in cache:
            hat = builder(rho * eth)
            cache[rho] = relative_resolvent_trace(hat, p1, p2, resolve_steps(hat, steps))
        return cache[rho]

    if fit is None:
        r_model = model or AsymptoticModel(builder(0.0).r)
        curve = lambda_log_curve(source, p1, p2, ray, steps)
        fit = lim_extract(curve, r_model)
    terms = fit.model.derivative_terms(fit.coefficients)

    def tail_trace(rho):
        z = rho * omega
        lz = np.log(z)
        return sum(c * z ** g * (lz if hl else 1.0) for c, g, hl in terms)

    cutoff, mismatch = None, math.inf
    for rho in ray.radii:
        t_act = [trace(rho), trace(2 * rho)]
        mm = max(abs(t_act[0] - tail_trace(rho)), abs(t_act[1] - tail_trace(2 * rho)) / 2)
        scale = max(abs(t_act[0]), 1e-300)
        if mm * rho < tol or mm < tol * scale * 1e-2:
            cutoff, mismatch = 2 * rho, mm
            break
    if cutoff is None:
        raise IntegrationError("resolvent trace never reaches its fitted asymptotic regime "
                               f"on the ray (last mismatch {mm:.3e})")

    first = min(1.0, cutoff / 4)

    def integral(s: float, n: int) -> complex:
        x, w = roots_jacobi(n, 0.0, -s)
        rho = first * (1 + x) / 2
        head = (first / 2) ** (1 - s) * sum(wi * trace(float(ri)) for wi, ri in zip(w, rho))
        xl, wl = roots_legendre(n)
        body = 0j
        for a, b in _panels(cutoff, first):
            rr = (a + b) / 2 + (b - a) / 2 * xl
            body += (b - a) / 2 * sum(wi * ri ** (-s) * trace(float(ri)) for wi, ri in zip(wl, rr))
        return head + body + _tail_integral(terms, omega, cutoff, s)

    svals = np.asarray(s_values if s_values is not None else [], dtype=float)
    rich = 0.05 * np.arange(1, 9)
    zetas, qerr = [], 0.0

    def zeta_at(s):
        nonlocal qerr
        if abs(s - 1.0) < 1e-14:
            return trace(0.0)
        if not 0.0 < s < 1.0:
            raise InputError("direct quadrature requires 0 < s < 1 (or s = 1)")
        i1, i2 = integral(s, nodes), integral(s, 2 * nodes)
        qerr = max(qerr, abs(i1 - i2) / max(abs(i2), 1e-300))
        pref = (1 - np.exp(2j * np.pi * s)) * np.exp(1j * theta * (1 - s)) / (2j * np.pi)
        return complex(pref * i2)

    zr = np.array([zeta_at(s) for s in rich])
    if qerr > 1e-8:
        raise IntegrationError(f"contour quadrature not converged (relative change {qerr:.2e})")
    # derivative at 0 of the interpolating polynomial through the samples
    vand = np.vander(rich, increasing=True)
    coef = np.linalg.solve(vand, zr)
    zp0 = complex(coef[1])
    for s in svals:
        zetas.append(zeta_at(float(s)))
    return ContourResult(svals, np.array(zetas), zp0, -zp0, float(cutoff), float(mismatch), qerr)


@dataclass
class ParametrixCheck:
    lam: complex
    trace: complex
    log_derivative: complex
    relative_error: float


def verify_trace_identity(source, p1: BoundaryProjection, p2: BoundaryProjection,
                          lams: Sequence[complex], steps: int | None = None,
                          delta: float = 1e-3) -> list[ParametrixCheck]:
    """Compare the resolvent trace difference with ``-d/dlam log F``.

    The derivative is a fourth-order central difference with absolute step
    ``delta``; all stencil points share the step count of the centre so the
    discretization error does not enter the difference quotient.
    """
    builder = _hat_builder(source)
    norm = pick_normalization(p1, p2)
    out = []
    for lam in lams:
        lam = complex(lam)
        hat = builder(lam)
        n = resolve_steps(hat, steps)
        t = relative_resolvent_trace(hat, p1, p2, n)
        f = {k: np.log(_normalized(calderon_frame(builder(lam + k * delta), n), p1, p2, norm))
             for k in (-2, -1, 1, 2)}
        f = {k: v - 2j * np.pi * np.round((v - f[1]).imag / (2 * np.pi)) for k, v in f.items()}
        deriv = (f[-2] - 8 * f[-1] + 8 * f[1] - f[2]) / (12 * delta)
        target = -deriv
        err = abs(t - target) / max(abs(target), 1e-300)
        out.append(ParametrixCheck(lam, complex(t), complex(target), float(err)))
    return out
