"""Eigenvalue oracle: spectra of self-adjoint EBVPs and their zeta functions.

Eigenvalues are the real zeros of the characteristic function
``g(lam) = det(U_P* [Y(0); Y(1)])`` with ``Y`` the transport normalized at the
midpoint.  For self-adjoint problems ``g`` is real on the real axis after a
constant phase rotation, so roots are bracketed by sign changes and refined
with Brent's method.  A winding count of ``g`` around the window certifies
that no root was missed.

Zeta functions are the head sum over computed eigenvalues plus a Hurwitz
tail built from a fitted Weyl law ``lam_k^(1/r) = a k + b + c/k + d/k^2``
(fitted separately on each residue class of the index when the spectrum
interleaves several progressions).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import mpmath
import numpy as np
from scipy.linalg import expm
from scipy.optimize import brentq

from .boundary import BoundaryProjection
from .calderon import MAX_STEP_NORM, MAX_STEPS, condition_basis
from .errors import (ContinuationError, IncompleteSpectrumError, InputError,
                     NonInvertibleError, TailError)
from .linalg_ode import transport_endpoints
from .operators import ComposedOperator

REALITY_TOL = 1e-7
ROOT_XTOL = 1e-13
DOUBLE_ROOT_TOL = 1e-7
ZERO_TOL = 1e-9
DEFAULT_HEAD = 200
TAIL_TOL = 1e-7
CORRECTION_TERMS = 20000
MAX_WINDOW_GROWTH = 8
WINDING_BUDGET = 200000


class CharacteristicFunction:
    """``g(lam)`` up to a positive factor, rotated to be real on the real axis.

    Constant-coefficient operators use the exact matrix exponential; other
    operators use RK4 transport with a fixed step count so that ``g`` is a
    smooth function of the operator data.
    """

    def __init__(self, op: ComposedOperator, p: BoundaryProjection, steps: int | None = None):
        if p.dim != 2 * op.N or p.rank != op.N:
            raise InputError("condition does not match the operator's trace space")
        self.op, self.p = op, p
        self.exact = op.is_constant and steps is None
        self.steps = steps
        self.u_h = condition_basis(p).conj().T
        self.feedback = op.feedback()
        if self.exact:
            self.m0 = op.base_samples(16)[0]
        else:
            if steps is None or steps % 2:
                raise InputError("a variable-coefficient oracle needs an even step count")
            self.m0 = op.base_samples(steps)
        self.rotation = 1.0 + 0j

    def complex_value(self, lam: complex, normalize: bool = True) -> complex:
        """Rotated ``g(lam)``; with ``normalize`` the columns of ``[Y(0); Y(1)]``
        are scaled to unit length first (this keeps the phase, drops analyticity)."""
        if self.exact:
            mat = self.m0 + lam * self.feedback
            ends = [expm(-0.5 * mat), expm(0.5 * mat)]
            exps = [0, 0]
        else:
            ends, exps = transport_endpoints(self.m0, self.feedback, lam, self.steps, 0.5)
        top = max(exps)
        q = np.vstack([np.ldexp(1.0, int(e) - top) * y for y, e in zip(ends, exps)])
        if not normalize:
            if top:
                raise InputError("transport overflows; only the normalized value is available")
            return complex(np.linalg.det(self.u_h @ q)) * self.rotation
        colmax = np.max(np.abs(q), axis=0)
        q = q / colmax
        q = q / np.linalg.norm(q, axis=0)
        return complex(np.linalg.det(self.u_h @ q)) * self.rotation

    def __call__(self, lam: float) -> float:
        return self.complex_value(lam).real

    def calibrate(self, lams) -> float:
        """Fix the constant phase; returns the worst relative imaginary part."""
        self.rotation = 1.0 + 0j
        z = np.array([self.complex_value(x) for x in lams])
        z = z[np.abs(z) > 0]
        if z.size == 0:
            raise InputError("characteristic function vanishes on the calibration grid")
        phase = np.angle(np.sum((z / np.abs(z)) ** 2)) / 2
        self.rotation = np.exp(-1j * phase)
        w = z * self.rotation
        worst = float(np.max(np.abs(w.imag) / np.abs(w)))
        if worst > REALITY_TOL:
            raise InputError("characteristic function is not real on the real axis "
                             f"(relative imaginary part {worst:.2e}); not self-adjoint")
        return worst


@dataclass
class SpectrumWindow:
    """Distinct eigenvalues in ``window`` with multiplicities and the winding certificate."""

    values: np.ndarray
    multiplicities: np.ndarray
    window: tuple
    winding: int
    steps: int | None = None
    head_count: int = DEFAULT_HEAD

    @property
    def count(self) -> int:
        return int(np.sum(self.multiplicities))

    def expanded(self) -> np.ndarray:
        return np.repeat(self.values, self.multiplicities)

    def rows(self) -> list[tuple[int, float, int]]:
        return [(i, float(v), int(k)) for i, (v, k) in
                enumerate(zip(self.values, self.multiplicities))]

    def has_zero_mode(self) -> bool:
        return bool(np.any(np.abs(self.values) < ZERO_TOL))


def _lam_of_t(t, r: int):
    return np.sign(t) * np.abs(t) ** r


def _extremum(fun, a: float, b: float) -> float | None:
    """Zero of the derivative of ``fun`` in ``[a, b]`` (None if no sign change)."""
    d = 1e-6 * max(1.0, abs(a), abs(b)) ** 0.5 * (b - a)

    def deriv(x):
        return fun(x + d) - fun(x - d)

    fa, fb = deriv(a), deriv(b)
    if fa == 0:
        return a
    if np.sign(fa) == np.sign(fb):
        return None
    return brentq(deriv, a, b, xtol=ROOT_XTOL, rtol=1e-15)


def _brent(fun, a: float, b: float) -> float:
    return brentq(fun, a, b, xtol=ROOT_XTOL * max(1.0, abs(a), abs(b)), rtol=1e-15)


def _scan(fun, t_lo: float, t_hi: float, r: int, spacing: float) -> list[tuple[float, int]]:
    """Roots from sign changes on a grid in ``t`` plus double roots at minima of ``|g|``."""
    n = max(3, int(math.ceil((t_hi - t_lo) / spacing)) + 1)
    ts = np.linspace(t_lo, t_hi, n)
    lams = _lam_of_t(ts, r)
    gs = np.array([fun(float(x)) for x in lams])
    mags = np.abs(gs)
    roots = []
    for i in range(n):
        if gs[i] == 0.0:
            roots.append((float(lams[i]), 1))
    for i in range(n - 1):
        if gs[i] * gs[i + 1] < 0:
            roots.append((_brent(fun, float(lams[i]), float(lams[i + 1])), 1))
    for j in range(1, n - 1):
        if not (mags[j] <= mags[j - 1] and mags[j] <= mags[j + 1]):
            continue
        if not (gs[j - 1] * gs[j] > 0 and gs[j] * gs[j + 1] > 0):
            continue
        a, b = float(lams[j - 1]), float(lams[j + 1])
        x = _extremum(fun, a, b)
        if x is None:
            continue
        gx = fun(x)
        if gx * gs[j] < 0:
            roots += [(_brent(fun, a, x), 1), (_brent(fun, x, b), 1)]
        elif abs(gx) < DOUBLE_ROOT_TOL * max(mags[j - 1], mags[j + 1]):
            roots.append((x, 2))
    return roots


def _merge(roots: list[tuple[float, int]]) -> tuple[np.ndarray, np.ndarray]:
    roots = sorted(roots)
    vals, mult = [], []
    for x, k in roots:
        if vals and abs(x - vals[-1]) < 1e-9 * max(1.0, abs(x)):
            mult[-1] += k
        else:
            vals.append(x)
            mult.append(k)
    return np.array(vals, dtype=float), np.array(mult, dtype=int)


def winding_count(cf: CharacteristicFunction, big_lam: float, r: int, eta: float = 0.25,
                  base: float = 0.5, max_depth: int = 14) -> int:
    """Zeros of ``g`` inside a strip-shaped contour around ``[-big_lam, big_lam]``.

    The contour runs at height ``eta * max(1, r |t|^(r-1))`` over the point
    ``lam = sign(t)|t|^r``, i.e. at distance about ``eta`` in the variable
    ``t``.  Segments are bisected until the phase step is below ``pi/4``.
    """
    tmax = big_lam ** (1.0 / r)

    def height(t):
        return eta * max(1.0, r * abs(t) ** (r - 1))

    def top(t):
        return float(_lam_of_t(t, r)) + 1j * height(t)

    def bottom(t):
        return float(_lam_of_t(t, r)) - 1j * height(t)

    pieces = []
    ts = np.linspace(-tmax, tmax, max(8, int(2 * tmax / base) + 1))
    pieces += [bottom(t) for t in ts]
    hr = height(tmax)
    pieces += [big_lam + 1j * y for y in np.linspace(-hr, hr, 17)[1:-1]]
    pieces += [top(t) for t in ts[::-1]]
    hl = height(-tmax)
    pieces += [-big_lam + 1j * y for y in np.linspace(hl, -hl, 17)[1:-1]]
    pieces.append(pieces[0])
    pts = np.array(pieces)
    vals = [cf.complex_value(z) for z in pts]
    budget = [WINDING_BUDGET]
    total = 0.0
    for k in range(len(pts) - 1):
        total += _phase_walk(cf, pts[k], pts[k + 1], vals[k], vals[k + 1], max_depth, budget)
    w = total / (2 * np.pi)
    if not np.isfinite(w):
        raise IncompleteSpectrumError("characteristic function overflowed on the contour")
    if abs(w - round(w)) > 0.1:
        raise IncompleteSpectrumError(f"winding number {w:.3f} is not close to an integer")
    return int(round(w))


def _phase_walk(cf, z0, z1, g0, g1, depth, budget) -> float:
    if g0 == 0 or g1 == 0 or not (np.isfinite(g0) and np.isfinite(g1)):
        return math.nan
    with np.errstate(over="ignore", invalid="ignore"):
        d = np.angle(g1 / g0)
    if abs(d) < np.pi / 4 or depth == 0:
        if depth == 0 and abs(d) >= np.pi / 2:
            raise IncompleteSpectrumError(f"contour passes too close to a zero near {z0:.6g}")
        return float(d)
    budget[0] -= 1
    if budget[0] < 0:
        raise IncompleteSpectrumError("winding contour did not resolve the phase of the "
                                      "characteristic function")
    zm = 0.5 * (z0 + z1)
    gm = cf.complex_value(zm)
    return (_phase_walk(cf, z0, zm, g0, gm, depth - 1, budget)
            + _phase_walk(cf, zm, z1, gm, g1, depth - 1, budget))


def oracle_steps(op: ComposedOperator, big_lam: float, max_step_norm: float = MAX_STEP_NORM / 2) -> int:
    rate = op.max_base_norm() + big_lam ** (1.0 / op.r)
    n = min(max(1024, math.ceil(rate / max_step_norm)), MAX_STEPS // 2)
    return n + n % 2


def eigenvalues(op: ComposedOperator, p: BoundaryProjection, count: int = DEFAULT_HEAD,
                window: float | None = None, steps: int | None = None,
                spacing: float = np.pi / 8, certify: bool = True) -> SpectrumWindow:
    """Real eigenvalues of ``D_P`` with ``|lam| < Lambda``.

    Without ``window`` the window grows until at least ``count`` eigenvalues
    (with multiplicity) are enclosed, and ``Lambda`` is then placed midway
    (in ``|lam|^(1/r)``) between the last included and the next eigenvalue.
    For variable coefficients the roots are computed at ``S`` and ``2S``
    steps and Richardson-extrapolated for the fourth-order integrator.
    """
    r = op.r
    if count < 1:
        raise InputError("count must be positive")
    t_hi = (window ** (1.0 / r) if window is not None
            else math.pi * (count + 4) / op.m + 4 * math.pi)
    growth = 0
    while True:
        if op.is_constant and steps is None:
            cfs = [CharacteristicFunction(op, p)]
        else:
            s = steps or oracle_steps(op, t_hi ** r)
            cfs = [CharacteristicFunction(op, p, s), CharacteristicFunction(op, p, 2 * s)]
        fine = cfs[-1]
        cal = [float(_lam_of_t(t, r)) for t in np.linspace(-t_hi, t_hi, 37) + 0.123]
        for cf in cfs:
            cf.calibrate(cal)
        roots = _scan(fine, -t_hi, t_hi, r, spacing)
        if len(cfs) == 2:
            roots = _richardson_roots(cfs[0], roots)
        vals, mult = _merge(roots)
        if window is not None or np.sum(mult) > count:
            break
        growth += 1
        if growth > MAX_WINDOW_GROWTH:
            raise IncompleteSpectrumError(
                f"only {int(np.sum(mult))} real eigenvalues with |lam| < {t_hi ** r:.4g}; "
                "is the problem self-adjoint?")
        t_hi *= 1.5
    if window is None:
        order = np.argsort(np.abs(vals), kind="stable")
        cum = np.cumsum(mult[order])
        k = int(np.searchsorted(cum, count))
        cut_in = abs(vals[order[k]]) ** (1.0 / r)
        nxt = [abs(vals[order[j]]) ** (1.0 / r) for j in range(k + 1, len(order))
               if abs(vals[order[j]]) ** (1.0 / r) > cut_in + 1e-9]
        t_cut = 0.5 * (cut_in + nxt[0]) if nxt else cut_in + spacing
        big_lam = t_cut ** r
    else:
        big_lam = float(window)
    keep = np.abs(vals) < big_lam
    vals, mult = vals[keep], mult[keep]
    if np.any(np.abs(np.abs(vals) - big_lam) < 1e-10):
        raise InputError("an eigenvalue sits on the window boundary")
    wind = winding_count(fine, big_lam, r) if certify else int(np.sum(mult))
    if wind != int(np.sum(mult)):
        raise IncompleteSpectrumError(
            f"found {int(np.sum(mult))} eigenvalues but the winding count is {wind}")
    return SpectrumWindow(vals, mult, (-big_lam, big_lam), wind, fine.steps, count)


def _richardson_roots(coarse: CharacteristicFunction, roots):
    out = []
    for x, k in roots:
        d = 1e-4 * max(1.0, abs(x))
        if k == 1:
            try:
                x1 = brentq(coarse, x - d, x + d, xtol=ROOT_XTOL * max(1.0, abs(x)), rtol=1e-15)
            except ValueError:
                x1 = x
        else:
            x1 = _extremum(coarse, x - d, x + d) or x
        out.append((x + (x - x1) / 15.0, k))
    return out


# ---------------------------------------------------------------------------
# Weyl tail and zeta functions


@dataclass
class TailClass:
    a: float
    b: float
    c: float
    d: float
    next_index: int
    residual: float


@dataclass
class TailModel:
    r: int
    period: int
    classes: list

    def to_dict(self) -> dict:
        return {"r": self.r, "period": self.period,
                "classes": [{"a": c.a, "b": c.b, "c": c.c, "d": c.d,
                             "next_index": c.next_index, "residual": c.residual}
                            for c in self.classes]}


def _fit_class(t: np.ndarray) -> TailClass:
    n = t.size
    i = np.arange(1, n + 1, dtype=float)
    sel = slice(n // 3, n)
    a = np.column_stack([i[sel], np.ones(n - n // 3), 1 / i[sel], 1 / i[sel] ** 2])
    coef, *_ = np.linalg.lstsq(a, t[sel], rcond=None)
    resid = float(np.max(np.abs(a @ coef - t[sel]) / np.abs(t[sel])))
    return TailClass(*map(float, coef), n + 1, resid)


def fit_tail(values: np.ndarray, r: int, max_period: int = 4, tol: float = TAIL_TOL) -> TailModel:
    """Fit ``lam_k^(1/r)`` on each residue class of the index modulo the period.

    The smallest period whose classes all fit to relative accuracy ``tol`` is
    used; each class needs at least 12 members.
    """
    vals = np.sort(np.asarray(values, dtype=float))
    if np.any(vals <= 0):
        raise InputError("tail fit needs positive eigenvalues")
    t = vals ** (1.0 / r)
    best = None
    for p in range(1, max_period + 1):
        classes = [t[j::p] for j in range(p)]
        if min(c.size for c in classes) < 12:
            break
        fits = [_fit_class(c) for c in classes]
        worst = max(f.residual for f in fits)
        if best is None or worst < best[0]:
            best = (worst, TailModel(r, p, fits))
        if worst < tol:
            return TailModel(r, p, fits)
    if best is None:
        raise TailError("too few eigenvalues for a tail fit")
    raise TailError(f"Weyl tail does not fit (best relative residual {best[0]:.2e})")


def _hurwitz(s: complex, q: float) -> complex:
    return complex(mpmath.zeta(mpmath.mpc(s.real, s.imag), q))


def _class_tail(cls: TailClass, r: int, s: complex) -> complex:
    """``sum_{i >= i0} t_i^(-r s)`` with ``t_i = a i + b + c/i + d/i^2``."""
    a, b, c, d, i0 = cls.a, cls.b, cls.c, cls.d, cls.next_index
    rs = r * s
    q = i0 + b / a
    total = a ** (-rs) * _hurwitz(rs, q) if abs(rs - 1) > 1e-14 else np.inf
    i = np.arange(i0, i0 + CORRECTION_TERMS, dtype=float)
    lin = a * i + b
    full = lin + c / i + d / i ** 2
    total += np.sum(np.exp(-rs * np.log(full)) - np.exp(-rs * np.log(lin)))
    q_end = i0 + CORRECTION_TERMS + b / a
    total += -rs * c * a ** (-rs - 1) * _hurwitz(rs + 2, q_end)
    return complex(total)


@dataclass
class ZetaReport:
    s_values: np.ndarray
    zeta: np.ndarray
    zeta_at_zero: float | None = None
    zeta_prime_at_zero: float | None = None
    det_zeta: float | None = None
    tail_model: TailModel | None = None
    head_count: int = 0
    richardson_spread: float | None = None
    log_det: float | None = None

    def to_dict(self) -> dict:
        return {
            "s_values": [float(x) for x in self.s_values],
            "zeta": [[float(z.real), float(z.imag)] for z in self.zeta],
            "zeta_at_zero": self.zeta_at_zero,
            "zeta_prime_at_zero": self.zeta_prime_at_zero,
            "det_zeta": self.det_zeta,
            "log_det": self.log_det,
            "head_count": self.head_count,
            "richardson_spread": self.richardson_spread,
            "tail_model": None if self.tail_model is None else self.tail_model.to_dict(),
        }


class SpectralZeta:
    """``zeta(s) = sum_head lam^(-s) + Hurwitz tails`` for a positive spectrum."""

    def __init__(self, values, r: int, head_count: int | None = None, tail: bool = True):
        vals = np.sort(np.asarray(values, dtype=float))
        if vals.size == 0:
            raise InputError("empty spectrum")
        if np.any(np.abs(vals) < ZERO_TOL):
            raise NonInvertibleError("spectrum contains a zero mode")
        if np.any(vals < 0):
            raise InputError("zeta functions here need positive eigenvalues")
        head = vals if head_count is None else vals[:head_count]
        self.head = head
        self.r = r
        self.log_head = np.log(head)
        self.tail = fit_tail(head, r) if tail else None

    def __call__(self, s: complex) -> complex:
        s = complex(s)
        total = complex(np.sum(np.exp(-s * self.log_head)))
        if self.tail is not None:
            total += sum(_class_tail(c, self.r, s) for c in self.tail.classes)
        return total

    def derivative_at_zero(self, h0: float = 0.02, levels: int = 4,
                           tol: float = 1e-9) -> tuple[float | complex, float]:
        """Richardson-extrapolated central differences; returns (value, spread)."""
        table = []
        for k in range(levels):
            h = h0 / 2 ** k
            row = [(self(h) - self(-h)) / (2 * h)]
            for j in range(1, k + 1):
                f = 4 ** j
                row.append((f * row[j - 1] - table[k - 1][j - 1]) / (f - 1))
            table.append(row)
        best, prev = table[-1][-1], table[-2][-1]
        spread = abs(best - prev)
        if spread > tol * max(1.0, abs(best)):
            raise ContinuationError(f"Richardson extrapolation did not settle (spread {spread:.2e})")
        return best, float(spread)


def zeta_values(spectrum, s_grid, r: int | None = None,
                head_count: int | None = None) -> ZetaReport:
    """Sample the continued zeta function of a positive spectrum on ``s_grid``.

    ``spectrum`` is a :class:`SpectrumWindow` or an array of eigenvalues
    (repeated by multiplicity).  With fewer than 12 eigenvalues no tail is
    attached (the spectrum is treated as finite).
    """
    if isinstance(spectrum, SpectrumWindow):
        vals = spectrum.expanded()
        head_count = head_count or spectrum.head_count
    else:
        vals = np.asarray(spectrum, dtype=float)
    if r is None:
        raise InputError("operator order r is required")
    z = SpectralZeta(vals, r, head_count, tail=vals.size >= 12)
    s_grid = np.atleast_1d(np.asarray(s_grid, dtype=np.complex128))
    out = np.array([z(s) for s in s_grid])
    rep = ZetaReport(s_grid.real if np.all(s_grid.imag == 0) else s_grid, out,
                     tail_model=z.tail, head_count=z.head.size)
    rep._zeta = z
    return rep


def zeta_det(report: ZetaReport) -> ZetaReport:
    """Fill ``zeta(0)``, ``zeta'(0)`` and ``det_zeta = exp(-zeta'(0))``."""
    z = getattr(report, "_zeta", None)
    if z is None:
        raise InputError("report was not produced by zeta_values")
    z0 = z(0.0)
    zp, spread = z.derivative_at_zero()
    report.zeta_at_zero = float(z0.real)
    report.zeta_prime_at_zero = float(np.real(zp))
    report.log_det = -report.zeta_prime_at_zero
    report.det_zeta = float(math.exp(report.log_det))
    report.richardson_spread = spread
    return report


def spectral_zeta_det(op: ComposedOperator, p: BoundaryProjection,
                      count: int = DEFAULT_HEAD, steps: int | None = None) -> ZetaReport:
    """Eigenvalues, zeta function and zeta determinant of a positive EBVP."""
    window = eigenvalues(op, p, count, steps=steps)
    if window.has_zero_mode():
        raise NonInvertibleError("zero mode detected; the zeta determinant needs invertibility")
    rep = zeta_det(zeta_values(window, [1.0, 2.0], r=op.r, head_count=count))
    rep.spectrum = window
    return rep


def signed_zeta_prime(values, r: int, theta: float,
                      head_count: int | None = None) -> tuple[complex, complex]:
    """``(zeta(0), zeta'(0))`` for a real spectrum of both signs with cut ``arg = theta``.

    Negative eigenvalues carry the argument ``pi`` when ``theta >= pi`` and
    ``-pi`` otherwise (``0 < theta < 2 pi``).
    """
    if not 0 < theta < 2 * np.pi:
        raise InputError("cut angle must lie in (0, 2 pi)")
    vals = np.asarray(values, dtype=float)
    if np.any(np.abs(vals) < ZERO_TOL):
        raise NonInvertibleError("spectrum contains a zero mode")
    pos, neg = np.sort(vals[vals > 0]), np.sort(-vals[vals < 0])
    phi = np.pi if theta >= np.pi else -np.pi
    z0, zp = 0j, 0j
    for side, ph in ((pos, 0.0), (neg, phi)):
        if side.size == 0:
            continue
        hc = None if head_count is None else min(head_count, side.size)
        zs = SpectralZeta(side, r, hc, tail=side.size >= 12)
        v0 = zs(0.0)
        d, _ = zs.derivative_at_zero()
        z0 += v0
        zp += d - 1j * ph * v0
    return z0, zp


def relative_log_det_first_order(spec1: SpectrumWindow, spec2: SpectrumWindow,
                                 theta: float, r: int = 1) -> complex:
    """``log det_zeta(D_P1) - log det_zeta(D_P2)`` for spectra of both signs."""
    _, d1 = signed_zeta_prime(spec1.expanded(), r, theta, None)
    _, d2 = signed_zeta_prime(spec2.expanded(), r, theta, None)
    return complex(-(d1 - d2))
