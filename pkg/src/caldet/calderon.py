"""Calderon spaces, boundary Fredholm matrices, Poisson and Green solves.

Solutions of the companion system are parametrized by their value at the
midpoint ``u = 1/2``.  With ``Y`` the fundamental matrix normalized there,
the Calderon space is the column span of ``Q = [Y(0); Y(1)]``.  Anchoring at
the midpoint keeps growing and decaying solutions on an equal footing, so the
span stays well conditioned for large ``|lam|``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .boundary import BoundaryProjection
from .errors import InputError, SolveError
from .linalg_ode import (DEFAULT_STEPS, FundamentalSolution, range_basis,
                         simpson_weights, transport_endpoints, transport_from_samples)
from .operators import HatSystem, assemble_ode

MAX_STEP_NORM = 0.04
MAX_STEPS = 1 << 17
EIGEN_HIT_TOL = 1e-10


def resolve_steps(hat: HatSystem, steps: int | None = None,
                  max_step_norm: float = MAX_STEP_NORM) -> int:
    """Step count: at least ``steps`` and fine enough that ``h |M| <= max_step_norm``."""
    base = DEFAULT_STEPS if steps is None else int(steps)
    need = math.ceil(hat.coefficient_norm() / max_step_norm)
    n = min(max(base, need), MAX_STEPS)
    return n + (n % 2)


@dataclass(frozen=True, eq=False)
class CalderonFrame:
    """Calderon space of ``D_hat - lam`` and its orthogonal projection.

    ``basis`` is orthonormal; ``raw`` is ``[Y(0); Y(1)]`` and
    ``raw = basis @ r_factor``.  When the transport grows beyond the floating
    point range, ``raw`` is stored divided by the power of two
    ``2**raw_exponent``; the span is unchanged.
    """

    hat: HatSystem
    lam: complex
    basis: np.ndarray
    projection: np.ndarray
    raw: np.ndarray
    r_factor: np.ndarray
    steps: int
    _cache: dict = field(default_factory=dict, repr=False, compare=False)
    raw_exponent: int = 0

    @property
    def N(self) -> int:
        return self.basis.shape[1]

    @property
    def transport(self) -> FundamentalSolution:
        """Midpoint-anchored fundamental solution on the full grid (computed lazily)."""
        if "fs" not in self._cache:
            m0, fb = self.hat.samples(self.steps)
            trans = transport_from_samples(m0, fb, self.lam, self.steps, anchor=0.5)
            self._cache["fs"] = FundamentalSolution(assemble_ode(self.hat), trans,
                                                    self.steps, 0.5)
        return self._cache["fs"]

    def rebased(self, unitary: np.ndarray) -> "CalderonFrame":
        """Same space with basis ``basis @ unitary`` (for invariance checks)."""
        return CalderonFrame(self.hat, self.lam, self.basis @ unitary, self.projection,
                             self.raw, unitary.conj().T @ self.r_factor, self.steps,
                             self._cache, self.raw_exponent)


def calderon_frame(hat: HatSystem, steps: int | None = None) -> CalderonFrame:
    """Calderon frame; ``steps=None`` picks a resolution from ``|M_lam|``."""
    n = resolve_steps(hat) if steps is None else int(steps)
    if n % 2:
        raise InputError("steps must be even (midpoint anchoring)")
    m0, fb = hat.samples(n)
    ends, exps = transport_endpoints(m0, fb, hat.lam, n, anchor=0.5)
    top = int(exps.max())
    raw = np.vstack([np.ldexp(1.0, int(e) - top) * y for y, e in zip(ends, exps)])
    if not np.all(np.isfinite(raw)):
        raise SolveError(f"transport overflowed at lam={hat.lam}")
    scale = np.max(np.abs(raw), axis=0)
    q, rf = np.linalg.qr(raw / scale)
    rf = rf * scale
    proj = q @ q.conj().T
    return CalderonFrame(hat, hat.lam, q, 0.5 * (proj + proj.conj().T), raw, rf, n, {}, top)


def condition_basis(p: BoundaryProjection) -> np.ndarray:
    return range_basis(p.matrix, p.rank)


def s_matrix(frame: CalderonFrame, p: BoundaryProjection) -> np.ndarray:
    """Matrix of ``P o P(D_hat_lam)`` from ``K_lam`` to ``range(P)`` in orthonormal bases."""
    if p.rank != frame.N or p.dim != 2 * frame.N:
        raise InputError(f"condition must have rank N={frame.N} on a {2 * frame.N}-dim trace space")
    return condition_basis(p).conj().T @ frame.basis


def s_singular_values(frame: CalderonFrame, p: BoundaryProjection) -> np.ndarray:
    return np.linalg.svd(s_matrix(frame, p), compute_uv=False)


def _require_invertible(frame: CalderonFrame, p: BoundaryProjection, what: str = "P"):
    sv = s_singular_values(frame, p)
    if sv[-1] < EIGEN_HIT_TOL:
        raise SolveError(f"lam={frame.lam} is an eigenvalue for {what} "
                         f"(smallest singular value {sv[-1]:.3e})")


@dataclass(frozen=True, eq=False)
class PoissonData:
    frame: CalderonFrame
    condition: BoundaryProjection
    s_inverse: np.ndarray


def poisson_data(frame: CalderonFrame, p: BoundaryProjection) -> PoissonData:
    _require_invertible(frame, p)
    return PoissonData(frame, p, np.linalg.inv(s_matrix(frame, p)))


def poisson_coefficients(data: PoissonData, h) -> np.ndarray:
    """Midpoint value ``c`` of the solution with ``P gamma s = P h``."""
    h = np.asarray(h, dtype=np.complex128)
    u = condition_basis(data.condition)
    k = data.s_inverse @ (u.conj().T @ h)
    return np.ldexp(1.0, -data.frame.raw_exponent) * np.linalg.solve(data.frame.r_factor, k)


def poisson_solve(data: PoissonData, h, u: float) -> np.ndarray:
    """``s(u)`` for the solution of ``D_hat_lam s = 0`` with ``P gamma s = P h``."""
    c = poisson_coefficients(data, h)
    return data.frame.transport.at(u) @ c


def _forced_transport(hat: HatSystem, f, steps: int) -> np.ndarray:
    """Midpoint-anchored transport of the system augmented by the forcing column."""
    op = hat.source
    m0, fb = hat.samples(steps)
    n = hat.N
    us = np.linspace(0.0, 1.0, 2 * steps + 1)
    fv = np.array([np.asarray(f(u), dtype=np.complex128).reshape(n) for u in us])
    m = op.m
    for i, fac in enumerate(op.factors):
        fv[:, i * m:(i + 1) * m] = fv[:, i * m:(i + 1) * m] @ np.linalg.inv(fac.sigma).T
    aug = np.zeros((us.size, n + 1, n + 1), dtype=np.complex128)
    aug[:, :n, :n] = m0
    aug[:, :n, n] = fv
    fba = np.zeros((n + 1, n + 1), dtype=np.complex128)
    fba[:n, :n] = fb
    return transport_from_samples(aug, fba, hat.lam, steps, anchor=0.5)


def green_solve(hat: HatSystem, p: BoundaryProjection, f, steps: int | None = None):
    """Solve ``(D_hat - lam) s = f`` with ``P gamma s = 0``.

    ``f(u)`` returns an ``N``-vector; block ``i`` is the right-hand side of the
    equation ``D_i s_i - s_{i+1} = f_i`` (the last block belongs to
    ``D_{r-1} s_{r-1} - lam s_0``).  Returns ``(grid, values)`` with values of
    shape ``(steps + 1, N)``.
    """
    n = resolve_steps(hat, steps) if steps is None else int(steps)
    frame = calderon_frame(hat, n)
    _require_invertible(frame, p)
    tr = _forced_transport(hat, f, n)
    nn = hat.N
    y = tr[:, :nn, :nn]
    sp = tr[:, :nn, nn]
    trace_p = np.concatenate([sp[0], sp[-1]])
    q = np.vstack([y[0], y[-1]])
    u = condition_basis(p)
    c = -np.linalg.solve(u.conj().T @ q, u.conj().T @ trace_p)
    vals = sp + np.einsum("kij,j->ki", y, c)
    return np.linspace(0.0, 1.0, n + 1), vals


def _resolvent_pieces(frame: CalderonFrame, p1: BoundaryProjection, p2: BoundaryProjection):
    _require_invertible(frame, p1, "P1")
    _require_invertible(frame, p2, "P2")
    q = frame.raw
    n = frame.N
    u1 = condition_basis(p1)
    u2 = condition_basis(p2)
    c1 = np.linalg.solve(u1.conj().T @ q, u1.conj().T)          # K(P1) P1 in midpoint coords
    c1 = np.ldexp(1.0, -frame.raw_exponent) * c1
    t2 = np.eye(2 * n) - q @ np.linalg.solve(u2.conj().T @ q, u2.conj().T)
    fs = frame.transport
    z = np.zeros((2 * n, n), dtype=np.complex128)
    z[n:] = fs.right
    return c1 @ t2 @ z, fs


def relative_resolvent_trace(hat: HatSystem, p1: BoundaryProjection, p2: BoundaryProjection,
                             steps: int | None = None) -> complex:
    """``Tr[(D_P1 - lam)^{-1} - (D_P2 - lam)^{-1}]`` from the finite-rank correction kernel.

    The correction is ``-[K_lam(P1) P1 gamma (D_hat_lam,P2)^{-1}]_(1,1)``; its
    trace is the Simpson quadrature of the kernel diagonal.
    """
    if p1 is p2 or np.array_equal(p1.matrix, p2.matrix):
        return 0j
    frame = calderon_frame(hat, steps)
    core, fs = _resolvent_pieces(frame, p1, p2)
    y = fs.transport
    yinv = fs.inverse()
    b = hat.source.feedback()
    w = simpson_weights(frame.steps)
    integrand = yinv @ b @ y
    j = np.tensordot(w, integrand, axes=(0, 0))
    return complex(-np.trace(core @ j))


def correction_kernel(hat: HatSystem, p1: BoundaryProjection, p2: BoundaryProjection,
                      samples: int = 33, steps: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """The ``(1,1)`` block of the correction kernel on an equispaced sub-grid.

    Returns ``(points, K)`` with ``K`` of shape ``(samples*m, samples*m)``.
    """
    frame = calderon_frame(hat, steps)
    core, fs = _resolvent_pieces(frame, p1, p2)
    op = hat.source
    m = op.m
    idx = np.round(np.linspace(0, frame.steps, samples)).astype(int)
    y = fs.transport[idx]
    yinv = fs.inverse()[idx]
    sig_inv = np.linalg.inv(op.factors[-1].sigma)
    left = y[:, :m, :] @ core                       # (k, m, N)
    right = yinv[:, :, op.N - m:] @ sig_inv          # (k, N, m)
    kern = -np.einsum("aij,bjk->aibk", left, right).reshape(samples * m, samples * m)
    return idx / frame.steps, kern
