"""Dense linear algebra and fundamental solutions of linear ODE systems on [0, 1]."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import kernels
from .errors import InputError

DEFAULT_STEPS = 1024
RANK_TOL = 1e-10

CoefficientFn = Callable[[float], np.ndarray]


def half_step_grid(steps: int) -> np.ndarray:
    """Sample points ``k / (2 * steps)`` used by the RK4 stages."""
    return np.linspace(0.0, 1.0, 2 * steps + 1)


def sample_coefficient(coefficient: CoefficientFn, steps: int) -> np.ndarray:
    us = half_step_grid(steps)
    out = np.array([np.asarray(coefficient(u), dtype=np.complex128) for u in us])
    if out.ndim != 3 or out.shape[1] != out.shape[2]:
        raise InputError("coefficient must return square matrices")
    if not np.all(np.isfinite(out)):
        raise InputError("coefficient has non-finite entries")
    return out


def simpson_weights(steps: int) -> np.ndarray:
    """Composite Simpson weights on ``steps + 1`` equispaced nodes of [0, 1]."""
    if steps % 2:
        raise InputError("Simpson quadrature needs an even number of steps")
    w = np.ones(steps + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w / (3.0 * steps)


@dataclass(frozen=True)
class FundamentalSolution:
    """Fundamental matrix ``Y`` of ``Y' = M(u) Y`` normalized by ``Y(anchor) = I``.

    ``transport[k]`` is ``Y(k / steps)``.  The default anchor 0 gives the usual
    transport matrix; anchoring at the midpoint keeps both halves of the
    interval equally conditioned when ``M`` has exponential dichotomy.
    """

    coefficient: CoefficientFn | None
    transport: np.ndarray
    steps: int
    anchor: float = 0.0
    _inverse: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.steps + 1)

    @property
    def left(self) -> np.ndarray:
        return self.transport[0]

    @property
    def right(self) -> np.ndarray:
        return self.transport[-1]

    def inverse(self) -> np.ndarray:
        if "inv" not in self._inverse:
            self._inverse["inv"] = np.linalg.inv(self.transport)
        return self._inverse["inv"]

    def at(self, u: float) -> np.ndarray:
        """``Y(u)`` at an arbitrary point via one RK4 step from the nearest node."""
        if not 0.0 <= u <= 1.0:
            raise InputError(f"u={u} outside [0, 1]")
        k = int(round(u * self.steps))
        u0 = k / self.steps
        y = self.transport[k]
        dh = u - u0
        if dh == 0.0 or self.coefficient is None:
            return y.copy()
        f = self.coefficient
        k1 = f(u0) @ y
        k2 = f(u0 + dh / 2) @ (y + dh / 2 * k1)
        k3 = f(u0 + dh / 2) @ (y + dh / 2 * k2)
        k4 = f(u) @ (y + dh * k3)
        return y + dh / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def _anchor_index(anchor: float, steps: int) -> int:
    ka = int(round(anchor * steps))
    if abs(ka - anchor * steps) > 1e-9:
        raise InputError("anchor must lie on the integration grid")
    return ka


def _check_samples(m0, feedback, steps):
    m0 = np.ascontiguousarray(m0, dtype=np.complex128)
    fb = np.ascontiguousarray(feedback, dtype=np.complex128)
    if m0.shape[0] != 2 * steps + 1:
        raise InputError("coefficient samples do not match the step count")
    return m0, fb


def transport_from_samples(m0: np.ndarray, feedback: np.ndarray, lam: complex,
                           steps: int, anchor: float = 0.0) -> np.ndarray:
    """RK4 transport of ``M0(u) + lam * feedback`` anchored at ``anchor``.

    Returns the ``(steps + 1, N, N)`` node values.
    """
    m0, fb = _check_samples(m0, feedback, steps)
    ka = _anchor_index(anchor, steps)
    h = 1.0 / steps
    lam = complex(lam)
    n = m0.shape[1]
    eye = np.eye(n, dtype=np.complex128)[None]
    fwd = kernels.rk4_transport(np.ascontiguousarray(m0[2 * ka:]), fb, lam, h, True) \
        if ka < steps else eye
    bwd = kernels.rk4_transport(np.ascontiguousarray(m0[2 * ka::-1]), fb, lam, -h, True) \
        if ka > 0 else eye
    return np.concatenate([bwd[::-1], fwd[1:]], axis=0)


def transport_endpoints(m0: np.ndarray, feedback: np.ndarray, lam: complex,
                        steps: int, anchor: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Endpoint values ``Y(0), Y(1)`` in scaled form.

    Returns ``(mats, exps)`` with ``Y(0) = mats[0] * 2**exps[0]`` and
    ``Y(1) = mats[1] * 2**exps[1]``, so that exponential growth of the
    transport never overflows.
    """
    m0, fb = _check_samples(m0, feedback, steps)
    ka = _anchor_index(anchor, steps)
    h = 1.0 / steps
    lam = complex(lam)
    n = m0.shape[1]
    eye = (np.eye(n, dtype=np.complex128), 0)
    fwd = kernels.rk4_transport(np.ascontiguousarray(m0[2 * ka:]), fb, lam, h, False) \
        if ka < steps else eye
    bwd = kernels.rk4_transport(np.ascontiguousarray(m0[2 * ka::-1]), fb, lam, -h, False) \
        if ka > 0 else eye
    return np.stack([bwd[0], fwd[0]]), np.array([bwd[1], fwd[1]])


def fundamental_solution(coefficient: CoefficientFn, steps: int = DEFAULT_STEPS,
                         anchor: float = 0.0) -> FundamentalSolution:
    """Integrate ``Phi' = coefficient(u) Phi`` on [0, 1] with fixed-step RK4."""
    if steps < 16:
        raise InputError("steps must be at least 16")
    samples = sample_coefficient(coefficient, steps)
    n = samples.shape[1]
    trans = transport_from_samples(samples, np.zeros((n, n)), 0.0, steps, anchor)
    return FundamentalSolution(coefficient, trans, steps, anchor)


def orthonormal_columns(a: np.ndarray, tol: float = RANK_TOL) -> np.ndarray:
    """Orthonormal basis of the column span; raises on rank deficiency."""
    a = np.atleast_2d(np.asarray(a, dtype=np.complex128))
    if not np.all(np.isfinite(a)):
        raise InputError("non-finite vectors")
    sv = np.linalg.svd(a, compute_uv=False)
    if sv.size == 0 or sv[-1] <= tol * max(sv[0], 1.0):
        raise InputError(f"vectors are linearly dependent (singular values {sv})")
    q, _ = np.linalg.qr(a)
    return q


def orthoprojection(span_vectors) -> np.ndarray:
    """Orthogonal projection onto the span of the given vectors.

    ``span_vectors`` is a sequence of vectors or a 2-D array whose columns are
    the vectors.
    """
    if isinstance(span_vectors, np.ndarray) and span_vectors.ndim == 2:
        a = span_vectors
    else:
        a = np.column_stack([np.asarray(v, dtype=np.complex128) for v in span_vectors])
    q = orthonormal_columns(a)
    p = q @ q.conj().T
    return 0.5 * (p + p.conj().T)


def range_basis(p: np.ndarray, rank: int | None = None) -> np.ndarray:
    """Orthonormal basis of the range of a projection (leading eigenvectors)."""
    w, v = np.linalg.eigh(0.5 * (p + p.conj().T))
    if rank is None:
        rank = int(np.sum(w > 0.5))
    return v[:, v.shape[1] - rank:][:, ::-1]
