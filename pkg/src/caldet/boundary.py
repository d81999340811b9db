"""Boundary conditions as orthogonal projections on the trace space.

The trace of an ``N``-component solution is the ``2N`` vector
``(s(0), s(1))``.  A condition ``P`` selects the domain ``P gamma s = 0``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InputError
from .linalg_ode import orthoprojection

PROJ_TOL = 1e-10
WELLPOSED_TOL = 1e-8
ZERO_EIG_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class BoundaryProjection:
    matrix: np.ndarray
    rank: int
    label: str = ""

    @classmethod
    def from_matrix(cls, p, label: str = "", tol: float = PROJ_TOL) -> "BoundaryProjection":
        p = np.asarray(p, dtype=np.complex128)
        if p.ndim != 2 or p.shape[0] != p.shape[1] or p.shape[0] % 2:
            raise InputError("a boundary projection must be a 2N x 2N matrix")
        if not np.all(np.isfinite(p)):
            raise InputError("projection has non-finite entries")
        if np.max(np.abs(p - p.conj().T)) > tol:
            raise InputError("projection is not self-adjoint")
        if np.max(np.abs(p @ p - p)) > tol:
            raise InputError("projection is not idempotent")
        rank = int(round(np.trace(p).real))
        return cls(0.5 * (p + p.conj().T), rank, label)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def N(self) -> int:
        return self.dim // 2

    def complement(self) -> "BoundaryProjection":
        return BoundaryProjection(np.eye(self.dim) - self.matrix, self.dim - self.rank,
                                  f"complement({self.label})")


def nonnegative_projection(a: np.ndarray) -> np.ndarray:
    """Spectral projection of a self-adjoint matrix onto eigenvalues >= 0."""
    a = np.asarray(a, dtype=np.complex128)
    if np.max(np.abs(a - a.conj().T), initial=0.0) > PROJ_TOL:
        raise InputError("tangential operator is not self-adjoint")
    w, v = np.linalg.eigh(0.5 * (a + a.conj().T))
    keep = v[:, w >= -ZERO_EIG_TOL]
    return keep @ keep.conj().T


def _direct_sum(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    n, k = a.shape[0], b.shape[0]
    out = np.zeros((n + k, n + k), dtype=np.complex128)
    out[:n, :n] = a
    out[n:, n:] = b
    return out


def aps_projection(tangential_0, tangential_1) -> BoundaryProjection:
    """``Pi_>=(A_0) (+) Pi_>=(-A_1)``; zero modes go to the non-negative side."""
    p = _direct_sum(nonnegative_projection(tangential_0),
                    nonnegative_projection(-np.asarray(tangential_1)))
    return BoundaryProjection.from_matrix(p, "aps")


def anti_aps_projection(tangential_0, tangential_1) -> BoundaryProjection:
    p = aps_projection(tangential_0, tangential_1)
    return BoundaryProjection.from_matrix(np.eye(p.dim) - p.matrix, "anti_aps")


def twisted_projection(theta: float, n: int) -> BoundaryProjection:
    """Condition ``s(1) = exp(i theta) s(0)`` componentwise.

    The range is spanned by ``(exp(-i theta) e_j, -e_j) / sqrt(2)``.
    """
    vecs = []
    for j in range(n):
        v = np.zeros(2 * n, dtype=np.complex128)
        v[j] = np.exp(-1j * theta)
        v[n + j] = -1.0
        vecs.append(v / np.sqrt(2.0))
    return BoundaryProjection.from_matrix(orthoprojection(vecs), f"twisted({theta:.17g})")


def coordinate_projection(indices: Sequence[int], n: int, label: str = "") -> BoundaryProjection:
    """Projection onto the chosen trace coordinates (``0 <= index < 2n``)."""
    p = np.zeros((2 * n, 2 * n), dtype=np.complex128)
    for i in indices:
        if not 0 <= i < 2 * n:
            raise InputError(f"trace index {i} out of range")
        p[i, i] = 1.0
    return BoundaryProjection.from_matrix(p, label or f"coords{tuple(indices)}")


def dirichlet_projection(r: int, m: int) -> BoundaryProjection:
    """Vanishing of ``s_0`` at both endpoints."""
    n = r * m
    idx = list(range(m)) + [n + j for j in range(m)]
    return coordinate_projection(idx, n, "dirichlet")


def neumann_projection(r: int, m: int) -> BoundaryProjection:
    """Vanishing of ``s_{r-1}`` at both endpoints."""
    n = r * m
    k = (r - 1) * m
    idx = [k + j for j in range(m)] + [n + k + j for j in range(m)]
    return coordinate_projection(idx, n, "neumann")


def block_condition(components: Sequence[BoundaryProjection]) -> BoundaryProjection:
    """Assemble per-component conditions ``(P_0, ..., P_{r-1})`` on the full trace.

    ``P_i`` acts on ``(s_i(0), s_i(1))``.
    """
    r = len(components)
    m = components[0].N
    n = r * m
    out = np.zeros((2 * n, 2 * n), dtype=np.complex128)
    for i, comp in enumerate(components):
        if comp.N != m:
            raise InputError("component conditions must share the fibre dimension")
        idx = [i * m + j for j in range(m)] + [n + i * m + j for j in range(m)]
        out[np.ix_(idx, idx)] = comp.matrix
    return BoundaryProjection.from_matrix(out, "(" + ", ".join(c.label for c in components) + ")")


def boundary_sigma(sigma: np.ndarray) -> np.ndarray:
    """The unitary of the Green form for ``sigma (d/du + A)`` on (trace at 0, trace at 1).

    ``<Ds, t> - <s, D* t> = <sigma s(1), t(1)> - <sigma s(0), t(0)>``.
    """
    sigma = np.asarray(sigma, dtype=np.complex128)
    return _direct_sum(-sigma, sigma)


def adjoint_condition(p: BoundaryProjection, sigma_boundary) -> BoundaryProjection:
    """``sigma (I - P) sigma*``: the condition making the Green form vanish."""
    s = np.asarray(sigma_boundary, dtype=np.complex128)
    if s.shape != p.matrix.shape:
        raise InputError("sigma and P dimensions differ")
    if np.max(np.abs(s @ s.conj().T - np.eye(s.shape[0]))) > 1e-12:
        raise InputError("boundary sigma is not unitary")
    q = s @ (np.eye(p.dim) - p.matrix) @ s.conj().T
    return BoundaryProjection.from_matrix(q, f"adjoint({p.label})")


def wellposed_check(p: BoundaryProjection, frame) -> tuple[bool, dict]:
    """Whether ``S(P)`` is invertible on the Calderon space of ``frame``."""
    from .calderon import s_matrix

    if p.dim != frame.projection.shape[0]:
        raise InputError("condition and frame dimensions differ")
    if p.rank != p.N:
        return False, {"singular_values": [], "reason": f"rank {p.rank} != N {p.N}"}
    sv = np.linalg.svd(s_matrix(frame, p), compute_uv=False)
    ok = bool(sv[-1] > WELLPOSED_TOL)
    return ok, {"singular_values": sv.tolist(), "min_singular_value": float(sv[-1])}
