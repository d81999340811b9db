"""Kernel, cokernel and index of an EBVP in three independent realizations.

* ``D_P``: rectangular Chebyshev collocation of ``D^(r)`` (the equation is
  imposed on ``n + 1 - r`` interior points and the ``N`` boundary rows
  ``U_P* gamma s`` complete the square system).
* ``D_hat_P``: the first-order companion system.  Its kernel is the null
  space of ``U_P* [Y(0); Y(1)]``; its cokernel is the space of solutions of
  the adjoint system ``w' = -M_0* w`` with ``(-w(0), w(1))`` in range(P).
* ``S(P)``: singular values of the boundary Fredholm matrix at ``lam = 0``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .boundary import BoundaryProjection
from .calderon import calderon_frame, condition_basis, s_matrix
from .errors import InputError
from .linalg_ode import transport_from_samples
from .operators import ComposedOperator, barycentric_matrix, hat_system

KERNEL_TOL = 1e-8


@dataclass(frozen=True)
class Realization:
    name: str
    kernel: int
    cokernel: int
    smallest_singular_values: tuple

    @property
    def index(self) -> int:
        return self.kernel - self.cokernel


@dataclass(frozen=True)
class IndexReport:
    realizations: tuple

    @property
    def agree(self) -> bool:
        ks = {r.kernel for r in self.realizations}
        idx = {r.index for r in self.realizations}
        return len(ks) == 1 and len(idx) == 1

    def to_dict(self) -> dict:
        return {"agree": self.agree,
                "realizations": [{"name": r.name, "kernel": r.kernel, "cokernel": r.cokernel,
                                  "index": r.index,
                                  "smallest_singular_values": list(r.smallest_singular_values)}
                                 for r in self.realizations]}


def _null_dim(mat: np.ndarray, tol: float = KERNEL_TOL) -> tuple[int, tuple]:
    sv = np.linalg.svd(mat, compute_uv=False)
    scale = max(sv[0], 1.0) if sv.size else 1.0
    small = int(np.sum(sv < tol * scale)) + max(0, mat.shape[1] - sv.size)
    return small, tuple(float(x) for x in np.sort(sv)[:3])


def collocation_realization(op: ComposedOperator, p: BoundaryProjection, n: int = 40) -> Realization:
    """Square rectangular-collocation matrix of ``D_P``."""
    u, mats = op.collocation(n)
    m, r = op.m, op.r
    size = (n + 1) * m
    partial = [np.eye(size, dtype=np.complex128)]
    for mat in mats:
        partial.append(mat @ partial[-1])
    full = partial[-1]
    # resample the equation onto n + 1 - r Chebyshev points of the first kind
    k = n + 1 - r
    targets = 0.5 * (1 - np.cos(np.pi * (np.arange(k) + 0.5) / k))
    interp = np.kron(barycentric_matrix(u, targets), np.eye(m))
    rows = interp @ full
    # traces: node 0 is u = 0, node n is u = 1
    at0 = np.vstack([partial[i][0:m] for i in range(r)])
    at1 = np.vstack([partial[i][n * m:(n + 1) * m] for i in range(r)])
    bc = condition_basis(p).conj().T @ np.vstack([at0, at1])
    mat = np.vstack([rows, bc])
    if mat.shape[0] != mat.shape[1]:
        raise InputError("condition rank does not match the operator order")
    # balance rows so the boundary block is not drowned by the differentiation scale
    mat = mat / np.linalg.norm(mat, axis=1, keepdims=True)
    ker, sv = _null_dim(mat)
    coker, _ = _null_dim(mat.conj().T)
    return Realization("D_P (collocation)", ker, coker, sv)


def companion_realization(op: ComposedOperator, p: BoundaryProjection,
                          steps: int = 1024) -> Realization:
    hat = hat_system(op, 0.0)
    m0, fb = hat.samples(steps)
    y = transport_from_samples(m0, fb, 0.0, steps, anchor=0.5)
    q = np.vstack([y[0], y[-1]])
    u = condition_basis(p)
    ker, sv = _null_dim(u.conj().T @ q)
    # adjoint system w' = -M0^* w
    adj = -np.conj(np.transpose(m0, (0, 2, 1)))
    w = transport_from_samples(adj, np.zeros_like(fb), 0.0, steps, anchor=0.5)
    bw = np.vstack([-w[0], w[-1]])
    comp = np.eye(p.dim) - p.matrix
    coker, _ = _null_dim(comp @ bw)
    return Realization("D_hat_P (companion)", ker, coker, sv)


def boundary_realization(op: ComposedOperator, p: BoundaryProjection,
                         steps: int = 1024) -> Realization:
    frame = calderon_frame(hat_system(op, 0.0), steps)
    s = s_matrix(frame, p)
    ker, sv = _null_dim(s)
    coker, _ = _null_dim(s.conj().T)
    return Realization("S(P)", ker, coker, sv)


def index_check(op: ComposedOperator, p: BoundaryProjection, n: int = 40,
                steps: int = 1024) -> IndexReport:
    """Kernel and cokernel dimensions of the three realizations."""
    if p.dim != 2 * op.N or p.rank != op.N:
        raise InputError(f"condition must have rank {op.N} on the {2 * op.N}-dim trace space")
    return IndexReport((collocation_realization(op, p, n),
                        companion_realization(op, p, steps),
                        boundary_realization(op, p, steps)))
