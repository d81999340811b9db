"""First-order Dirac factors, their compositions, and the companion system.

A factor is ``D = sigma (d/du + A(u))`` acting on ``m``-component functions on
[0, 1] with ``sigma`` a constant unitary matrix.  A composition
``D_{r-1} ... D_0`` of order ``r`` is reduced to the first-order system on
``N = r m`` components

    s_i' = -A_i s_i + sigma_i^{-1} s_{i+1}          (i < r - 1)
    s_{r-1}' = -A_{r-1} s_{r-1} + lam sigma_{r-1}^{-1} s_0

whose solutions are exactly ``s_i = D_{i-1} ... D_0 s_0`` with
``D^(r) s_0 = lam s_0``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import InputError
from .linalg_ode import half_step_grid

COLLAR = 0.1
UNITARY_TOL = 1e-12


def _as_matrix(a, m: int | None = None) -> np.ndarray:
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim == 0:
        a = a.reshape(1, 1) * (np.eye(m) if m else 1.0)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InputError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InputError("matrix has non-finite entries")
    return a


@dataclass(frozen=True, eq=False)
class DiracFactor:
    """One factor ``sigma (d/du + A(u))``.

    ``coeff`` maps ``u`` to the ``m x m`` tangential matrix ``A(u)``.  When
    ``poly`` is set the coefficient is the matrix polynomial
    ``sum_k poly[k] u**k`` and sampling is vectorized.
    """

    sigma: np.ndarray
    coeff: Callable[[float], np.ndarray]
    m: int
    constant_near_boundary: bool = False
    poly: tuple | None = None
    label: str = ""

    def __post_init__(self):
        s = self.sigma
        if s.shape != (self.m, self.m):
            raise InputError("sigma has the wrong shape")
        if np.max(np.abs(s @ s.conj().T - np.eye(self.m))) > UNITARY_TOL:
            raise InputError("sigma is not unitary")
        if self.constant_near_boundary:
            for lo, hi in ((0.0, COLLAR), (1.0 - COLLAR, 1.0)):
                ref = self.tangential(lo)
                for u in np.linspace(lo, hi, 7):
                    if np.max(np.abs(self.tangential(u) - ref)) > 1e-12:
                        raise InputError("coefficient is not constant on the boundary collar")

    @classmethod
    def constant(cls, sigma, a, label: str = "") -> "DiracFactor":
        sigma = _as_matrix(sigma)
        m = sigma.shape[0]
        a = _as_matrix(a, m)
        if a.shape != (m, m):
            raise InputError("A and sigma dimensions differ")
        return cls(sigma, lambda u, a=a: a, m, True, (a,), label)

    @classmethod
    def polynomial(cls, sigma, coeffs: Sequence, label: str = "") -> "DiracFactor":
        sigma = _as_matrix(sigma)
        m = sigma.shape[0]
        cs = tuple(_as_matrix(c, m) for c in coeffs)
        if not cs or any(c.shape != (m, m) for c in cs):
            raise InputError("polynomial coefficients must be m x m")

        def coeff(u, cs=cs):
            out = np.zeros((m, m), dtype=np.complex128)
            for c in reversed(cs):
                out = out * u + c
            return out

        return cls(sigma, coeff, m, len(cs) == 1, cs, label)

    def tangential(self, u: float) -> np.ndarray:
        return np.asarray(self.coeff(u), dtype=np.complex128)

    def sample(self, us: np.ndarray) -> np.ndarray:
        us = np.asarray(us, dtype=float)
        if self.poly is not None:
            out = np.zeros((us.size, self.m, self.m), dtype=np.complex128)
            for c in reversed(self.poly):
                out = out * us[:, None, None] + c
            return out
        out = np.array([self.tangential(u) for u in us])
        if not np.all(np.isfinite(out)):
            raise InputError("coefficient has non-finite entries")
        return out

    def adjoint(self) -> "DiracFactor":
        """Formal adjoint ``D* = (-sigma*) (d/du - sigma A* sigma*)`` in product form."""
        s = self.sigma
        sig = -s.conj().T
        if self.poly is not None:
            cs = [-(s @ c.conj().T @ s.conj().T) for c in self.poly]
            return DiracFactor.polynomial(sig, cs, label=f"adjoint({self.label})")
        coeff = lambda u, f=self.coeff: -(s @ np.asarray(f(u)).conj().T @ s.conj().T)
        return DiracFactor(sig, coeff, self.m, self.constant_near_boundary, None,
                           f"adjoint({self.label})")


def d_du(m: int = 1) -> DiracFactor:
    return DiracFactor.constant(np.eye(m), np.zeros((m, m)), label="d_du")


def twisted_dirac(a: complex = 0.0, m: int = 1) -> DiracFactor:
    """``-i (d/du + a)``; ``a = 0`` gives ``-i d/du``."""
    return DiracFactor.constant(-1j * np.eye(m), a * np.eye(m), label=f"twisted_dirac({a})")


def laplace_dirichlet_pair(m: int = 1) -> list[DiracFactor]:
    """Two factors ``-i d/du`` composing to ``-d^2/du^2``."""
    return [twisted_dirac(0.0, m), twisted_dirac(0.0, m)]


_PRESET = re.compile(r"^\s*([a-z_]+)\s*(?:\(\s*([^)]*)\s*\))?\s*$")


def factor_preset(name: str, m: int = 1) -> list[DiracFactor]:
    """Resolve a named factor preset; returns a list (a pair for the Laplacian)."""
    mt = _PRESET.match(name)
    if not mt:
        raise InputError(f"cannot parse preset {name!r}")
    key, arg = mt.group(1), mt.group(2)
    if key == "d_du" and arg is None:
        return [d_du(m)]
    if key == "twisted_dirac":
        try:
            a = complex(arg.replace(" ", "")) if arg else 0.0
        except ValueError:
            raise InputError(f"bad preset argument in {name!r}") from None
        return [twisted_dirac(a, m)]
    if key == "laplace_dirichlet_pair" and arg is None:
        return laplace_dirichlet_pair(m)
    raise InputError(f"unknown preset {name!r}")


@dataclass(frozen=True, eq=False)
class ComposedOperator:
    """``D^(r) = D_{r-1} ... D_0`` with ``factors[0]`` applied first."""

    factors: tuple
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def r(self) -> int:
        return len(self.factors)

    @property
    def m(self) -> int:
        return self.factors[0].m

    @property
    def N(self) -> int:
        return self.r * self.m

    @property
    def is_constant(self) -> bool:
        """True when every factor has a constant coefficient."""
        return all(f.poly is not None and len(f.poly) == 1 for f in self.factors)

    def tangential_sum(self, u: float) -> np.ndarray:
        """Block diagonal sum of the factor coefficients at ``u``."""
        m = self.m
        out = np.zeros((self.N, self.N), dtype=np.complex128)
        for i, f in enumerate(self.factors):
            out[i * m:(i + 1) * m, i * m:(i + 1) * m] = f.tangential(u)
        return out

    def feedback(self) -> np.ndarray:
        """``dM/dlam``: the block coupling ``s_0`` into the last equation."""
        m, n = self.m, self.N
        b = np.zeros((n, n), dtype=np.complex128)
        b[n - m:, :m] = np.linalg.inv(self.factors[-1].sigma)
        return b

    def base_samples(self, steps: int) -> np.ndarray:
        """``M_0`` (the lam-independent part) at half-step nodes; cached."""
        key = ("m0", steps)
        if key not in self._cache:
            us = half_step_grid(steps)
            m, r, n = self.m, self.r, self.N
            out = np.zeros((us.size, n, n), dtype=np.complex128)
            for i, f in enumerate(self.factors):
                out[:, i * m:(i + 1) * m, i * m:(i + 1) * m] = -f.sample(us)
                if i < r - 1:
                    out[:, i * m:(i + 1) * m, (i + 1) * m:(i + 2) * m] = np.linalg.inv(f.sigma)
            if len(self._cache) > 16:
                self._cache.clear()
            self._cache[key] = out
        return self._cache[key]

    def max_base_norm(self) -> float:
        return float(np.max(np.linalg.norm(self.base_samples(64), ord=2, axis=(1, 2))))

    # collocation surface -------------------------------------------------

    def collocation(self, n: int = 48) -> tuple[np.ndarray, list[np.ndarray]]:
        """Chebyshev nodes on [0, 1] and the matrices of each factor.

        Vector functions are stored node-major: entry ``j * m + a``.
        """
        u, dmat = chebyshev(n)
        m = self.m
        mats = []
        for f in self.factors:
            a = f.sample(u)
            blk = np.kron(dmat, np.eye(m)).astype(np.complex128)
            for j in range(n + 1):
                blk[j * m:(j + 1) * m, j * m:(j + 1) * m] += a[j]
            mats.append(np.kron(np.eye(n + 1), f.sigma) @ blk)
        return u, mats

    def apply(self, s: Callable, us, n: int = 48, upto: int | None = None) -> np.ndarray:
        """Evaluate ``D_{k-1} ... D_0 s`` at ``us`` by spectral collocation.

        ``s`` maps a point to an ``m``-vector (or scalar when ``m == 1``);
        ``upto`` defaults to ``r`` (the full composition).
        """
        k = self.r if upto is None else upto
        nodes, mats = self.collocation(n)
        m = self.m
        vals = np.concatenate([np.atleast_1d(np.asarray(s(x), dtype=np.complex128)) for x in nodes])
        if vals.size != (n + 1) * m:
            raise InputError("test function has the wrong number of components")
        for mat in mats[:k]:
            vals = mat @ vals
        vals = vals.reshape(n + 1, m)
        us = np.atleast_1d(np.asarray(us, dtype=float))
        interp = barycentric_matrix(nodes, us)
        out = interp @ vals
        return out[:, 0] if m == 1 else out


def compose(factors: Sequence[DiracFactor]) -> ComposedOperator:
    factors = tuple(factors)
    if not factors:
        raise InputError("at least one factor is required")
    m = factors[0].m
    if any(f.m != m for f in factors):
        raise InputError("all factors must share the fibre dimension m")
    return ComposedOperator(factors)


@dataclass(frozen=True, eq=False)
class HatSystem:
    """The first-order companion system ``D_hat - lam`` of a composition."""

    source: ComposedOperator
    lam: complex

    @property
    def N(self) -> int:
        return self.source.N

    @property
    def r(self) -> int:
        return self.source.r

    @property
    def block_matrix(self) -> tuple:
        """Symbolic block layout; row 0 carries ``-lambda`` and ``D_{r-1}``."""
        r = self.r
        top = "-lambda" if self.lam != 0 else "0"
        rows = []
        for i in range(r):
            row = ["0"] * r
            if i == 0:
                row[0] = top
                row[r - 1] = f"D_{r - 1}" if r > 1 else (
                    "D_0 - lambda" if self.lam != 0 else "D_0")
            else:
                row[r - 1 - i] = f"D_{r - 1 - i}"
                row[r - i] = "-I"
            rows.append(tuple(row))
        return tuple(rows)

    def samples(self, steps: int) -> tuple[np.ndarray, np.ndarray]:
        return self.source.base_samples(steps), self.source.feedback()

    def coefficient_norm(self) -> float:
        """Effective rate of ``M_lam``: ``|M_0| + |lam|^(1/r)``.

        The companion block is similar to a matrix with entries of size
        ``|lam|^(1/r)``, which is what the RK4 step has to resolve.
        """
        return self.source.max_base_norm() + abs(self.lam) ** (1.0 / self.r)


def hat_system(op: ComposedOperator, lam: complex) -> HatSystem:
    return HatSystem(op, complex(lam))


def assemble_ode(hat: HatSystem) -> Callable[[float], np.ndarray]:
    """Coefficient function ``u -> M_lam(u)`` with ``s' = M_lam(u) s``."""
    op = hat.source
    m, r, n = op.m, op.r, op.N
    fb = hat.lam * op.feedback()
    inv_sig = [np.linalg.inv(f.sigma) for f in op.factors]

    def coefficient(u: float) -> np.ndarray:
        out = fb.copy()
        for i, f in enumerate(op.factors):
            out[i * m:(i + 1) * m, i * m:(i + 1) * m] -= f.tangential(u)
            if i < r - 1:
                out[i * m:(i + 1) * m, (i + 1) * m:(i + 2) * m] += inv_sig[i]
        return out

    return coefficient


def boundary_trace(op: ComposedOperator, s: Callable, n: int = 48) -> np.ndarray:
    """``(s_0, ..., s_{r-1})`` at ``u = 0`` followed by the same at ``u = 1``."""
    parts = [np.atleast_2d(op.apply(s, [0.0, 1.0], n=n, upto=k).reshape(2, -1))
             for k in range(op.r)]
    at0 = np.concatenate([p[0] for p in parts])
    at1 = np.concatenate([p[1] for p in parts])
    return np.concatenate([at0, at1])


def chebyshev(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Chebyshev-Lobatto nodes on [0, 1] (ascending) and the d/du matrix."""
    if n < 2:
        raise InputError("need at least 3 collocation nodes")
    x = np.cos(np.pi * np.arange(n + 1) / n)
    c = np.ones(n + 1)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** np.arange(n + 1)
    dx = x[:, None] - x[None, :]
    d = np.outer(c, 1.0 / c) / (dx + np.eye(n + 1))
    d -= np.diag(d.sum(axis=1))
    # u = (1 - x) / 2 maps x=1 to u=0; d/du = -2 d/dx
    u = (1.0 - x) / 2.0
    return u, -2.0 * d


def barycentric_matrix(nodes: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Interpolation matrix from Chebyshev-Lobatto ``nodes`` to ``targets``."""
    n = nodes.size - 1
    w = (-1.0) ** np.arange(n + 1)
    w[0] *= 0.5
    w[-1] *= 0.5
    out = np.zeros((targets.size, nodes.size))
    for i, t in enumerate(targets):
        diff = t - nodes
        hit = np.flatnonzero(np.abs(diff) < 1e-14)
        if hit.size:
            out[i, hit[0]] = 1.0
            continue
        q = w / diff
        out[i] = q / q.sum()
    return out
