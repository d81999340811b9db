import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from caldet.boundary import (BoundaryProjection, adjoint_condition, anti_aps_projection,
                             aps_projection, block_condition, boundary_sigma,
                             coordinate_projection, dirichlet_projection, neumann_projection,
                             nonnegative_projection, twisted_projection, wellposed_check)
from caldet.calderon import calderon_frame
from caldet.errors import InputError
from caldet.operators import DiracFactor, compose, hat_system

from conftest import random_unitary


def test_aps_sign_split():
    a = np.diag([1.0, -1.0])
    p = aps_projection(a, a)
    assert np.allclose(p.matrix, np.diag([1, 0, 0, 1]))
    assert p.rank == 2


def test_aps_zero_modes_go_to_nonnegative_side():
    p = aps_projection(np.zeros((2, 2)), np.zeros((2, 2)))
    assert np.allclose(p.matrix, np.eye(4))


def test_aps_rotated_spectrum(rng):
    u = random_unitary(rng, 2)
    a = u @ np.diag([2.0, -3.0]) @ u.conj().T
    q = nonnegative_projection(a)
    w, v = np.linalg.eigh(a)
    top = v[:, np.argmax(w)]
    assert np.allclose(q, np.outer(top, top.conj()), atol=1e-12)


def test_aps_rejects_non_self_adjoint():
    with pytest.raises(InputError):
        aps_projection(np.array([[0, 1], [0, 0]]), np.zeros((2, 2)))


def test_adjoint_condition_examples():
    p = BoundaryProjection.from_matrix(np.diag([1.0, 0.0]))
    assert np.allclose(adjoint_condition(p, np.eye(2)).matrix, np.diag([0, 1]))
    swap = np.array([[0, 1], [1, 0]])
    assert np.allclose(adjoint_condition(p, swap).matrix, np.diag([1, 0]))


def test_adjoint_condition_identity_sigma(rng):
    v = rng.normal(size=(4, 2)) + 1j * rng.normal(size=(4, 2))
    q, _ = np.linalg.qr(v)
    p = BoundaryProjection.from_matrix(q @ q.conj().T)
    assert np.allclose(adjoint_condition(p, np.eye(4)).matrix, np.eye(4) - p.matrix)


def test_adjoint_condition_rejects_non_unitary():
    p = BoundaryProjection.from_matrix(np.diag([1.0, 0.0]))
    with pytest.raises(InputError):
        adjoint_condition(p, 2 * np.eye(2))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.integers(1, 3))
def test_adjoint_condition_involution(seed, n):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=(2 * n, n)) + 1j * rng.normal(size=(2 * n, n))
    q, _ = np.linalg.qr(v)
    p = BoundaryProjection.from_matrix(q @ q.conj().T)
    s = random_unitary(rng, 2 * n)
    ps = adjoint_condition(p, s)
    assert np.max(np.abs(s.conj().T @ (np.eye(2 * n) - ps.matrix) @ s - p.matrix)) < 1e-12
    twice = adjoint_condition(ps, s)
    assert twice.rank == p.rank


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.integers(1, 3))
def test_projection_invariants(seed, n):
    rng = np.random.default_rng(seed)
    h0 = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    h1 = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    h0, h1 = h0 + h0.conj().T, h1 + h1.conj().T
    theta = float(rng.uniform(0, 2 * np.pi))
    for p in (aps_projection(h0, h1), anti_aps_projection(h0, h1),
              twisted_projection(theta, n)):
        m = p.matrix
        assert np.max(np.abs(m @ m - m)) < 1e-10
        assert np.max(np.abs(m - m.conj().T)) < 1e-10
    p = aps_projection(h0, h1).matrix
    for blk, h in ((slice(0, n), h0), (slice(n, 2 * n), -h1)):
        w, v = np.linalg.eigh(h)
        for lo in (w >= 0, w < 0):
            q = v[:, lo] @ v[:, lo].conj().T
            pb = p[blk, blk]
            assert np.max(np.abs(pb @ q - q @ pb)) < 1e-10


def test_twisted_kernel_convention():
    theta = 0.7
    p = twisted_projection(theta, 1)
    trace = np.array([1.0, np.exp(1j * theta)])   # s(1) = e^{i theta} s(0)
    assert np.allclose(p.matrix @ trace, 0)


def test_coordinate_conditions():
    assert np.allclose(dirichlet_projection(2, 1).matrix, np.diag([1, 0, 1, 0]))
    assert np.allclose(neumann_projection(2, 1).matrix, np.diag([0, 1, 0, 1]))
    with pytest.raises(InputError):
        coordinate_projection([5], 2)


def test_block_condition_matches_twisted():
    tw = twisted_projection(np.pi, 1)
    assert np.allclose(block_condition([tw, tw]).matrix, twisted_projection(np.pi, 2).matrix)


def test_from_matrix_rejects_non_projections():
    with pytest.raises(InputError):
        BoundaryProjection.from_matrix(np.array([[1, 1], [0, 0]]))
    with pytest.raises(InputError):
        BoundaryProjection.from_matrix(np.diag([2.0, 0.0]))


def test_boundary_sigma_is_green_form():
    s = boundary_sigma(-1j * np.eye(1))
    assert np.allclose(s, np.diag([1j, -1j]))


def test_wellposed_examples():
    op = compose([DiracFactor.constant(np.eye(1), 0.5 * np.eye(1))])
    frame = calderon_frame(hat_system(op, 0.0))
    calderon = BoundaryProjection.from_matrix(frame.projection)
    ok, diag = wellposed_check(calderon, frame)
    assert ok and abs(diag["min_singular_value"] - 1.0) < 1e-12
    ok, diag = wellposed_check(calderon.complement(), frame)
    assert not ok and diag["min_singular_value"] < 1e-12


def test_wellposed_aps_rank_one_formula():
    a = 0.5
    op = compose([DiracFactor.constant(np.eye(1), a * np.eye(1))])
    frame = calderon_frame(hat_system(op, 0.0))
    p = aps_projection(a * np.eye(1), a * np.eye(1))
    ok, diag = wellposed_check(p, frame)
    # K is spanned by (1, e^{-a}); P keeps the u=0 coordinate, so |<e_0, k>|
    k = np.array([1.0, np.exp(-a)]) / np.hypot(1.0, np.exp(-a))
    assert ok and abs(diag["min_singular_value"] - k[0]) < 1e-12
