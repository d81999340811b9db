import numpy as np
import pytest

from caldet.boundary import BoundaryProjection, coordinate_projection, twisted_projection
from caldet.calderon import (calderon_frame, correction_kernel, green_solve, poisson_data,
                             poisson_solve, relative_resolvent_trace, resolve_steps,
                             s_matrix, s_singular_values)
from caldet.errors import BasepointError, InputError, SolveError
from caldet.operators import compose, d_du, hat_system
from caldet.reldet import canonical_det, characteristic_ratio, log_det_ratio

from conftest import random_unitary


def _in_span(frame, v):
    v = np.asarray(v, dtype=complex)
    return np.linalg.norm(v - frame.projection @ v) < 1e-10 * np.linalg.norm(v)


def test_frame_d_du_at_zero():
    frame = calderon_frame(hat_system(compose([d_du()]), 0.0))
    assert frame.N == 1
    assert np.allclose(frame.projection, 0.5 * np.ones((2, 2)), atol=1e-12)


def test_frame_d_du_exponential():
    lam = 1.7
    frame = calderon_frame(hat_system(compose([d_du()]), lam))
    assert _in_span(frame, [1.0, np.exp(lam)])


def test_frame_second_order_polynomials():
    frame = calderon_frame(hat_system(compose([d_du(), d_du()]), 0.0))
    assert frame.N == 2
    assert _in_span(frame, [1, 0, 1, 0])
    assert _in_span(frame, [0, 1, 1, 1])
    assert np.allclose(frame.basis.conj().T @ frame.basis, np.eye(2), atol=1e-12)


def test_odd_steps_rejected(dirac):
    with pytest.raises(InputError):
        calderon_frame(hat_system(dirac, 1.0), steps=1025)


def test_resolve_steps_rule(dirac):
    assert resolve_steps(hat_system(dirac, 1.0)) == 1024
    n = resolve_steps(hat_system(dirac, 1e3j))
    assert n % 2 == 0 and n * 0.04 >= 1e3
    assert resolve_steps(hat_system(dirac, 1e9)) == 1 << 17


def test_s_matrix_identity_and_zero():
    frame = calderon_frame(hat_system(compose([d_du()]), 0.0))
    calderon = BoundaryProjection.from_matrix(frame.projection)
    assert abs(abs(s_matrix(frame, calderon)[0, 0]) - 1) < 1e-12
    assert s_singular_values(frame, calderon.complement())[0] < 1e-12


@pytest.mark.parametrize("n", [-2, -1, 0, 1, 2])
def test_s_matrix_vanishes_on_twisted_spectrum(dirac, n):
    theta = 0.9
    p = twisted_projection(theta, 1)
    frame = calderon_frame(hat_system(dirac, theta + 2 * np.pi * n), steps=4096)
    assert s_singular_values(frame, p)[-1] < 1e-10
    off = calderon_frame(hat_system(dirac, theta + 2 * np.pi * n + 1.0))
    assert s_singular_values(off, p)[-1] > 0.1


def test_s_matrix_rank_check(dirac):
    frame = calderon_frame(hat_system(dirac, 1.0))
    with pytest.raises(InputError):
        s_matrix(frame, BoundaryProjection.from_matrix(np.eye(2)))


def test_poisson_constant_solution():
    frame = calderon_frame(hat_system(compose([d_du()]), 0.0))
    data = poisson_data(frame, coordinate_projection([0], 1))
    for u in (0.0, 0.3, 1.0):
        assert np.allclose(poisson_solve(data, [2.0, 5.0], u), [2.0])


def test_poisson_exponential():
    lam = -0.8
    frame = calderon_frame(hat_system(compose([d_du()]), lam))
    data = poisson_data(frame, coordinate_projection([1], 1))
    # s(1) = 3 fixes s(u) = 3 e^{lam (u - 1)}
    assert np.allclose(poisson_solve(data, [0.0, 3.0], 0.25), [3 * np.exp(lam * -0.75)])


def test_poisson_rejects_eigenvalue(dirac):
    frame = calderon_frame(hat_system(dirac, np.pi))
    with pytest.raises(SolveError):
        poisson_data(frame, twisted_projection(np.pi, 1))


def test_green_zero_forcing(dirac):
    grid, vals = green_solve(hat_system(dirac, 0.4), twisted_projection(np.pi / 2, 1),
                             lambda u: [0.0], steps=256)
    assert np.max(np.abs(vals)) < 1e-14


def test_green_d_du_constant_forcing():
    grid, vals = green_solve(hat_system(compose([d_du()]), 0.0), coordinate_projection([0], 1),
                             lambda u: [1.0], steps=256)
    assert np.max(np.abs(vals[:, 0] - grid)) < 1e-12


def test_green_residual(dirac):
    lam = 0.7 + 0.2j
    f = lambda u: [np.cos(3 * u) + 1j * u]
    grid, vals = green_solve(hat_system(dirac, lam), twisted_projection(np.pi / 3, 1), f,
                             steps=2048)
    s = vals[:, 0]
    ds = np.gradient(s, grid, edge_order=2)
    resid = -1j * ds - lam * s - np.array([f(u)[0] for u in grid])
    assert np.max(np.abs(resid[2:-2])) < 1e-5
    assert abs(s[-1] - np.exp(1j * np.pi / 3) * s[0]) < 1e-12


def test_relative_trace_equal_conditions(dirac, twisted_pair):
    assert relative_resolvent_trace(hat_system(dirac, 1.0), twisted_pair[0], twisted_pair[0]) == 0


@pytest.mark.parametrize("lam", [-1j, 2.5 + 0.5j, -3.0 - 4j])
def test_relative_trace_is_log_derivative(dirac, twisted_pair, lam):
    p1, p2 = twisted_pair
    tr = relative_resolvent_trace(hat_system(dirac, lam), p1, p2, steps=4096)
    d = 1e-4
    fd = (log_det_ratio(dirac, p1, p2, lam + d, steps=4096)
          - log_det_ratio(dirac, p1, p2, lam - d, steps=4096)) / (2 * d)
    assert abs(tr + fd) < 1e-6 * max(1.0, abs(tr))


def test_relative_trace_closed_form(dirac):
    # twisted spectra theta + 2 pi n: the difference of resolvent traces is
    # (i/2)[cot((theta1 - lam)/2) ... ] in closed form
    t1, t2, lam = np.pi / 2, np.pi / 3, 0.3 - 1.1j
    exact = 0.5 * (1 / np.tan((t1 - lam) / 2) - 1 / np.tan((t2 - lam) / 2))
    tr = relative_resolvent_trace(hat_system(dirac, lam), twisted_projection(t1, 1),
                                  twisted_projection(t2, 1), steps=4096)
    assert abs(tr - exact) < 1e-9


def test_correction_kernel_has_rank_at_most_n(laplacian, dirichlet_twisted_pair):
    p1, p2 = dirichlet_twisted_pair
    _, kern = correction_kernel(hat_system(laplacian, -5.0), p1, p2, samples=25)
    sv = np.linalg.svd(kern, compute_uv=False)
    assert sv[0] > 1e-6
    assert np.all(sv[2:] < 1e-10 * sv[0])


def test_determinants_basis_invariance(rng, laplacian, dirichlet_twisted_pair):
    p1, p2 = dirichlet_twisted_pair
    q = random_unitary(rng, 4)[:, :2]
    p3 = BoundaryProjection.from_matrix(q @ q.conj().T)
    frame = calderon_frame(hat_system(laplacian, -3.0 + 2j))
    ref_can = canonical_det(frame, p1, p3)
    ref_char = characteristic_ratio(frame, p1, p2)
    for _ in range(3):
        other = frame.rebased(random_unitary(rng, 2))
        assert abs(canonical_det(other, p1, p3) - ref_can) < 1e-10 * abs(ref_can)
        assert abs(characteristic_ratio(other, p1, p2) - ref_char) < 1e-10 * abs(ref_char)


def test_canonical_det_needs_transversal_pair(laplacian, dirichlet_twisted_pair):
    frame = calderon_frame(hat_system(laplacian, -3.0))
    with pytest.raises(BasepointError):
        canonical_det(frame, *dirichlet_twisted_pair)
