import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from caldet.errors import InputError
from caldet.linalg_ode import fundamental_solution
from caldet.operators import (DiracFactor, assemble_ode, boundary_trace, compose, d_du,
                              factor_preset, hat_system, twisted_dirac)

from conftest import random_unitary


def test_d_du_on_linear_function():
    op = compose([d_du()])
    assert np.allclose(op.apply(lambda u: u, [0.0, 0.3, 1.0]), 1.0, atol=1e-12)


def test_minus_second_derivative_on_sine(laplacian):
    us = np.linspace(0, 1, 7)
    got = laplacian.apply(lambda u: np.sin(np.pi * u), us)
    assert np.allclose(got, np.pi ** 2 * np.sin(np.pi * us), atol=1e-9)


def test_shift_factor_on_exponential():
    a, k = 0.4, 1.3
    op = compose([DiracFactor.constant(np.eye(1), a * np.eye(1))])
    us = np.linspace(0, 1, 5)
    assert np.allclose(op.apply(lambda u: np.exp(k * u), us), (k + a) * np.exp(k * us), atol=1e-10)


def test_compose_rejects_mixed_fibres():
    with pytest.raises(InputError):
        compose([d_du(1), d_du(2)])
    with pytest.raises(InputError):
        compose([])


def test_sigma_must_be_unitary():
    with pytest.raises(InputError):
        DiracFactor.constant(2 * np.eye(1), np.zeros((1, 1)))


def test_collar_condition_checked():
    with pytest.raises(InputError):
        DiracFactor(np.eye(1), lambda u: np.array([[u]]), 1, constant_near_boundary=True)


def test_presets():
    assert len(factor_preset("laplace_dirichlet_pair")) == 2
    f = factor_preset("twisted_dirac(0.5+0.25j)")[0]
    assert np.allclose(f.sigma, -1j) and np.allclose(f.tangential(0.3), 0.5 + 0.25j)
    with pytest.raises(InputError):
        factor_preset("nonsense")


def test_hat_first_order_block():
    op = compose([d_du()])
    assert hat_system(op, 2.0).block_matrix == (("D_0 - lambda",),)
    assert hat_system(op, 0.0).block_matrix == (("D_0",),)


def test_hat_block_layout_at_zero_is_deterministic(laplacian):
    assert hat_system(laplacian, 0.0).block_matrix == hat_system(laplacian, 0.0).block_matrix
    assert hat_system(laplacian, 0.0).block_matrix[0][0] == "0"
    assert hat_system(laplacian, 1.0).block_matrix[0][0] == "-lambda"


def test_assemble_ode_first_order():
    a, lam = 0.7, 2.5 - 1j
    op = compose([DiracFactor.constant(np.eye(1), a * np.eye(1))])
    assert np.allclose(assemble_ode(hat_system(op, lam))(0.4), lam - a)


def test_assemble_ode_second_order():
    op = compose([d_du(), d_du()])
    lam = 3.0 + 1j
    assert np.allclose(assemble_ode(hat_system(op, lam))(0.2), [[0, 1], [lam, 0]])
    m0 = assemble_ode(hat_system(op, 0.0))(0.2)
    assert np.allclose(m0, [[0, 1], [0, 0]])


def test_second_order_exponential_kernel():
    k = 1.7
    op = compose([d_du(), d_du()])
    m = assemble_ode(hat_system(op, k * k))
    for u in (0.0, 0.5, 1.0):
        s = np.array([np.exp(k * u), k * np.exp(k * u)])
        assert np.allclose(k * s, m(u) @ s)


def _product(factors, k):
    t = [np.eye(factors[0].m, dtype=complex)]
    for f in factors:
        t.append(f.sigma @ (k * np.eye(f.m) + f.tangential(0.0)) @ t[-1])
    return t


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_companion_correspondence(seed):
    rng = np.random.default_rng(seed)
    r, m = int(rng.integers(1, 4)), int(rng.integers(1, 3))
    factors = [DiracFactor.constant(random_unitary(rng, m),
                                    rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m)))
               for _ in range(r)]
    op = compose(factors)
    k = complex(rng.normal(), rng.normal())
    t = _product(factors, k)
    w, v = np.linalg.eig(t[-1])
    lam, vec = w[0], v[:, 0]
    s = np.concatenate([t[i] @ vec for i in range(r)])
    coeff = assemble_ode(hat_system(op, lam))
    scale = np.linalg.norm(s) * (abs(k) + np.linalg.norm(coeff(0.0)))
    # in the kernel for lam, and not for a shifted lam
    assert np.linalg.norm(k * s - coeff(0.3) @ s) < 1e-8 * scale
    off = assemble_ode(hat_system(op, lam + 1.0))
    assert np.linalg.norm(k * s - off(0.3) @ s) > 1e-6 * np.linalg.norm(s)
    # integrating from s(0) reproduces the ansatz
    fs = fundamental_solution(coeff, 2048)
    assert np.allclose(fs.right @ s, np.exp(k) * s, atol=1e-7 * np.abs(np.exp(k)) * np.linalg.norm(s))


def test_boundary_trace_examples():
    op = compose([d_du()])
    assert np.allclose(boundary_trace(op, lambda u: 1.0), [1, 1])
    assert np.allclose(boundary_trace(compose([d_du(), d_du()]), lambda u: u), [0, 1, 1, 1])
    assert np.allclose(boundary_trace(op, lambda u: 0.0), 0)


def test_polynomial_factor_and_adjoint():
    f = DiracFactor.polynomial(-1j * np.eye(1), [np.array([[0.2]]), np.array([[1.0j]])])
    assert np.allclose(f.sample(np.array([0.0, 0.5])).ravel(), [0.2, 0.2 + 0.5j])
    adj = f.adjoint()
    # sigma (d/du + A) has formal adjoint (-sigma*) (d/du - sigma A* sigma*)
    assert np.allclose(adj.sigma, -f.sigma.conj().T)
    assert np.allclose(adj.tangential(0.5), -(f.sigma @ f.tangential(0.5).conj().T @ f.sigma.conj().T))


def test_twisted_dirac_is_constant():
    assert compose([twisted_dirac(0.1)]).is_constant
    f = DiracFactor.polynomial(np.eye(1), [np.array([[0.0]]), np.array([[1.0]])])
    assert not compose([f]).is_constant
