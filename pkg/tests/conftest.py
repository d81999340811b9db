import numpy as np
import pytest

from caldet.boundary import (anti_aps_projection, aps_projection, dirichlet_projection,
                             twisted_projection)
from caldet.operators import DiracFactor, compose, laplace_dirichlet_pair, twisted_dirac


def random_unitary(rng, n):
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def dirac():
    return compose([twisted_dirac(0.0)])


@pytest.fixture(scope="session")
def laplacian():
    return compose(laplace_dirichlet_pair())


@pytest.fixture(scope="session")
def twisted_pair():
    return twisted_projection(np.pi / 2, 1), twisted_projection(np.pi / 3, 1)


@pytest.fixture(scope="session")
def dirichlet_twisted_pair():
    return dirichlet_projection(2, 1), twisted_projection(np.pi, 2)


@pytest.fixture(scope="session")
def shifted():
    return DiracFactor.constant(np.eye(1), 0.3 * np.eye(1), label="d_du+0.3")


@pytest.fixture(scope="session")
def aps_pair(shifted):
    a = shifted.tangential(0.0)
    return aps_projection(a, a), anti_aps_projection(a, a)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
