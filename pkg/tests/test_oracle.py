import math

import mpmath
import numpy as np
import pytest

from caldet.boundary import aps_projection, dirichlet_projection, neumann_projection, twisted_projection
from caldet.errors import IncompleteSpectrumError, InputError, NonInvertibleError, TailError
from caldet.operators import compose
from caldet.oracle import (CharacteristicFunction, SpectralZeta, eigenvalues, fit_tail,
                           relative_log_det_first_order, signed_zeta_prime, spectral_zeta_det,
                           zeta_det, zeta_values)

TWISTED_RATIO = 1.3660254037844388 - 0.36602540378443865j


def test_twisted_dirac_eigenvalues(dirac):
    theta = np.pi / 3
    spec = eigenvalues(dirac, twisted_projection(theta, 1), count=20)
    n = np.arange(-12, 12)
    exact = np.sort(theta + 2 * np.pi * n)
    exact = exact[np.abs(exact) < spec.window[1]]
    assert spec.count == exact.size == spec.winding
    assert np.max(np.abs(np.sort(spec.values) - exact)) < 1e-9


def test_dirichlet_laplacian_eigenvalues(laplacian):
    spec = eigenvalues(laplacian, dirichlet_projection(2, 1), count=30)
    n = np.arange(1, spec.count + 1)
    assert spec.count >= 30
    assert np.max(np.abs(np.sort(spec.values) / (n * np.pi) ** 2 - 1)) < 1e-10


def test_periodic_laplacian_has_double_eigenvalues(laplacian):
    spec = eigenvalues(laplacian, twisted_projection(0.0, 2), count=9)
    assert spec.has_zero_mode()
    nonzero = spec.multiplicities[np.abs(spec.values) > 1e-6]
    assert np.all(nonzero == 2)


def test_neumann_zero_mode(laplacian):
    with pytest.raises(NonInvertibleError):
        spectral_zeta_det(laplacian, neumann_projection(2, 1), count=40)


def test_window_grows_to_count(dirac):
    for count in (3, 17, 60):
        assert eigenvalues(dirac, twisted_projection(1.0, 1), count=count).count >= count


def test_fixed_window(dirac):
    spec = eigenvalues(dirac, twisted_projection(np.pi / 2, 1), window=20.0)
    # pi/2 + 2 pi n in (-20, 20): n = -3..2
    assert spec.count == 6


def test_missing_real_spectrum_is_reported(shifted):
    # d/du + 0.3 with s(0) = 0 is a Volterra problem: no eigenvalues at all
    a = shifted.tangential(0.0)
    with pytest.raises(IncompleteSpectrumError):
        eigenvalues(compose([shifted]), aps_projection(a, a), count=5)


def test_characteristic_function_real(dirac):
    cf = CharacteristicFunction(dirac, twisted_projection(0.5, 1))
    cf.calibrate([0.1, 3.0, -7.0])
    assert abs(cf(0.5)) < 1e-10 and abs(cf(2.0)) > 1e-3


def test_basel():
    vals = (np.arange(1, 401) * np.pi) ** 2
    rep = zeta_values(vals, [1.0, 2.0], r=2)
    assert abs(rep.zeta[0] - 1 / 6) < 1e-10
    assert abs(rep.zeta[1] - 1 / 90) < 1e-12


def test_single_eigenvalue():
    z = SpectralZeta([3.0], 1, tail=False)
    for s in (0.0, 0.5, -1.2, 2.0):
        assert abs(z(s) - 3.0 ** -s) < 1e-14
    d, _ = z.derivative_at_zero()
    assert abs(d + math.log(3.0)) < 1e-10


def test_shifted_squares_against_direct_sum():
    theta = 0.7
    n = np.arange(-150, 150)
    vals = (2 * np.pi * n + theta) ** 2
    rep = zeta_values(vals, [2.0], r=2)
    a = theta / (2 * np.pi)
    exact = (2 * mpmath.pi) ** -4 * (mpmath.zeta(4, a) + mpmath.zeta(4, 1 - a))
    direct = np.sum(np.exp(-2.0 * np.log(vals)))
    assert abs(rep.zeta[0] - float(exact)) < 1e-10
    assert abs(rep.zeta[0] - float(exact)) < abs(direct - float(exact))


@pytest.mark.parametrize("cond,expected", [
    (lambda: dirichlet_projection(2, 1), 2.0),
    (lambda: twisted_projection(np.pi / 2, 2), 2.0),
    (lambda: twisted_projection(np.pi, 2), 4.0),
])
def test_laplacian_determinants(laplacian, cond, expected):
    rep = spectral_zeta_det(laplacian, cond())
    assert abs(rep.det_zeta - expected) < 1e-6 * expected


def test_head_split_invariance(laplacian):
    spec = eigenvalues(laplacian, dirichlet_projection(2, 1), count=220)
    vals = spec.expanded()
    dets = [zeta_det(zeta_values(vals, [1.0], r=2, head_count=h)).det_zeta
            for h in (180, 200, 220)]
    assert max(dets) - min(dets) < 1e-8


def test_twisted_pair_zeta_zero_and_ratio(dirac, twisted_pair):
    s1 = eigenvalues(dirac, twisted_pair[0])
    s2 = eigenvalues(dirac, twisted_pair[1])
    z1, _ = signed_zeta_prime(s1.expanded(), 1, np.pi / 2)
    z2, _ = signed_zeta_prime(s2.expanded(), 1, np.pi / 2)
    assert abs(z1) < 1e-8 and abs(z2) < 1e-8
    ratio = np.exp(relative_log_det_first_order(s1, s2, np.pi / 2))
    assert abs(ratio / TWISTED_RATIO - 1) < 1e-8


def test_signed_zeta_cut_validation():
    with pytest.raises(InputError):
        signed_zeta_prime([1.0, -2.0], 1, 0.0)
    with pytest.raises(NonInvertibleError):
        signed_zeta_prime([0.0, 1.0], 1, 1.0)


def test_tail_fit_errors():
    with pytest.raises(TailError):
        fit_tail(np.arange(1.0, 6.0), 1)
    with pytest.raises(InputError):
        fit_tail(np.array([-1.0, 2.0]), 1)
    with pytest.raises(TailError):
        fit_tail(np.exp(np.arange(1.0, 60.0)), 1)
