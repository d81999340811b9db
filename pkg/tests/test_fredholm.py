import numpy as np
import pytest

from caldet.boundary import (aps_projection, dirichlet_projection, neumann_projection,
                             twisted_projection)
from caldet.errors import InputError
from caldet.fredholm import (boundary_realization, collocation_realization,
                             companion_realization, index_check)
from caldet.operators import compose


@pytest.mark.parametrize("case,expected", [
    ("twisted_zero", (1, 1)),
    ("twisted_half", (0, 0)),
    ("aps_shift", (0, 0)),
    ("dirichlet", (0, 0)),
    ("neumann", (1, 1)),
    ("periodic", (1, 1)),
])
def test_index_realizations_agree(case, expected, dirac, laplacian, shifted):
    a = shifted.tangential(0.0)
    op, p = {
        "twisted_zero": (dirac, twisted_projection(0.0, 1)),
        "twisted_half": (dirac, twisted_projection(np.pi / 2, 1)),
        "aps_shift": (compose([shifted]), aps_projection(a, a)),
        "dirichlet": (laplacian, dirichlet_projection(2, 1)),
        "neumann": (laplacian, neumann_projection(2, 1)),
        "periodic": (laplacian, twisted_projection(0.0, 2)),
    }[case]
    rep = index_check(op, p)
    assert rep.agree
    for real in rep.realizations:
        assert (real.kernel, real.cokernel) == expected
        assert real.index == 0
    d = rep.to_dict()
    assert d["agree"] is True


@pytest.mark.parametrize("fn", [collocation_realization, companion_realization,
                                boundary_realization])
def test_kernel_gap(fn, dirac):
    # the periodic zero mode is resolved to roundoff and well separated
    sv = fn(dirac, twisted_projection(0.0, 1)).smallest_singular_values
    assert sv[0] < 1e-10
    if len(sv) > 1:
        assert sv[1] > 1e-3
    sv = fn(dirac, twisted_projection(np.pi / 2, 1)).smallest_singular_values
    assert sv[0] > 1e-3


def test_index_rejects_mismatched_condition(dirac):
    with pytest.raises(InputError):
        index_check(dirac, dirichlet_projection(2, 1))
