"""Canonical and zeta-regularized determinants of one-dimensional Dirac-type
elliptic boundary value problems.

Submodules
----------
linalg_ode  fundamental solutions and projections
operators   Dirac factors, compositions and the companion system
boundary    boundary conditions as projections on the trace space
calderon    Calderon spaces, boundary Fredholm matrices, Poisson and Green solves
reldet      canonical determinants, log curves, regularized limits, contour route
oracle      eigenvalue enumeration and spectral zeta functions
quillen     Dirac Laplacians, canonical and Quillen metrics, curvature
fredholm    kernel, cokernel and index in three realizations
scenario    scenario files
report      deterministic JSON and CSV output
cli         command-line front end
"""
from .errors import CaldetError, InputError, NumericError
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "CaldetError", "InputError", "NumericError", "__version__"]
