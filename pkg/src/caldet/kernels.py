"""Backend selection for the hot transport loop.

The compiled extension is used when it was built; otherwise the numpy
implementation is used.  Set ``CALDET_BACKEND=python`` to force the fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
rk4_transport = _kernels_py.rk4_transport

if os.environ.get("CALDET_BACKEND", "").lower() != "python":
    try:
        from . import _kernels
    except ImportError:  # extension not built
        pass
    else:
        BACKEND = "compiled"
        rk4_transport = _kernels.rk4_transport

__all__ = ["BACKEND", "rk4_transport"]
