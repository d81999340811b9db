# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled RK4 transport for linear systems ``Y' = (M0(u) + lam*F) Y``."""
import numpy as np
from libc.math cimport fabs, ldexp

cdef long RESCALE_BITS = 512
cdef double RESCALE = ldexp(1.0, RESCALE_BITS)
cdef double INV_RESCALE = ldexp(1.0, -RESCALE_BITS)


cdef inline void _stage(double complex[:, :, ::1] m0, Py_ssize_t idx,
                        double complex[:, ::1] fb, double complex lam,
                        double complex[:, ::1] y, double complex[:, ::1] out,
                        Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i, j, k
    cdef double complex acc
    for i in range(n):
        for j in range(n):
            acc = 0
            for k in range(n):
                acc = acc + (m0[idx, i, k] + lam * fb[i, k]) * y[k, j]
            out[i, j] = acc


def rk4_transport(double complex[:, :, ::1] m0, double complex[:, ::1] feedback,
                  double complex lam, double h, bint store=True):
    """Propagate the identity with classical RK4.

    ``m0`` holds coefficient samples at half-step spacing (``2*steps + 1``
    entries), ordered in the direction of integration; ``h`` carries the sign.
    With ``store`` the node values are returned.  Otherwise the result is
    ``(y, e)`` with the endpoint value equal to ``y * 2**e``; the state is
    rescaled by powers of two whenever it grows past ``2**RESCALE_BITS``.
    """
    cdef Py_ssize_t nhalf = m0.shape[0]
    cdef Py_ssize_t n = m0.shape[1]
    cdef Py_ssize_t steps = (nhalf - 1) // 2
    cdef Py_ssize_t s, i, j
    cdef double hh = 0.5 * h
    cdef double h6 = h / 6.0
    cdef long expo = 0
    cdef double big = 0.0, mag

    y_arr = np.eye(n, dtype=np.complex128)
    cdef double complex[:, ::1] y = y_arr
    cdef double complex[:, ::1] tmp = np.empty((n, n), dtype=np.complex128)
    cdef double complex[:, ::1] k1 = np.empty((n, n), dtype=np.complex128)
    cdef double complex[:, ::1] k2 = np.empty((n, n), dtype=np.complex128)
    cdef double complex[:, ::1] k3 = np.empty((n, n), dtype=np.complex128)
    cdef double complex[:, ::1] k4 = np.empty((n, n), dtype=np.complex128)
    if store:
        hist_arr = np.empty((steps + 1, n, n), dtype=np.complex128)
    else:
        hist_arr = np.empty((1, n, n), dtype=np.complex128)
    cdef double complex[:, :, ::1] hist = hist_arr
    if store:
        hist[0, :, :] = y

    with nogil:
        for s in range(steps):
            _stage(m0, 2 * s, feedback, lam, y, k1, n)
            for i in range(n):
                for j in range(n):
                    tmp[i, j] = y[i, j] + hh * k1[i, j]
            _stage(m0, 2 * s + 1, feedback, lam, tmp, k2, n)
            for i in range(n):
                for j in range(n):
                    tmp[i, j] = y[i, j] + hh * k2[i, j]
            _stage(m0, 2 * s + 1, feedback, lam, tmp, k3, n)
            for i in range(n):
                for j in range(n):
                    tmp[i, j] = y[i, j] + h * k3[i, j]
            _stage(m0, 2 * s + 2, feedback, lam, tmp, k4, n)
            for i in range(n):
                for j in range(n):
                    y[i, j] = y[i, j] + h6 * (k1[i, j] + 2.0 * k2[i, j]
                                              + 2.0 * k3[i, j] + k4[i, j])
            if store:
                for i in range(n):
                    for j in range(n):
                        hist[s + 1, i, j] = y[i, j]
            else:
                big = 0.0
                for i in range(n):
                    for j in range(n):
                        mag = fabs(y[i, j].real) + fabs(y[i, j].imag)
                        if mag > big:
                            big = mag
                if big > RESCALE:
                    for i in range(n):
                        for j in range(n):
                            y[i, j] = y[i, j] * INV_RESCALE
                    expo += RESCALE_BITS
    if store:
        return hist_arr
    return y_arr, expo
