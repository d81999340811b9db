"""Pure-numpy reference implementation of the transport kernel."""
import numpy as np

RESCALE_BITS = 512


def rk4_transport(m0, feedback, lam, h, store=True):
    """Same contract as the compiled kernel (see ``caldet._kernels``)."""
    m0 = np.asarray(m0, dtype=np.complex128)
    coeff = m0 + lam * np.asarray(feedback, dtype=np.complex128)
    steps = (coeff.shape[0] - 1) // 2
    n = coeff.shape[1]
    y = np.eye(n, dtype=np.complex128)
    hist = np.empty((steps + 1, n, n), dtype=np.complex128) if store else None
    if store:
        hist[0] = y
    half = 0.5 * h
    expo = 0
    for s in range(steps):
        ma, mb, mc = coeff[2 * s], coeff[2 * s + 1], coeff[2 * s + 2]
        k1 = ma @ y
        k2 = mb @ (y + half * k1)
        k3 = mb @ (y + half * k2)
        k4 = mc @ (y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if store:
            hist[s + 1] = y
        elif np.max(np.abs(y.real) + np.abs(y.imag)) > 2.0 ** RESCALE_BITS:
            y = np.ldexp(y.real, -RESCALE_BITS) + 1j * np.ldexp(y.imag, -RESCALE_BITS)
            expo += RESCALE_BITS
    return hist if store else (y, expo)
