"""Fourier calculus for periodic fields on the uniform grid of [-pi, pi).

A periodic field is a plain numpy array whose first axis runs over the ``M``
grid nodes ``x_j = -pi + 2*pi*j/M``; trailing axes (e.g. the two components of
a planar curve) are carried along.  All operators act along axis 0.
"""

import numpy as np

from .errors import BadParameter

MIN_GRID = 16


def check_grid_size(M):
    """Raise unless ``M`` is a power of two no smaller than 16."""
    M = int(M)
    if M < MIN_GRID or M & (M - 1):
        raise BadParameter(f"grid size must be a power of two >= {MIN_GRID}, got {M}")
    return M


def grid(M):
    """Uniform nodes ``-pi + 2*pi*j/M`` for ``j = 0..M-1``."""
    return -np.pi + 2.0 * np.pi * np.arange(M) / M


def wavenumbers(M):
    """Non-negative wavenumbers of ``numpy.fft.rfft`` for a length-``M`` signal."""
    return np.arange(M // 2 + 1, dtype=float)


def _expand(k, f):
    return k.reshape((-1,) + (1,) * (f.ndim - 1))


def mean(f):
    return np.asarray(f, dtype=float).mean(axis=0)


def spectral_derivative(f, order=1):
    """Apply the Fourier multiplier ``(ik)**order`` along axis 0.

    Exact for trigonometric polynomials of degree below ``M/2``.  The Nyquist
    mode is dropped for odd orders so that real input stays real.
    """
    if order not in (1, 2, 3):
        raise BadParameter(f"derivative order must be 1, 2 or 3, got {order}")
    f = np.asarray(f, dtype=float)
    M = f.shape[0]
    fh = np.fft.rfft(f, axis=0)
    k = _expand(wavenumbers(M), f)
    fh = fh * (1j * k) ** order
    if order % 2:
        fh[M // 2] = 0.0
    return np.fft.irfft(fh, n=M, axis=0)


def periodic_primitive(f):
    """Mean-zero periodic antiderivative of ``f - mean(f)``."""
    f = np.asarray(f, dtype=float)
    M = f.shape[0]
    fh = np.fft.rfft(f, axis=0)
    k = wavenumbers(M)
    k[0] = 1.0
    fh = fh / (1j * _expand(k, f))
    fh[0] = 0.0
    fh[M // 2] = 0.0
    return np.fft.irfft(fh, n=M, axis=0)


def mean_zero_primitive(f):
    """Primitive with zero mean over the period.

    ``P_c f(x) = avg((z - pi) f(z)) + int_{-pi}^x f``, which on the grid reduces
    to the periodic primitive of the fluctuation plus ``mean(f) * x``.  The
    linear part integrates to zero over [-pi, pi]; its discrete node average is
    ``-pi*mean(f)/M`` because ``x`` itself is not periodic.
    """
    f = np.asarray(f, dtype=float)
    x = _expand(grid(f.shape[0]), f)
    return periodic_primitive(f) + mean(f) * x


def zero_dirichlet_primitive(f):
    """Primitive of ``f - mean(f)`` that vanishes at ``x = -pi`` (and ``pi``)."""
    g = periodic_primitive(f)
    return g - g[0]


def fourier_coefficients(f):
    """Coefficients ``c_k`` with ``f(x) = sum_k c_k exp(i k (x + pi))``, ``k`` from ``fftfreq``."""
    f = np.asarray(f, dtype=float)
    return np.fft.fft(f, axis=0) / f.shape[0]


def interpolate(f, xs):
    """Evaluate the trigonometric interpolant of ``f`` at arbitrary points ``xs``.

    The Nyquist mode is split evenly between ``+-M/2`` so the interpolant is
    real and reproduces the samples exactly.  Cost is ``O(M * len(xs))``.
    """
    f = np.asarray(f, dtype=float)
    M = f.shape[0]
    c = fourier_coefficients(f)
    k = np.fft.fftfreq(M, 1.0 / M)
    w = np.ones(M)
    w[M // 2] = 0.5
    xs = np.asarray(xs, dtype=float)
    phase = np.exp(1j * np.outer(xs + np.pi, k))
    out = (phase * w) @ c
    # the other half of the Nyquist term
    nyq = c[M // 2] * 0.5
    out = out + np.multiply.outer(np.exp(1j * (M // 2) * (xs + np.pi)), nyq)
    return out.real
