"""Nonlocal normal forcing between sampled interfaces.

For interfaces ``psi_j`` in constant-speed coordinates (speed ``sigma_j``)
the force on interface ``i`` is

    F_i(x) = sigma_i * (c_i + sum_j sigma_j int g_ij(|psi_i(x) - psi_j(y)|^2 / 2) dy + F_ext_i(x))

with the integral over the full period, evaluated by the periodic rectangle
rule.  The bracket without the leading ``sigma_i`` is the *raw* force.
"""

import math

import numpy as np

from . import spectral
from .errors import BadParameter, ProximityViolation

PROXIMITY_FACTOR = 10.0
ROW_BLOCK = 32


def _points(curve):
    return np.asarray(getattr(curve, "points", curve), dtype=float)


def _half_sq_dist(p, q):
    dx = p[:, 0, None] - q[None, :, 0]
    dy = p[:, 1, None] - q[None, :, 1]
    return 0.5 * (dx * dx + dy * dy), (dx, dy)


def min_distance(p, q):
    """Smallest node-to-node distance between two sampled curves."""
    s, _ = _half_sq_dist(_points(p), _points(q))
    return math.sqrt(2.0 * s.min())


def check_proximity(curves, sigmas, kernels):
    """Raise ProximityViolation if a cross pair without H1 is too close.

    Kernels that are not regular are only admissible between interfaces at
    positive distance; "positive" is taken as more than ten grid spacings of
    the source interface.
    """
    m = len(curves)
    for i in range(m):
        for j in range(m):
            if i == j or "H1" in kernels[i][j].flags or kernels[i][j].is_zero:
                continue
            M = _points(curves[j]).shape[0]
            gap = min_distance(curves[i], curves[j])
            limit = PROXIMITY_FACTOR * 2.0 * math.pi * sigmas[j] / M
            if gap <= limit:
                raise ProximityViolation(
                    f"interfaces {i} and {j} are {gap:.3e} apart (limit {limit:.3e}) "
                    f"and kernel ({i},{j}) is not regular"
                )


def pair_integral(p, q, sigma_q, kernel):
    """``sigma_q * int g(|p(x) - q(y)|^2 / 2) dy`` at every node of ``p``."""
    p, q = _points(p), _points(q)
    if kernel.is_zero:
        return np.zeros(p.shape[0])
    s, _ = _half_sq_dist(p, q)
    return sigma_q * (2.0 * np.pi / q.shape[0]) * kernel.eval(s).sum(axis=1)


def pair_integral_derivative(p, q, sigma_q, kernel, p_dot=None):
    """x-derivative of :func:`pair_integral` by the chain rule.

    ``d/dx g(|p(x) - q(y)|^2 / 2) = g'(s) <p(x) - q(y), p'(x)>``.
    """
    p, q = _points(p), _points(q)
    if kernel.is_zero:
        return np.zeros(p.shape[0])
    if p_dot is None:
        p_dot = spectral.spectral_derivative(p, 1)
    s, (dx, dy) = _half_sq_dist(p, q)
    proj = dx * p_dot[:, None, 0] + dy * p_dot[:, None, 1]
    return sigma_q * (2.0 * np.pi / q.shape[0]) * (kernel.deriv(s) * proj).sum(axis=1)


def pair_integral_with_derivative(p, q, sigma_q, kernel, p_dot, block=ROW_BLOCK):
    """:func:`pair_integral` and its x-derivative from one pass over the pairs.

    Target nodes are processed in blocks of ``block`` rows so the pairwise
    temporaries stay small; each row is summed whole, so the result does not
    depend on ``block``.
    """
    p, q = _points(p), _points(q)
    n = p.shape[0]
    val, der = np.zeros(n), np.zeros(n)
    if kernel.is_zero:
        return val, der
    for lo in range(0, n, block):
        rows = slice(lo, lo + block)
        s, (dx, dy) = _half_sq_dist(p[rows], q)
        g, gd = kernel.eval_with_deriv(s)
        val[rows] = g.sum(axis=1)
        der[rows] = (gd * (dx * p_dot[rows, None, 0] + dy * p_dot[rows, None, 1])).sum(axis=1)
    w = sigma_q * (2.0 * np.pi / q.shape[0])
    return w * val, w * der


def _check_shapes(curves, sigmas, kernels):
    m = len(curves)
    if len(sigmas) != m or len(kernels) != m or any(len(row) != m for row in kernels):
        raise BadParameter("curves, sigmas and kernel matrix sizes disagree")
    sizes = {_points(c).shape[0] for c in curves}
    if len(sizes) != 1:
        raise BadParameter(f"all interfaces must share the grid size, got {sorted(sizes)}")


def raw_force(curves, sigmas, kernels, i):
    """Sum over sources of :func:`pair_integral` on interface ``i`` (no growth term)."""
    _check_shapes(curves, sigmas, kernels)
    total = np.zeros(_points(curves[i]).shape[0])
    for j in range(len(curves)):
        total += pair_integral(curves[i], curves[j], sigmas[j], kernels[i][j])
    return total


def force(curves, sigmas, kernels, c, i, fext=None):
    """Normal force ``F_i`` including the ``sigma_i`` prefactor and growth rate ``c[i]``."""
    bracket = c[i] + raw_force(curves, sigmas, kernels, i)
    if fext is not None and fext[i] is not None:
        bracket = bracket + fext[i]
    return sigmas[i] * bracket


def force_derivative(curves, sigmas, kernels, i, fext=None):
    """Spatial derivative of :func:`force` on interface ``i``."""
    _check_shapes(curves, sigmas, kernels)
    p = _points(curves[i])
    p_dot = spectral.spectral_derivative(p, 1)
    total = np.zeros(p.shape[0])
    for j in range(len(curves)):
        total += pair_integral_derivative(p, curves[j], sigmas[j], kernels[i][j], p_dot)
    if fext is not None and fext[i] is not None:
        total = total + spectral.spectral_derivative(fext[i], 1)
    return sigmas[i] * total


def force_with_derivative(curves, sigmas, kernels, c, i, fext=None):
    """``(force(...), force_derivative(...))`` sharing the pairwise distances."""
    _check_shapes(curves, sigmas, kernels)
    p = _points(curves[i])
    p_dot = spectral.spectral_derivative(p, 1)
    raw = np.zeros(p.shape[0])
    raw_dot = np.zeros(p.shape[0])
    for j in range(len(curves)):
        v, vd = pair_integral_with_derivative(p, curves[j], sigmas[j], kernels[i][j], p_dot)
        raw += v
        raw_dot += vd
    bracket = c[i] + raw
    if fext is not None and fext[i] is not None:
        bracket = bracket + fext[i]
        raw_dot = raw_dot + spectral.spectral_derivative(fext[i], 1)
    return sigmas[i] * bracket, sigmas[i] * raw_dot


def velbound_check(raw, N, lam, c0star):
    """Compare ``max|raw|`` with ``2 pi N lam c0*``; returns ``(bound, satisfied)``."""
    bound = 2.0 * math.pi * N * lam * c0star
    peak = float(np.max(np.abs(raw))) if np.size(raw) else 0.0
    return bound, peak <= bound * (1.0 + 1e-9)


def bessel_i0(x, tol=1e-16):
    """Modified Bessel function ``I0`` by its power series."""
    x = float(x)
    q = 0.25 * x * x
    term, total, k = 1.0, 1.0, 0
    while term > tol * total:
        k += 1
        term *= q / (k * k)
        total += term
    return total


def circle_force_oracle(m, sigma):
    """``m sqrt(lam) I0(lam) exp(-lam)``, ``lam = sigma^2 / m^2``.

    The period-averaged self force of the ``m``-times covered circle of
    length ``2 pi sigma`` under ``g(s) = exp(-s)``.
    """
    if m < 1 or not sigma > 0:
        raise BadParameter(f"need m >= 1 and sigma > 0, got {m}, {sigma}")
    lam = sigma * sigma / (m * m)
    return m * math.sqrt(lam) * bessel_i0(lam) * math.exp(-lam)
