"""Embeddedness diagnostics: kernel distortions, realizing pairs and arrest monitors.

Kernel distortions are evaluated on the unit-speed shape ``phi = (psi - c)/sigma``
of a constant-speed curve.  For a node pair at parameter separation ``z`` the
squared chord is ``u = |phi(x) - phi(x+z)|^2`` and the squared chord of the unit
circle is ``v = 2 (1 - cos z)``; a distortion kernel ``g(l, r)`` defines
``K(u, v) = g(v, u/v)`` and ``Delta_K = sup K``.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

from . import spectral
from .errors import BadParameter, DiagnosticUnavailable, DiagonalPair, NotEmbedded
from .geometry import signed_curvature

REALIZING_RTOL = 1e-9
DUPLICATE_TOL = 1e-10
MAX_REPORTED_PAIRS = 256


@dataclass(frozen=True)
class DistortionKernel:
    """A distortion kernel ``g(l, r)`` with partials and its diagonal limits.

    ``q0(alpha)`` and ``q1(alpha)`` are the value and ``l``-slope at ``l = 0``
    of ``q(l, alpha) = g(l, 1 + alpha l)``.
    """

    name: str
    g: object
    g_l: object
    g_r: object
    q0: object
    q1: object

    def K(self, u, v):
        return self.g(v, u / v)

    def K_u(self, u, v):
        return self.g_r(v, u / v) / v

    def K_v(self, u, v):
        r = u / v
        return self.g_l(v, r) - self.g_r(v, r) * r / v


PSEUDO = DistortionKernel(
    name="pseudo",
    g=lambda l, r: 1.0 / r,
    g_l=lambda l, r: np.zeros_like(np.asarray(r * l, dtype=float)),
    g_r=lambda l, r: -1.0 / (r * r),
    q0=lambda a: np.ones_like(np.asarray(a, dtype=float)),
    q1=lambda a: -np.asarray(a, dtype=float),
)

MOBIUS = DistortionKernel(
    name="mobius",
    g=lambda l, r: (1.0 / r - 1.0) / l,
    g_l=lambda l, r: -(1.0 / r - 1.0) / (l * l),
    g_r=lambda l, r: -1.0 / (l * r * r),
    q0=lambda a: -np.asarray(a, dtype=float),
    q1=lambda a: np.asarray(a, dtype=float) ** 2,
)

KL = DistortionKernel(
    name="kl",
    g=lambda l, r: -np.log(r) / l,
    g_l=lambda l, r: np.log(r) / (l * l),
    g_r=lambda l, r: -1.0 / (l * r),
    q0=lambda a: -np.asarray(a, dtype=float),
    q1=lambda a: np.asarray(a, dtype=float) ** 2 / 2.0,
)

BUILTIN = {k.name: k for k in (PSEUDO, MOBIUS, KL)}


def distortion_kernel(name):
    try:
        return BUILTIN[name]
    except KeyError:
        raise BadParameter(f"unknown distortion kernel {name!r}; choose from {sorted(BUILTIN)}")


@dataclass(frozen=True)
class RealizingPair:
    i: int
    j: int
    x: float
    z: float
    r: float
    orientation: int


@dataclass(frozen=True)
class DistortionReport:
    kernel: str
    value: float
    offdiagonal: float
    diagonal: float
    pairs: tuple
    n_realizing: int
    min_separation: float
    M: int


@dataclass(frozen=True)
class PairResiduals:
    tangent_x: float
    tangent_y: float
    ratio: float
    ratio_ok: bool
    second_order: float


# -- helpers --------------------------------------------------------------------


def unit_shape(curve):
    """Unit-speed shape ``(psi - centroid) / sigma`` of a constant-speed curve."""
    return (curve.points - curve.centroid) / curve.sigma


def _check_distinct(phi):
    d = phi[:, None, :] - phi[None, :, :]
    dist = np.hypot(d[..., 0], d[..., 1])
    np.fill_diagonal(dist, np.inf)
    if dist.min() < DUPLICATE_TOL:
        i, j = np.unravel_index(np.argmin(dist), dist.shape)
        raise NotEmbedded(f"nodes {min(i, j)} and {max(i, j)} coincide")
    return d


def _index_separation(M):
    idx = np.arange(M)
    return (idx[None, :] - idx[:, None]) % M


def points_in_polygon(points, polygon):
    """Even-odd rule membership of ``points`` (N, 2) in the closed ``polygon`` (M, 2)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    a = np.asarray(polygon, dtype=float)
    b = np.roll(a, -1, axis=0)
    px, py = points[:, 0:1], points[:, 1:2]
    straddle = (a[None, :, 1] > py) != (b[None, :, 1] > py)
    dy = b[:, 1] - a[:, 1]
    safe = np.where(dy == 0.0, 1.0, dy)
    x_cross = a[:, 0] + (py - a[:, 1]) * (b[:, 0] - a[:, 0]) / safe
    hits = straddle & (px < x_cross)
    return (hits.sum(axis=1) % 2) == 1


def chord_orientation(curve, i, j):
    """-1 if the chord between nodes ``i`` and ``j`` runs inside the curve, +1 otherwise."""
    mid = 0.5 * (curve.points[i] + curve.points[j])
    return -1 if points_in_polygon(mid[None, :], curve.points)[0] else 1


def _signed_z(M, i, j):
    d = (j - i) % M
    if d > M // 2:
        d -= M
    return 2.0 * np.pi * d / M


# -- distortion -----------------------------------------------------------------


def _kernel_matrix(curve, kernel):
    M = curve.M
    phi = unit_shape(curve)
    d = _check_distinct(phi)
    u = d[..., 0] ** 2 + d[..., 1] ** 2
    sep = _index_separation(M)
    band = (sep >= 2) & (sep <= M - 2)
    v = 2.0 * (1.0 - np.cos(2.0 * np.pi * sep / M))
    K = np.full((M, M), -np.inf)
    with np.errstate(divide="ignore", invalid="ignore"):
        K[band] = kernel.K(u[band], v[band])
    return K, u, v


def k_distortion(curve, kernel=PSEUDO):
    """Grid supremum of ``K(u, v)`` merged with its diagonal limit.

    Off-diagonal pairs are node pairs at least two cells apart; the diagonal
    branch is ``sup_x q0((1 - kappa^2)/12)`` with ``kappa`` the curvature of
    the unit-speed shape.
    """
    if isinstance(kernel, str):
        kernel = distortion_kernel(kernel)
    M = curve.M
    K, u, v = _kernel_matrix(curve, kernel)
    off = float(K.max())
    kappa = signed_curvature(curve) * curve.sigma
    diag = float(np.max(kernel.q0((1.0 - kappa**2) / 12.0)))
    value = max(off, diag)

    tol = REALIZING_RTOL * max(abs(value), 1e-300)
    hit = np.argwhere(np.triu(K >= value - tol, k=1))
    pairs = []
    zs = []
    for i, j in hit:
        zs.append(abs(_signed_z(M, i, j)))
    for i, j in hit[:MAX_REPORTED_PAIRS]:
        pairs.append(RealizingPair(
            i=int(i), j=int(j), x=float(spectral.grid(M)[i]), z=_signed_z(M, i, j),
            r=float(u[i, j] / v[i, j]), orientation=chord_orientation(curve, i, j),
        ))
    return DistortionReport(
        kernel=kernel.name, value=value, offdiagonal=off, diagonal=diag,
        pairs=tuple(pairs), n_realizing=len(hit),
        min_separation=float(min(zs)) if zs else 0.0, M=M,
    )


def pseudo_distortion(curve):
    """Squared pseudo-distortion ``Delta^2 = sup v/u`` (1 for the circle)."""
    return k_distortion(curve, PSEUDO).value


def realizing_pair_residuals(curve, pair, kernel=PSEUDO, ratio_tol=1e-6):
    """Residuals of the first- and second-order conditions at a realizing pair.

    Returns the defects of ``<w, tau(x)> = <w, tau(y)> = -(K_v/K_u) sin z / sqrt(u)``
    with ``w`` the unit chord, the ratio ``r = u/v`` (and whether ``r <= 1``)
    and the positive part of ``f_xx + f_yy + sqrt((f_xx - f_yy)^2 + 4 f_xy^2)``
    from grid finite differences of ``f(x, y) = K``.
    """
    if isinstance(kernel, str):
        kernel = distortion_kernel(kernel)
    M = curve.M
    i, j = pair.i, pair.j
    sep = (j - i) % M
    if min(sep, M - sep) < 3:
        # the mixed difference stencil would reach the diagonal
        raise DiagonalPair(f"pair ({i}, {j}) is within the diagonal cutoff")
    phi = unit_shape(curve)
    tau = spectral.spectral_derivative(phi, 1)
    z = 2.0 * np.pi * sep / M
    chord = phi[j] - phi[i]
    u = float(chord @ chord)
    v = 2.0 * (1.0 - math.cos(z))
    w = chord / math.sqrt(u)
    target = -(kernel.K_v(u, v) / kernel.K_u(u, v)) * math.sin(z) / math.sqrt(u)
    res_x = abs(float(w @ tau[i]) - target)
    res_y = abs(float(w @ tau[j]) - target)
    r = u / v

    h = 2.0 * np.pi / M

    def f(a, b):
        a %= M
        b %= M
        c = phi[b] - phi[a]
        zz = 2.0 * np.pi * ((b - a) % M) / M
        return float(kernel.K(float(c @ c), 2.0 * (1.0 - math.cos(zz))))

    f0 = f(i, j)
    fxx = (f(i + 1, j) - 2 * f0 + f(i - 1, j)) / h**2
    fyy = (f(i, j + 1) - 2 * f0 + f(i, j - 1)) / h**2
    fxy = (f(i + 1, j + 1) - f(i + 1, j - 1) - f(i - 1, j + 1) + f(i - 1, j - 1)) / (4 * h**2)
    second = max(0.0, fxx + fyy + math.sqrt((fxx - fyy) ** 2 + 4 * fxy**2))
    return PairResiduals(res_x, res_y, r, r <= 1.0 + ratio_tol, second)


def shape_bending_mean(curve):
    """``mean |phi''|^2`` of the unit-speed shape (``mu_a`` for pure curve shortening)."""
    kappa = signed_curvature(curve) * curve.sigma
    return float(np.mean(kappa**2))


def realizing_separation_bound(curve, report, mu_a=None):
    """Check ``min |z| >= (1 - 1/Delta_K) / (2 mu_a)`` over realizing pairs.

    Returns ``(lhs, rhs, satisfied)``.  ``mu_a`` defaults to the mean squared
    curvature of the unit-speed shape.
    """
    if report.value <= 1.0 + 1e-9:
        raise DiagnosticUnavailable(
            f"distortion {report.value:.12g} is not above 1; separation bound is vacuous"
        )
    if mu_a is None:
        mu_a = shape_bending_mean(curve)
    lhs = report.min_separation
    rhs = (1.0 - 1.0 / report.value) / (2.0 * mu_a)
    grid_tol = 2.0 * np.pi / report.M
    return lhs, rhs, lhs >= rhs * (1.0 - grid_tol)


def monotonicity_factor(z):
    """``h(z) = 1 - z sin z / (2 (1 - cos z))``, non-negative and increasing on ``[0, pi]``."""
    z = np.asarray(z, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = 1.0 - z * np.sin(z) / (2.0 * (1.0 - np.cos(z)))
    return np.where(np.abs(z) < 1e-4, z**2 / 12.0, out)


# -- self intersections -------------------------------------------------------------


@dataclass(frozen=True)
class Crossing:
    segments: tuple
    point: tuple


def _cross(ax, ay, bx, by):
    return ax * by - ay * bx


def self_intersections(curve):
    """Crossings between non-adjacent segments of the closed polyline.

    Segment ``k`` joins nodes ``k`` and ``k+1``.  Touching and collinear
    overlap count as intersections; pairs that share a node do not.
    """
    P = np.asarray(getattr(curve, "points", curve), dtype=float)
    M = P.shape[0]
    A = P
    B = np.roll(P, -1, axis=0)
    D = B - A
    k, l = np.triu_indices(M, k=2)
    keep = ~((k == 0) & (l == M - 1))
    k, l = k[keep], l[keep]
    # coarse bounding-box rejection
    lo = np.minimum(A, B)
    hi = np.maximum(A, B)
    overlap = np.all(lo[k] <= hi[l], axis=1) & np.all(lo[l] <= hi[k], axis=1)
    k, l = k[overlap], l[overlap]
    if k.size == 0:
        return []
    d1 = _cross(*(D[k].T), *((A[l] - A[k]).T))
    d2 = _cross(*(D[k].T), *((B[l] - A[k]).T))
    d3 = _cross(*(D[l].T), *((A[k] - A[l]).T))
    d4 = _cross(*(D[l].T), *((B[k] - A[l]).T))
    proper = (d1 * d2 < 0) & (d3 * d4 < 0)
    touching = ((d1 == 0) | (d2 == 0) | (d3 == 0) | (d4 == 0)) & (d1 * d2 <= 0) & (d3 * d4 <= 0)
    hit = np.nonzero(proper | touching)[0]
    out = []
    for h in hit:
        a, b = int(k[h]), int(l[h])
        denom = _cross(*D[a], *D[b])
        if denom != 0.0:
            t = _cross(*(A[b] - A[a]), *D[b]) / denom
            pt = A[a] + t * D[a]
        else:
            pt = 0.5 * (A[b] + B[a])
        out.append(Crossing((a, b), (float(pt[0]), float(pt[1]))))
    return out


# -- arrested fronts -----------------------------------------------------------------


def arrest_bound(d, z, sigma, alpha, beta):
    """Lower bound ``2 beta [erf(sigma (d+z)/(2 sqrt2 alpha)) - erf(sigma d/(sqrt2 alpha))/2]``.

    ``d`` is the unit-shape chord and ``z`` the arc separation of a realizing pair.
    """
    if d < 0 or not z > 0 or not sigma > 0 or not alpha > 0:
        raise BadParameter("arrest_bound needs d >= 0 and positive z, sigma, alpha")
    s2 = math.sqrt(2.0)
    return 2.0 * beta * (
        float(erf(sigma * (d + z) / (2.0 * s2 * alpha))) - 0.5 * float(erf(sigma * d / (s2 * alpha)))
    )


def arrest_regime_check(c, beta):
    """Parameters allow an arrested front: ``c < 0`` and ``beta < |c| < 2 beta``."""
    return c < 0 and beta < abs(c) < 2.0 * beta


def min_gap_pair(curve, report):
    """Realizing pair with the smallest chord, as ``(pair, d)`` with ``d`` on the unit shape."""
    phi = unit_shape(curve)
    best = None
    for p in report.pairs:
        d = float(np.hypot(*(phi[p.j] - phi[p.i])))
        if best is None or d < best[1]:
            best = (p, d)
    return best

