"""Closed planar curves on a uniform periodic grid.

Curves are stored as ``(M, 2)`` arrays of samples at ``x_j = -pi + 2*pi*j/M``;
the closing point ``x = pi`` is never stored.  Geometric quantities are
computed with the Fourier calculus in :mod:`arrestflow.spectral`.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import spectral
from .errors import BadParameter, CoincidentPoints, DegenerateSpeed, OpenCurve

SPEED_FLOOR = 1e-10
CLOSURE_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class Curve:
    """A closed planar curve sampled at ``M`` uniform parameter nodes."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise BadParameter(f"curve points must have shape (M, 2), got {pts.shape}")
        spectral.check_grid_size(pts.shape[0])
        if not np.all(np.isfinite(pts)):
            raise BadParameter("curve coordinates must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def M(self):
        return self.points.shape[0]

    @property
    def x(self):
        return self.points[:, 0]

    @property
    def y(self):
        return self.points[:, 1]

    def velocity(self):
        return spectral.spectral_derivative(self.points, 1)

    def speed(self):
        return np.hypot(*self.velocity().T)

    @property
    def length(self):
        return 2.0 * np.pi * self.speed().mean()

    @property
    def sigma(self):
        """Constant speed ``length / 2pi`` of the constant-speed representation."""
        return self.length / (2.0 * np.pi)

    @property
    def centroid(self):
        return self.points.mean(axis=0)

    def signed_area(self):
        """Shoelace area; positive for counterclockwise traversal."""
        x, y = self.x, self.y
        return 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)

    def translated(self, shift):
        return Curve(self.points + np.asarray(shift, dtype=float))

    def rotated(self, angle, about=(0.0, 0.0)):
        c, s = math.cos(angle), math.sin(angle)
        R = np.array([[c, -s], [s, c]])
        about = np.asarray(about, dtype=float)
        return Curve((self.points - about) @ R.T + about)

    def reversed(self):
        """Same image traversed in the opposite direction, starting at the same node."""
        return Curve(np.roll(self.points[::-1], 1, axis=0))

    def shifted(self, n):
        """Cyclic relabelling of nodes."""
        return Curve(np.roll(self.points, -n, axis=0))


def _checked_speed(curve):
    speed = curve.speed()
    top = speed.max()
    if top <= 0.0 or speed.min() < SPEED_FLOOR * top:
        raise DegenerateSpeed(
            f"minimal speed {speed.min():.3e} below {SPEED_FLOOR:g} x max speed {top:.3e}"
        )
    return speed


def resample_constant_speed(curve, tol=1e-14, maxiter=60):
    """Reparametrize a curve so that ``|d psi/dx|`` is constant.

    Solves ``eta(xi_j) = x_j`` for the normalized arclength map
    ``eta(x) = x + P0(speed)/mean(speed)`` by Newton's method on the spectral
    interpolants, then samples the curve's trigonometric interpolant at the
    ``xi_j``.
    """
    speed = _checked_speed(curve)
    M = curve.M
    x = spectral.grid(M)
    mu = speed.mean()
    drift = spectral.zero_dirichlet_primitive(speed) / mu
    vel = curve.velocity()

    xi = x.copy()
    for _ in range(maxiter):
        resid = xi + spectral.interpolate(drift, xi) - x
        slope = np.hypot(*spectral.interpolate(vel, xi).T) / mu
        step = resid / slope
        xi = xi - step
        if np.max(np.abs(step)) < tol:
            break
    return Curve(spectral.interpolate(curve.points, xi))


def bending_energy(curve):
    """Total squared curvature and the derived length scale.

    Returns ``(kappa22, ell_kappa, N)`` with ``kappa22 = int kappa^2 ds``,
    ``ell_kappa = 1/kappa22`` and ``N = ceil(length / ell_kappa)``.
    """
    speed = _checked_speed(curve)
    d1 = curve.velocity()
    d2 = spectral.spectral_derivative(curve.points, 2)
    kappa = (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]) / speed**3
    kappa22 = 2.0 * np.pi * np.mean(kappa**2 * speed)
    ell_kappa = 1.0 / kappa22
    N = int(math.ceil(curve.length * kappa22 * (1.0 - 1e-12)))
    return kappa22, ell_kappa, N


def signed_curvature(curve):
    """Physical signed curvature, positive where a counterclockwise curve is convex."""
    speed = _checked_speed(curve)
    d1 = curve.velocity()
    d2 = spectral.spectral_derivative(curve.points, 2)
    return (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]) / speed**3


def arclength_positions(curve):
    """Arclength from node 0 to each node along the spectral interpolant."""
    speed = _checked_speed(curve)
    M = curve.M
    return spectral.zero_dirichlet_primitive(speed) + (spectral.grid(M) + np.pi) * speed.mean()


def _pair_ratio(curve):
    s = arclength_positions(curve)
    length = curve.length
    arc = np.abs(s[:, None] - s[None, :])
    D = np.minimum(arc, length - arc)
    diff = curve.points[:, None, :] - curve.points[None, :, :]
    chord = np.hypot(diff[..., 0], diff[..., 1])
    off = ~np.eye(curve.M, dtype=bool)
    if np.any(chord[off] < 1e-12):
        i, j = np.argwhere((chord < 1e-12) & off)[0]
        raise CoincidentPoints(f"nodes {i} and {j} coincide")
    ratio = np.zeros_like(chord)
    ratio[off] = D[off] / chord[off]
    return ratio


def gromov_distortion(curve, return_pair=False):
    """Discrete Gromov distortion ``max D(x, y) / |gamma(x) - gamma(y)|`` over node pairs."""
    ratio = _pair_ratio(curve)
    flat = int(np.argmax(ratio))
    value = float(ratio.flat[flat])
    if return_pair:
        return value, divmod(flat, curve.M)
    return value


class AngleLift(tuple):
    """``(theta, winding)`` with ``theta`` the full (non-periodic) tangent angle."""

    __slots__ = ()

    def __new__(cls, theta, winding):
        return super().__new__(cls, (theta, winding))

    @property
    def theta(self):
        return self[0]

    @property
    def winding(self):
        return self[1]

    @property
    def eta(self):
        return periodic_part(self[0], self[1])


def periodic_part(theta, winding):
    """Strip the linear winding term ``k (x + pi)`` from a tangent angle."""
    theta = np.asarray(theta, dtype=float)
    return theta - winding * (spectral.grid(theta.shape[0]) + np.pi)


def full_angle(eta, winding):
    eta = np.asarray(eta, dtype=float)
    return eta + winding * (spectral.grid(eta.shape[0]) + np.pi)


def tangent_angle_lift(curve):
    """Continuous tangent angle with ``tau = (-sin theta, cos theta)``.

    The angle at ``x = -pi`` lies in ``[-pi, pi)``; the winding number is the
    total turning divided by ``2 pi``.
    """
    vel = curve.velocity()
    _checked_speed(curve)
    raw = np.arctan2(-vel[:, 0], vel[:, 1])
    if raw[0] >= np.pi:
        raw[0] -= 2.0 * np.pi
    steps = np.diff(np.append(raw, raw[0]))
    steps = (steps + np.pi) % (2.0 * np.pi) - np.pi
    theta = raw[0] + np.concatenate(([0.0], np.cumsum(steps[:-1])))
    winding = int(round(steps.sum() / (2.0 * np.pi)))
    return AngleLift(theta, winding)


def tangent_from_angle(theta):
    return np.column_stack((-np.sin(theta), np.cos(theta)))


def normal_from_angle(theta):
    return np.column_stack((np.cos(theta), np.sin(theta)))


def closure_vector(theta):
    """Mean unit tangent; vanishes exactly when the tangent field closes up."""
    return tangent_from_angle(theta).mean(axis=0)


def reconstruct_curve(eta, winding, epsilon, centroid=(0.0, 0.0), tol=CLOSURE_TOL):
    """Rebuild ``psi = centroid + epsilon**-1/2 * P_c tau`` from a tangent angle.

    ``eta`` is the periodic part of the angle; the full angle is
    ``eta + winding * (x + pi)``.  The residual mean tangent (bounded by
    ``tol``) is dropped so the stored samples stay periodic.
    """
    theta = full_angle(eta, winding)
    tau = tangent_from_angle(theta)
    defect = float(np.hypot(*tau.mean(axis=0)))
    if defect > tol:
        raise OpenCurve(f"closure defect {defect:.3e} exceeds {tol:g}")
    if not epsilon > 0:
        raise BadParameter(f"epsilon must be positive, got {epsilon}")
    sigma = 1.0 / math.sqrt(epsilon)
    return Curve(np.asarray(centroid, dtype=float) + sigma * spectral.periodic_primitive(tau))


# -- built-in shapes ---------------------------------------------------------


def _orient(points, orientation):
    if orientation == "ccw":
        return points
    if orientation == "cw":
        return np.roll(points[::-1], 1, axis=0)
    raise BadParameter(f"orientation must be 'ccw' or 'cw', got {orientation!r}")


def circle(R=1.0, M=256, center=(0.0, 0.0), orientation="ccw"):
    if not R > 0:
        raise BadParameter(f"radius must be positive, got {R}")
    x = spectral.grid(spectral.check_grid_size(M))
    pts = np.column_stack((R * np.cos(x), R * np.sin(x)))
    return Curve(_orient(pts, orientation) + np.asarray(center, dtype=float))


def ellipse(a=2.0, b=1.0, M=256, center=(0.0, 0.0), orientation="ccw", phase=0.0):
    """Constant-speed ellipse; ``phase`` shifts the samples by that fraction of a grid cell."""
    if not (a > 0 and b > 0):
        raise BadParameter(f"semi-axes must be positive, got {a}, {b}")
    x = spectral.grid(spectral.check_grid_size(M))
    pts = np.column_stack((a * np.cos(x), b * np.sin(x)))
    curve = resample_constant_speed(Curve(_orient(pts, orientation)))
    if phase:
        curve = Curve(spectral.interpolate(curve.points, x + phase * 2.0 * np.pi / M))
    return curve.translated(center)


def peanut(scale=1.0, neck=0.6, M=256, center=(0.0, 0.0), orientation="ccw"):
    """Polar dumbbell ``r(s) = scale * (1 - neck * cos 2s)``, resampled to constant speed."""
    if not scale > 0 or not 0.0 < neck < 1.0:
        raise BadParameter(f"peanut needs scale > 0 and 0 < neck < 1, got {scale}, {neck}")
    x = spectral.grid(spectral.check_grid_size(M))
    r = scale * (1.0 - neck * np.cos(2.0 * x))
    pts = np.column_stack((r * np.cos(x), r * np.sin(x)))
    return resample_constant_speed(Curve(_orient(pts, orientation))).translated(center)


def _fourier_resample(samples, M):
    """Band-limit periodic ``samples`` (first axis) to ``M`` modes and evaluate on ``grid(M)``."""
    n = samples.shape[0]
    coeffs = np.fft.fft(samples, axis=0) / n
    modes = np.fft.fftfreq(M, d=1.0 / M).astype(int)
    return np.real(np.fft.ifft(coeffs[modes] * M, axis=0))


def horseshoe(outer=1.6, inner=0.4, gap=0.1, corner=0.06, M=256, center=(0.0, 0.0),
              orientation="ccw", dense=1 << 15):
    """Annulus with a straight slot of width ``gap`` cut through its right side.

    The outline is assembled from its curvature: the two circular arcs, the
    two straight slot walls and four quarter-ish turns at the corners.  The
    curvature is smoothed by a gaussian of width ``corner`` in arclength, so
    the corners are rounded on that scale and the tangent angle is entire.
    The slot walls face each other across the exterior, which makes the
    realizing chord of the distortion an exterior one.
    """
    if not (0.0 < gap / 2.0 < inner < outer) or not corner > 0:
        raise BadParameter(
            f"horseshoe needs 0 < gap/2 < inner < outer and corner > 0, "
            f"got outer={outer}, inner={inner}, gap={gap}, corner={corner}"
        )
    M = spectral.check_grid_size(M)
    half = gap / 2.0
    phi_out, phi_in = math.asin(half / outer), math.asin(half / inner)
    wall = math.sqrt(outer**2 - half**2) - math.sqrt(inner**2 - half**2)
    # (length, curvature) for arcs, (0, turn) for corners; ccw from the back of the outer arc
    pieces = [
        (outer * (math.pi - phi_out), 1.0 / outer),
        (0.0, math.pi / 2 + phi_out),
        (wall, 0.0),
        (0.0, math.pi / 2 - phi_in),
        (inner * (2.0 * math.pi - 2.0 * phi_in), -1.0 / inner),
        (0.0, math.pi / 2 - phi_in),
        (wall, 0.0),
        (0.0, math.pi / 2 + phi_out),
        (outer * (math.pi - phi_out), 1.0 / outer),
    ]
    length = sum(p[0] for p in pieces)
    ds = length / dense
    s = np.arange(dense) * ds
    kappa = np.zeros(dense)
    pos = 0.0
    for piece_length, value in pieces:
        if piece_length == 0.0:
            kappa[int(round(pos / ds)) % dense] += value / ds
        else:
            kappa[(s >= pos) & (s < pos + piece_length)] += value
            pos += piece_length
    k = 2.0 * np.pi * np.fft.rfftfreq(dense, d=ds)
    kappa = np.fft.irfft(np.fft.rfft(kappa) * np.exp(-0.5 * (k * corner) ** 2), n=dense)

    # tangent angle by spectral integration; total turning is exactly 2 pi
    x = spectral.grid(dense)
    theta = 1.5 * np.pi + (x + np.pi) + spectral.zero_dirichlet_primitive(kappa * length / (2 * np.pi))
    tau = np.column_stack((np.cos(theta), np.sin(theta)))
    tau -= tau.mean(axis=0)  # remove the small closure defect left by the smoothing
    pts = (length / (2.0 * np.pi)) * spectral.periodic_primitive(tau)
    pts = _fourier_resample(pts - pts[0] + np.array([-outer, 0.0]), M)
    curve = resample_constant_speed(Curve(_orient(pts, orientation)))
    return curve.translated(center)


def covered_circle(m, sigma, M=256):
    """The ``m``-times traversed circle of length ``2 pi sigma`` (radius ``sigma/m``)."""
    x = spectral.grid(spectral.check_grid_size(M))
    return Curve((sigma / m) * np.column_stack((np.cos(m * x), np.sin(m * x))))


# -- snapshot files ----------------------------------------------------------


def write_curve_csv(path, curve):
    """Write ``x,y`` rows with 17 significant digits and LF line endings."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("x,y\n")
        for px, py in curve.points:
            fh.write(f"{px:.17g},{py:.17g}\n")


def read_curve_csv(path):
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["x", "y"]:
            raise BadParameter(f"{path}: expected header 'x,y', got {header}")
        rows = [(float(a), float(b)) for a, b in reader]
    return Curve(np.array(rows))
