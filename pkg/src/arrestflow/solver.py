"""Exponential time integrator for interfaces in tangent-angle form.

Each interface is carried as ``theta = eta + k (x + pi)`` (``eta`` periodic,
``k`` the winding number), the inverse squared speed ``eps = sigma**-2`` and
its centroid.  One step

1. rebuilds every curve, evaluates the forces ``F`` and ``F'`` once,
2. forms ``a = theta'^2 - F theta'`` and ``G = P0(a) theta' - F'`` at ``t_n``
   and, by linear extrapolation from the previous step, at ``t_{n+1}``,
3. advances ``sigma^2`` exactly under a linear-in-time ``mean(a)``,
4. advances each Fourier mode of ``eta`` by the exponential integrator over
   the rescaled time ``dw = int eps dt``,
5. moves the centroid with the trapezoid rule.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import forcing, spectral
from .errors import BadParameter, NonFinite, SpeedCollapse
from .geometry import Curve, tangent_angle_lift, tangent_from_angle, normal_from_angle

TAYLOR_CUTOFF = 1e-2
TAYLOR_DEGREE = 8
DEFAULT_SAFETY = 0.5
ZENO_FRACTION = 1e-6
CLOSURE_MONITOR = 1e-5


# -- scalar building blocks ----------------------------------------------------


def _taylor_phi(j, x):
    out = np.zeros_like(x)
    for k in range(TAYLOR_DEGREE, -1, -1):
        out = out * x + 1.0 / math.factorial(k + j)
    return out


def phi_function(j, x):
    """``E0 = exp``, ``x E_{j+1}(x) = E_j(x) - E_j(0)`` for ``j`` in 0, 1, 2.

    Small arguments use a degree-8 Taylor series to avoid cancellation.
    """
    if j not in (0, 1, 2):
        raise BadParameter(f"phi-function index must be 0, 1 or 2, got {j}")
    scalar = np.ndim(x) == 0
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore", under="ignore"):
        if j == 0:
            out = np.exp(x)
        else:
            small = np.abs(x) < TAYLOR_CUTOFF
            xs = np.where(small, 1.0, x)
            em1 = np.expm1(xs)
            direct = em1 / xs if j == 1 else (em1 - xs) / (xs * xs)
            out = np.where(small, _taylor_phi(j, x), direct)
    return float(out) if scalar else out


def extrapolate(v_now, v_prev, dt_prev, s):
    """Linear extrapolant ``v_now (1 + s/dt_prev) - (s/dt_prev) v_prev``.

    Without history (``v_prev`` or ``dt_prev`` is None) the value is held
    constant.
    """
    if v_prev is None or dt_prev is None:
        return v_now
    r = s / dt_prev
    return v_now * (1.0 + r) - r * v_prev


def max_timestep(sigma, mu_a, dmu_a=0.0):
    """Largest step keeping the updated speed real: ``sigma^2 / (2 (|mu| + sqrt(|mu| + |dmu| sigma^2 / 2)))``."""
    if not sigma > 0:
        raise BadParameter(f"sigma must be positive, got {sigma}")
    denom = abs(mu_a) + math.sqrt(abs(mu_a) + abs(dmu_a) * sigma * sigma / 2.0)
    if denom == 0.0:
        return math.inf
    return 0.5 * sigma * sigma / denom


def update_speed(sigma_n, mu_a_n, mu_a_prev, dt_n, dt_prev, interface=None):
    """Exact update of ``sigma sigma' = -mean(a)`` with ``mean(a)`` linear in time."""
    bracket = 2.0 * mu_a_n
    if mu_a_prev is not None and dt_prev is not None:
        bracket += (dt_n / dt_prev) * (mu_a_n - mu_a_prev)
    radicand = sigma_n * sigma_n - dt_n * bracket
    if not radicand > 0:
        raise SpeedCollapse(
            f"speed update radicand {radicand:.3e} <= 0 (sigma={sigma_n:.3e})", interface
        )
    return math.sqrt(radicand)


def exponential_update(eta_hat, g0_hat, g1_hat, dw):
    """Advance Fourier modes of the periodic angle over rescaled time ``dw``.

    ``eta_hat <- E0 eta_hat + dw (E1 G(t_n) + E2 (G(t_{n+1}) - G(t_n)))`` with
    each ``E_j`` evaluated at ``-l^2 dw`` for wavenumber ``l``.
    """
    M_half = eta_hat.shape[0]
    ell = np.arange(M_half, dtype=float)
    x = -ell * ell * dw
    return (
        phi_function(0, x) * eta_hat
        + dw * (phi_function(1, x) * g0_hat + phi_function(2, x) * (g1_hat - g0_hat))
    )


# -- state ----------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class History:
    """Fields from the previous step, used for the linear extrapolants."""

    a: np.ndarray
    theta_dot: np.ndarray
    F: np.ndarray
    F_dot: np.ndarray
    mu_a: float
    dt: float


@dataclass(frozen=True, eq=False)
class InterfaceState:
    eta: np.ndarray
    winding: int
    epsilon: float
    centroid: np.ndarray
    history: History = None

    @property
    def M(self):
        return self.eta.shape[0]

    @property
    def sigma(self):
        return 1.0 / math.sqrt(self.epsilon)

    @property
    def length(self):
        return 2.0 * math.pi * self.sigma

    def theta(self):
        return self.eta + self.winding * (spectral.grid(self.M) + np.pi)

    def theta_dot(self):
        return spectral.spectral_derivative(self.eta, 1) + self.winding

    def tangent(self):
        return tangent_from_angle(self.theta())

    def closure_defect(self):
        """Magnitude of the mean unit tangent (zero exactly for a closed curve)."""
        return float(np.hypot(*self.tangent().mean(axis=0)))

    def curve_points(self):
        """``centroid + sigma * P_c tau`` with the residual mean tangent dropped."""
        return self.centroid + self.sigma * spectral.periodic_primitive(self.tangent())

    def curve(self):
        return Curve(self.curve_points())


@dataclass(frozen=True, eq=False)
class TangentAngleState:
    interfaces: tuple
    t: float = 0.0
    steps: int = 0

    @property
    def m(self):
        return len(self.interfaces)

    def curves(self):
        return [s.curve_points() for s in self.interfaces]


def closure_defect(state, i):
    return state.interfaces[i].closure_defect()


def interface_from_curve(curve):
    """Initial state of one interface from a constant-speed curve."""
    lift = tangent_angle_lift(curve)
    sigma = curve.sigma
    return InterfaceState(
        eta=lift.eta, winding=lift.winding, epsilon=1.0 / sigma**2,
        centroid=np.asarray(curve.centroid, dtype=float),
    )


def initial_state(curves):
    return TangentAngleState(interfaces=tuple(interface_from_curve(c) for c in curves))


@dataclass(frozen=True, eq=False)
class System:
    """Physical parameters: kernel matrix, growth rates and external forcings."""

    kernels: tuple
    c: tuple
    fext: tuple = None
    safety: float = DEFAULT_SAFETY

    @property
    def m(self):
        return len(self.c)


@dataclass(frozen=True)
class InterfaceRecord:
    length: float
    epsilon: float
    mu_a: float
    max_F: float
    closure_defect: float
    min_pair_dist: float


@dataclass(frozen=True)
class StepRecord:
    t: float
    dt: float
    dw: tuple
    interfaces: tuple = field(default_factory=tuple)


# -- forces -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Evaluation:
    """Forces and coefficients of every interface at one instant."""

    curves: list
    theta_dot: list
    F: list
    F_dot: list
    a: list
    mu_a: list


def evaluate(state, system):
    curves = state.curves()
    sigmas = [s.sigma for s in state.interfaces]
    out = Evaluation(curves, [], [], [], [], [])
    for i, s in enumerate(state.interfaces):
        F, Fd = forcing.force_with_derivative(curves, sigmas, system.kernels, system.c, i,
                                              system.fext)
        td = s.theta_dot()
        a = td * td - F * td
        out.theta_dot.append(td)
        out.F.append(F)
        out.F_dot.append(Fd)
        out.a.append(a)
        out.mu_a.append(float(a.mean()))
    return out


def min_pair_distances(curves):
    """For each interface, the smallest node distance to any other interface."""
    m = len(curves)
    out = [math.inf] * m
    for i in range(m):
        for j in range(i + 1, m):
            d = forcing.min_distance(curves[i], curves[j])
            out[i] = min(out[i], d)
            out[j] = min(out[j], d)
    return out


def _restrictions(state, ev):
    out = []
    for s, mu in zip(state.interfaces, ev.mu_a):
        h = s.history
        dmu = 0.0 if h is None else (mu - h.mu_a) / h.dt
        out.append(max_timestep(s.sigma, mu, dmu))
    return out


def allowed_timestep(state, ev, safety=DEFAULT_SAFETY):
    """``safety`` times the smallest per-interface speed restriction."""
    return safety * min(_restrictions(state, ev), default=math.inf)


# -- the step -------------------------------------------------------------------


def _check_finite(i, *arrays):
    for arr in arrays:
        if not np.all(np.isfinite(arr)):
            raise NonFinite(f"non-finite values in interface {i}", i)


def step(state, system, dt, evaluation=None):
    """Advance all interfaces by ``dt``; returns ``(new_state, StepRecord)``.

    ``evaluation`` may pass forces already computed for ``state``.  End-of-step
    fields are linear extrapolations of the stored history, so forces are
    evaluated once per step; without history they are held constant and the
    first step is only first order.
    """
    if not dt > 0:
        raise BadParameter(f"dt must be positive, got {dt}")
    ev = evaluation if evaluation is not None else evaluate(state, system)
    min_dist = min_pair_distances(ev.curves)
    new_interfaces = []
    dws = []
    records = []
    for i, s in enumerate(state.interfaces):
        h = s.history
        td, F, Fd, a, mu = ev.theta_dot[i], ev.F[i], ev.F_dot[i], ev.a[i], ev.mu_a[i]
        _check_finite(i, td, F, Fd)
        prev = (lambda name: None) if h is None else (lambda name: getattr(h, name))
        dt_prev = None if h is None else h.dt

        a1 = extrapolate(a, prev("a"), dt_prev, dt)
        td1 = extrapolate(td, prev("theta_dot"), dt_prev, dt)
        F1 = extrapolate(F, prev("F"), dt_prev, dt)
        Fd1 = extrapolate(Fd, prev("F_dot"), dt_prev, dt)
        P0a = spectral.zero_dirichlet_primitive(a)
        P0a1 = spectral.zero_dirichlet_primitive(a1)
        G0 = P0a * td - Fd
        G1 = P0a1 * td1 - Fd1

        sigma1 = update_speed(s.sigma, mu, prev("mu_a"), dt, dt_prev, interface=i)
        eps1 = 1.0 / (sigma1 * sigma1)
        dw = dt * 0.5 * (s.epsilon + eps1)

        eta_hat = np.fft.rfft(s.eta)
        eta_hat = exponential_update(eta_hat, np.fft.rfft(G0), np.fft.rfft(G1), dw)
        eta1 = np.fft.irfft(eta_hat, n=s.M)
        _check_finite(i, eta1)

        theta0 = s.theta()
        theta1 = eta1 + s.winding * (spectral.grid(s.M) + np.pi)
        v0 = P0a[:, None] * tangent_from_angle(theta0) + F[:, None] * normal_from_angle(theta0)
        v1 = P0a1[:, None] * tangent_from_angle(theta1) + F1[:, None] * normal_from_angle(theta1)
        centroid1 = s.centroid + 0.5 * dt * (
            math.sqrt(eps1) * v1.mean(axis=0) + math.sqrt(s.epsilon) * v0.mean(axis=0)
        )
        _check_finite(i, centroid1)

        new = InterfaceState(
            eta=eta1, winding=s.winding, epsilon=eps1, centroid=centroid1,
            history=History(a=a, theta_dot=td, F=F, F_dot=Fd, mu_a=mu, dt=dt),
        )
        new_interfaces.append(new)
        dws.append(dw)
        records.append(InterfaceRecord(
            length=new.length, epsilon=eps1, mu_a=mu, max_F=float(np.max(np.abs(F))),
            closure_defect=new.closure_defect(), min_pair_dist=min_dist[i],
        ))
    new_state = TangentAngleState(tuple(new_interfaces), state.t + dt, state.steps + 1)
    return new_state, StepRecord(t=new_state.t, dt=dt, dw=tuple(dws), interfaces=tuple(records))


# -- resolution monitor ---------------------------------------------------------


def resolution_loss(s, tail_fraction=1e-6):
    """True when the angle field is no longer resolved on the grid.

    Flags curvature of more than an eighth of a turn per grid cell, or more
    than ``tail_fraction`` of the angle-gradient energy in the top third of
    the spectrum.
    """
    M = s.M
    td = s.theta_dot()
    if np.max(np.abs(td)) * 2.0 * np.pi / M > np.pi / 4:
        return True
    spec = np.abs(np.fft.rfft(td)) ** 2
    total = spec.sum()
    return spec[(2 * M) // 6:].sum() > tail_fraction * total


# -- driver -----------------------------------------------------------------------


@dataclass
class RunEvent:
    t: float
    type: str
    payload: dict = field(default_factory=dict)


def run(state, system, dt, t_end, sample_times=(), observer=None, max_steps=None):
    """Step from ``state.t`` to ``t_end`` with steps of at most ``dt``.

    Steps are shortened to honour the speed restriction (``system.safety``
    times :func:`max_timestep`) and to land exactly on every time in
    ``sample_times``.  ``observer(state, evaluation)`` is called at the start
    and at every sample time; if it returns a truthy value the run stops.
    Returns ``(final_state, records, event)`` where ``event`` is a
    :class:`RunEvent` of type ``Completed``, ``SpeedCollapse``, ``NonFinite``,
    ``CurvatureBlowup`` (angle field under-resolved), ``ClosureLoss`` (mean
    tangent above ``CLOSURE_MONITOR``) or ``Stopped``.
    """
    if not dt > 0 or not t_end > state.t:
        raise BadParameter(f"need dt > 0 and t_end > t, got dt={dt}, t_end={t_end}")
    samples = sorted(t for t in sample_times if state.t < t <= t_end)
    tol = 1e-12 * max(1.0, t_end)
    records = []
    ev = evaluate(state, system)
    if observer is not None and observer(state, ev):
        return state, records, RunEvent(state.t, "Stopped")
    k = 0
    while state.t < t_end - tol:
        if max_steps is not None and len(records) >= max_steps:
            return state, records, RunEvent(state.t, "Stopped", {"reason": "max_steps"})
        try:
            limit = allowed_timestep(state, ev, system.safety)
            h = min(dt, limit)
            while k < len(samples) and samples[k] <= state.t + tol:
                k += 1
            target = samples[k] if k < len(samples) else t_end
            if state.t + h >= target - tol:
                h = target - state.t
            if h < ZENO_FRACTION * dt and target - state.t > ZENO_FRACTION * dt:
                worst = int(np.argmin(_restrictions(state, ev)))
                raise SpeedCollapse(
                    f"allowed step {h:.3e} collapsed below {ZENO_FRACTION:g} dt", worst
                )
            state, rec = step(state, system, h, ev)
            records.append(rec)
            for i, s in enumerate(state.interfaces):
                if resolution_loss(s):
                    return state, records, RunEvent(state.t, "CurvatureBlowup", {"interface": i})
                defect = rec.interfaces[i].closure_defect
                if defect > CLOSURE_MONITOR:
                    return state, records, RunEvent(
                        state.t, "ClosureLoss", {"interface": i, "closure_defect": defect}
                    )
            ev = evaluate(state, system)
        except SpeedCollapse as exc:
            return state, records, RunEvent(
                state.t, "SpeedCollapse", {"interface": exc.interface, "message": str(exc)}
            )
        except NonFinite as exc:
            return state, records, RunEvent(
                state.t, "NonFinite", {"interface": exc.interface, "message": str(exc)}
            )
        if k < len(samples) and abs(state.t - samples[k]) <= tol:
            state = replace(state, t=samples[k])
            if observer is not None and observer(state, ev):
                return state, records, RunEvent(state.t, "Stopped")
    return state, records, RunEvent(state.t, "Completed")
