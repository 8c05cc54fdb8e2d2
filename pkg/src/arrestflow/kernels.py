"""Interaction kernels ``g(s)`` of the half squared distance ``s = |p - q|^2 / 2``.

A kernel carries its value, first and second derivative, the hypothesis
flags it satisfies and the envelope constants that certify them:

* ``H0`` integrable envelope, ``c0* = int_0^inf G*(u^2) du < inf`` with
  ``G*(s) = sup_{t >= s} |g(t)|``;
* ``H1`` regular, ``sup s|g'| <= c1*`` and ``sup s^2|g''| <= c1*``;
* ``H2`` singular, ``c2* = int_0^inf sup_{t >= u^2} t|g'(t)| du < inf``;
* ``H3`` asymptotically finite, both envelopes bounded away from ``s = 0``.

Constants of tabulated kernels are computed numerically from a scan of a
logarithmic grid of ``s``.
"""

import csv
import json
import math
import os
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import BadParameter, NotIntegrable, ParseError

S_MIN = 1e-14
SCAN_LO = 1e-12
SCAN_HI = 1e4
SCAN_POINTS = 10_000
FLAGS = ("H0", "H1", "H2", "H3")


@dataclass(frozen=True, eq=False)
class KernelSpec:
    """Immutable kernel description.

    ``g``, ``gdot`` and ``gddot`` are vectorized callables of ``s``; values
    below ``S_MIN`` are clamped to ``S_MIN`` on evaluation.
    """

    family: str
    g: object
    gdot: object
    gddot: object = None
    params: dict = field(default_factory=dict)
    flags: frozenset = frozenset()
    c0star: float = math.inf
    c1star: float = math.inf
    c2star: float = math.inf
    s_max: float = SCAN_HI
    cutoff: float = None
    tail_exponent: float = None

    def eval(self, s):
        return self.g(np.maximum(s, S_MIN))

    def deriv(self, s):
        return self.gdot(np.maximum(s, S_MIN))

    def eval_with_deriv(self, s):
        """``(g(s), g'(s))``; the gaussian reuses one exponential for both."""
        s = np.maximum(s, S_MIN)
        if self.family == "gaussian":
            g = self.g(s)
            return g, g * (-0.5 / self.params["alpha"] ** 2)
        return self.g(s), self.gdot(s)

    def second_deriv(self, s):
        s = np.maximum(s, S_MIN)
        if self.gddot is not None:
            return self.gddot(s)
        h = 1e-4
        return (self.gdot(s * (1 + h)) - self.gdot(s * (1 - h))) / (2 * h * s)

    __call__ = eval

    @property
    def is_zero(self):
        return self.family == "zero"

    def fragment(self):
        """The config fragment that rebuilds this kernel."""
        return {"type": self.family, **self.params}


def _zeros(s):
    return np.zeros_like(np.asarray(s, dtype=float))


def zero_kernel():
    return KernelSpec(
        family="zero", g=_zeros, gdot=_zeros, gddot=_zeros,
        flags=frozenset(FLAGS), c0star=0.0, c1star=0.0, c2star=0.0,
    )


def gaussian_kernel(alpha, beta):
    """``g(s) = beta / sqrt(2 pi alpha^2) * exp(-s / (2 alpha^2))``.

    ``beta = 0`` returns the zero kernel.
    """
    alpha = float(alpha)
    beta = float(beta)
    if not alpha > 0 or not math.isfinite(alpha):
        raise BadParameter(f"gaussian alpha must be positive, got {alpha}")
    if not beta >= 0 or not math.isfinite(beta):
        raise BadParameter(f"gaussian beta must be non-negative, got {beta}")
    if beta == 0.0:
        return KernelSpec(
            family="zero", g=_zeros, gdot=_zeros, gddot=_zeros,
            params={}, flags=frozenset(FLAGS), c0star=0.0, c1star=0.0, c2star=0.0,
        )
    amp = beta / (math.sqrt(2.0 * math.pi) * alpha)
    two_a2 = 2.0 * alpha * alpha

    def g(s):
        return amp * np.exp(-np.asarray(s, dtype=float) / two_a2)

    def gdot(s):
        return -g(s) / two_a2

    def gddot(s):
        return g(s) / two_a2**2

    # s|g'| peaks at s = 2 alpha^2, s^2|g''| at s = 4 alpha^2
    c1 = max(amp * math.exp(-1.0), 4.0 * amp * math.exp(-2.0))
    spec = KernelSpec(
        family="gaussian", g=g, gdot=gdot, gddot=gddot,
        params={"alpha": alpha, "beta": beta},
        flags=frozenset({"H0", "H1", "H3"}),
        c0star=beta / 2.0, c1star=c1, s_max=SCAN_HI * alpha * alpha,
    )
    object.__setattr__(spec, "c2star", _envelope_integral(spec, _sgdot_abs(spec)))
    return spec


# -- tabulated kernels ---------------------------------------------------------


def _tail_exponent(s, g, gdot):
    return 0.0 if g == 0.0 else s * gdot / g


def _power_law_interpolant(s, v):
    """Piecewise power-law interpolant of samples ``v(s)``.

    Exact for power laws; intervals where ``v`` vanishes or changes sign fall
    back to linear interpolation in ``log s``.
    """
    logs = np.log(s)
    same = (v[:-1] * v[1:]) > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        expo = np.where(same, np.log(np.abs(v[1:] / v[:-1])) / np.diff(logs), 0.0)

    def f(t):
        lt = np.log(t)
        k = np.clip(np.searchsorted(logs, lt, side="right") - 1, 0, s.size - 2)
        w = lt - logs[k]
        lin = v[k] + (v[k + 1] - v[k]) * w / (logs[k + 1] - logs[k])
        return np.where(same[k], v[k] * np.exp(expo[k] * w), lin)

    return f


def tabulated_kernel(s, g, gdot, cutoff=None, source=None):
    """Kernel interpolated from samples of ``g`` and ``g'``.

    Both columns are interpolated piecewise as power laws in ``s``.  Outside
    the table the kernel is continued as the power law matching the end
    values, and set to zero beyond ``cutoff`` when one is given.  The second
    derivative is a central difference of ``g'``.
    """
    s = np.asarray(s, dtype=float)
    g = np.asarray(g, dtype=float)
    gdot = np.asarray(gdot, dtype=float)
    if s.ndim != 1 or s.size < 2 or g.shape != s.shape or gdot.shape != s.shape:
        raise BadParameter("tabulated kernel needs at least two rows of s, g, gdot")
    if np.any(s <= 0) or np.any(np.diff(s) <= 0):
        raise BadParameter("tabulated s values must be positive and strictly increasing")
    if not (np.all(np.isfinite(g)) and np.all(np.isfinite(gdot))):
        raise BadParameter("tabulated g and gdot must be finite")
    if cutoff is not None and not cutoff > 0:
        raise BadParameter(f"cutoff must be positive, got {cutoff}")

    g_in = _power_law_interpolant(s, g)
    gdot_in = _power_law_interpolant(s, gdot)
    lo, hi = s[0], s[-1]
    p_lo = _tail_exponent(lo, g[0], gdot[0])
    p_hi = _tail_exponent(hi, g[-1], gdot[-1])

    def _assemble(t, inner, left, right):
        t = np.asarray(t, dtype=float)
        out = inner(np.clip(t, lo, hi))
        with np.errstate(over="ignore", under="ignore", invalid="ignore"):
            out = np.where(t < lo, left(t), out)
            out = np.where(t > hi, right(t), out)
        if cutoff is not None:
            out = np.where(t > cutoff, 0.0, out)
        return out

    def gf(t):
        return _assemble(
            t, g_in, lambda u: g[0] * (u / lo) ** p_lo, lambda u: g[-1] * (u / hi) ** p_hi
        )

    def gdotf(t):
        return _assemble(
            t,
            gdot_in,
            lambda u: p_lo * g[0] * (u / lo) ** p_lo / u,
            lambda u: p_hi * g[-1] * (u / hi) ** p_hi / u,
        )

    params = {"file": source} if source is not None else {}
    if cutoff is not None:
        params["cutoff"] = float(cutoff)
    spec = KernelSpec(
        family="tabulated", g=gf, gdot=gdotf, params=params,
        s_max=min(SCAN_HI, cutoff) if cutoff is not None else SCAN_HI,
        cutoff=cutoff, tail_exponent=p_hi,
    )
    return _with_constants(spec)


def read_kernel_table(path):
    """Read a CSV with header ``s,g,gdot``; raises ParseError with the line number."""
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["s", "g", "gdot"]:
            raise ParseError(f"{path}: expected header 's,g,gdot', got {header}", line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise ParseError(f"{path}: expected 3 columns, got {len(row)}", line=lineno)
            try:
                rows.append(tuple(float(c) for c in row))
            except ValueError as exc:
                raise ParseError(f"{path}: {exc}", line=lineno) from None
    if len(rows) < 2:
        raise ParseError(f"{path}: need at least two data rows")
    return np.array(rows).T


def write_kernel_table(path, s, g, gdot):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("s,g,gdot\n")
        for row in zip(s, g, gdot):
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


# -- envelope constants --------------------------------------------------------


def scan_grid(kernel, n=SCAN_POINTS):
    return np.geomspace(SCAN_LO, kernel.s_max, n)


def _abs_g(kernel):
    return lambda s: np.abs(kernel.eval(s))


def _sgdot_abs(kernel):
    return lambda s: np.abs(np.maximum(s, S_MIN) * kernel.deriv(s))


def _envelope(fun, s_grid):
    vals = fun(s_grid)
    run = np.maximum.accumulate(vals[::-1])[::-1]
    return vals, run


def _envelope_integral(kernel, fun, n=SCAN_POINTS, rtol=1e-10):
    """``int_0^inf sup_{t >= u^2} fun(t) du`` with divergence detection."""
    s_grid = scan_grid(kernel, n)
    vals, run = _envelope(fun, s_grid)
    if not np.all(np.isfinite(vals)):
        raise NotIntegrable("kernel envelope is not finite on the scan grid")
    if run[0] == 0.0:
        return 0.0
    monotone = np.all(vals >= run * (1 - 1e-12))
    nxt = np.append(run[1:], 0.0)

    def env(u):
        s = u * u
        if monotone:
            return float(fun(s))
        k = min(np.searchsorted(s_grid, s, side="right"), s_grid.size)
        tail = nxt[k - 1] if k > 0 else run[0]
        return max(float(fun(s)), float(tail))

    u_lo, u_hi = math.sqrt(s_grid[0]), math.sqrt(s_grid[-1])
    edges = np.geomspace(u_lo, u_hi, int(math.ceil(math.log10(u_hi / u_lo))) + 1)
    pieces = []
    for a, b in zip(edges[:-1], edges[1:]):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, _ = integrate.quad(env, a, b, epsabs=0.0, epsrel=rtol, limit=200)
        pieces.append(val)
    pieces = np.array(pieces)

    # Cauchy test on lower truncations: decade contributions must shrink
    p_left = math.log(env(u_lo * 10) / env(u_lo)) / math.log(10.0) if env(u_lo) > 0 else 0.0
    head = pieces[:3]
    if p_left <= -1.0 + 1e-3 or np.all(np.diff(head) < 0) and head[0] > 1e-12 * pieces.sum():
        raise NotIntegrable("envelope integral diverges at u -> 0")
    left_tail = env(u_lo) * u_lo / (p_left + 1.0)

    right_tail = 0.0
    if kernel.cutoff is None and vals[-1] > 0.0:
        p = math.log(vals[-1] / vals[-2]) / math.log(s_grid[-1] / s_grid[-2])
        if 2 * p >= -1.0:
            raise NotIntegrable("envelope integral diverges at u -> infinity")
        right_tail = vals[-1] * u_hi / (-2 * p - 1.0)
    return float(pieces.sum() + left_tail + right_tail)


def envelope_c0(kernel, n=SCAN_POINTS):
    """``c0* = int_0^inf G*(u^2) du``; raises NotIntegrable on divergence."""
    if kernel.is_zero:
        return 0.0
    return _envelope_integral(kernel, _abs_g(kernel), n)


def envelope_c2(kernel, n=SCAN_POINTS):
    """``c2* = int_0^inf sup_{t >= u^2} t|g'(t)| du``."""
    if kernel.is_zero:
        return 0.0
    return _envelope_integral(kernel, _sgdot_abs(kernel), n)


def _scan_sup(vals):
    if not np.all(np.isfinite(vals)):
        return math.inf
    k = int(np.argmax(vals))
    if k == 0 and vals[0] > vals[1] * (1 + 1e-9):
        return math.inf
    if k == vals.size - 1 and vals[-1] > vals[-2] * (1 + 1e-9):
        return math.inf
    return float(vals[k])


def regularity_constant_c1(kernel, n=SCAN_POINTS):
    """``max(sup s|g'|, sup s^2|g''|)`` on the scan grid, ``inf`` if it diverges."""
    if kernel.is_zero:
        return 0.0
    s = scan_grid(kernel, n)
    a = _scan_sup(np.abs(s * kernel.deriv(s)))
    b = _scan_sup(np.abs(s * s * kernel.second_deriv(s)))
    return max(a, b)


def asymptotically_finite(kernel, n=SCAN_POINTS):
    """Envelopes of ``|g|`` and ``s|g'|`` bounded on every ``[s0, inf)``."""
    if kernel.is_zero:
        return True
    s = scan_grid(kernel, n)
    vals = np.concatenate((kernel.eval(s), s * kernel.deriv(s)))
    if not np.all(np.isfinite(vals)):
        return False
    p = kernel.tail_exponent
    return kernel.cutoff is not None or p is None or p <= 0.0


def classify(kernel, experimental_singular=False, n=SCAN_POINTS):
    """Hypothesis flags of ``kernel`` computed from fresh scans.

    ``H2`` is only evaluated when ``experimental_singular`` is set, since
    singular self-interactions are not a production input.
    """
    if kernel.is_zero:
        return frozenset(FLAGS)
    flags = set()
    try:
        envelope_c0(kernel, n)
        flags.add("H0")
    except NotIntegrable:
        pass
    if math.isfinite(regularity_constant_c1(kernel, n)):
        flags.add("H1")
    if experimental_singular:
        try:
            envelope_c2(kernel, n)
            flags.add("H2")
        except NotIntegrable:
            pass
    if asymptotically_finite(kernel, n):
        flags.add("H3")
    return frozenset(flags)


def _with_constants(spec):
    flags = set(classify(spec, experimental_singular=True))
    consts = {}
    for name, fn, flag in (("c0star", envelope_c0, "H0"), ("c2star", envelope_c2, "H2")):
        consts[name] = fn(spec) if flag in flags else math.inf
    consts["c1star"] = regularity_constant_c1(spec)
    for name, val in consts.items():
        object.__setattr__(spec, name, val)
    flags.discard("H2")
    object.__setattr__(spec, "flags", frozenset(flags))
    return spec


# -- compatibility -------------------------------------------------------------


def compatibility_routes(flags, self_pair, experimental_singular=False):
    """Routes that admit a kernel with the given flags.

    ``I``: H0 and H1, for any pair.  ``II``: H0 and H2 for a self-interaction
    of an embedded interface (experimental).  ``III``: H3 for two distinct
    interfaces that do not intersect.
    """
    routes = []
    if {"H0", "H1"} <= flags:
        routes.append("I")
    if self_pair and experimental_singular and {"H0", "H2"} <= flags:
        routes.append("II")
    if not self_pair and "H3" in flags:
        routes.append("III")
    return routes


# -- config fragments ----------------------------------------------------------


def kernel_from_fragment(fragment, base_dir=None):
    """Build a kernel from ``{"type": "gaussian" | "zero" | "tabulated", ...}``."""
    if not isinstance(fragment, dict):
        raise BadParameter(f"kernel fragment must be an object, got {type(fragment).__name__}")
    kind = fragment.get("type")
    if kind == "zero":
        return zero_kernel()
    if kind == "gaussian":
        missing = [k for k in ("alpha", "beta") if k not in fragment]
        if missing:
            raise BadParameter(f"gaussian kernel missing {', '.join(missing)}")
        try:
            alpha, beta = float(fragment["alpha"]), float(fragment["beta"])
        except (TypeError, ValueError):
            raise BadParameter("gaussian alpha and beta must be numbers") from None
        return gaussian_kernel(alpha, beta)
    if kind == "tabulated":
        if "file" not in fragment:
            raise BadParameter("tabulated kernel needs a 'file'")
        path = fragment["file"]
        full = os.path.join(base_dir, path) if base_dir and not os.path.isabs(path) else path
        s, g, gdot = read_kernel_table(full)
        return tabulated_kernel(s, g, gdot, cutoff=fragment.get("cutoff"), source=path)
    raise BadParameter(f"unknown kernel type {kind!r}")


def parse_fragment_text(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid kernel fragment: {exc.msg}", line=exc.lineno) from None
