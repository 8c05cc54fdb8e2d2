"""Run configuration: parsing, validation, normalization and object building.

A configuration is a JSON object::

    {
      "interfaces": [{"initial": {"shape": "circle", "R": 1.0}, "c": 0.0, "F_ext": null}],
      "kernels": [[{"type": "zero"}]],
      "solver": {"M": 256, "dt": 0.001, "t_end": 0.4},
      "diagnostics": {"distortion_kernel": "pseudo", "track_gromov": false},
      "seed": 0
    }

Every omitted field takes its default; :func:`dump_config` writes the fully
filled form, which parses back to an equal :class:`SystemConfig`.
"""

import functools
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import geometry, kernels as kern, solver, spectral
from .errors import ArrestflowError, BadParameter, ParseError, ValidationError
from .forcing import PROXIMITY_FACTOR, min_distance

REQUIRED = object()
ORIENTATIONS = ("ccw", "cw")

SHAPES = {
    "circle": {"R": 1.0, "center": [0.0, 0.0], "orientation": "ccw"},
    "ellipse": {"a": 2.0, "b": 1.0, "center": [0.0, 0.0], "orientation": "ccw", "phase": 0.0},
    "peanut": {"scale": 1.0, "neck": 0.6, "center": [0.0, 0.0], "orientation": "ccw"},
    "horseshoe": {
        "outer": 1.6, "inner": 0.4, "gap": 0.1, "corner": 0.06,
        "center": [0.0, 0.0], "orientation": "ccw",
    },
    "points_file": {"file": REQUIRED, "orientation": "as_given"},
}

SOLVER_DEFAULTS = {
    "M": 256,
    "dt": 1e-3,
    "t_end": 1.0,
    "safety": solver.DEFAULT_SAFETY,
    "snapshot_every": None,  # defaults to t_end
    "monitor_every": None,  # defaults to snapshot_every
    "terminate_on_self_intersection": False,
}
DIAGNOSTIC_KERNELS = ("pseudo", "mobius", "kl", "none")
TOP_LEVEL = ("interfaces", "kernels", "solver", "diagnostics", "seed")


@dataclass(frozen=True, eq=True)
class InterfaceConfig:
    initial: dict
    c: float = 0.0
    F_ext: dict = None


@dataclass(frozen=True, eq=True)
class SolverConfig:
    M: int
    dt: float
    t_end: float
    safety: float
    snapshot_every: float
    monitor_every: float
    terminate_on_self_intersection: bool


@dataclass(frozen=True, eq=True)
class DiagnosticsConfig:
    distortion_kernel: str = "pseudo"
    track_gromov: bool = False


@dataclass(frozen=True, eq=True)
class SystemConfig:
    interfaces: tuple
    kernels: tuple
    solver: SolverConfig
    diagnostics: DiagnosticsConfig
    seed: int = 0
    base_dir: str = field(default=None, compare=False)

    @property
    def m(self):
        return len(self.interfaces)

    def to_dict(self):
        return {
            "interfaces": [
                {"initial": dict(f.initial), "c": f.c, "F_ext": None if f.F_ext is None else dict(f.F_ext)}
                for f in self.interfaces
            ],
            "kernels": [[dict(k) for k in row] for row in self.kernels],
            "solver": {name: getattr(self.solver, name) for name in SOLVER_DEFAULTS},
            "diagnostics": {
                "distortion_kernel": self.diagnostics.distortion_kernel,
                "track_gromov": self.diagnostics.track_gromov,
            },
            "seed": self.seed,
        }


# -- small validators ------------------------------------------------------------


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _number(v, where, errors, positive=False):
    if not _is_number(v):
        errors.append(f"{where}: expected a finite number, got {v!r}")
        return None
    if positive and not v > 0:
        errors.append(f"{where}: must be positive, got {v!r}")
        return None
    return float(v)


def _unknown_keys(obj, allowed, where, errors):
    for key in obj:
        if key not in allowed:
            errors.append(f"{where}: unknown field {key!r}")


def _object(v, where, errors):
    if v is None:
        return {}
    if not isinstance(v, dict):
        errors.append(f"{where}: expected an object, got {type(v).__name__}")
        return None
    return v


# -- sections ----------------------------------------------------------------------


def _parse_shape(raw, where, errors):
    raw = _object(raw, where, errors)
    if raw is None:
        return None
    name = raw.get("shape")
    if name not in SHAPES:
        errors.append(f"{where}.shape: expected one of {sorted(SHAPES)}, got {name!r}")
        return None
    schema = SHAPES[name]
    _unknown_keys(raw, ("shape",) + tuple(schema), where, errors)
    out = {"shape": name}
    for key, default in schema.items():
        v = raw.get(key, default)
        here = f"{where}.{key}"
        if v is REQUIRED:
            errors.append(f"{here}: required")
        elif key == "center":
            if not (isinstance(v, (list, tuple)) and len(v) == 2 and all(map(_is_number, v))):
                errors.append(f"{here}: expected two numbers, got {v!r}")
                continue
            out[key] = [float(v[0]), float(v[1])]
        elif key == "orientation":
            allowed = ORIENTATIONS + (("as_given",) if name == "points_file" else ())
            if v not in allowed:
                errors.append(f"{here}: expected one of {list(allowed)}, got {v!r}")
                continue
            out[key] = v
        elif key == "file":
            if not isinstance(v, str) or not v:
                errors.append(f"{here}: expected a path, got {v!r}")
                continue
            out[key] = v
        else:
            num = _number(v, here, errors)
            if num is not None:
                out[key] = num
    return out


def _parse_interface(raw, where, errors):
    raw = _object(raw, where, errors)
    if raw is None:
        return None
    _unknown_keys(raw, ("initial", "c", "F_ext"), where, errors)
    if "initial" not in raw:
        errors.append(f"{where}.initial: required")
        return None
    initial = _parse_shape(raw["initial"], f"{where}.initial", errors)
    c = _number(raw.get("c", 0.0), f"{where}.c", errors)
    fext = raw.get("F_ext")
    if fext is not None:
        if isinstance(fext, str):
            fext = {"file": fext}
        if not (isinstance(fext, dict) and set(fext) == {"file"} and isinstance(fext["file"], str)):
            errors.append(f"{where}.F_ext: expected null or {{\"file\": path}}, got {fext!r}")
            fext = None
    if initial is None or c is None:
        return None
    return InterfaceConfig(initial=initial, c=c, F_ext=fext)


def _parse_solver(raw, errors):
    raw = _object(raw, "solver", errors)
    if raw is None:
        return None
    _unknown_keys(raw, SOLVER_DEFAULTS, "solver", errors)
    vals = {k: raw.get(k, d) for k, d in SOLVER_DEFAULTS.items()}
    ok = True
    M = vals["M"]
    if isinstance(M, float) and M.is_integer():
        M = int(M)
    if not isinstance(M, int) or isinstance(M, bool):
        errors.append(f"solver.M: expected an integer, got {M!r}")
        ok = False
    else:
        try:
            vals["M"] = spectral.check_grid_size(M)
        except BadParameter as exc:
            errors.append(f"solver.M: {exc}")
            ok = False
    for key in ("dt", "t_end", "safety"):
        vals[key] = _number(vals[key], f"solver.{key}", errors, positive=True)
        ok = ok and vals[key] is not None
    if vals["safety"] is not None and vals["safety"] > 1.0:
        errors.append(f"solver.safety: must be at most 1, got {vals['safety']!r}")
        ok = False
    for key in ("snapshot_every", "monitor_every"):
        if vals[key] is not None:
            vals[key] = _number(vals[key], f"solver.{key}", errors, positive=True)
            ok = ok and vals[key] is not None
    if not isinstance(vals["terminate_on_self_intersection"], bool):
        errors.append("solver.terminate_on_self_intersection: expected true or false")
        ok = False
    if not ok:
        return None
    if vals["snapshot_every"] is None:
        vals["snapshot_every"] = vals["t_end"]
    if vals["monitor_every"] is None:
        vals["monitor_every"] = vals["snapshot_every"]
    return SolverConfig(**vals)


def _parse_diagnostics(raw, errors):
    raw = _object(raw, "diagnostics", errors)
    if raw is None:
        return None
    _unknown_keys(raw, ("distortion_kernel", "track_gromov"), "diagnostics", errors)
    name = raw.get("distortion_kernel", "pseudo")
    gromov = raw.get("track_gromov", False)
    ok = True
    if name not in DIAGNOSTIC_KERNELS:
        errors.append(f"diagnostics.distortion_kernel: expected one of {list(DIAGNOSTIC_KERNELS)}, got {name!r}")
        ok = False
    if not isinstance(gromov, bool):
        errors.append("diagnostics.track_gromov: expected true or false")
        ok = False
    return DiagnosticsConfig(name, gromov) if ok else None


def _normalize_fragment(frag, where, errors, base_dir):
    if not isinstance(frag, dict):
        errors.append(f"{where}: expected a kernel object, got {type(frag).__name__}")
        return None
    kind = frag.get("type")
    allowed = {"zero": ("type",), "gaussian": ("type", "alpha", "beta"),
               "tabulated": ("type", "file", "cutoff")}.get(kind)
    if allowed is None:
        errors.append(f"{where}.type: expected one of ['gaussian', 'tabulated', 'zero'], got {kind!r}")
        return None
    _unknown_keys(frag, allowed, where, errors)
    out = {k: frag[k] for k in allowed if k in frag}
    for key in ("alpha", "beta", "cutoff"):
        if key in out and _is_number(out[key]):
            out[key] = float(out[key])
    if kind == "tabulated" and "cutoff" not in out:
        out["cutoff"] = None
    try:
        build_kernel(out, base_dir)
    except (ArrestflowError, OSError) as exc:
        errors.append(f"{where}: {exc}")
        return None
    return out


# -- building ---------------------------------------------------------------------


@functools.lru_cache(maxsize=64)
def _cached_kernel(key, base_dir):
    return kern.kernel_from_fragment(json.loads(key), base_dir)


def build_kernel(fragment, base_dir=None):
    """Kernel for a normalized fragment; identical fragments share one object."""
    return _cached_kernel(json.dumps(fragment, sort_keys=True), base_dir)


def _resolve(path, base_dir):
    return os.path.join(base_dir, path) if base_dir and not os.path.isabs(path) else path


def build_curve(initial, M, base_dir=None):
    """Constant-speed curve with ``M`` nodes for a normalized ``initial`` entry."""
    p = dict(initial)
    name = p.pop("shape")
    if name == "points_file":
        curve = geometry.read_curve_csv(_resolve(p["file"], base_dir))
        if curve.M != M:
            curve = geometry.Curve(spectral.interpolate(curve.points, spectral.grid(M)))
        curve = geometry.resample_constant_speed(curve)
        want = p["orientation"]
        if want != "as_given" and (curve.signed_area() > 0) != (want == "ccw"):
            curve = curve.reversed()
        return curve
    builder = getattr(geometry, name)
    return builder(M=M, **p)


def read_fext(path, M):
    """Single-column CSV (header ``fext``) with one value per grid node."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != "fext":
        raise ParseError("external forcing file must start with the header 'fext'", line=1)
    vals = []
    for n, ln in enumerate(lines[1:], start=2):
        try:
            vals.append(float(ln))
        except ValueError:
            raise ParseError(f"not a number: {ln!r}", line=n) from None
    if len(vals) != M:
        raise BadParameter(f"external forcing has {len(vals)} values, grid has {M}")
    return np.array(vals)


def build(cfg):
    """``(curves, system)`` ready for :func:`arrestflow.solver.run`."""
    M = cfg.solver.M
    curves = [build_curve(f.initial, M, cfg.base_dir) for f in cfg.interfaces]
    kmat = tuple(tuple(build_kernel(k, cfg.base_dir) for k in row) for row in cfg.kernels)
    fext = None
    if any(f.F_ext is not None for f in cfg.interfaces):
        fext = tuple(
            None if f.F_ext is None else read_fext(_resolve(f.F_ext["file"], cfg.base_dir), M)
            for f in cfg.interfaces
        )
    system = solver.System(
        kernels=kmat, c=tuple(f.c for f in cfg.interfaces), fext=fext, safety=cfg.solver.safety
    )
    return curves, system


def _check_compatibility(cfg, errors):
    """Every kernel must be admitted by some compatibility route."""
    try:
        curves, system = build(cfg)
    except (ArrestflowError, OSError) as exc:
        errors.append(f"initial data: {exc}")
        return
    for i, row in enumerate(system.kernels):
        for j, k in enumerate(row):
            routes = kern.compatibility_routes(k.flags, self_pair=(i == j))
            if not routes:
                errors.append(
                    f"kernel ({i},{j}) incompatible: flags {sorted(k.flags)} admit no route "
                    f"({'self pair needs H0 and H1' if i == j else 'cross pair needs H0 and H1, or H3'})"
                )
            elif routes == ["III"] and not k.is_zero:
                gap = min_distance(curves[i], curves[j])
                limit = PROXIMITY_FACTOR * curves[j].length / cfg.solver.M
                if gap <= limit:
                    errors.append(
                        f"kernel ({i},{j}) needs separated interfaces: distance {gap:.3e} "
                        f"is within {limit:.3e}"
                    )


# -- entry points ---------------------------------------------------------------


def config_from_dict(raw, base_dir=None):
    """Validate a decoded configuration; raises ValidationError listing every violation."""
    errors = []
    if not isinstance(raw, dict):
        raise ValidationError([f"configuration: expected an object, got {type(raw).__name__}"])
    _unknown_keys(raw, TOP_LEVEL, "configuration", errors)

    interfaces = []
    raw_ifaces = raw.get("interfaces")
    if not isinstance(raw_ifaces, list) or not raw_ifaces:
        errors.append("interfaces: need a non-empty list (m >= 1)")
        raw_ifaces = []
    for n, item in enumerate(raw_ifaces):
        interfaces.append(_parse_interface(item, f"interfaces[{n}]", errors))
    m = len(raw_ifaces)

    raw_k = raw.get("kernels")
    kmat = None
    if raw_k is None:
        kmat = tuple(tuple({"type": "zero"} for _ in range(m)) for _ in range(m))
    elif not (isinstance(raw_k, list) and len(raw_k) == m
              and all(isinstance(r, list) and len(r) == m for r in raw_k)):
        shape = (f"{len(raw_k)}x{'/'.join(str(len(r)) if isinstance(r, list) else '?' for r in raw_k)}"
                 if isinstance(raw_k, list) else type(raw_k).__name__)
        errors.append(f"kernel matrix shape: expected {m}x{m} for {m} interfaces, got {shape}")
    else:
        kmat = tuple(
            tuple(_normalize_fragment(f, f"kernels[{i}][{j}]", errors, base_dir) for j, f in enumerate(row))
            for i, row in enumerate(raw_k)
        )

    solver_cfg = _parse_solver(raw.get("solver"), errors)
    diag = _parse_diagnostics(raw.get("diagnostics"), errors)
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        errors.append(f"seed: expected an integer, got {seed!r}")
    if errors:
        raise ValidationError(errors)

    cfg = SystemConfig(
        interfaces=tuple(interfaces), kernels=kmat, solver=solver_cfg,
        diagnostics=diag, seed=seed, base_dir=base_dir,
    )
    _check_compatibility(cfg, errors)
    if errors:
        raise ValidationError(errors)
    return cfg


def parse_config(text, base_dir=None):
    """Parse and validate JSON configuration text.

    Raises ParseError (with the line) for malformed JSON and ValidationError
    listing every failed invariant otherwise.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid configuration: {exc.msg}", line=exc.lineno) from None
    return config_from_dict(raw, base_dir)


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_config(text, base_dir=os.path.dirname(os.path.abspath(path)))


def dump_config(cfg):
    """Normalized JSON text with every default filled in."""
    return json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n"
