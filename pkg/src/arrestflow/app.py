"""Run drivers behind the command line: simulate, diagnose, validate-kernel and
convergence.

Output files are UTF-8 with LF line ends and contain no timestamps, so two
runs of the same configuration produce identical bytes.
"""

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from . import config as cfgmod, diagnostics as diag, forcing, geometry, kernels as kern, solver
from .errors import ArrestflowError, DiagnosticUnavailable, NotEmbedded

TIMESERIES_HEADER = "t,i,length,eps,mu_a,maxF,closure_defect,delta_K,delta_inf,min_pair_dist"
FLOOR = 1e-12


def _num(v):
    return repr(float(v))


def _json_line(obj):
    return json.dumps(obj, sort_keys=True, allow_nan=True) + "\n"


def _multiples(every, t_end):
    n = int(math.floor(t_end / every * (1.0 + 1e-12)))
    return [k * every for k in range(1, n + 1)]


def snapshot_name(t, i):
    return f"snap_{t:.6f}_{i}.csv"


# -- simulate ------------------------------------------------------------------


@dataclass
class SimulationResult:
    exit_code: int
    events: list
    final_state: object
    records: list


def interface_row(t, i, state, ev, dk_name, gromov, min_dist, embedded):
    s = state.interfaces[i]
    curve = geometry.Curve(ev.curves[i])
    delta_k = delta_inf = math.nan
    if embedded:
        try:
            if dk_name != "none":
                delta_k = diag.k_distortion(curve, diag.distortion_kernel(dk_name)).value
            if gromov:
                delta_inf = geometry.gromov_distortion(curve)
        except ArrestflowError:
            pass
    vals = (t, i, s.length, s.epsilon, ev.mu_a[i], np.max(np.abs(ev.F[i])),
            s.closure_defect(), delta_k, delta_inf, min_dist)
    return ",".join([_num(vals[0]), str(i)] + [_num(v) for v in vals[2:]])


def simulate(cfg, out_dir):
    """Run ``cfg`` and write ``timeseries.csv``, ``events.jsonl`` and snapshots to ``out_dir``.

    Returns a :class:`SimulationResult`; ``exit_code`` is 0 only when the run
    reaches ``t_end``.
    """
    os.makedirs(out_dir, exist_ok=True)
    curves, system = cfgmod.build(cfg)
    sol = cfg.solver
    forcing.check_proximity(curves, [c.sigma for c in curves], system.kernels)

    tol = 1e-9 * max(1.0, sol.t_end)
    snap_times = _multiples(sol.snapshot_every, sol.t_end)
    if not snap_times or abs(snap_times[-1] - sol.t_end) > tol:
        snap_times.append(sol.t_end)
    monitor_times = _multiples(sol.monitor_every, sol.t_end)
    samples = sorted(set(snap_times) | set(monitor_times))

    def is_snap(t):
        return t == 0.0 or any(abs(t - s) <= tol for s in snap_times)

    events = []
    crossed = [False] * cfg.m
    written = set()
    ts = open(os.path.join(out_dir, "timeseries.csv"), "w", encoding="utf-8", newline="\n")
    ev_file = open(os.path.join(out_dir, "events.jsonl"), "w", encoding="utf-8", newline="\n")

    def emit(event):
        events.append(event)
        ev_file.write(_json_line(event))
        ev_file.flush()

    def write_snapshot(state, ev):
        if state.t in written:
            return
        written.add(state.t)
        dists = solver.min_pair_distances(ev.curves)
        for i in range(cfg.m):
            geometry.write_curve_csv(os.path.join(out_dir, snapshot_name(state.t, i)),
                                     geometry.Curve(ev.curves[i]))
            ts.write(interface_row(state.t, i, state, ev, cfg.diagnostics.distortion_kernel,
                                   cfg.diagnostics.track_gromov, dists[i], not crossed[i]) + "\n")
        ts.flush()

    def observe(state, ev):
        stop = False
        for i in range(cfg.m):
            if crossed[i]:
                continue
            hits = diag.self_intersections(geometry.Curve(ev.curves[i]))
            if hits:
                crossed[i] = True
                emit({"t": state.t, "type": "SelfIntersection",
                      "payload": {"interface": i, "count": len(hits),
                                  "point": [float(v) for v in hits[0].point]}})
                stop = stop or sol.terminate_on_self_intersection
        if is_snap(state.t):
            write_snapshot(state, ev)
        return stop

    ts.write(TIMESERIES_HEADER + "\n")
    try:
        state0 = solver.initial_state(curves)
        final, records, event = solver.run(state0, system, sol.dt, sol.t_end,
                                           sample_times=samples, observer=observe)
        if event.type != "Stopped":
            if final.t not in written:
                try:
                    write_snapshot(final, solver.evaluate(final, system))
                except ArrestflowError:
                    pass
            emit({"t": event.t, "type": event.type, "payload": event.payload})
    finally:
        ts.close()
        ev_file.close()
    code = 0 if events and events[-1]["type"] == "Completed" else 1
    return SimulationResult(code, events, final, records)


# -- diagnose ----------------------------------------------------------------------


def _pair_entry(curve, pair, kernel):
    entry = {"i": pair.i, "j": pair.j, "x": pair.x, "z": pair.z, "r": pair.r,
             "orientation": pair.orientation}
    try:
        res = diag.realizing_pair_residuals(curve, pair, kernel)
        entry["residuals"] = {"tangent_x": res.tangent_x, "tangent_y": res.tangent_y,
                              "ratio": res.ratio, "ratio_ok": res.ratio_ok,
                              "second_order": res.second_order}
    except ArrestflowError as exc:
        entry["residuals"] = {"available": False, "reason": str(exc)}
    return entry


def diagnose(curve, kernel_name="pseudo"):
    """Embeddedness report for one curve as a JSON-ready dict.

    A curve that crosses itself gets its crossings listed and its distortion
    fields marked unavailable.
    """
    curve = geometry.resample_constant_speed(curve)
    kappa22, ell, N = geometry.bending_energy(curve)
    hits = diag.self_intersections(curve)
    report = {
        "M": curve.M,
        "length": curve.length,
        "bending_energy": {"kappa22": kappa22, "ell_kappa": ell, "N": N},
        "self_intersections": [
            {"segments": [int(s) for s in h.segments], "point": [float(v) for v in h.point]}
            for h in hits
        ],
        "embedded": not hits,
        "kernel": kernel_name,
    }
    if hits:
        reason = f"curve is not embedded ({len(hits)} crossings)"
        report["distortion"] = {"available": False, "reason": reason}
        report["delta_inf"] = {"available": False, "reason": reason}
        return report
    kernel = diag.distortion_kernel(kernel_name)
    try:
        rep = diag.k_distortion(curve, kernel)
    except NotEmbedded as exc:
        report["distortion"] = {"available": False, "reason": str(exc)}
        report["delta_inf"] = {"available": False, "reason": str(exc)}
        return report
    report["distortion"] = {
        "available": True,
        "value": rep.value,
        "n_realizing": rep.n_realizing,
        "pairs": [_pair_entry(curve, p, kernel) for p in rep.pairs],
    }
    try:
        lhs, rhs, ok = diag.realizing_separation_bound(curve, rep)
        report["distortion"]["separation_bound"] = {"lhs": lhs, "rhs": rhs, "satisfied": ok}
    except DiagnosticUnavailable as exc:
        report["distortion"]["separation_bound"] = {"available": False, "reason": str(exc)}
    report["delta_inf"] = {"available": True, "value": geometry.gromov_distortion(curve)}
    return report


def diagnose_file(path, kernel_name="pseudo"):
    report = diagnose(geometry.read_curve_csv(path), kernel_name)
    report["file"] = os.path.basename(path)
    return report


# -- validate-kernel ---------------------------------------------------------------


def validate_kernel(kernel):
    """Flags, envelope constants and admissible compatibility routes of ``kernel``."""
    flags = set(kern.classify(kernel)) if not kernel.is_zero else set(kern.FLAGS)
    warnings = []
    if "H1" not in flags:
        warnings.append("H1 absent: the kernel is not regular and is only admissible "
                        "between separated interfaces")
    if "H0" not in flags:
        warnings.append("H0 absent: the kernel envelope is not integrable")
    return {
        "family": kernel.family,
        "params": dict(kernel.params),
        "flags": sorted(flags),
        "c0star": kernel.c0star,
        "c1star": kernel.c1star,
        "routes": {
            "self": kern.compatibility_routes(flags, self_pair=True),
            "cross": kern.compatibility_routes(flags, self_pair=False),
            "self_experimental": kern.compatibility_routes(flags, True, experimental_singular=True),
        },
        "warnings": warnings,
    }


def validate_kernel_file(path):
    with open(path, encoding="utf-8") as fh:
        fragment = kern.parse_fragment_text(fh.read())
    return validate_kernel(kern.kernel_from_fragment(fragment, os.path.dirname(os.path.abspath(path))))


# -- convergence -------------------------------------------------------------------


def _final_theta(cfg, M, dt):
    curves, system = cfgmod.build(_with_grid(cfg, M))
    state, _, event = solver.run(solver.initial_state(curves), system, dt, cfg.solver.t_end)
    if event.type != "Completed":
        raise ArrestflowError(f"run with M={M}, dt={dt:g} ended with {event.type} at t={event.t:.6g}")
    return [s.theta() for s in state.interfaces]


def _with_grid(cfg, M):
    raw = cfg.to_dict()
    raw["solver"]["M"] = M
    return cfgmod.config_from_dict(raw, cfg.base_dir)


def _max_diff(a, b):
    return max(float(np.max(np.abs(x - y))) for x, y in zip(a, b))


def convergence(cfg, levels=3):
    """Self-convergence of the final tangent angle.

    Runs at ``dt / 2**k`` for ``k < levels`` on the configured grid and at
    ``M`` and ``2M`` with the finest step.  Errors are max-norm differences of
    consecutive levels; ratios below the round-off floor are flagged.
    """
    if levels < 3:
        raise ValueError(f"need at least 3 levels for a ratio, got {levels}")
    M, dt = cfg.solver.M, cfg.solver.dt
    dts = [dt / 2**k for k in range(levels)]
    thetas = [_final_theta(cfg, M, h) for h in dts]
    errors = [_max_diff(thetas[k], thetas[k + 1]) for k in range(levels - 1)]
    ratios = [errors[k] / errors[k + 1] if errors[k + 1] > 0 else math.inf
              for k in range(len(errors) - 1)]
    fine = _final_theta(cfg, 2 * M, dts[-1])
    spatial = _max_diff(thetas[-1], [th[::2] for th in fine])
    return {
        "temporal": {"dt": dts, "errors": errors, "ratios": ratios,
                     "floor": max(errors) < FLOOR},
        "spatial": {"M": [M, 2 * M], "dt": dts[-1], "error": spatial, "floor": spatial < FLOOR},
    }
