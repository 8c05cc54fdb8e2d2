"""End-to-end acceptance checks, one test per criterion.

Each test logs a PASS/FAIL line through the ``criterion`` fixture; the lines
are repeated in the terminal summary.  The simulation runs are module
fixtures, so the closure check sees every run the suite performs.
"""

import math
import os
import subprocess
import sys
import time

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from arrestflow import app, config, diagnostics as diag, forcing, geometry, kernels, scenarios, solver, spectral

from fields import band_limited, smooth_blob

HALF_PI = math.pi / 2


def timed(fn, *args, **kwargs):
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t0


def max_closure(records):
    return max(s.closure_defect for rec in records for s in rec.interfaces)


def read_timeseries(path):
    lines = path.read_text().splitlines()
    head = lines[0].split(",")
    return [{k: float(v) for k, v in zip(head, ln.split(","))} for ln in lines[1:]]


def cli_run(name, out):
    env = dict(os.environ, ARRESTFLOW_THREADS="0")
    cmd = [sys.executable, "-m", "arrestflow.cli", "simulate", name, "--serial", "--out", str(out)]
    subprocess.run(cmd, env=env, check=False, capture_output=True)
    return {p.name: p.read_bytes() for p in sorted(out.iterdir())}


# -- shared runs ---------------------------------------------------------------------


@pytest.fixture(scope="module")
def circle_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("circle")
    cfg = config.config_from_dict(scenarios.scenario("circle-csf"))
    res, seconds = timed(app.simulate, cfg, out)
    return res, out, seconds


@pytest.fixture(scope="module")
def ellipse_refinement():
    """Final tangent angles of the 2:1 ellipse at t=0.1 for dt, dt/2, dt/4."""

    def go():
        out = []
        for dt in (1e-3, 5e-4, 2.5e-4):
            curves, system = config.build(config.config_from_dict(scenarios.scenario("ellipse-csf", dt=dt)))
            state, records, event = solver.run(solver.initial_state(curves), system, dt, 0.1)
            out.append((state.interfaces[0].theta(), records, event))
        return out

    return timed(go)


@pytest.fixture(scope="module")
def ellipse_to_extinction():
    """Pseudo and Gromov distortion along the ellipse run, every 0.01 until sigma < 0.3."""
    curves, system = config.build(config.config_from_dict(scenarios.scenario("ellipse-csf", t_end=1.0)))
    rows = []

    def observe(state, ev):
        c = geometry.Curve(ev.curves[0])
        sigma = state.interfaces[0].length / (2 * math.pi)
        rows.append((state.t, sigma, diag.pseudo_distortion(c), geometry.gromov_distortion(c)))
        return sigma < 0.3

    samples = np.arange(1, 100) * 0.01
    _, records, event = solver.run(solver.initial_state(curves), system, 1e-3, 0.999,
                                   sample_times=samples, observer=observe)
    return np.array(rows), records, event


@pytest.fixture(scope="module")
def free_growth_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("free")
    cfg = config.config_from_dict(scenarios.scenario("slot-growth"))
    res, seconds = timed(app.simulate, cfg, out)
    return res, out, seconds


@pytest.fixture(scope="module")
def repelled_growth_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("repelled")
    cfg = config.config_from_dict(scenarios.scenario("slot-growth-repelled"))
    res, seconds = timed(app.simulate, cfg, out)
    return res, out, seconds, cfg


# -- criteria --------------------------------------------------------------------------


def test_01_circle_collapse(circle_run, criterion):
    res, out, seconds = circle_run
    rows = {round(r["t"], 9): r for r in read_timeseries(out / "timeseries.csv")}
    errs = [abs(rows[t]["length"] / (2 * math.pi) - math.sqrt(1 - 2 * t)) for t in (0.1, 0.25, 0.4)]
    ok = res.exit_code == 0 and max(errs) < 5e-6 and seconds < 5.0
    criterion(1, ok, f"circle collapse: max |sigma - sqrt(1-2t)| = {max(errs):.2e} (< 5e-6), "
                     f"runtime {seconds:.2f} s (< 5 s)")
    assert ok


def test_02_covered_circle_force(criterion):
    unit_exp = kernels.gaussian_kernel(1 / math.sqrt(2), math.sqrt(math.pi))  # g(s) = exp(-s)
    worst = 0.0
    for m, sigma in ((1, 1.0), (2, 1.0), (1, 2.0)):
        c = geometry.covered_circle(m, sigma, M=256)
        raw = forcing.raw_force([c.points], [c.sigma], [[unit_exp]], 0) / (2 * math.pi)
        lam = mpmath.mpf(sigma) ** 2 / m**2
        with mpmath.workdps(30):
            exact = float(m * mpmath.sqrt(lam) * mpmath.besseli(0, lam) * mpmath.exp(-lam))
        worst = max(worst, float(np.max(np.abs(raw - exact))) / exact)
    ok = worst < 1e-8
    criterion(2, ok, f"covered-circle force vs m sqrt(lam) I0(lam) exp(-lam): max rel err {worst:.2e} (< 1e-8)")
    assert ok


def test_03_force_bound(criterion):
    rng = np.random.default_rng(2024)
    violations, worst = 0, 0.0
    for seed in range(20):
        c = geometry.resample_constant_speed(geometry.Curve(smooth_blob(seed, M=256, amplitude=0.3)))
        assert diag.self_intersections(c) == []
        k = kernels.gaussian_kernel(rng.uniform(0.05, 2.0), rng.uniform(0.2, 3.0))
        raw = forcing.raw_force([c.points], [c.sigma], [[k]], 0)
        # embedded curves are (1, delta_inf)-regular; H2 immersions are (N, 3)-regular
        for N, lam in ((1, geometry.gromov_distortion(c)), (geometry.bending_energy(c)[2], 3.0)):
            bound, ok = forcing.velbound_check(raw, N, lam, k.c0star)
            violations += not ok
            worst = max(worst, float(np.max(np.abs(raw))) / bound)
    ok = violations == 0
    criterion(3, ok, f"raw force bound on 20 random curves: {violations} violations, "
                     f"largest |F|/bound {worst:.3f}")
    assert ok


def test_04_phi_functions(criterion):
    rng = np.random.default_rng(7)
    eta_hat = np.fft.rfft(rng.normal(size=64))
    zero = np.zeros_like(eta_hat)
    dw = 1e-3
    with mpmath.workdps(30):
        factor = [mpmath.exp(-mpmath.mpf(l * l) * mpmath.mpf(dw)) for l in range(eta_hat.size)]
    worst = 0.0
    for _ in range(1000):
        new = solver.exponential_update(eta_hat, zero, zero, dw)
        for l, (a, b) in enumerate(zip(eta_hat, new)):
            exact = complex(mpmath.mpc(a) * factor[l])
            if exact != 0:
                worst = max(worst, abs(b - exact) / np.spacing(abs(exact)))
        eta_hat = new
    at_zero = solver.phi_function(1, 0.0) == 1.0 and solver.phi_function(2, 0.0) == 0.5
    x = np.linspace(-750.0, 0.0, 100001)
    finite = all(np.all(np.isfinite(solver.phi_function(j, x))) for j in range(3))
    ok = worst <= 4 and at_zero and finite
    criterion(4, ok, f"phi-functions: per-step decay error {worst:.1f} ulp (<= 4) over 1000 steps, "
                     f"E1(0)=1 and E2(0)=1/2 {at_zero}, finite on [-750, 0] {finite}")
    assert ok


def test_05_temporal_order(ellipse_refinement, criterion):
    runs, seconds = ellipse_refinement
    th = [r[0] for r in runs]
    assert all(r[2].type == "Completed" for r in runs)
    e1 = float(np.max(np.abs(th[0] - th[1])))
    e2 = float(np.max(np.abs(th[1] - th[2])))
    ratio = e1 / e2
    ok = 3.5 <= ratio <= 4.5 and seconds < 60
    criterion(5, ok, f"ellipse self-convergence ratio {ratio:.3f} (in [3.5, 4.5]), runtime {seconds:.1f} s (< 60 s)")
    assert ok


def test_07_distortion_monotone(ellipse_to_extinction, criterion):
    rows, _, _ = ellipse_to_extinction
    t, sigma, pseudo, gromov = rows.T
    active = np.nonzero(gromov >= HALF_PI + 0.05)[0]
    upto = active[-1] + 1 if active.size else 1
    rise = float(np.max(np.diff(pseudo[: upto + 1]))) if upto >= 1 else -math.inf
    monotone = rise <= 1e-6
    before = sigma >= 0.3
    gap = float(np.min(gromov[before] - HALF_PI))
    gromov_decreasing = bool(np.all(np.diff(gromov) < 0))
    rounds = gap < 0.02
    ok = monotone and rounds and gromov_decreasing
    criterion(7, ok, f"pseudo-distortion max rise {rise:.2e} (<= 1e-6) over {upto} samples; "
                     f"delta_inf - pi/2 = {gap:.4f} at sigma = {sigma[before][-1]:.3f} (need < 0.02 "
                     f"before sigma < 0.3); delta_inf decreasing {gromov_decreasing}")
    assert ok


def test_08_distortion_calculus(criterion):
    res, seps, ratios_ok = [], [], True
    for M in (512, 1024):
        e = geometry.ellipse(2, 1, M=M, phase=0.3)
        rep = diag.k_distortion(e)
        for kernel in (diag.PSEUDO, diag.MOBIUS, diag.KL):
            ratios_ok &= all(p.r <= 1 + 1e-6 for p in diag.k_distortion(e, kernel).pairs)
        r = diag.realizing_pair_residuals(e, rep.pairs[0])
        res.append(max(r.tangent_x, r.tangent_y))
        seps.append(diag.realizing_separation_bound(e, rep)[2])
    ratio = res[0] / res[1]
    ok = 1.6 <= ratio <= 2.6 and ratios_ok and all(seps)
    criterion(8, ok, f"tangent residual {res[0]:.2e} -> {res[1]:.2e}, ratio {ratio:.3f} (in [1.6, 2.6]); "
                     f"r <= 1 + 1e-6 {ratios_ok}; separation bound {seps}")
    assert ok


def test_09_growth_without_repulsion(free_growth_run, criterion):
    res, _, seconds = free_growth_run
    types = [e["type"] for e in res.events]
    first = types.index("SelfIntersection") if "SelfIntersection" in types else None
    terminal = res.events[-1]
    ok = (first is not None and first < len(types) - 1
          and terminal["type"] not in ("Completed", "SelfIntersection")
          and terminal["t"] <= 1.0 and seconds < 600)
    criterion(9, ok, f"growth without repulsion: events {types} ending at t={terminal['t']:.4f}, "
                     f"runtime {seconds:.1f} s (< 600 s)")
    assert ok


def test_10_growth_with_repulsion(repelled_growth_run, criterion):
    res, out, seconds, cfg = repelled_growth_run
    k = cfg.kernels[0][0]
    c = cfg.interfaces[0].c
    regime = diag.arrest_regime_check(c, k["beta"])
    types = [e["type"] for e in res.events]
    completed = types[-1] == "Completed" and res.events[-1]["t"] == pytest.approx(1.0)
    crossings = types.count("SelfIntersection")
    checked, short = [], []
    for row in read_timeseries(out / "timeseries.csv"):
        if not row["delta_K"] > 2:
            continue
        curve = geometry.read_curve_csv(out / app.snapshot_name(row["t"], 0))
        pair, d = diag.min_gap_pair(curve, diag.k_distortion(curve))
        bound = diag.arrest_bound(d, abs(pair.z), curve.sigma, k["alpha"], k["beta"])
        checked.append(row["t"])
        if not bound > abs(c):
            short.append((round(row["t"], 4), round(bound, 4)))
    ok = regime and completed and crossings == 0 and not short
    criterion(10, ok, f"growth with repulsion: regime {regime}, completed {completed}, "
                      f"{crossings} self-intersections, runtime {seconds:.1f} s; arrest bound > |c|={abs(c)} "
                      f"at {len(checked) - len(short)}/{len(checked)} samples with Delta_K > 2, "
                      f"(t, bound) short: {short}")
    assert ok


def test_11_operator_identities(criterion):
    seeds = st.integers(min_value=0, max_value=2**32 - 1)
    M = 64

    @settings(max_examples=1000, deadline=None, database=None)
    @given(seeds)
    def postconditions(seed):
        f = band_limited(seed, M)
        mu = f.mean()
        x = spectral.grid(M)
        pc = spectral.mean_zero_primitive(f)
        p0 = spectral.zero_dirichlet_primitive(f)
        # the ramp mu (x + pi) in P_c averages pi mu over the period but pi mu (M-1)/M over the nodes
        assert abs(pc.mean() + np.pi * mu / M) < 1e-12 * np.abs(f).max()
        assert np.max(np.abs(spectral.spectral_derivative(pc - mu * x, 1) - (f - mu))) < 1e-9
        assert abs(p0[0]) < 1e-9
        assert abs(spectral.interpolate(p0, [np.pi])[0]) < 1e-9
        assert np.max(np.abs(spectral.spectral_derivative(p0, 1) - (f - mu))) < 1e-9

    @settings(max_examples=1000, deadline=None, database=None)
    @given(seeds, seeds)
    def by_parts(seed_f, seed_g):
        f = band_limited(seed_f, M, degree=10)
        g = band_limited(seed_g, M, degree=10)
        fg = f * g
        lhs = spectral.mean_zero_primitive(f * spectral.spectral_derivative(g, 1))
        rhs = fg - spectral.mean_zero_primitive(spectral.spectral_derivative(f, 1) * g) - fg.mean()
        assert np.max(np.abs(lhs - rhs)) < 1e-9

    failure = None
    for prop in (postconditions, by_parts):
        try:
            prop()
        except AssertionError as exc:
            failure = exc
    criterion(11, failure is None, "primitive postconditions and integration by parts on "
                                   f"2 x 1000 random band-limited fields to 1e-9: {failure or 'no counterexample'}")
    assert failure is None


def test_12_determinism(tmp_path, criterion):
    same = {}
    for name in ("circle-csf", "slot-growth"):
        a = cli_run(name, tmp_path / f"{name}-a")
        b = cli_run(name, tmp_path / f"{name}-b")
        same[name] = bool(a) and a == b
    ok = all(same.values())
    criterion(12, ok, f"serial re-runs byte-identical: {same}")
    assert ok


def test_06_closure(circle_run, ellipse_refinement, ellipse_to_extinction, free_growth_run, repelled_growth_run, criterion):
    per_run = {
        "circle": max_closure(circle_run[0].records),
        "ellipse refinement": max(max_closure(r[1]) for r in ellipse_refinement[0]),
        "ellipse to extinction": max_closure(ellipse_to_extinction[1]),
        "slot-growth": max_closure(free_growth_run[0].records),
        "slot-growth-repelled": max_closure(repelled_growth_run[0].records),
    }
    worst = max(per_run.values())
    ok = worst < 1e-6
    detail = ", ".join(f"{k} {v:.1e}" for k, v in per_run.items())
    criterion(6, ok, f"max closure defect {worst:.2e} (< 1e-6): {detail}")
    assert ok
