import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from arrestflow import diagnostics as diag, geometry, spectral
from arrestflow.errors import BadParameter, DiagnosticUnavailable, DiagonalPair, NotEmbedded

from fields import smooth_blob

# sup v/u for the 2:1 ellipse: brute force over exact equal-arclength nodes, M=2048
ELLIPSE_PSEUDO = 2.3776542885516507
# 2 [erf(3.88909) - erf(0.70711)/2] at 30 digits
ARREST_EXAMPLE = 1.3173104319046642

KERNELS = [diag.PSEUDO, diag.MOBIUS, diag.KL]


def blob(seed, M=128):
    return geometry.resample_constant_speed(geometry.Curve(smooth_blob(seed, M=M)))


def winding_number(point, polygon):
    d = polygon - point
    ang = np.arctan2(d[:, 1], d[:, 0])
    turn = np.diff(np.append(ang, ang[0]))
    turn = (turn + np.pi) % (2 * np.pi) - np.pi
    return int(round(turn.sum() / (2 * np.pi)))


class TestKernels:
    @pytest.mark.parametrize("kernel", KERNELS)
    def test_diagonal_limits(self, kernel):
        for alpha in (-0.3, 0.0, 0.2, 1.1):
            ell = 1e-5
            q = lambda l: kernel.g(l, 1.0 + alpha * l)
            assert q(ell) == pytest.approx(kernel.q0(alpha), abs=1e-4)
            slope = (q(2 * ell) - q(ell)) / ell
            assert slope == pytest.approx(kernel.q1(alpha), abs=1e-3)

    @pytest.mark.parametrize("kernel", KERNELS)
    def test_monotone_and_convex_in_r(self, kernel):
        r = np.linspace(0.2, 3.0, 300)
        for ell in (0.1, 1.0, 3.9):
            g = kernel.g(ell, r)
            assert np.all(np.diff(g) < 0)
            assert np.all(np.diff(g, 2) > -1e-12)
        rs = np.linspace(0.2, 1.0, 50)
        ells = np.linspace(0.05, 4.0, 50)
        G = kernel.g(ells[:, None], rs[None, :])
        assert np.all(np.diff(G, axis=0) <= 1e-12)

    def test_partials(self):
        for kernel in KERNELS:
            l, r, h = 0.7, 0.6, 1e-6
            assert kernel.g_l(l, r) == pytest.approx((kernel.g(l + h, r) - kernel.g(l - h, r)) / (2 * h), rel=1e-6, abs=1e-9)
            assert kernel.g_r(l, r) == pytest.approx((kernel.g(l, r + h) - kernel.g(l, r - h)) / (2 * h), rel=1e-6)

    def test_lookup(self):
        assert diag.distortion_kernel("kl") is diag.KL
        with pytest.raises(BadParameter):
            diag.distortion_kernel("gromov")


class TestDistortion:
    def test_circle_pseudo(self):
        rep = diag.k_distortion(geometry.circle(M=128), diag.PSEUDO)
        assert rep.value == pytest.approx(1.0, abs=1e-12)
        assert rep.offdiagonal == pytest.approx(rep.diagonal, abs=1e-12)

    def test_circle_mobius(self):
        assert diag.k_distortion(geometry.circle(M=128), "mobius").value == pytest.approx(0.0, abs=1e-12)

    def test_ellipse_against_dense_brute_force(self):
        assert diag.pseudo_distortion(geometry.ellipse(2, 1, M=512)) == pytest.approx(ELLIPSE_PSEUDO, rel=1e-9)

    def test_ellipse_pairs_attain_value(self):
        e = geometry.ellipse(2, 1, M=256, phase=0.5)
        rep = diag.k_distortion(e)
        K, u, v = diag._kernel_matrix(e, diag.PSEUDO)
        for p in rep.pairs:
            assert K[p.i, p.j] == pytest.approx(rep.value, rel=1e-9)
            assert p.orientation == -1
        assert rep.n_realizing == 2

    def test_four_to_one_exceeds_two_to_one(self):
        assert diag.pseudo_distortion(geometry.ellipse(4, 1, M=256)) > diag.pseudo_distortion(geometry.ellipse(2, 1, M=256))

    def test_sandwich_with_gromov(self):
        for c in (geometry.ellipse(2, 1, M=256), geometry.ellipse(4, 1, M=256), blob(3, 256)):
            delta = math.sqrt(diag.pseudo_distortion(c))
            gromov = geometry.gromov_distortion(c)
            tol = 2 * np.pi / c.M
            assert delta <= gromov * (1 + tol)
            assert gromov <= np.pi / 2 * delta * (1 + tol)

    def test_not_embedded(self):
        x = spectral.grid(64)
        with pytest.raises(NotEmbedded):
            diag.k_distortion(geometry.Curve(np.column_stack((np.sin(x), np.sin(x) * np.cos(x)))))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 10**6))
    def test_minimum_at_the_circle(self, seed):
        c = blob(seed)
        for kernel in KERNELS:
            assert diag.k_distortion(c, kernel).value > float(kernel.q0(0.0)) + 1e-6

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10**6), st.integers(1, 127), st.floats(-3, 3))
    def test_relabelling_and_rigid_motion(self, seed, shift, angle):
        c = blob(seed)
        base = diag.k_distortion(c).value
        assert diag.k_distortion(c.shifted(shift)).value == pytest.approx(base, abs=1e-10)
        assert diag.k_distortion(c.rotated(angle).translated((5, -1))).value == pytest.approx(base, abs=1e-10)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10**6))
    def test_realizing_ratio_at_most_one(self, seed):
        c = blob(seed)
        for kernel in KERNELS:
            for p in diag.k_distortion(c, kernel).pairs:
                assert p.r <= 1 + 1e-6


class TestResiduals:
    def test_ellipse_first_order_in_grid(self):
        res = []
        for M in (512, 1024):
            e = geometry.ellipse(2, 1, M=M, phase=0.3)
            pair = diag.k_distortion(e).pairs[0]
            r = diag.realizing_pair_residuals(e, pair)
            assert r.ratio_ok
            res.append(max(r.tangent_x, r.tangent_y))
        assert res[0] < 10.0 / 512
        assert 1.6 <= res[0] / res[1] <= 2.6

    def test_circle_pair(self):
        c = geometry.circle(M=128)
        pair = diag.RealizingPair(i=10, j=70, x=0.0, z=0.0, r=1.0, orientation=-1)
        r = diag.realizing_pair_residuals(c, pair)
        assert max(r.tangent_x, r.tangent_y) < 1e-12
        assert r.ratio == pytest.approx(1.0, abs=1e-12)

    def test_negative_control(self):
        e = geometry.ellipse(2, 1, M=256)
        pair = diag.RealizingPair(i=10, j=60, x=0.0, z=0.0, r=0.0, orientation=-1)
        r = diag.realizing_pair_residuals(e, pair)
        assert max(r.tangent_x, r.tangent_y) > 0.05

    def test_diagonal_pair(self):
        e = geometry.ellipse(2, 1, M=64)
        with pytest.raises(DiagonalPair):
            diag.realizing_pair_residuals(e, diag.RealizingPair(5, 7, 0.0, 0.0, 1.0, -1))


class TestSeparationBound:
    def test_ellipse(self):
        e = geometry.ellipse(2, 1, M=512)
        lhs, rhs, ok = diag.realizing_separation_bound(e, diag.k_distortion(e))
        assert ok and lhs >= rhs

    def test_circle_unavailable(self):
        c = geometry.circle(M=64)
        with pytest.raises(DiagnosticUnavailable):
            diag.realizing_separation_bound(c, diag.k_distortion(c))

    def test_four_to_one_stable_under_refinement(self):
        out = []
        for M in (512, 1024):
            e = geometry.ellipse(4, 1, M=M)
            out.append(diag.realizing_separation_bound(e, diag.k_distortion(e)))
        assert out[0][2] and out[1][2]
        assert abs(out[0][0] - out[1][0]) <= 2 * np.pi / 512


def test_monotonicity_factor():
    z = np.linspace(0, np.pi, 400)
    h = diag.monotonicity_factor(z)
    assert h[0] == 0.0
    assert np.all(np.diff(h) > 0)
    assert diag.monotonicity_factor(1e-5) == pytest.approx(1e-10 / 12, rel=1e-6)


class TestOrientation:
    @settings(max_examples=10, deadline=None)
    @given(st.integers(0, 10**6))
    def test_matches_winding_number_oracle(self, seed):
        rng = np.random.default_rng(seed)
        c = blob(seed, M=64)
        for _ in range(10):
            # adjacent nodes put the midpoint on the polygon edge; the kernel skips them too
            i = int(rng.integers(64))
            j = (i + int(rng.integers(2, 63))) % 64
            mid = 0.5 * (c.points[i] + c.points[j])
            inside = winding_number(mid, c.points) != 0
            assert diag.chord_orientation(c, i, j) == (-1 if inside else 1)

    def test_exterior_chord_of_horseshoe(self):
        h = geometry.horseshoe(M=256)
        rep = diag.k_distortion(h)
        assert rep.pairs[0].orientation == 1


class TestSelfIntersections:
    def test_circle(self):
        assert diag.self_intersections(geometry.circle(M=64)) == []

    def test_figure_eight(self):
        x = spectral.grid(64) + np.pi / 64  # no node at the crossing
        hits = diag.self_intersections(np.column_stack((np.sin(x), np.sin(x) * np.cos(x))))
        assert len(hits) == 1
        assert hits[0].point == pytest.approx((0.0, 0.0), abs=1e-12)

    def test_near_touch_is_not_a_crossing(self):
        p = geometry.peanut(neck=0.995, M=64)  # neck width 0.01
        assert diag.self_intersections(p) == []

    def test_touching_segments(self):
        square_with_touch = np.array([[0, 0], [2, 0], [2, 2], [1, 0], [0, 2]], dtype=float)
        assert len(diag.self_intersections(square_with_touch)) >= 1


class TestArrest:
    def test_example(self):
        assert diag.arrest_bound(0.1, 1.0, 1.0, 0.1, 1.0) == pytest.approx(ARREST_EXAMPLE, rel=1e-15)

    @pytest.mark.parametrize("z", [0.1, 1.0, 3.0])
    def test_no_chord(self, z):
        expected = 2 * math.erf(z / (2 * math.sqrt(2) * 0.3))
        assert diag.arrest_bound(0.0, z, 1.0, 0.3, 1.0) == pytest.approx(expected, rel=1e-15)

    def test_wide_kernel_limit(self):
        assert diag.arrest_bound(0.5, 1.0, 1.0, 1e12, 1.0) == pytest.approx(0.0, abs=1e-11)

    def test_rejects(self):
        with pytest.raises(BadParameter):
            diag.arrest_bound(-0.1, 1.0, 1.0, 0.1, 1.0)

    @pytest.mark.parametrize(
        "c, beta, expected",
        [(-1.5, 1.0, True), (-0.5, 1.0, False), (1.5, 1.0, False), (-2.0, 1.0, False), (-1.0, 1.0, False)],
    )
    def test_regime(self, c, beta, expected):
        assert diag.arrest_regime_check(c, beta) is expected

    def test_min_gap_pair(self):
        e = geometry.ellipse(2, 1, M=256, phase=0.5)
        rep = diag.k_distortion(e)
        pair, d = diag.min_gap_pair(e, rep)
        phi = diag.unit_shape(e)
        assert d == pytest.approx(np.hypot(*(phi[pair.j] - phi[pair.i])))
        assert pair in rep.pairs
