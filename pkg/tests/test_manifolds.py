"""Catalog geometry: metric invariants, curvature oracles, geodesics, distance."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gradest import manifolds as man
from gradest.errors import (
    ChartError,
    DegeneracyError,
    DomainError,
    EscapeError,
    ParameterError,
    UnsupportedError,
)


def catalog():
    return [
        man.euclidean(2),
        man.euclidean(3),
        man.sphere(2, 1.0),
        man.sphere(3, 1.5),
        man.hyperbolic(2, 1.0),
        man.hyperbolic(3, 1.0),
        man.flat_torus([1.0, 1.0]),
        man.cusp_surface(20.0),
    ]


def sample_points(M, n, seed=0, scale=0.4):
    rng = np.random.Generator(np.random.PCG64(seed))
    if M.kind == "warped2d":
        t0, t1 = M.params["t_range"]
        pts = np.stack([rng.uniform(t0 + 0.2, min(t1, 6.0), n),
                        rng.uniform(0.0, 2 * math.pi, n)], axis=-1)
        return pts
    return rng.uniform(-scale, scale, size=(n, M.dim))


@pytest.mark.parametrize("M", catalog(), ids=lambda M: M.describe())
def test_metric_symmetric_positive_definite(M):
    pts = sample_points(M, 50)
    g = M.chart.metric(pts)
    assert np.max(np.abs(g - np.swapaxes(g, -1, -2))) <= 1e-14
    assert np.min(np.linalg.eigvalsh(g)) > 0.0


@pytest.mark.parametrize("M", catalog(), ids=lambda M: M.describe())
def test_closed_form_metric_derivs_match_differences(M):
    pts = sample_points(M, 20, seed=3)
    exact = M.chart.metric_derivs(pts)
    fd_chart = man.MetricChart(dim=M.dim, lo=M.chart.lo, hi=M.chart.hi,
                               g=M.chart.g, g_derivs=None)
    approx = fd_chart.metric_derivs(pts)
    assert np.max(np.abs(exact - approx)) < 1e-7


def test_christoffel_euclidean_zero():
    E = man.euclidean(3)
    gamma = man.christoffel(E, [0.2, -0.1, 0.4])
    assert np.max(np.abs(gamma)) == 0.0


def test_christoffel_sphere_polar_oracle():
    # Transform the Cartesian-chart symbols to polar coordinates with the
    # standard change-of-variables law and compare with dr^2 + sin^2 r dth^2.
    S = man.sphere(2, 1.0)
    r, th = 0.7, 0.4
    x = np.array([r * math.cos(th), r * math.sin(th)])
    gamma = man.christoffel(S, x)
    # jacobians of x(r, th) and the inverse
    dx_dy = np.array([[math.cos(th), -r * math.sin(th)],
                      [math.sin(th), r * math.cos(th)]])
    dy_dx = np.linalg.inv(dx_dy)
    # second derivatives d^2 x^k / dy^a dy^b
    d2x = np.zeros((2, 2, 2))
    d2x[0, 0, 1] = d2x[0, 1, 0] = -math.sin(th)
    d2x[0, 1, 1] = -r * math.cos(th)
    d2x[1, 0, 1] = d2x[1, 1, 0] = math.cos(th)
    d2x[1, 1, 1] = -r * math.sin(th)
    polar = (np.einsum("ck,kij,ia,jb->cab", dy_dx, gamma, dx_dy, dx_dy)
             + np.einsum("ck,kab->cab", dy_dx, d2x))
    assert polar[0, 1, 1] == pytest.approx(-math.sin(r) * math.cos(r), abs=1e-9)
    assert polar[1, 0, 1] == pytest.approx(math.cos(r) / math.sin(r), abs=1e-9)


def test_christoffel_warped_fd_matches_closed_form():
    warp = man.Warp(name="wavy",
                    f=lambda t: 1.0 + 0.3 * np.sin(t),
                    df=lambda t: 0.3 * np.cos(t),
                    d2f=lambda t: -0.3 * np.sin(t))
    M = man.warped_product_2d(warp, (0.0, 6.0))
    fd_chart = man.MetricChart(dim=2, lo=M.chart.lo, hi=M.chart.hi,
                               g=M.chart.g, g_derivs=None)
    pts = sample_points(M, 30, seed=5)
    gamma_closed = man._christoffel_batch(M.chart, pts)
    gamma_fd = man._christoffel_batch(fd_chart, pts)
    assert np.max(np.abs(gamma_closed - gamma_fd)) < 1e-6
    # closed-form oracle from f, f'
    t = pts[:, 0]
    f, df = warp.f(t), warp.df(t)
    assert np.max(np.abs(gamma_closed[:, 0, 1, 1] - (-f * df))) < 1e-9
    assert np.max(np.abs(gamma_closed[:, 1, 0, 1] - df / f)) < 1e-9


def test_christoffel_domain_error():
    S = man.sphere(2, 1.0)
    with pytest.raises(DomainError):
        man.christoffel(S, [4.0, 0.0])


@pytest.mark.parametrize("M,expected", [
    (man.euclidean(2), 0.0),
    (man.sphere(2, 2.0), 0.25),
    (man.hyperbolic(3, 1.0), -1.0),
    (man.sphere(3, 0.5), 4.0),
    (man.flat_torus([1.0, 2.0]), 0.0),
])
def test_sectional_constant_values(M, expected):
    rng = np.random.Generator(np.random.PCG64(1))
    for _ in range(5):
        p = rng.uniform(-0.3, 0.3, M.dim)
        u = rng.standard_normal(M.dim)
        v = rng.standard_normal(M.dim)
        assert man.sectional_curvature(M, p, u, v) == pytest.approx(expected, abs=1e-7)


def test_sectional_sec_const_sampled_100_points():
    for M in (man.sphere(2, 1.0), man.sphere(3, 1.5), man.hyperbolic(2, 1.0),
              man.euclidean(2)):
        rng = np.random.Generator(np.random.PCG64(7))
        pts = sample_points(M, 100, seed=7)
        for p in pts[:100]:
            u = rng.standard_normal(M.dim)
            v = rng.standard_normal(M.dim)
            K = man.sectional_curvature(M, p, u, v)
            assert K == pytest.approx(M.sec_const, abs=1e-8)


@settings(max_examples=25, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3), c=st.floats(-3, 3), d=st.floats(-3, 3))
def test_sectional_basis_invariance(a, b, c, d):
    if abs(a * d - b * c) < 1e-3:
        return
    S = man.sphere(3, 1.3)
    p = np.array([0.2, -0.1, 0.3])
    u = np.array([1.0, 0.4, -0.2])
    v = np.array([-0.3, 1.0, 0.5])
    k1 = man.sectional_curvature(S, p, u, v)
    k2 = man.sectional_curvature(S, p, a * u + b * v, c * u + d * v)
    assert k2 == pytest.approx(k1, abs=1e-9)


def test_sectional_degenerate_raises():
    E = man.euclidean(2)
    with pytest.raises(DegeneracyError):
        man.sectional_curvature(E, [0.0, 0.0], [1.0, 2.0], [2.0, 4.0])


@pytest.mark.parametrize("M,expected", [
    (man.euclidean(3), 0.0),
    (man.sphere(2, 1.0), 1.0),
    (man.sphere(3, 1.5), 2.0 / 1.5 ** 2),
    (man.hyperbolic(2, 1.0), -1.0),
    (man.hyperbolic(3, 2.0), -2.0 / 4.0),
])
def test_ricci_min_eigenvalue(M, expected):
    for p in sample_points(M, 5, seed=11):
        assert man.ricci_min_eigenvalue(M, p) == pytest.approx(expected, abs=1e-7)


def test_fd_curvature_matches_closed_form_on_catalog():
    # fully finite-difference chart (no closed-form derivatives) vs the
    # constant-curvature values, 100 random points each
    for M, K in [(man.sphere(2, 1.0), 1.0), (man.hyperbolic(2, 1.0), -1.0),
                 (man.euclidean(2), 0.0)]:
        fd_chart = man.MetricChart(dim=M.dim, lo=M.chart.lo, hi=M.chart.hi,
                                   g=M.chart.g, g_derivs=None)
        pts = sample_points(M, 100, seed=13)
        riem = man._riemann_batch(fd_chart, pts)
        g = fd_chart.metric(pts)
        rng = np.random.Generator(np.random.PCG64(13))
        U = rng.standard_normal((pts.shape[0], M.dim))
        V = rng.standard_normal((pts.shape[0], M.dim))
        num, denom, _, _ = man._sectional_from_riemann(g, riem, U, V)
        assert np.max(np.abs(num / denom - K)) < 1e-5


def test_warped_curvature_profile():
    M = man.cusp_surface(20.0)
    pts = sample_points(M, 100, seed=17)
    warp = M.params["warp"]
    expected = -warp.d2f(pts[:, 0]) / warp.f(pts[:, 0])
    for p, K in zip(pts, expected):
        got = man.sectional_curvature(M, p, [1.0, 0.0], [0.0, 1.0])
        assert got == pytest.approx(K, abs=1e-5)


@pytest.mark.parametrize("lam", [0.5, 2.0])
def test_metric_scaling_of_curvature(lam):
    for M in (man.sphere(2, 1.0), man.hyperbolic(2, 1.0), man.sphere(3, 1.5)):
        M2 = M.scaled(lam)
        rng = np.random.Generator(np.random.PCG64(19))
        for _ in range(5):
            p = rng.uniform(-0.3, 0.3, M.dim)
            u = rng.standard_normal(M.dim)
            v = rng.standard_normal(M.dim)
            k = man.sectional_curvature(M, p, u, v)
            k2 = man.sectional_curvature(M2, lam * p, u, v)
            assert k2 == pytest.approx(k / lam ** 2, abs=1e-8)
            r = man.ricci_min_eigenvalue(M, p)
            r2 = man.ricci_min_eigenvalue(M2, lam * p)
            assert r2 == pytest.approx(r / lam ** 2, abs=1e-8)


class TestCurvatureBounds:
    def test_flat(self):
        b = man.curvature_bounds_on_ball(man.euclidean(2), [0.0, 0.0], 1.0, 1e-6)
        assert b.sigma == 0.0 and b.rho == 0.0
        assert b.a1 == 1e-6 and b.a2 == 1e-6

    def test_sphere(self):
        b = man.curvature_bounds_on_ball(man.sphere(2, 1.0), [0.0, 0.0], 1.0, 1e-6)
        assert b.sigma == pytest.approx(1.0, abs=1e-4)
        assert b.rho == pytest.approx(1.0, abs=1e-4)
        assert b.a1 == pytest.approx(1.0, abs=1e-4)
        assert b.a2 == 1e-6

    def test_arithmetic_identities(self):
        for sigma, rho in [(2.0, -3.0), (-1.0, 4.0), (0.0, 0.0)]:
            b = man.CurvatureBounds.from_extremes(sigma, rho, 1e-6)
            assert b.a1 == max(max(sigma, 0.0), 1e-6)
            assert b.a2 == -min(min(rho, 0.0), -1e-6)
            assert b.a1 >= 1e-6 and b.a2 >= 1e-6

    def test_warped_profile(self):
        M = man.cusp_surface(20.0)
        warp = M.params["warp"]
        x = np.array([2.0, 0.0])
        b = man.curvature_bounds_on_ball(M, x, 1.0, 1e-6,
                                         man.SamplingSpec(nodes_per_axis=41))
        ts = np.linspace(1.0, 3.0, 2001)
        prof = -warp.d2f(ts) / warp.f(ts)
        assert b.sigma == pytest.approx(float(np.max(prof)), abs=1e-4)
        assert b.rho == pytest.approx(float(np.min(prof)), abs=1e-4)

    def test_chart_error(self):
        with pytest.raises(ChartError):
            man.curvature_bounds_on_ball(man.sphere(2, 1.0), [0.0, 0.0], 3.5, 1e-6)

    def test_epsilon_validation(self):
        with pytest.raises(ParameterError):
            man.curvature_bounds_on_ball(man.euclidean(2), [0.0, 0.0], 1.0, -1.0)


class TestGeodesics:
    def test_euclidean_straight_line(self):
        E = man.euclidean(2)
        times, pts, vels = man.geodesic_flow(E, [0.1, -0.2], [0.3, 0.7], 1.0, 1e-2)
        expected = np.array([0.1, -0.2]) + times[:, None] * np.array([0.3, 0.7])
        assert np.max(np.abs(pts - expected)) < 1e-13

    def test_sphere_ray_endpoint(self):
        S = man.sphere(2, 1.0)
        end = man.exp_map(S, [0.0, 0.0], [math.pi / 2, 0.0])
        assert np.linalg.norm(end) == pytest.approx(math.pi / 2, abs=1e-8)

    def test_richardson_order(self):
        S = man.sphere(2, 1.0)
        x, v = [0.4, 0.0], [0.0, 1.0]
        ref = man.geodesic_flow(S, x, v, 1.0, 1.0 / 512)[1][-1]
        e1 = np.linalg.norm(man.geodesic_flow(S, x, v, 1.0, 1.0 / 16)[1][-1] - ref)
        e2 = np.linalg.norm(man.geodesic_flow(S, x, v, 1.0, 1.0 / 32)[1][-1] - ref)
        assert e1 / e2 >= 2 ** 3.5

    @pytest.mark.parametrize("M", [man.sphere(2, 1.0), man.hyperbolic(2, 1.0)],
                             ids=["sphere", "hyperbolic"])
    def test_energy_conservation(self, M):
        x, v = np.array([0.3, 0.1]), np.array([0.5, -0.8])
        times, pts, vels = man.geodesic_flow(M, x, v, math.pi, 1e-3)
        g = M.chart.metric(pts)
        speeds = np.sqrt(np.einsum("tij,ti,tj->t", g, vels, vels))
        assert np.max(np.abs(speeds - speeds[0])) / speeds[0] < 1e-8

    def test_escape_error(self):
        M = man.cusp_surface(5.0)
        with pytest.raises(EscapeError) as err:
            man.geodesic_flow(M, [0.5, 0.0], [-1.0, 0.0], 2.0, 1e-2)
        assert err.value.exit_time is not None
        assert 0.0 < err.value.exit_time <= 2.0


class TestExpMap:
    def test_zero_vector(self):
        S = man.sphere(2, 1.0)
        assert np.allclose(man.exp_map(S, [0.0, 0.0], [0.0, 0.0]), [0.0, 0.0])

    def test_euclidean_translation(self):
        E = man.euclidean(3)
        out = man.exp_map(E, [1.0, 2.0, 3.0], [0.5, -0.5, 0.25])
        assert np.max(np.abs(out - [1.5, 1.5, 3.25])) < 1e-12

    def test_normal_coordinate_identity(self):
        # radial geodesics from the chart base are straight in coordinates
        for M in (man.sphere(2, 1.0), man.hyperbolic(2, 1.0)):
            v = np.array([0.6, -0.8])
            out = man.exp_map(M, [0.0, 0.0], v)
            assert np.max(np.abs(out - v)) < 1e-6

    def test_sphere_distance_oracle(self):
        S = man.sphere(2, 1.0)
        rng = np.random.Generator(np.random.PCG64(23))
        for _ in range(5):
            v = rng.uniform(-1.2, 1.2, 2)
            d = man.geodesic_distance(S, [0.0, 0.0], man.exp_map(S, [0.0, 0.0], v))
            assert d == pytest.approx(np.linalg.norm(v), abs=1e-6)


class TestDistance:
    def test_self_distance_zero(self):
        for M in (man.euclidean(2), man.sphere(2, 1.0), man.hyperbolic(2, 1.0),
                  man.flat_torus([1.0, 1.0])):
            p = np.full(M.dim, 0.1)
            assert man.geodesic_distance(M, p, p) == 0.0

    def test_torus_wraparound(self):
        T = man.flat_torus([1.0, 1.0])
        # brute-force oracle over all shifts |k| <= 1
        x, y = np.array([0.1, 0.0]), np.array([0.9, 0.0])
        best = min(np.linalg.norm(x - y + np.array([i, j]))
                   for i in (-1, 0, 1) for j in (-1, 0, 1))
        assert best == pytest.approx(0.2)
        assert man.geodesic_distance(T, x, y) == pytest.approx(0.2, abs=1e-14)

    def test_sphere_angle(self):
        S = man.sphere(2, 1.0)
        a = np.array([math.pi / 3, 0.0])
        b = np.array([0.0, 0.0])
        assert man.geodesic_distance(S, b, a) == pytest.approx(math.pi / 3, abs=1e-12)
        # great-circle oracle: cos d = cos r1 cos r2 + sin r1 sin r2 cos(dtheta)
        p = np.array([0.4, 0.0])
        q = np.array([0.0, 0.3])
        oracle = math.acos(math.cos(0.4) * math.cos(0.3))
        assert man.geodesic_distance(S, p, q) == pytest.approx(oracle, abs=1e-12)

    def test_hyperbolic_radial(self):
        H = man.hyperbolic(2, 2.0)
        p = np.array([0.7, 0.0])
        assert man.geodesic_distance(H, [0.0, 0.0], p) == pytest.approx(0.7, abs=1e-12)

    def test_warped_unsupported(self):
        M = man.cusp_surface(10.0)
        with pytest.raises(UnsupportedError):
            man.geodesic_distance(M, [1.0, 0.0], [2.0, 0.0])


def test_injectivity_radii():
    assert man.euclidean(2).inj_radius_at([0.0, 0.0]) == math.inf
    assert man.hyperbolic(2, 1.0).inj_radius_at([0.0, 0.0]) == math.inf
    assert man.sphere(2, 2.0).inj_radius_at([0.0, 0.0]) == pytest.approx(2 * math.pi)
    assert man.flat_torus([1.0, 3.0]).inj_radius_at([0.0, 0.0]) == 0.5
