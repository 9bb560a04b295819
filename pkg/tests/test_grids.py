"""Ball grids: lattice enumeration, classification, arms, fields, CSV."""

import math

import numpy as np
import pytest

from gradest import manifolds as man
from gradest.errors import ChartError, ParameterError
from gradest.grids import INTERIOR, RIM, BallGrid, ScalarField, build_ball_grid


def brute_force_counts(r, h):
    """Oracle: lattice points of h*Z^2 in the closed disk of radius r, and
    how many of them are strictly inside with all four neighbors present."""
    k = int(math.floor(r / h)) + 2
    nodes = []
    for i in range(-k, k + 1):
        for j in range(-k, k + 1):
            if math.hypot(i * h, j * h) <= r * (1 + 1e-12):
                nodes.append((i, j))
    node_set = set(nodes)
    interior = [
        (i, j) for (i, j) in nodes
        if math.hypot(i * h, j * h) < r * (1 - 1e-12)
        and all(n in node_set for n in ((i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1)))
    ]
    return len(nodes), len(interior)


def test_unit_disk_half_spacing_counts():
    n_nodes, n_interior = brute_force_counts(1.0, 0.5)
    assert (n_nodes, n_interior) == (13, 5)
    g = build_ball_grid(man.euclidean(2), [0.0, 0.0], 1.0, 0.5)
    assert g.n_nodes == 13
    assert int(np.sum(g.classes == INTERIOR)) == 5


@pytest.mark.parametrize("r,h", [(1.0, 1 / 8), (0.7, 1 / 16)])
def test_counts_match_bruteforce(r, h):
    n_nodes, n_interior = brute_force_counts(r, h)
    g = build_ball_grid(man.euclidean(2), [0.0, 0.0], r, h)
    assert g.n_nodes == n_nodes
    assert int(np.sum(g.classes == INTERIOR)) == n_interior


def test_sphere_radius_at_injectivity_raises():
    with pytest.raises(ChartError):
        build_ball_grid(man.sphere(2, 1.0), [0.0, 0.0], math.pi, 0.1)


def test_offcenter_curved_chart_raises():
    with pytest.raises(ChartError):
        build_ball_grid(man.sphere(2, 1.0), [0.3, 0.0], 0.5, 0.05)


def test_warped_chart_rejected():
    with pytest.raises(ChartError):
        build_ball_grid(man.cusp_surface(10.0), [1.0, 0.0], 0.5, 0.05)


@pytest.mark.parametrize("m", [2, 3])
def test_halving_h_grows_count_by_two_to_the_m(m):
    E = man.euclidean(m)
    g1 = build_ball_grid(E, np.zeros(m), 1.0, 1 / 8)
    g2 = build_ball_grid(E, np.zeros(m), 1.0, 1 / 16)
    ratio = g2.n_nodes / g1.n_nodes
    assert ratio == pytest.approx(2 ** m, rel=0.25)


def test_interior_nodes_have_all_neighbors():
    g = build_ball_grid(man.euclidean(2), [0.0, 0.0], 1.0, 1 / 8)
    assert np.all(g.neighbors[g.interior_mask] >= 0)


def test_node_norms_within_radius_and_arms_in_range():
    g = build_ball_grid(man.sphere(2, 1.0), [0.0, 0.0], 0.8, 0.05)
    assert np.max(g.coordinate_radii()) <= 0.8 * (1 + 1e-9)
    cut = g.cut_mask
    missing = g.neighbors[cut] < 0
    arms = g.arms[cut]
    assert np.all(arms[missing] > 0)
    assert np.all(arms[missing] <= 0.05 * (1 + 1e-12))
    # arm endpoints land on the sphere
    for node in np.flatnonzero(cut)[:20]:
        for d in range(2):
            for side in range(2):
                b = g.arm_boundary_idx[node, d, side]
                if b >= 0:
                    assert np.linalg.norm(g.boundary_points[b]) == pytest.approx(0.8, abs=1e-10)


def test_spacing_guard():
    with pytest.raises(ParameterError):
        build_ball_grid(man.euclidean(2), [0.0, 0.0], 1.0, 0.6)


def test_rim_nodes_are_boundary_points():
    g = build_ball_grid(man.euclidean(2), [0.0, 0.0], 1.0, 0.25)
    rim = np.flatnonzero(g.classes == RIM)
    assert rim.size > 0
    for node in rim:
        b = g.rim_boundary_idx[node]
        assert b >= 0
        assert np.allclose(g.boundary_points[b], g.nodes[node])


def test_select_ball_nested():
    g = build_ball_grid(man.euclidean(2), [0.0, 0.0], 1.0, 1 / 8)
    inner = g.select_ball(0.5)
    outer = g.select_ball(0.75)
    assert np.all(outer[inner])
    assert inner.sum() < outer.sum() <= g.n_nodes


class TestScalarField:
    def test_from_function_and_validation(self):
        g = build_ball_grid(man.euclidean(2), [0.0, 0.0], 1.0, 0.25)
        f = ScalarField.from_function(g, lambda p: p[..., 0] + p[..., 1])
        assert f.values.shape == (g.n_nodes,)
        with pytest.raises(ParameterError):
            ScalarField(g, np.ones(3))
        bad = np.ones(g.n_nodes)
        bad[0] = np.nan
        with pytest.raises(ParameterError):
            ScalarField(g, bad)

    def test_csv_roundtrip(self, tmp_path):
        g = build_ball_grid(man.sphere(2, 1.0), [0.0, 0.0], 0.5, 0.1)
        f = ScalarField.from_function(g, lambda p: np.cos(np.linalg.norm(p, axis=-1)))
        path = tmp_path / "field.csv"
        f.to_csv(path)
        back = ScalarField.from_csv(g, path)
        assert np.array_equal(back.values, f.values)

    def test_boundary_values_shapes(self):
        g = build_ball_grid(man.euclidean(2), [0.0, 0.0], 1.0, 0.25)
        vals = g.boundary_values(lambda p: p[0])
        assert vals.shape == (g.boundary_points.shape[0],)
        same = g.boundary_values(vals)
        assert np.array_equal(same, vals)
        with pytest.raises(ParameterError):
            g.boundary_values(np.ones(3))
