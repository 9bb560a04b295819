"""Discrete gradient norm and Laplace-Beltrami operator."""

import math

import numpy as np
import pytest

from gradest import funcs
from gradest import manifolds as man
from gradest.grids import ScalarField, build_ball_grid
from gradest.operators import assemble_laplacian, drift_coefficients, gradient_norm


def consistency_sup(M, psi, r, h):
    """sup |L psi_h - (Delta psi)_exact| over full-stencil interior nodes."""
    grid = build_ball_grid(M, np.zeros(M.dim), r, h)
    op = assemble_laplacian(grid)
    field = ScalarField.from_function(grid, psi.value)
    lap = psi.manifold_laplacian(M)
    applied = op.apply(field, boundary=lambda p: float(psi.value(p[None, :])[0]))
    exact = lap(grid.nodes)[grid.unknown_nodes]
    deep = grid.deep_mask()[grid.unknown_nodes]
    return float(np.max(np.abs(applied - exact)[deep]))


class TestGradientNorm:
    def test_coordinate_function_is_one_everywhere(self):
        g = build_ball_grid(man.euclidean(2), [0.0, 0.0], 1.0, 1 / 8)
        out = gradient_norm(ScalarField.from_function(g, lambda p: p[..., 0]))
        assert np.max(np.abs(out.values - 1.0)) < 1e-12

    def test_constant_is_zero(self):
        g = build_ball_grid(man.euclidean(2), [0.0, 0.0], 1.0, 1 / 8)
        out = gradient_norm(ScalarField(g, np.full(g.n_nodes, 2.5)))
        assert np.max(out.values) < 1e-12

    def test_nonnegative_on_random_fields(self):
        g = build_ball_grid(man.hyperbolic(2, 1.0), [0.0, 0.0], 0.5, 0.05)
        rng = np.random.Generator(np.random.PCG64(0))
        out = gradient_norm(ScalarField(g, rng.standard_normal(g.n_nodes)))
        assert np.all(out.values >= 0.0)

    @pytest.mark.parametrize("h", [1 / 16, 1 / 32])
    def test_sphere_radial_oracle_second_order(self, h):
        S = man.sphere(2, 1.0)
        g = build_ball_grid(S, [0.0, 0.0], 1.0, h)
        out = gradient_norm(ScalarField.from_function(
            g, lambda p: np.cos(np.linalg.norm(p, axis=-1))))
        exact = np.abs(np.sin(np.linalg.norm(g.nodes, axis=1)))
        err = np.max(np.abs(out.values - exact)[g.deep_mask()])
        assert err < 0.2 * h ** 2 / (1 / 16)  # scales like h^2 from the 1/16 anchor


class TestLaplacian:
    def test_euclidean_stencil_row(self):
        m, h = 2, 1 / 8
        g = build_ball_grid(man.euclidean(m), np.zeros(m), 1.0, h)
        op = assemble_laplacian(g)
        node = int(np.argmin(g.coordinate_radii()))
        row = op.node_matrix[g.unknown_index[node]].toarray().ravel()
        assert row[node] == pytest.approx(-2 * m / h ** 2)
        nbr = g.neighbors[node].ravel()
        assert np.allclose(row[nbr], 1 / h ** 2)
        assert np.count_nonzero(row) == 2 * m + 1

    def test_annihilates_constants(self):
        for M in (man.euclidean(2), man.sphere(2, 1.0), man.hyperbolic(2, 1.0)):
            g = build_ball_grid(M, np.zeros(2), 0.8, 0.05)
            op = assemble_laplacian(g)
            ones = ScalarField(g, np.ones(g.n_nodes))
            out = op.apply(ones, boundary=lambda p: 1.0)
            assert np.max(np.abs(out)) < 1e-10

    def test_exact_on_quadratics_with_constant_metric(self):
        def q(p):
            p = np.asarray(p, dtype=float)
            return 2 * p[..., 0] ** 2 - 3 * p[..., 0] * p[..., 1] + 0.5 * p[..., 1] ** 2

        g = build_ball_grid(man.euclidean(2), [0.0, 0.0], 1.0, 1 / 8)
        op = assemble_laplacian(g)
        out = op.apply(ScalarField.from_function(g, q),
                       boundary=lambda p: float(q(p[None, :])[0]))
        assert np.max(np.abs(out - 5.0)) < 1e-10

    def test_linearity(self):
        g = build_ball_grid(man.sphere(2, 1.0), [0.0, 0.0], 0.8, 0.05)
        op = assemble_laplacian(g)
        rng = np.random.Generator(np.random.PCG64(1))
        u = ScalarField(g, rng.standard_normal(g.n_nodes))
        v = ScalarField(g, rng.standard_normal(g.n_nodes))
        a, b = 1.7, -0.3
        combo = ScalarField(g, a * u.values + b * v.values)
        lhs = op.apply(combo)
        rhs = a * op.apply(u) + b * op.apply(v)
        assert np.max(np.abs(lhs - rhs)) < 1e-12 * max(1.0, np.max(np.abs(lhs)))

    def test_sparse_structure(self):
        g = build_ball_grid(man.euclidean(2), [0.0, 0.0], 1.0, 1 / 8)
        op = assemble_laplacian(g)
        assert op.node_matrix.shape[0] == g.n_unknowns
        assert np.all(op.node_matrix.data != 0.0)
        assert np.all(np.abs(op.node_matrix.data) > 1e-300)

    def test_sphere_eigenfunction_residual_decays(self):
        S = man.sphere(2, 1.0)
        cosr = funcs.cos_of_radius()
        errs = [consistency_sup(S, cosr, 1.0, h) for h in (1 / 16, 1 / 32)]
        assert errs[1] < errs[0] / 3.0

    @pytest.mark.parametrize("M,psi", [
        (man.euclidean(2), funcs.RadialFunction(
            u=lambda r: np.exp(-r * r), du=lambda r: -2 * r * np.exp(-r * r),
            d2u=lambda r: (4 * r * r - 2) * np.exp(-r * r), name="gauss")),
        (man.euclidean(3), funcs.RadialFunction(
            u=lambda r: np.exp(-r * r), du=lambda r: -2 * r * np.exp(-r * r),
            d2u=lambda r: (4 * r * r - 2) * np.exp(-r * r), name="gauss")),
        (man.sphere(2, 1.0), funcs.cos_of_radius()),
        (man.hyperbolic(2, 1.0), funcs.RadialFunction(
            u=np.cosh, du=np.sinh, d2u=np.cosh, name="cosh_r")),
        (man.flat_torus([4.0, 4.0]), funcs.RadialFunction(
            u=lambda r: np.exp(-r * r), du=lambda r: -2 * r * np.exp(-r * r),
            d2u=lambda r: (4 * r * r - 2) * np.exp(-r * r), name="gauss")),
    ], ids=["euclid2", "euclid3", "sphere", "hyperbolic", "torus"])
    def test_consistency_order(self, M, psi):
        r = 0.5 if M.dim == 3 else 1.0
        hs = [r / 8, r / 16, r / 32]
        errs = [consistency_sup(M, psi, r, h) for h in hs]
        orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
        assert min(orders) >= 1.8

    def test_drift_vanishes_on_flat_space(self):
        g = build_ball_grid(man.euclidean(3), np.zeros(3), 0.5, 0.1)
        assert np.max(np.abs(drift_coefficients(g))) == 0.0


@pytest.mark.parametrize("lam", [0.5, 2.0])
def test_scaling_of_gradient_and_laplacian(lam):
    # On the rescaled manifold with pulled-back field, gradients pick up 1/lam
    # and Laplacians 1/lam^2 at corresponding nodes.
    S = man.sphere(2, 1.0)
    S2 = S.scaled(lam)
    psi = funcs.standard_quadratic(2)
    psi2 = lambda p: psi.value(np.asarray(p) / lam)

    g1 = build_ball_grid(S, [0.0, 0.0], 0.5, 1 / 32)
    g2 = build_ball_grid(S2, [0.0, 0.0], lam * 0.5, lam / 32)
    assert np.allclose(g2.nodes, lam * g1.nodes)

    f1 = ScalarField.from_function(g1, psi.value)
    f2 = ScalarField.from_function(g2, psi2)
    gr1 = gradient_norm(f1).values
    gr2 = gradient_norm(f2).values
    assert np.max(np.abs(gr2 - gr1 / lam)) < 1e-9 * max(1.0, np.max(gr1))

    op1 = assemble_laplacian(g1)
    op2 = assemble_laplacian(g2)
    l1 = op1.apply(f1, boundary=lambda p: float(psi.value(p[None, :])[0]))
    l2 = op2.apply(f2, boundary=lambda p: float(psi2(p[None, :])[0]))
    assert np.max(np.abs(l2 - l1 / lam ** 2)) < 1e-9 * max(1.0, np.max(np.abs(l1)))
