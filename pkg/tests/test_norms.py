"""Sup/L^q/W^{2,q} norms and Hoelder seminorms on ball grids."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gradest import manifolds as man
from gradest.errors import ParameterError, RegionError
from gradest.grids import ScalarField, build_ball_grid
from gradest.norms import holder_seminorm, lq_norm, norms


@pytest.fixture(scope="module")
def disk_grid():
    return build_ball_grid(man.euclidean(2), [0.0, 0.0], 1.0, 1 / 16)


def test_constant_field(disk_grid):
    f = ScalarField(disk_grid, np.full(disk_grid.n_nodes, -2.0))
    rep = norms(f, 1.0, q=2.0, alpha=0.5)
    assert rep.sup_norm == 2.0
    assert rep.holder_seminorm[0.5] == 0.0
    # L^2 of a constant is |c| * sqrt(area); midpoint area of the disk is
    # accurate to a few percent at this spacing
    assert rep.lq_norms[2.0] == pytest.approx(2.0 * math.sqrt(math.pi), rel=0.03)


def test_coordinate_holder_seminorm_exact(disk_grid):
    f = ScalarField.from_function(disk_grid, lambda p: p[..., 0])
    for alpha in (0.3, 0.5, 1.0):
        rep = norms(f, 1.0, q=2.0, alpha=alpha)
        assert rep.holder_seminorm[alpha] == pytest.approx(2.0 ** (1 - alpha), rel=1e-12)
    # and over the half ball, the diameter pair is (-0.5, 0), (0.5, 0)
    rep = norms(f, 0.5, q=2.0, alpha=0.25)
    assert rep.holder_seminorm[0.25] == pytest.approx(1.0 ** 0.75, rel=1e-12)


def test_sup_monotone_in_region(disk_grid):
    f = ScalarField.from_function(disk_grid, lambda p: p[..., 0] ** 2)
    sup_small = norms(f, 0.5, 2.0, 0.5).sup_norm
    sup_big = norms(f, 1.0, 2.0, 0.5).sup_norm
    assert sup_small <= sup_big


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10 ** 6),
       alpha=st.floats(0.1, 0.9), beta_gap=st.floats(0.0, 0.1))
def test_holder_trivial_comparison(seed, alpha, beta_gap):
    # [f]_alpha <= diam^(beta - alpha) [f]_beta for alpha <= beta
    beta = min(1.0, alpha + beta_gap)
    g = build_ball_grid(man.euclidean(2), [0.0, 0.0], 1.0, 0.25)
    rng = np.random.Generator(np.random.PCG64(seed))
    vals = rng.standard_normal(g.n_nodes)
    a, _ = holder_seminorm(g.nodes, vals, alpha)
    b, _ = holder_seminorm(g.nodes, vals, beta)
    diam = 2.0
    assert a <= diam ** (beta - alpha) * b * (1 + 1e-12)


def test_holder_sampled_flag():
    g = build_ball_grid(man.euclidean(2), [0.0, 0.0], 1.0, 1 / 48)
    assert g.n_nodes > 5000
    f = ScalarField.from_function(g, lambda p: p[..., 0])
    rep = norms(f, 1.0, q=2.0, alpha=0.5)
    assert rep.holder_sampled
    # sampled value cannot exceed the exact one and should be close
    assert rep.holder_seminorm[0.5] <= 2.0 ** 0.5 * (1 + 1e-12)
    assert rep.holder_seminorm[0.5] >= 0.9 * 2.0 ** 0.5


def test_w2q_of_linear_field(disk_grid):
    # |u| + |du_1| with u = x1: second differences vanish identically
    f = ScalarField.from_function(disk_grid, lambda p: p[..., 0])
    rep = norms(f, 1.0, q=3.0, alpha=0.5)
    area = math.pi
    expect = lq_norm(f.values[disk_grid.select_ball(1.0)],
                     disk_grid.node_volumes()[disk_grid.select_ball(1.0)], 3.0)
    expect += area ** (1 / 3.0) * 1.0  # ||1||_{L^3}
    assert rep.w2q_norm == pytest.approx(expect, rel=0.05)


def test_region_and_parameter_errors(disk_grid):
    f = ScalarField.from_function(disk_grid, lambda p: p[..., 0])
    with pytest.raises(RegionError):
        norms(f, 1.5, q=2.0, alpha=0.5)
    with pytest.raises(ParameterError):
        norms(f, 1.0, q=0.5, alpha=0.5)
    with pytest.raises(ParameterError):
        norms(f, 1.0, q=2.0, alpha=1.5)


def test_lq_norm_of_indicator():
    w = np.full(10, 0.1)
    v = np.ones(10)
    assert lq_norm(v, w, 2.0) == pytest.approx(1.0)
