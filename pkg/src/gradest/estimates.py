"""Empirical-constant measurements for the gradient estimates.

Each check evaluates one inequality of the form

    sup |d psi|  <=  (C / factor) * ( sup |Delta psi| + sup |psi| )

on nested balls and reports the measured ratio c_emp = lhs * factor / rhs.
The sharp constants are not explicit, so suites track stability and
boundedness of c_emp rather than a target value.  Sups over inner balls use
the same grid restricted by coordinate radius, which is exact in normal
coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .errors import EllipticityError, ParameterError
from .funcs import (
    RadialFunction,
    SpatialFunction,
    GenericFunction,
    _numeric_hessian,
    gradient_norm_exact,
    manifold_laplacian,
    numeric_gradient,
)
from .grids import BallGrid, ScalarField, build_ball_grid
from .manifolds import (
    CurvatureBounds,
    ModelManifold,
    SamplingSpec,
    curvature_bounds_on_ball,
    euclidean,
)
from .norms import holder_seminorm, lq_norm, norms
from .operators import _axis_derivatives, gradient_norm

__all__ = [
    "EstimateReport",
    "curvature_factor",
    "gradient_estimate_report",
    "interval_gradient_bound",
    "euclidean_gradient_report",
    "scaling_invariance",
    "morrey_ratio",
    "interior_estimate_ratio",
    "rescaled_function",
]

DEFAULT_EPSILON = 1e-6


@dataclass
class EstimateReport:
    """LHS/RHS/factor/empirical-constant record of one inequality check."""

    lhs: float
    rhs_f: float
    rhs_psi: float
    factor: float
    c_emp: float
    metadata: dict = field(default_factory=dict)

    @staticmethod
    def build(lhs: float, rhs_f: float, rhs_psi: float, factor: float,
              metadata: Optional[dict] = None) -> "EstimateReport":
        rhs = rhs_f + rhs_psi
        if lhs == 0.0:
            c = 0.0
        elif rhs > 0.0:
            c = lhs * factor / rhs
        else:
            c = math.inf
        return EstimateReport(lhs=lhs, rhs_f=rhs_f, rhs_psi=rhs_psi,
                              factor=factor, c_emp=c, metadata=metadata or {})

    def to_dict(self) -> dict:
        return {
            "lhs": self.lhs,
            "rhs_f": self.rhs_f,
            "rhs_psi": self.rhs_psi,
            "factor": self.factor,
            "c_emp": self.c_emp,
            "metadata": dict(self.metadata),
        }


def curvature_factor(bounds: CurvatureBounds, R0: float) -> float:
    """min(1, min(pi/sqrt(a1), R0)/2, sqrt(1/a2))."""
    if R0 <= 0:
        raise ParameterError("R0 must be positive")
    return min(1.0,
               min(math.pi / math.sqrt(bounds.a1), R0) / 2.0,
               math.sqrt(1.0 / bounds.a2))


def _as_spatial(psi) -> SpatialFunction:
    return psi if isinstance(psi, SpatialFunction) else GenericFunction(fn=psi)


def gradient_estimate_report(M: ModelManifold, x, R0: float, psi,
                             epsilon: float = DEFAULT_EPSILON,
                             h: Optional[float] = None,
                             samples: SamplingSpec = SamplingSpec(),
                             use_exact_gradient: bool = False) -> EstimateReport:
    """Measure the curved gradient estimate on nested balls around x.

    lhs is the discrete sup of |d psi|_g over B(x, R0/4); the right-hand
    sups of |Delta_g psi| (manufactured) and |psi| run over B(x, R0/2); the
    factor comes from sampled curvature bounds on B(x, R0), restricted to the
    representable chart region.
    """
    x = np.asarray(x, dtype=float)
    if R0 >= M.inj_radius_at(x):
        raise ParameterError("R0 must stay below the injectivity radius")
    psi = _as_spatial(psi)
    if h is None:
        h = R0 / 64.0

    grid = build_ball_grid(M, x, R0 / 2.0, h)
    psi_field = ScalarField.from_function(grid, psi.value)

    if use_exact_gradient:
        grad_vals = gradient_norm_exact(M, psi, grid.nodes)
    else:
        grad_vals = gradient_norm(psi_field).values
    inner = grid.select_ball(R0 / 4.0)
    lhs = float(np.max(grad_vals[inner]))

    lap = manifold_laplacian(M, psi)
    rhs_f = float(np.max(np.abs(lap(grid.nodes))))
    rhs_psi = float(np.max(np.abs(psi_field.values)))

    inj = M.inj_radius_at(x)
    bounds_R = R0 if math.isinf(inj) else min(R0, 0.9 * inj)
    bounds = curvature_bounds_on_ball(M, x, bounds_R, epsilon, samples)
    factor = curvature_factor(bounds, R0)

    meta = {
        "manifold": M.describe(),
        "x": [float(c) for c in x],
        "R0": float(R0),
        "epsilon": float(epsilon),
        "h": float(h),
        "field": psi.name,
        "sigma": bounds.sigma,
        "rho": bounds.rho,
        "a1": bounds.a1,
        "a2": bounds.a2,
    }
    return EstimateReport.build(lhs, rhs_f, rhs_psi, factor, meta)


def interval_gradient_bound(u, a: float, r: float, n_samples: int = 10 ** 4):
    """The one-dimensional bound |u'(a)| <= (2/r)(sup |u| + sup |u''|) with
    sups over n_samples uniform points of (a-r, a+r).

    Returns (lhs, rhs, ratio); the paper-level contract is ratio <= 1 up to
    sampling slack.
    """
    if not 0.0 < r <= 1.0:
        raise ParameterError("r must lie in (0, 1]")
    if n_samples < 2:
        raise ParameterError("need at least two sample points")
    xs = np.linspace(a - r, a + r, n_samples)
    sup_u = float(np.max(np.abs(u.value(xs))))
    sup_u2 = float(np.max(np.abs(u.d2(xs))))
    lhs = float(abs(u.d1(a)))
    rhs = (2.0 / r) * (sup_u + sup_u2)
    if lhs == 0.0:
        ratio = 0.0
    else:
        ratio = lhs / rhs if rhs > 0 else math.inf
    return lhs, rhs, ratio


def euclidean_gradient_report(psi, x, R0: float, h: Optional[float] = None) -> EstimateReport:
    """The flat-space estimate: lhs = sup |d psi| over B(x, R0/2), rhs sups
    over B(x, R0), factor = min(R0/(2 sqrt(m)), 1)."""
    x = np.asarray(x, dtype=float)
    m = x.size
    psi = _as_spatial(psi)
    if h is None:
        h = R0 / 64.0
    M = euclidean(m)
    grid = build_ball_grid(M, x, R0, h)
    psi_field = ScalarField.from_function(grid, psi.value)
    grad_vals = gradient_norm(psi_field).values
    inner = grid.select_ball(R0 / 2.0)
    lhs = float(np.max(grad_vals[inner]))
    lap = manifold_laplacian(M, psi)
    rhs_f = float(np.max(np.abs(lap(grid.nodes))))
    rhs_psi = float(np.max(np.abs(psi_field.values)))
    factor = min(R0 / (2.0 * math.sqrt(m)), 1.0)
    meta = {"manifold": M.describe(), "x": [float(c) for c in x],
            "R0": float(R0), "h": float(h), "field": psi.name}
    return EstimateReport.build(lhs, rhs_f, rhs_psi, factor, meta)


@dataclass
class _RescaledFunction(SpatialFunction):
    base: SpatialFunction
    lam: float

    def __post_init__(self):
        self.name = f"{self.base.name}/scale{self.lam:g}"

    def value(self, pts):
        return self.base.value(np.asarray(pts, dtype=float) / self.lam)

    def gradient(self, pts):
        return self.base.gradient(np.asarray(pts, dtype=float) / self.lam) / self.lam


def rescaled_function(psi: SpatialFunction, lam: float) -> SpatialFunction:
    """The pullback of psi under coordinate scaling y -> y/lam, preserving
    closed-form radial structure when present."""
    if lam == 1.0:
        return psi
    if isinstance(psi, RadialFunction):
        return RadialFunction(
            u=lambda r, f=psi.u: f(r / lam),
            du=lambda r, f=psi.du: f(r / lam) / lam,
            d2u=lambda r, f=psi.d2u: f(r / lam) / lam ** 2,
            name=f"{psi.name}/scale{lam:g}",
        )
    return _RescaledFunction(base=psi, lam=lam)


@dataclass
class ScalingPair:
    """Empirical constants of a run and its metrically rescaled twin.

    ``c_emp_scaled`` is the scaled run converted back to base units: the
    sup of the Laplacian picks up lam^2 and the factor sheds one lam, since
    the two right-hand sups carry different length dimensions.  After the
    conversion the two constants agree up to discretization error (and up
    to activity of the scale-free cap min(1, ...) in the factor).
    """

    c_emp: float
    c_emp_scaled: float
    base: EstimateReport
    scaled: EstimateReport

    def to_dict(self) -> dict:
        return {
            "c_emp": self.c_emp,
            "c_emp_scaled": self.c_emp_scaled,
            "base": self.base.to_dict(),
            "scaled": self.scaled.to_dict(),
        }


def scaling_invariance(M: ModelManifold, x, R0: float, psi, lam: float,
                       epsilon: float = DEFAULT_EPSILON,
                       h: Optional[float] = None,
                       samples: SamplingSpec = SamplingSpec()) -> ScalingPair:
    """Run the curved estimate on (M, g) and on (M, lam^2 g) with
    R0 -> lam R0, epsilon -> epsilon/lam^2, h -> lam h, psi pulled back.

    Returns the pair of empirical constants, the scaled one expressed in
    base units (see ScalingPair); they agree to discretization tolerance.
    """
    if not 0.25 <= lam <= 4.0:
        raise ParameterError("lam must lie in [0.25, 4]")
    psi = _as_spatial(psi)
    if h is None:
        h = R0 / 64.0
    base = gradient_estimate_report(M, x, R0, psi, epsilon, h, samples)
    M2 = M.scaled(lam)
    x2 = np.asarray(x, dtype=float) * lam
    psi2 = rescaled_function(psi, lam)
    scaled = gradient_estimate_report(M2, x2, lam * R0, psi2,
                                      epsilon / lam ** 2, lam * h, samples)
    rhs_back = lam ** 2 * scaled.rhs_f + scaled.rhs_psi
    if scaled.lhs == 0.0:
        c_scaled = 0.0
    elif rhs_back > 0.0:
        c_scaled = scaled.lhs * scaled.factor / rhs_back
    else:
        c_scaled = math.inf
    return ScalingPair(c_emp=base.c_emp, c_emp_scaled=c_scaled,
                       base=base, scaled=scaled)


def morrey_ratio(u, p: float, R: float, h: Optional[float] = None,
                 dim: int = 2, grid: Optional[BallGrid] = None):
    """Hoelder-seminorm-to-gradient-L^p ratio on concentric planar balls.

    With alpha = (p-m)/p, returns (seminorm, K, ratio) where seminorm is
    [u]_{0,alpha} over B_R, K = max_k ||d_k u||_{L^p} over the full B_{2R}
    domain, and ratio = seminorm / K is an empirical lower bound for the
    Morrey constant.
    """
    if isinstance(u, ScalarField):
        grid = u.grid
        m = grid.dim
        if p <= m:
            raise ParameterError("Morrey requires p > m")
        values = u.values
    else:
        m = dim
        if p <= m:
            raise ParameterError("Morrey requires p > m")
        if grid is None:
            if h is None:
                h = R / 24.0
            grid = build_ball_grid(euclidean(m), np.zeros(m), 2.0 * R, h)
        ufun = _as_spatial(u)
        values = ufun.value(grid.nodes)
    if grid.radius < 2.0 * R * (1.0 - 1e-9):
        raise ParameterError("domain must contain the concentric 2R ball")
    alpha = (p - m) / p
    inner = grid.select_ball(R)
    seminorm, _ = holder_seminorm(grid.nodes[inner], values[inner], alpha)
    d1 = _axis_derivatives(grid, values)
    weights = grid.node_volumes()
    K = max(lq_norm(d1[:, k], weights, p) for k in range(m))
    ratio = seminorm / K if K > 0 else 0.0
    return seminorm, K, ratio


def interior_estimate_ratio(a_coeffs, b_coeff, u, q: float,
                            h: float = 1.0 / 24.0, dim: int = 2) -> float:
    """Empirical constant of the interior elliptic estimate

        ||u||_{W^{2,q}(B_1)} <= C ( ||P u||_{L^q(B_2)} + ||u||_{L^2(B_2)} )

    for P = sum a^{ij} d_i d_j + b on the planar double ball, where the
    coefficient matrix must satisfy (a^{ij}) >= 1/4 as a bilinear form.
    """
    m = dim
    M = euclidean(m)
    grid = build_ball_grid(M, np.zeros(m), 2.0, h)
    pts = grid.nodes
    if callable(a_coeffs):
        a = np.asarray(a_coeffs(pts), dtype=float)
    else:
        a = np.broadcast_to(np.asarray(a_coeffs, dtype=float), (grid.n_nodes, m, m))
    eig = np.linalg.eigvalsh(0.5 * (a + np.swapaxes(a, -1, -2)))
    if np.min(eig) < 0.25 - 1e-12:
        raise EllipticityError(
            f"coefficient matrix has eigenvalue {np.min(eig):.4g} < 1/4")
    if callable(b_coeff):
        b = np.asarray(b_coeff(pts), dtype=float)
    else:
        b = np.full(grid.n_nodes, float(b_coeff))

    ufun = _as_spatial(u)
    field = ScalarField(grid=grid, values=ufun.value(pts))
    hess = _numeric_hessian(ufun.value, pts)
    Pu = np.einsum("...ij,...ij->...", a, hess) + b * field.values

    report = norms(field, 1.0, q=q, alpha=min(1.0, (q - m) / q if q > m else 0.5))
    w2q = report.w2q_norm
    weights = grid.node_volumes()
    denom = lq_norm(Pu, weights, q) + lq_norm(field.values, weights, 2.0)
    return w2q / denom if denom > 0 else 0.0
