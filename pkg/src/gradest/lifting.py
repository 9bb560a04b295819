"""Exponential-map pullback metrics on tangent balls and their checks.

The pullback metric on the coordinate ball {|v| < R} of the tangent space is
built numerically: gbar_v(w1, w2) = g(dexp_v w1, dexp_v w2), with dexp by
central differences of the integrated exponential map and the tangent space
carried in a g-orthonormal frame at the base point.  Under the curvature
hypothesis R < min(pi/sqrt(A1), R0) the construction carries the radial
distance identity, the local isometry property, and a positive Jacobi
determinant on the whole ball, each of which has a sampling check below.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConjugatePointError, HypothesisError, ParameterError
from .manifolds import (
    MetricChart,
    ModelManifold,
    SamplingSpec,
    curvature_bounds_on_ball,
    exp_map_batch,
)

__all__ = [
    "PullbackMetric",
    "build_pullback",
    "verify_radial_distance",
    "verify_local_isometry",
    "conjugate_point_scan",
]

_DEXP_STEP = 1e-4


@dataclass
class PullbackMetric:
    """Numerically built exp-pullback metric on a tangent ball."""

    base: ModelManifold
    x: np.ndarray
    R: float
    frame: np.ndarray            # columns: g-orthonormal basis of T_x M
    chart: MetricChart           # gbar evaluator on {|v| < R}
    nodes: np.ndarray            # sample lattice used for the built-in checks
    gbar_nodes: np.ndarray       # gbar at the sample nodes
    a1: float

    def to_csv(self, path):
        import csv

        m = self.base.dim
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            header = [f"v{i+1}" for i in range(m)]
            header += [f"g{i+1}{j+1}" for i in range(m) for j in range(i, m)]
            w.writerow(header)
            for p, g in zip(self.nodes, self.gbar_nodes):
                row = [repr(float(c)) for c in p]
                row += [repr(float(g[i, j])) for i in range(m) for j in range(i, m)]
                w.writerow(row)


def _orthonormal_frame(M: ModelManifold, x: np.ndarray) -> np.ndarray:
    g = M.chart.metric(x)
    L = np.linalg.cholesky(g)
    return np.linalg.inv(L).T  # columns e_a with g(e_a, e_b) = delta_ab


def _to_chart(frame: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Tangent coordinates (orthonormal frame) -> chart velocity vectors."""
    return V @ frame.T


def _exp_points(pm_or_tuple, V: np.ndarray) -> np.ndarray:
    M, x, frame = pm_or_tuple
    return exp_map_batch(M, x, _to_chart(frame, V))


def _dexp_batch(M: ModelManifold, x: np.ndarray, frame: np.ndarray,
                V: np.ndarray, step: float = _DEXP_STEP):
    """Endpoints exp(v) and Jacobians J[n, :, a] = d exp_v / d v_a (chart
    components per frame direction) by central differences."""
    n, m = V.shape
    stacked = [V]
    for a in range(m):
        e = np.zeros(m)
        e[a] = step
        stacked.append(V + e)
        stacked.append(V - e)
    allV = np.concatenate(stacked, axis=0)
    pts = _exp_points((M, x, frame), allV)
    base_pts = pts[:n]
    J = np.empty((n, m, m))
    for a in range(m):
        plus = pts[(1 + 2 * a) * n:(2 + 2 * a) * n]
        minus = pts[(2 + 2 * a) * n:(3 + 2 * a) * n]
        J[:, :, a] = (plus - minus) / (2.0 * step)
    return base_pts, J


def _gbar_at(M: ModelManifold, x: np.ndarray, frame: np.ndarray, V: np.ndarray):
    pts, J = _dexp_batch(M, x, frame, V)
    G = M.chart.metric(pts)
    gbar = np.einsum("...ia,...ij,...jb->...ab", J, G, J)
    return 0.5 * (gbar + np.swapaxes(gbar, -1, -2)), J, G


def build_pullback(M: ModelManifold, x, R: float, grid_spacing: Optional[float] = None,
                   epsilon: float = 1e-6,
                   samples: SamplingSpec = SamplingSpec()) -> PullbackMetric:
    """Build the exp-pullback metric on the tangent ball of radius R at x.

    Hypothesis (checked): R < min(pi/sqrt(A1), R0) where A1 bounds the
    sectional curvature on the ball of radius R0 around x, sampled on the
    largest representable radius R0 <= 1.25 R.  Dimensions 2 and 3 only.
    """
    x = np.asarray(x, dtype=float)
    if M.dim not in (2, 3):
        raise ParameterError("pullback construction supports m in {2, 3}")
    if R <= 0:
        raise ParameterError("R must be positive")
    inj = M.inj_radius_at(x)
    R0 = 1.25 * R
    sample_R0 = R0 if math.isinf(inj) else min(R0, 0.9 * inj)
    bounds = curvature_bounds_on_ball(M, x, sample_R0, epsilon, samples)
    limit = min(math.pi / math.sqrt(bounds.a1), R0)
    if R >= limit:
        raise HypothesisError(
            f"R = {R:g} violates R < min(pi/sqrt(A1), R0) = {limit:g}")

    frame = _orthonormal_frame(M, x)
    if grid_spacing is None:
        grid_spacing = R / 10.0
    kmax = int(math.floor(R / grid_spacing))
    axes = [np.arange(-kmax, kmax + 1) * grid_spacing] * M.dim
    mesh = np.meshgrid(*axes, indexing="ij")
    nodes = np.stack([a.ravel() for a in mesh], axis=-1)
    nodes = nodes[np.linalg.norm(nodes, axis=1) <= 0.98 * R]

    gbar_nodes, J, _ = _gbar_at(M, x, frame, nodes)
    dets = np.linalg.det(J)
    if np.any(np.abs(dets) < 1e-10):
        raise ConjugatePointError("dexp degenerated inside the requested ball")

    def gbar(pts):
        pts = np.asarray(pts, dtype=float)
        flat = pts.reshape(-1, M.dim)
        out, _, _ = _gbar_at(M, x, frame, flat)
        return out.reshape(pts.shape[:-1] + (M.dim, M.dim))

    chart = MetricChart(dim=M.dim, lo=np.full(M.dim, -R), hi=np.full(M.dim, R),
                        g=gbar, radius=R)
    return PullbackMetric(base=M, x=x, R=float(R), frame=frame, chart=chart,
                          nodes=nodes, gbar_nodes=gbar_nodes, a1=bounds.a1)


def verify_radial_distance(pm: PullbackMetric, n_rays: int = 24, seed: int = 0,
                           quad_nodes: int = 24) -> float:
    """Max deviation of the gbar-length of segments t -> t v from |v| over
    random rays and radii (Gauss-Legendre quadrature along each ray)."""
    rng = np.random.Generator(np.random.PCG64(seed))
    m = pm.base.dim
    dirs = rng.standard_normal((n_rays, m))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = rng.uniform(0.2, 0.95, n_rays) * pm.R
    ts, ws = np.polynomial.legendre.leggauss(quad_nodes)
    ts = 0.5 * (ts + 1.0)
    ws = 0.5 * ws
    worst = 0.0
    V = (dirs * radii[:, None])[:, None, :] * ts[None, :, None]  # (rays, quad, m)
    gb = pm.chart.g(V.reshape(-1, m)).reshape(n_rays, quad_nodes, m, m)
    speeds = np.sqrt(np.einsum("rqij,ri,rj->rq", gb, dirs * radii[:, None],
                               dirs * radii[:, None]))
    lengths = speeds @ ws
    worst = float(np.max(np.abs(lengths - radii)))
    return worst


def verify_local_isometry(pm: PullbackMetric, n_curves: int = 12, seed: int = 1,
                          segments: int = 64) -> float:
    """Max relative mismatch between the gbar-length of random short
    polygonal curves in the tangent ball and the g-length of their
    exponential images, measured by independent quadratures."""
    rng = np.random.Generator(np.random.PCG64(seed))
    M, x, frame = pm.base, pm.x, pm.frame
    m = M.dim
    worst = 0.0
    for _ in range(n_curves):
        a = rng.uniform(-0.6, 0.6, m) * pm.R
        b = a + rng.uniform(-0.3, 0.3, m) * pm.R
        for pt in (a, b):
            nrm = np.linalg.norm(pt)
            if nrm > 0.9 * pm.R:
                pt *= 0.9 * pm.R / nrm
        ts = np.linspace(0.0, 1.0, segments + 1)
        poly = a[None, :] + ts[:, None] * (b - a)[None, :]
        mids = 0.5 * (poly[1:] + poly[:-1])
        seg = poly[1:] - poly[:-1]
        gb = pm.chart.g(mids)
        lbar = float(np.sum(np.sqrt(np.einsum("sij,si,sj->s", gb, seg, seg))))

        img = _exp_points((M, x, frame), poly)
        imids = 0.5 * (img[1:] + img[:-1])
        iseg = img[1:] - img[:-1]
        gg = M.chart.metric(imids)
        lg = float(np.sum(np.sqrt(np.einsum("sij,si,sj->s", gg, iseg, iseg))))
        if lg > 0:
            worst = max(worst, abs(lbar - lg) / lg)
    return worst


def image_ball_deviation(pm: PullbackMetric, n_rays: int = 32, seed: int = 2) -> float:
    """How far exp images of |v| < r overshoot coordinate radius r (normal
    charts only: coordinate radius is geodesic distance from the base)."""
    rng = np.random.Generator(np.random.PCG64(seed))
    m = pm.base.dim
    dirs = rng.standard_normal((n_rays, m))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = rng.uniform(0.1, 0.98, n_rays) * pm.R
    V = dirs * radii[:, None]
    img = _exp_points((pm.base, pm.x, pm.frame), V)
    overshoot = np.linalg.norm(img - pm.x, axis=1) - radii
    return float(np.max(overshoot))


def conjugate_point_scan(pm: PullbackMetric, n_dirs: int = 32, n_radii: int = 24,
                         seed: int = 3) -> float:
    """Minimum of det(dexp_v) over sampled rays and radii, measured against
    g-orthonormal frames on both sides (the Jacobi determinant).  Positivity
    is the implemented proxy for the no-conjugate-point property."""
    rng = np.random.Generator(np.random.PCG64(seed))
    m = pm.base.dim
    dirs = rng.standard_normal((n_dirs, m))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = np.linspace(0.05, 1.0, n_radii) * pm.R
    V = (dirs[:, None, :] * radii[None, :, None]).reshape(-1, m)
    pts, J = _dexp_batch(pm.base, pm.x, pm.frame, V)
    G = pm.base.chart.metric(pts)
    dets = np.linalg.det(J) * np.sqrt(np.linalg.det(G))
    return float(np.min(dets))
