"""Model-manifold catalog with exact and finite-difference geometry.

Every catalog entry carries a coordinate chart (geodesic normal coordinates
at a designated base point for sphere/hyperbolic space, flat coordinates for
Euclidean space and tori, product coordinates (t, theta) for 2D warped
products) together with closed-form metric components, metric derivatives,
curvature constants, injectivity radii and geodesic distances where they
exist.  All evaluators are vectorized over a leading batch of points:
``pts`` has shape ``(..., m)`` and metric values have shape ``(..., m, m)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (
    ChartError,
    ConditioningError,
    DegeneracyError,
    DomainError,
    EscapeError,
    ParameterError,
    UnsupportedError,
)

__all__ = [
    "MetricChart",
    "ModelManifold",
    "CurvatureBounds",
    "SamplingSpec",
    "Warp",
    "euclidean",
    "sphere",
    "hyperbolic",
    "flat_torus",
    "warped_product_2d",
    "cusp_surface",
    "cusp_warp",
    "christoffel",
    "riemann_tensor",
    "sectional_curvature",
    "ricci_tensor",
    "ricci_min_eigenvalue",
    "curvature_bounds_on_ball",
    "geodesic_flow",
    "exp_map",
    "exp_map_batch",
    "geodesic_distance",
]

# Central-difference step for metric derivatives without a closed form, and
# for Christoffel derivatives inside the curvature tensor.  Balances
# truncation against roundoff for metrics with O(1) derivatives.
FD_METRIC_STEP = 1e-4
FD_CHRISTOFFEL_STEP = 1e-4

# Condition-number guard for metric inversion.
COND_LIMIT = 1e12


# ---------------------------------------------------------------------------
# Charts


@dataclass(frozen=True)
class MetricChart:
    """A coordinate chart: an axis-aligned box plus metric evaluators.

    ``g(pts)`` maps ``(..., m)`` points to ``(..., m, m)`` symmetric matrices.
    ``g_derivs(pts)``, when present, returns ``(..., m, m, m)`` arrays indexed
    ``[..., k, i, j] = d_k g_ij``.  ``radius`` optionally restricts the domain
    further to the coordinate ball ``|p| < radius``.
    """

    dim: int
    lo: np.ndarray
    hi: np.ndarray
    g: Callable[[np.ndarray], np.ndarray]
    g_derivs: Optional[Callable[[np.ndarray], np.ndarray]] = None
    radius: Optional[float] = None
    fd_step: float = FD_METRIC_STEP

    def metric(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        return self.g(pts)

    def metric_derivs(self, pts: np.ndarray) -> np.ndarray:
        """d_k g_ij, closed form when available, else central differences."""
        pts = np.asarray(pts, dtype=float)
        if self.g_derivs is not None:
            return self.g_derivs(pts)
        m = self.dim
        h = self.fd_step
        out = np.empty(pts.shape[:-1] + (m, m, m))
        for k in range(m):
            e = np.zeros(m)
            e[k] = h
            out[..., k, :, :] = (self.g(pts + e) - self.g(pts - e)) / (2.0 * h)
        return out

    def inverse_metric(self, pts: np.ndarray) -> np.ndarray:
        return np.linalg.inv(self.metric(pts))

    def sqrt_det(self, pts: np.ndarray) -> np.ndarray:
        det = np.linalg.det(self.metric(pts))
        return np.sqrt(np.maximum(det, 0.0))

    def contains(self, pts: np.ndarray, slack: float = 0.0) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        ok = np.all((pts >= self.lo - slack) & (pts <= self.hi + slack), axis=-1)
        if self.radius is not None:
            ok = ok & (np.linalg.norm(pts, axis=-1) <= self.radius + slack)
        return ok


# ---------------------------------------------------------------------------
# Rotationally symmetric normal-coordinate profiles
#
# In normal coordinates at the base point of a constant-curvature space the
# metric is g_ij(x) = s(r) delta_ij + t(r) x_i x_j with r = |x|,
# s(r) = (w(r)/r)^2 and t(r) = (1 - s(r))/r^2, where w is the warp of the
# radial metric dr^2 + w(r)^2 dOmega^2 (w = r, rho*sin(r/rho), rho*sinh(r/rho)).
# Series expansions take over near r = 0 where the closed forms cancel badly.

_SERIES_CUT = 0.05


class _RadialProfile:
    """Scalar profile functions for a rotationally symmetric normal chart."""

    def __init__(self, kind: str, rho: float):
        if kind not in ("euclidean", "sphere", "hyperbolic"):
            raise ValueError(kind)
        self.kind = kind
        self.rho = float(rho)

    # q(u) = w(rho*u)/(rho*u) with u = r/rho; q' = dq/du.
    def _q(self, u):
        small = np.abs(u) < _SERIES_CUT
        u2 = u * u
        if self.kind == "euclidean":
            return np.ones_like(u)
        if self.kind == "sphere":
            series = 1.0 - u2 / 6.0 + u2 * u2 / 120.0 - u2 * u2 * u2 / 5040.0
            with np.errstate(invalid="ignore", divide="ignore"):
                exact = np.where(small, 1.0, np.sin(u) / np.where(small, 1.0, u))
        else:
            series = 1.0 + u2 / 6.0 + u2 * u2 / 120.0 + u2 * u2 * u2 / 5040.0
            with np.errstate(invalid="ignore", divide="ignore"):
                exact = np.where(small, 1.0, np.sinh(u) / np.where(small, 1.0, u))
        return np.where(small, series, exact)

    def _qp(self, u):
        small = np.abs(u) < _SERIES_CUT
        u2 = u * u
        usafe = np.where(small, 1.0, u)
        if self.kind == "euclidean":
            return np.zeros_like(u)
        if self.kind == "sphere":
            series = -u / 3.0 + u * u2 / 30.0 - u * u2 * u2 / 840.0
            exact = (usafe * np.cos(usafe) - np.sin(usafe)) / (usafe * usafe)
        else:
            series = u / 3.0 + u * u2 / 30.0 + u * u2 * u2 / 840.0
            exact = (usafe * np.cosh(usafe) - np.sinh(usafe)) / (usafe * usafe)
        return np.where(small, series, exact)

    def s(self, r):
        q = self._q(np.asarray(r, dtype=float) / self.rho)
        return q * q

    def sp(self, r):
        u = np.asarray(r, dtype=float) / self.rho
        return 2.0 * self._q(u) * self._qp(u) / self.rho

    def t(self, r):
        """(1 - s(r)) / r^2, finite at r = 0."""
        u = np.asarray(r, dtype=float) / self.rho
        small = np.abs(u) < _SERIES_CUT
        u2 = u * u
        if self.kind == "euclidean":
            return np.zeros_like(u)
        q = self._q(u)
        if self.kind == "sphere":
            series = (1.0 / 6.0 - u2 / 120.0 + u2 * u2 / 5040.0) * (1.0 + q)
        else:
            series = (-1.0 / 6.0 - u2 / 120.0 - u2 * u2 / 5040.0) * (1.0 + q)
        usafe = np.where(small, 1.0, u)
        exact = (1.0 - q * q) / (usafe * usafe)
        return np.where(small, series, exact) / (self.rho * self.rho)

    def tp(self, r):
        """d/dr of t(r), finite at r = 0."""
        u = np.asarray(r, dtype=float) / self.rho
        small = np.abs(u) < _SERIES_CUT
        u2 = u * u
        if self.kind == "euclidean":
            return np.zeros_like(u)
        sign = -1.0 if self.kind == "sphere" else 1.0
        # d/du[(1-q^2)/u^2] = -4u/45 -+ 4u^3/315 + O(u^5)
        series = -4.0 * u / 45.0 + sign * (-4.0) * u * u2 / 315.0
        q = self._q(u)
        qp = self._qp(u)
        usafe = np.where(small, 1.0, u)
        exact = -2.0 * (q * qp * usafe + (1.0 - q * q)) / (usafe ** 3)
        return np.where(small, series, exact) / (self.rho ** 3)

    # Radial warp w(r) and its log-derivative w'(r)/w(r), used by radial
    # Laplacians Delta u = u'' + (m-1) (w'/w) u'.
    def w(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "euclidean":
            return r.copy()
        u = r / self.rho
        return self.rho * (np.sin(u) if self.kind == "sphere" else np.sinh(u))

    def log_deriv(self, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            inv = 1.0 / r
        if self.kind == "euclidean":
            return inv
        u = r / self.rho
        small = np.abs(u) < _SERIES_CUT
        usafe = np.where(small, 1.0, u)
        if self.kind == "sphere":
            series = inv - u / (3.0 * self.rho) - u ** 3 / (45.0 * self.rho)
            exact = np.cos(usafe) / (self.rho * np.sin(usafe))
        else:
            series = inv + u / (3.0 * self.rho) - u ** 3 / (45.0 * self.rho)
            exact = np.cosh(usafe) / (self.rho * np.sinh(usafe))
        return np.where(small, series, exact)


def _rotational_chart(profile: _RadialProfile, dim: int, radius: Optional[float]) -> MetricChart:
    m = dim

    def metric(pts):
        pts = np.asarray(pts, dtype=float)
        r = np.linalg.norm(pts, axis=-1)
        s = profile.s(r)
        t = profile.t(r)
        eye = np.eye(m)
        g = s[..., None, None] * eye
        g = g + t[..., None, None] * (pts[..., :, None] * pts[..., None, :])
        return g

    def metric_derivs(pts):
        pts = np.asarray(pts, dtype=float)
        r = np.linalg.norm(pts, axis=-1)
        rsafe = np.where(r == 0.0, 1.0, r)
        xhat = pts / rsafe[..., None]
        sp = profile.sp(r)
        t = profile.t(r)
        tp = profile.tp(r)
        eye = np.eye(m)
        xx = pts[..., :, None] * pts[..., None, :]
        out = sp[..., None, None, None] * xhat[..., :, None, None] * eye
        out = out + tp[..., None, None, None] * xhat[..., :, None, None] * xx[..., None, :, :]
        # t * (delta_ik x_j + delta_jk x_i)
        term = np.zeros(pts.shape[:-1] + (m, m, m))
        for k in range(m):
            term[..., k, k, :] += pts
            term[..., k, :, k] += pts
        out = out + t[..., None, None, None] * term
        return out

    lo = np.full(m, -np.inf if radius is None else -radius)
    hi = np.full(m, np.inf if radius is None else radius)
    return MetricChart(dim=m, lo=lo, hi=hi, g=metric, g_derivs=metric_derivs, radius=radius)


# ---------------------------------------------------------------------------
# Warped products


@dataclass(frozen=True)
class Warp:
    """Closed-form warp f(t) > 0 with two derivatives, for dt^2 + f^2 dtheta^2."""

    name: str
    f: Callable[[np.ndarray], np.ndarray]
    df: Callable[[np.ndarray], np.ndarray]
    d2f: Callable[[np.ndarray], np.ndarray]


def cusp_warp() -> Warp:
    """f(t) = (1+t)^(-1/2): a surface of revolution with shrinking collars."""
    return Warp(
        name="cusp",
        f=lambda t: (1.0 + t) ** -0.5,
        df=lambda t: -0.5 * (1.0 + t) ** -1.5,
        d2f=lambda t: 0.75 * (1.0 + t) ** -2.5,
    )


def _warped_chart(warp: Warp, t_range) -> MetricChart:
    t0, t1 = float(t_range[0]), float(t_range[1])

    def metric(pts):
        pts = np.asarray(pts, dtype=float)
        f = warp.f(pts[..., 0])
        g = np.zeros(pts.shape[:-1] + (2, 2))
        g[..., 0, 0] = 1.0
        g[..., 1, 1] = f * f
        return g

    def metric_derivs(pts):
        pts = np.asarray(pts, dtype=float)
        t = pts[..., 0]
        out = np.zeros(pts.shape[:-1] + (2, 2, 2))
        out[..., 0, 1, 1] = 2.0 * warp.f(t) * warp.df(t)
        return out

    lo = np.array([t0, -np.inf])
    hi = np.array([t1, np.inf])
    return MetricChart(dim=2, lo=lo, hi=hi, g=metric, g_derivs=metric_derivs)


# ---------------------------------------------------------------------------
# Model manifolds


@dataclass(frozen=True)
class ModelManifold:
    """A catalog entry bundling a chart with closed-form geometric data."""

    kind: str
    dim: int
    chart: MetricChart
    sec_const: Optional[float]
    params: dict = field(default_factory=dict)

    def inj_radius_at(self, p) -> float:
        p = np.asarray(p, dtype=float)
        if self.kind in ("euclidean", "hyperbolic"):
            return math.inf
        if self.kind == "sphere":
            return math.pi * self.params["radius"]
        if self.kind == "flat_torus":
            return 0.5 * min(self.params["periods"])
        if self.kind == "warped2d":
            # Circumference bound: the circle through p closes up after 2*pi*f.
            warp: Warp = self.params["warp"]
            return math.pi * float(warp.f(np.asarray(p[..., 0])))
        raise UnsupportedError(f"no injectivity radius for kind {self.kind!r}")

    @property
    def normal_chart(self) -> bool:
        """Whether coordinate radius equals geodesic distance from the origin."""
        return self.kind in ("euclidean", "sphere", "hyperbolic", "flat_torus")

    def distance(self, x, y) -> float:
        return geodesic_distance(self, x, y)

    def scaled(self, lam: float) -> "ModelManifold":
        """The manifold with metric lam^2 * g, re-expressed in its own normal
        coordinates (so coordinate radius remains geodesic distance)."""
        if lam <= 0:
            raise ParameterError("scale factor must be positive")
        if self.kind == "euclidean":
            return self
        if self.kind == "sphere":
            return sphere(self.dim, lam * self.params["radius"])
        if self.kind == "hyperbolic":
            return hyperbolic(self.dim, lam * self.params["scale"])
        if self.kind == "flat_torus":
            return flat_torus([lam * L for L in self.params["periods"]])
        if self.kind == "warped2d":
            w: Warp = self.params["warp"]
            scaled = Warp(
                name=f"{w.name}*{lam:g}",
                f=lambda t, w=w, lam=lam: lam * w.f(t / lam),
                df=lambda t, w=w, lam=lam: w.df(t / lam),
                d2f=lambda t, w=w, lam=lam: w.d2f(t / lam) / lam,
            )
            t0, t1 = self.params["t_range"]
            return warped_product_2d(scaled, (lam * t0, lam * t1))
        raise UnsupportedError(self.kind)

    def describe(self) -> str:
        bits = [f"{self.kind}(m={self.dim}"]
        for k, v in self.params.items():
            if k == "warp":
                bits.append(f"warp={v.name}")
            elif isinstance(v, (int, float, str, tuple, list)):
                bits.append(f"{k}={v}")
        return ", ".join(bits) + ")"


def euclidean(m: int) -> ModelManifold:
    eye = np.eye(m)

    def metric(pts):
        pts = np.asarray(pts, dtype=float)
        return np.broadcast_to(eye, pts.shape[:-1] + (m, m)).copy()

    def metric_derivs(pts):
        pts = np.asarray(pts, dtype=float)
        return np.zeros(pts.shape[:-1] + (m, m, m))

    chart = MetricChart(dim=m, lo=np.full(m, -np.inf), hi=np.full(m, np.inf),
                        g=metric, g_derivs=metric_derivs)
    return ModelManifold(kind="euclidean", dim=m, chart=chart, sec_const=0.0)


def sphere(m: int, radius: float = 1.0) -> ModelManifold:
    if radius <= 0:
        raise ParameterError("sphere radius must be positive")
    profile = _RadialProfile("sphere", radius)
    # The chart degenerates at coordinate radius pi*rho (the antipode).
    chart = _rotational_chart(profile, m, radius=math.pi * radius * (1.0 - 1e-12))
    return ModelManifold(kind="sphere", dim=m, chart=chart,
                         sec_const=1.0 / radius ** 2,
                         params={"radius": radius, "profile": profile})


def hyperbolic(m: int, scale: float = 1.0) -> ModelManifold:
    if scale <= 0:
        raise ParameterError("hyperbolic scale must be positive")
    profile = _RadialProfile("hyperbolic", scale)
    chart = _rotational_chart(profile, m, radius=None)
    return ModelManifold(kind="hyperbolic", dim=m, chart=chart,
                         sec_const=-1.0 / scale ** 2,
                         params={"scale": scale, "profile": profile})


def flat_torus(periods) -> ModelManifold:
    periods = [float(L) for L in np.atleast_1d(periods)]
    if any(L <= 0 for L in periods):
        raise ParameterError("torus periods must be positive")
    m = len(periods)
    flat = euclidean(m)
    # Covering chart on all of R^m; geodesic_distance folds in the periods.
    chart = MetricChart(dim=m, lo=np.full(m, -np.inf), hi=np.full(m, np.inf),
                        g=flat.chart.g, g_derivs=flat.chart.g_derivs)
    return ModelManifold(kind="flat_torus", dim=m, chart=chart, sec_const=0.0,
                         params={"periods": periods})


def warped_product_2d(warp: Warp, t_range) -> ModelManifold:
    chart = _warped_chart(warp, t_range)
    return ModelManifold(kind="warped2d", dim=2, chart=chart, sec_const=None,
                         params={"warp": warp, "t_range": (float(t_range[0]), float(t_range[1]))})


def cusp_surface(t_max: float = 130.0) -> ModelManifold:
    return warped_product_2d(cusp_warp(), (0.0, t_max))


# ---------------------------------------------------------------------------
# Connection and curvature


def _check_in_domain(M: ModelManifold, pts: np.ndarray):
    ok = M.chart.contains(pts, slack=1e-12)
    if not np.all(ok):
        raise DomainError(f"point outside chart domain of {M.describe()}")


def _christoffel_batch(chart: MetricChart, pts: np.ndarray) -> np.ndarray:
    """Gamma[..., k, i, j] at each point, symmetric in (i, j)."""
    g = chart.metric(pts)
    D = chart.metric_derivs(pts)  # [..., k, i, j] = d_k g_ij
    ginv = np.linalg.inv(g)
    # Gamma^k_ij = 1/2 g^{kl} (d_i g_jl + d_j g_il - d_l g_ij)
    term = np.einsum("...ijl->...lij", D) + np.einsum("...jil->...lij", D) - D
    return 0.5 * np.einsum("...kl,...lij->...kij", ginv, term)


def christoffel(M: ModelManifold, p) -> np.ndarray:
    """Christoffel symbols Gamma^k_ij of the Levi-Civita connection at p."""
    p = np.asarray(p, dtype=float)
    _check_in_domain(M, p)
    g = M.chart.metric(p)
    cond = np.linalg.cond(g)
    if not np.all(np.isfinite(cond)) or np.any(cond > COND_LIMIT):
        raise ConditioningError(f"metric condition number {cond:.3g} exceeds {COND_LIMIT:.0e}")
    return _christoffel_batch(M.chart, p)


def _riemann_batch(chart: MetricChart, pts: np.ndarray,
                   step: float = FD_CHRISTOFFEL_STEP) -> np.ndarray:
    """R[..., i, j, k, l]: the l-component of R(e_i, e_j) e_k.

    Christoffel derivatives are taken by fourth-order central differences of
    the (closed form, where available) symbols.
    """
    pts = np.asarray(pts, dtype=float)
    m = chart.dim
    gamma = _christoffel_batch(chart, pts)
    dgamma = np.empty(pts.shape[:-1] + (m, m, m, m))  # [..., a, k, i, j] = d_a Gamma^k_ij
    for a in range(m):
        e = np.zeros(m)
        e[a] = step
        gp = _christoffel_batch(chart, pts + e)
        gm = _christoffel_batch(chart, pts - e)
        gp2 = _christoffel_batch(chart, pts + 2 * e)
        gm2 = _christoffel_batch(chart, pts - 2 * e)
        dgamma[..., a, :, :, :] = (8.0 * (gp - gm) - (gp2 - gm2)) / (12.0 * step)
    riem = (np.einsum("...iljk->...ijkl", dgamma)
            - np.einsum("...jlik->...ijkl", dgamma)
            + np.einsum("...lip,...pjk->...ijkl", gamma, gamma)
            - np.einsum("...ljp,...pik->...ijkl", gamma, gamma))
    return riem


def riemann_tensor(M: ModelManifold, p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    _check_in_domain(M, p)
    return _riemann_batch(M.chart, p)


def _sectional_from_riemann(g, riem, u, v):
    gu = np.einsum("...ij,...j->...i", g, u)
    num = np.einsum("...ijkl,...i,...j,...k,...l->...", riem, u, v, v, gu)
    uu = np.einsum("...ij,...i,...j->...", g, u, u)
    vv = np.einsum("...ij,...i,...j->...", g, v, v)
    uv = np.einsum("...ij,...i,...j->...", g, u, v)
    denom = uu * vv - uv * uv
    return num, denom, uu, vv


def sectional_curvature(M: ModelManifold, p, u, v) -> float:
    """Sectional curvature of span{u, v} at p (basis independent)."""
    p = np.asarray(p, dtype=float)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    _check_in_domain(M, p)
    g = M.chart.metric(p)
    riem = _riemann_batch(M.chart, p)
    num, denom, uu, vv = _sectional_from_riemann(g, riem, u, v)
    if denom <= 1e-12 * uu * vv:
        raise DegeneracyError("tangent vectors are (nearly) linearly dependent")
    return float(num / denom)


def ricci_tensor(M: ModelManifold, p) -> np.ndarray:
    """Ricci tensor Ric_jk = R^i_{jki} as a (m, m) matrix at p."""
    riem = riemann_tensor(M, p)
    return np.einsum("...ijki->...jk", riem)


def _ricci_min_batch(chart: MetricChart, pts: np.ndarray) -> np.ndarray:
    riem = _riemann_batch(chart, pts)
    ric = np.einsum("...ijki->...jk", riem)
    ric = 0.5 * (ric + np.swapaxes(ric, -1, -2))
    g = chart.metric(pts)
    L = np.linalg.cholesky(g)
    A = np.linalg.solve(L, ric)
    B = np.linalg.solve(L, np.swapaxes(A, -1, -2))
    return np.linalg.eigvalsh(B)[..., 0]


def ricci_min_eigenvalue(M: ModelManifold, p) -> float:
    """Minimum eigenvalue of Ric measured against g (Ric v = lambda g v)."""
    p = np.asarray(p, dtype=float)
    _check_in_domain(M, p)
    return float(_ricci_min_batch(M.chart, p))


# ---------------------------------------------------------------------------
# Curvature bounds over balls


@dataclass(frozen=True)
class SamplingSpec:
    """How sup/inf of curvature over a ball are sampled."""

    nodes_per_axis: int = 33
    planes_per_point: int = 16
    seed: int = 0


@dataclass(frozen=True)
class CurvatureBounds:
    """Sampled curvature extremes over a ball and the derived bounds
    a1 >= Sec and a2 >= -Ric_min used by the gradient-estimate factor."""

    sigma: float
    rho: float
    a1: float
    a2: float
    epsilon: float

    @staticmethod
    def from_extremes(sigma: float, rho: float, epsilon: float) -> "CurvatureBounds":
        if epsilon <= 0:
            raise ParameterError("epsilon must be positive")
        a1 = max(max(sigma, 0.0), epsilon)
        a2 = -min(min(rho, 0.0), -epsilon)
        return CurvatureBounds(sigma=sigma, rho=rho, a1=a1, a2=a2, epsilon=epsilon)


def _ball_sample_points(M: ModelManifold, x: np.ndarray, R0: float, n_axis: int) -> np.ndarray:
    m = M.dim
    axes = [np.linspace(-R0, R0, n_axis)] * m
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([a.ravel() for a in mesh], axis=-1) + x
    keep = np.linalg.norm(pts - x, axis=-1) <= R0
    keep &= M.chart.contains(pts, slack=-1e-9)
    return pts[keep]


def curvature_bounds_on_ball(M: ModelManifold, x, R0: float, epsilon: float = 1e-6,
                             samples: SamplingSpec = SamplingSpec()) -> CurvatureBounds:
    """Sampled sup of Sec and inf of the minimum Ricci eigenvalue over the
    ball of radius R0 around x, with the derived (a1, a2) bounds.

    The extremes are taken over a dense coordinate lattice plus random
    2-planes per point, so they under/overestimate the true sup/inf by
    O(grid spacing * Lipschitz constant).
    """
    x = np.asarray(x, dtype=float)
    if R0 <= 0:
        raise ParameterError("R0 must be positive")
    if epsilon <= 0:
        raise ParameterError("epsilon must be positive")
    if R0 >= M.inj_radius_at(x):
        raise ChartError("ball radius must stay below the injectivity radius")
    _check_in_domain(M, x)

    pts = _ball_sample_points(M, x, R0, samples.nodes_per_axis)
    if pts.size == 0:
        pts = x[None, :]
    m = M.dim
    g = M.chart.metric(pts)
    riem = _riemann_batch(M.chart, pts)

    rng = np.random.Generator(np.random.PCG64(samples.seed))
    n_pl = samples.planes_per_point
    U = rng.standard_normal((pts.shape[0], n_pl, m))
    V = rng.standard_normal((pts.shape[0], n_pl, m))
    gg = g[:, None, :, :]
    num, denom, uu, vv = _sectional_from_riemann(gg, riem[:, None, :, :, :, :], U, V)
    good = denom > 1e-12 * uu * vv
    sec = num[good] / denom[good]
    sigma = float(np.max(sec))

    ric_min = _ricci_min_batch(M.chart, pts)
    rho = float(np.min(ric_min))
    return CurvatureBounds.from_extremes(sigma, rho, epsilon)


# ---------------------------------------------------------------------------
# Geodesics, exponential map, distance


def _geodesic_rhs(chart: MetricChart, X: np.ndarray, V: np.ndarray):
    gamma = _christoffel_batch(chart, X)
    acc = -np.einsum("...kij,...i,...j->...k", gamma, V, V)
    return V, acc


def _flow_batch(chart: MetricChart, X0: np.ndarray, V0: np.ndarray, t_end: float,
                n_steps: int, keep_path: bool = False):
    """Fixed-step RK4 integration of the geodesic equation, batched over rows."""
    X = np.array(X0, dtype=float)
    V = np.array(V0, dtype=float)
    dt = t_end / n_steps
    path = [(X.copy(), V.copy())] if keep_path else None
    for _ in range(n_steps):
        k1x, k1v = _geodesic_rhs(chart, X, V)
        k2x, k2v = _geodesic_rhs(chart, X + 0.5 * dt * k1x, V + 0.5 * dt * k1v)
        k3x, k3v = _geodesic_rhs(chart, X + 0.5 * dt * k2x, V + 0.5 * dt * k2v)
        k4x, k4v = _geodesic_rhs(chart, X + dt * k3x, V + dt * k3v)
        X = X + (dt / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x)
        V = V + (dt / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v)
        if keep_path:
            path.append((X.copy(), V.copy()))
    return (X, V, path) if keep_path else (X, V, None)


def geodesic_flow(M: ModelManifold, x, v, t_end: float, dt: float = 1e-3):
    """Integrate the geodesic through (x, v) until t_end with step ~dt.

    Returns (times, points, velocities) arrays.  Raises EscapeError with the
    exit time if the trajectory leaves the chart domain.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    _check_in_domain(M, x)
    if t_end < 0 or dt <= 0:
        raise ParameterError("t_end must be >= 0 and dt > 0")
    n_steps = max(1, int(math.ceil(t_end / dt)))
    X, V, path = _flow_batch(M.chart, x[None, :], v[None, :], t_end, n_steps, keep_path=True)
    times = np.linspace(0.0, t_end, n_steps + 1)
    pts = np.stack([p[0][0] for p in path], axis=0)
    vels = np.stack([p[1][0] for p in path], axis=0)
    inside = M.chart.contains(pts, slack=1e-9)
    if not np.all(inside):
        bad = int(np.argmin(inside))
        raise EscapeError("geodesic left the chart domain", exit_time=float(times[bad]))
    return times, pts, vels


_EXP_STEP = 1e-2


def exp_map_batch(M: ModelManifold, x, V: np.ndarray) -> np.ndarray:
    """Endpoints of the geodesics from x with initial velocities V (rows)."""
    x = np.asarray(x, dtype=float)
    V = np.asarray(V, dtype=float)
    g = M.chart.metric(x)
    speed = np.sqrt(np.einsum("ij,...i,...j->...", g, V, V))
    vmax = float(np.max(speed)) if speed.size else 0.0
    if vmax == 0.0:
        return np.broadcast_to(x, V.shape).copy()
    n_steps = max(32, int(math.ceil(vmax / _EXP_STEP)))
    X0 = np.broadcast_to(x, V.shape).copy()
    X, _, _ = _flow_batch(M.chart, X0, V, 1.0, n_steps)
    inside = M.chart.contains(X, slack=1e-9)
    if not np.all(inside):
        raise EscapeError("exponential map left the chart domain", exit_time=None)
    return X


def exp_map(M: ModelManifold, x, v) -> np.ndarray:
    """Endpoint exp_x(v) of the unit-time geodesic with initial velocity v."""
    v = np.asarray(v, dtype=float)
    return exp_map_batch(M, x, v[None, :])[0]


def geodesic_distance(M: ModelManifold, x, y) -> float:
    """Closed-form geodesic distance for catalog kinds that provide one."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_in_domain(M, x)
    _check_in_domain(M, y)
    if M.kind == "euclidean":
        return float(np.linalg.norm(x - y))
    if M.kind == "sphere":
        # half-angle form of rho * (angle between unit position vectors),
        # stable for nearby points
        rho = M.params["radius"]
        u1, u2, half_sin = _polar_split(x, y, rho)
        s = math.sin(0.5 * (u1 - u2)) ** 2 + math.sin(u1) * math.sin(u2) * half_sin ** 2
        return float(2.0 * rho * math.asin(min(1.0, math.sqrt(max(s, 0.0)))))
    if M.kind == "hyperbolic":
        rho = M.params["scale"]
        u1, u2, half_sin = _polar_split(x, y, rho)
        s = math.sinh(0.5 * (u1 - u2)) ** 2 + math.sinh(u1) * math.sinh(u2) * half_sin ** 2
        return float(2.0 * rho * math.asinh(math.sqrt(max(s, 0.0))))
    if M.kind == "flat_torus":
        periods = np.asarray(M.params["periods"])
        best = math.inf
        m = M.dim
        for idx in np.ndindex(*(3,) * m):
            k = np.asarray(idx) - 1
            best = min(best, float(np.linalg.norm(x - y + k * periods)))
        return best
    raise UnsupportedError(f"no closed-form distance for kind {M.kind!r}")


def _polar_split(x: np.ndarray, y: np.ndarray, rho: float):
    """(u1, u2, sin(theta/2)) for two normal-coordinate points: polar angles
    u_i = |x_i|/rho and half the angle between the direction vectors."""
    r1 = float(np.linalg.norm(x))
    r2 = float(np.linalg.norm(y))
    if r1 == 0.0 or r2 == 0.0:
        half_sin = 0.0
    else:
        half_sin = min(1.0, 0.5 * float(np.linalg.norm(x / r1 - y / r2)))
    return r1 / rho, r2 / rho, half_sin
