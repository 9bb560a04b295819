"""Closed-form test functions: coordinate/quadratic/radial families on charts,
compactly supported bumps, the mollified planar potential, and the 1D corpus
used by the interval gradient bound.

A spatial function exposes a vectorized ``value(pts)``; when closed-form
derivatives exist it also provides ``gradient(pts)`` (chart partials) and
``manifold_laplacian(M)``.  Otherwise consumers fall back to
``numeric_laplacian``/``numeric_gradient``, central differences of the closed
form with a step far below any grid spacing, combined with the chart's exact
metric coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ParameterError, UnsupportedError
from .manifolds import ModelManifold, Warp

__all__ = [
    "SpatialFunction",
    "CoordinateFunction",
    "ConstantFunction",
    "QuadraticFunction",
    "RadialFunction",
    "WarpedRadialFunction",
    "GenericFunction",
    "numeric_gradient",
    "numeric_laplacian",
    "manifold_laplacian",
    "gradient_norm_exact",
    "radial_bump",
    "normalized_bump_2d",
    "mollified_potential_2d",
    "cos_of_radius",
    "standard_quadratic",
    "field_family",
    "Poly1D",
    "TrigSum1D",
    "random_1d_corpus",
    "FD_STEP",
]

FD_STEP = 5e-4

# int_0^1 exp(-1/(1-s^2)) s ds, frozen from adaptive quadrature, so that the
# unit-radius planar bump below has total mass exactly one by construction.
BUMP_RADIAL_MOMENT_2D = 0.07424775338796101


# ---------------------------------------------------------------------------
# Numeric fallbacks (closed-form metric, small-step differences of the field)


def numeric_gradient(fn: Callable, pts: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    pts = np.asarray(pts, dtype=float)
    m = pts.shape[-1]
    out = np.empty(pts.shape)
    for d in range(m):
        e = np.zeros(m)
        e[d] = step
        out[..., d] = (fn(pts + e) - fn(pts - e)) / (2.0 * step)
    return out


def _numeric_hessian(fn: Callable, pts: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    pts = np.asarray(pts, dtype=float)
    m = pts.shape[-1]
    f0 = fn(pts)
    out = np.empty(pts.shape[:-1] + (m, m))
    for i in range(m):
        ei = np.zeros(m)
        ei[i] = step
        out[..., i, i] = (fn(pts + ei) - 2.0 * f0 + fn(pts - ei)) / step ** 2
        for j in range(i + 1, m):
            ej = np.zeros(m)
            ej[j] = step
            cross = (fn(pts + ei + ej) - fn(pts + ei - ej)
                     - fn(pts - ei + ej) + fn(pts - ei - ej)) / (4.0 * step ** 2)
            out[..., i, j] = cross
            out[..., j, i] = cross
    return out


def numeric_laplacian(M: ModelManifold, fn: Callable, pts: np.ndarray,
                      step: float = FD_STEP) -> np.ndarray:
    """Delta_g fn via exact metric coefficients and small-step differences."""
    from .operators import drift_at  # local import to avoid a cycle

    pts = np.asarray(pts, dtype=float)
    ginv = M.chart.inverse_metric(pts)
    b = drift_at(M.chart, pts)
    hess = _numeric_hessian(fn, pts, step)
    grad = numeric_gradient(fn, pts, step)
    return (np.einsum("...ij,...ij->...", ginv, hess)
            + np.einsum("...j,...j->...", b, grad))


# ---------------------------------------------------------------------------
# Function families


class SpatialFunction:
    """Base: a scalar function of chart coordinates."""

    name = "function"

    def value(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        return self.value(np.asarray(pts, dtype=float))

    def gradient(self, pts: np.ndarray) -> np.ndarray:
        return numeric_gradient(self.value, pts)

    def manifold_laplacian(self, M: ModelManifold) -> Callable:
        """Delta_g of this function as a vectorized callable on chart points."""
        return lambda pts: numeric_laplacian(M, self.value, pts)


@dataclass
class CoordinateFunction(SpatialFunction):
    axis: int = 0

    def __post_init__(self):
        self.name = f"x{self.axis + 1}"

    def value(self, pts):
        return np.asarray(pts, dtype=float)[..., self.axis].copy()

    def gradient(self, pts):
        pts = np.asarray(pts, dtype=float)
        out = np.zeros(pts.shape)
        out[..., self.axis] = 1.0
        return out


@dataclass
class ConstantFunction(SpatialFunction):
    c: float = 1.0

    def __post_init__(self):
        self.name = f"const({self.c:g})"

    def value(self, pts):
        pts = np.asarray(pts, dtype=float)
        return np.full(pts.shape[:-1], self.c)

    def gradient(self, pts):
        return np.zeros(np.asarray(pts, dtype=float).shape)

    def manifold_laplacian(self, M):
        return lambda pts: np.zeros(np.asarray(pts, dtype=float).shape[:-1])


@dataclass
class QuadraticFunction(SpatialFunction):
    """0.5 x.A x + b.x + c with constant coefficients."""

    A: np.ndarray
    b: np.ndarray
    c: float = 0.0
    name: str = "quadratic"

    def value(self, pts):
        pts = np.asarray(pts, dtype=float)
        quad = 0.5 * np.einsum("...i,ij,...j->...", pts, self.A, pts)
        return quad + pts @ self.b + self.c

    def gradient(self, pts):
        pts = np.asarray(pts, dtype=float)
        return np.einsum("ij,...j->...i", 0.5 * (self.A + self.A.T), pts) + self.b


def standard_quadratic(m: int) -> QuadraticFunction:
    """The fixed manufactured quadratic used by the benchmark suites."""
    A = np.zeros((m, m))
    for i in range(m):
        A[i, i] = 2.0 * (1.0 - 0.5 * i)
        for j in range(i + 1, m):
            A[i, j] = A[j, i] = 0.25
    b = np.asarray([0.3 * (i + 1) for i in range(m)])
    return QuadraticFunction(A=A, b=b, c=0.1, name="quadratic")


@dataclass
class RadialFunction(SpatialFunction):
    """u(|x|) with closed-form radial derivatives; on a rotationally symmetric
    normal chart the Laplacian u'' + (m-1)(w'/w)u' is exact."""

    u: Callable
    du: Callable
    d2u: Callable
    name: str = "radial"

    def _r(self, pts):
        return np.linalg.norm(np.asarray(pts, dtype=float), axis=-1)

    def value(self, pts):
        return self.u(self._r(pts))

    def gradient(self, pts):
        pts = np.asarray(pts, dtype=float)
        r = self._r(pts)
        rsafe = np.where(r == 0.0, 1.0, r)
        return (self.du(r) / rsafe)[..., None] * pts

    def manifold_laplacian(self, M: ModelManifold) -> Callable:
        if M.kind in ("euclidean", "flat_torus"):
            profile = None
        elif M.kind in ("sphere", "hyperbolic"):
            profile = M.params["profile"]
        else:
            return super().manifold_laplacian(M)
        m = M.dim

        def lap(pts):
            r = self._r(pts)
            at_origin = r == 0.0
            rsafe = np.where(at_origin, 1.0, r)
            ld = (m - 1.0) / rsafe if profile is None else (m - 1.0) * profile.log_deriv(rsafe)
            out = self.d2u(r) + ld * self.du(r)
            if np.any(at_origin):
                out = np.where(at_origin, m * self.d2u(np.zeros_like(r)), out)
            return out

        return lap


@dataclass
class WarpedRadialFunction(SpatialFunction):
    """u(t) on a 2D warped product chart (t, theta): Delta u = u'' + (f'/f) u'."""

    u: Callable
    du: Callable
    d2u: Callable
    name: str = "warped-radial"

    def value(self, pts):
        return self.u(np.asarray(pts, dtype=float)[..., 0])

    def gradient(self, pts):
        pts = np.asarray(pts, dtype=float)
        out = np.zeros(pts.shape)
        out[..., 0] = self.du(pts[..., 0])
        return out

    def manifold_laplacian(self, M: ModelManifold) -> Callable:
        if M.kind != "warped2d":
            raise UnsupportedError("WarpedRadialFunction needs a warped product")
        warp: Warp = M.params["warp"]

        def lap(pts):
            t = np.asarray(pts, dtype=float)[..., 0]
            return self.d2u(t) + (warp.df(t) / warp.f(t)) * self.du(t)

        return lap


@dataclass
class GenericFunction(SpatialFunction):
    """Wrap a plain callable; derivatives via numeric fallbacks."""

    fn: Callable
    name: str = "generic"

    def value(self, pts):
        pts = np.asarray(pts, dtype=float)
        vals = np.asarray(self.fn(pts), dtype=float)
        if vals.shape != pts.shape[:-1]:
            vals = np.asarray([self.fn(p) for p in pts.reshape(-1, pts.shape[-1])])
            vals = vals.reshape(pts.shape[:-1])
        return vals


def cos_of_radius() -> RadialFunction:
    return RadialFunction(u=np.cos, du=lambda r: -np.sin(r), d2u=lambda r: -np.cos(r),
                          name="cos_r")


def manifold_laplacian(M: ModelManifold, psi) -> Callable:
    """Delta_g psi as a callable, closed form when psi provides one."""
    if isinstance(psi, SpatialFunction):
        return psi.manifold_laplacian(M)
    return lambda pts: numeric_laplacian(M, psi, pts)


def gradient_norm_exact(M: ModelManifold, psi, pts: np.ndarray) -> np.ndarray:
    """|d psi|_g from closed-form (or small-step) chart partials."""
    grad = psi.gradient(pts) if isinstance(psi, SpatialFunction) else numeric_gradient(psi, pts)
    ginv = M.chart.inverse_metric(pts)
    return np.sqrt(np.maximum(np.einsum("...ij,...i,...j->...", ginv, grad, grad), 0.0))


# ---------------------------------------------------------------------------
# Bumps and the mollified planar potential


def _bump_profile(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    si = s[inside]
    out[inside] = np.exp(-1.0 / (1.0 - si * si))
    return out


def _bump_profile_d1(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    si = s[inside]
    w = 1.0 - si * si
    out[inside] = np.exp(-1.0 / w) * (-2.0 * si / w ** 2)
    return out


def _bump_profile_d2(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    si = s[inside]
    w = 1.0 - si * si
    phi = np.exp(-1.0 / w)
    out[inside] = phi * ((2.0 * si / w ** 2) ** 2 - 2.0 * (1.0 + 3.0 * si * si) / w ** 3)
    return out


def radial_bump(radius: float = 1.0, amplitude: float = 1.0) -> RadialFunction:
    """C^infinity bump supported in the coordinate ball of the given radius."""
    if radius <= 0:
        raise ParameterError("bump radius must be positive")
    r0 = float(radius)
    return RadialFunction(
        u=lambda r: amplitude * _bump_profile(r / r0),
        du=lambda r: amplitude * _bump_profile_d1(r / r0) / r0,
        d2u=lambda r: amplitude * _bump_profile_d2(r / r0) / r0 ** 2,
        name=f"bump(r0={r0:g})",
    )


def polynomial_bump(radius: float = 1.0, k: int = 8, amplitude: float = 1.0) -> RadialFunction:
    """(1 - (r/r0)^2)^k inside r0, zero outside: compactly supported and
    C^{k-1}, so lattice quadrature of it converges at order k (all
    Euler-Maclaurin boundary terms vanish)."""
    if radius <= 0 or k < 2:
        raise ParameterError("need radius > 0 and k >= 2")
    r0 = float(radius)

    def u(r):
        s = np.asarray(r, dtype=float) / r0
        w = np.maximum(1.0 - s * s, 0.0)
        return amplitude * w ** k

    def du(r):
        s = np.asarray(r, dtype=float) / r0
        w = np.maximum(1.0 - s * s, 0.0)
        return amplitude * k * w ** (k - 1) * (-2.0 * s) / r0

    def d2u(r):
        s = np.asarray(r, dtype=float) / r0
        w = np.maximum(1.0 - s * s, 0.0)
        val = -2.0 * k * w ** (k - 1) + 4.0 * k * (k - 1) * s * s * w ** (k - 2)
        return amplitude * val / r0 ** 2

    return RadialFunction(u=u, du=du, d2u=d2u, name=f"polybump(r0={r0:g},k={k})")


def normalized_bump_2d() -> RadialFunction:
    """Radial planar bump of unit mass supported in the unit disk."""
    amp = 1.0 / (2.0 * math.pi * BUMP_RADIAL_MOMENT_2D)
    bump = radial_bump(1.0, amp)
    bump.name = "unit-mass-bump"
    return bump


class MollifiedPotential2D(RadialFunction):
    """Planar potential whose Laplacian is the unit-mass bump: radial, equal
    to log(r)/(2 pi) outside the unit disk, smooth inside, u(1) = 0."""

    def __init__(self, n_grid: int = 4001):
        bump = normalized_bump_2d()
        rs = np.linspace(0.0, 1.0, n_grid)
        dens = bump.u(rs) * rs
        # cumulative mass M(r) = 2 pi int_0^r bump(s) s ds  (midpoint/trapezoid)
        mass = 2.0 * math.pi * np.concatenate(
            [[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(rs))])
        mass[-1] = 1.0
        with np.errstate(divide="ignore", invalid="ignore"):
            slope = np.where(rs > 0, mass / (2.0 * math.pi * rs), 0.0)
        # u(r) = -int_r^1 M(rho)/(2 pi rho) d rho, u(1) = 0
        tail = np.concatenate([[0.0], np.cumsum(0.5 * (slope[1:] + slope[:-1]) * np.diff(rs))])
        u_inner = tail - tail[-1]
        self._spline = CubicSpline(rs, u_inner)
        self._dspline = self._spline.derivative()
        self._bump = bump
        super().__init__(u=self._u, du=self._du, d2u=self._d2u, name="mollified-potential")

    def _u(self, r):
        r = np.asarray(r, dtype=float)
        out = np.where(r >= 1.0, np.log(np.maximum(r, 1.0)) / (2.0 * math.pi),
                       self._spline(np.minimum(r, 1.0)))
        return out

    def _du(self, r):
        r = np.asarray(r, dtype=float)
        return np.where(r >= 1.0, 1.0 / (2.0 * math.pi * np.maximum(r, 1.0)),
                        self._dspline(np.minimum(r, 1.0)))

    def _d2u(self, r):
        r = np.asarray(r, dtype=float)
        rsafe = np.where(r == 0.0, 1.0, r)
        # Delta u = u'' + u'/r = bump  =>  u'' = bump - u'/r
        inner = self._bump.u(r) - self._du(r) / rsafe
        inner = np.where(r == 0.0, 0.5 * self._bump.u(np.zeros_like(r)), inner)
        return np.where(r >= 1.0, -1.0 / (2.0 * math.pi * np.maximum(r, 1.0) ** 2), inner)

    def manifold_laplacian(self, M: ModelManifold) -> Callable:
        if M.kind != "euclidean" or M.dim != 2:
            raise UnsupportedError("the mollified potential lives on Euclidean(2)")
        return lambda pts: self._bump.u(np.linalg.norm(np.asarray(pts, float), axis=-1))


def mollified_potential_2d() -> MollifiedPotential2D:
    return MollifiedPotential2D()


def field_family(name: str, M: ModelManifold) -> SpatialFunction:
    """Resolve a named field family on a given manifold (config surface)."""
    key = name.lower()
    if key in ("x1", "x2", "x3"):
        axis = int(key[1]) - 1
        if axis >= M.dim:
            raise ParameterError(f"family {name!r} needs dim > {axis}")
        return CoordinateFunction(axis)
    if key == "const":
        return ConstantFunction(1.0)
    if key == "cos_r":
        return cos_of_radius()
    if key == "cosh_r":
        return RadialFunction(u=np.cosh, du=np.sinh, d2u=np.cosh, name="cosh_r")
    if key == "quadratic":
        return standard_quadratic(M.dim)
    if key == "quartic_radial":
        return RadialFunction(u=lambda r: r ** 2 / 4.0 - r ** 4 / 16.0,
                              du=lambda r: r / 2.0 - r ** 3 / 4.0,
                              d2u=lambda r: 0.5 - 0.75 * r ** 2,
                              name="quartic_radial")
    raise ParameterError(f"unknown field family {name!r}")


# ---------------------------------------------------------------------------
# 1D corpus for the interval gradient bound


@dataclass
class Poly1D:
    coeffs: Sequence[float]

    def __post_init__(self):
        self._p = np.polynomial.Polynomial(np.asarray(self.coeffs, dtype=float))
        self._d1 = self._p.deriv(1)
        self._d2 = self._p.deriv(2)

    def value(self, x):
        return self._p(np.asarray(x, dtype=float))

    def d1(self, x):
        return self._d1(np.asarray(x, dtype=float))

    def d2(self, x):
        return self._d2(np.asarray(x, dtype=float))


@dataclass
class TrigSum1D:
    """sum_k a_k sin(k x) + b_k cos(k x), k = 1..len(a)."""

    a: Sequence[float]
    b: Sequence[float]

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        self._k = np.arange(1, len(self.a) + 1, dtype=float)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        kx = np.multiply.outer(x, self._k)
        return np.sin(kx) @ self.a + np.cos(kx) @ self.b

    def d1(self, x):
        x = np.asarray(x, dtype=float)
        kx = np.multiply.outer(x, self._k)
        return np.cos(kx) @ (self._k * self.a) - np.sin(kx) @ (self._k * self.b)

    def d2(self, x):
        x = np.asarray(x, dtype=float)
        kx = np.multiply.outer(x, self._k)
        return -np.sin(kx) @ (self._k ** 2 * self.a) - np.cos(kx) @ (self._k ** 2 * self.b)


def random_1d_corpus(n: int, seed: int = 0):
    """Seeded corpus of (u, a, r) triples: degree-<=6 polynomials and 3-term
    trigonometric sums with coefficients in [-5, 5], a in [-2, 2], r in (0, 1]."""
    rng = np.random.Generator(np.random.PCG64(seed))
    out = []
    for i in range(n):
        if i % 2 == 0:
            deg = int(rng.integers(1, 7))
            u = Poly1D(rng.uniform(-5.0, 5.0, size=deg + 1))
        else:
            u = TrigSum1D(rng.uniform(-5.0, 5.0, size=3), rng.uniform(-5.0, 5.0, size=3))
        a = float(rng.uniform(-2.0, 2.0))
        r = float(rng.uniform(1e-3, 1.0))
        out.append((u, a, r))
    return out
