"""Uniform lattices over geodesic balls and scalar fields on them.

A ball grid lives in the manifold's chart; for normal charts the coordinate
norm of a node equals its geodesic distance from the center, so membership
tests against the ball are exact.  Nodes on the closed ball are kept:
strictly interior nodes with a full set of axis neighbors carry regular
stencils, strictly interior nodes with a missing neighbor get Shortley-Weller
arms ending on the sphere, and nodes that fall exactly on the sphere are
Dirichlet (rim) nodes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ChartError, ParameterError, ResolutionError
from .manifolds import ModelManifold

__all__ = ["BallGrid", "ScalarField", "build_ball_grid"]

# Node classification codes.
INTERIOR = 0      # strictly inside, all 2m axis neighbors are grid nodes
CUT = 1           # strictly inside, some axis neighbor missing (SW arms)
RIM = 2           # exactly on the sphere: Dirichlet node

_REL_TOL = 1e-9


@dataclass
class BallGrid:
    """Lattice covering the closed geodesic ball of radius r around center."""

    manifold: ModelManifold
    center: np.ndarray
    radius: float
    spacing: float
    nodes: np.ndarray            # (N, m) chart coordinates
    classes: np.ndarray          # (N,) codes INTERIOR/CUT/RIM
    neighbors: np.ndarray        # (N, m, 2) node index of -/+ neighbor, -1 if absent
    arms: np.ndarray             # (N, m, 2) arm length: spacing, or SW cut length
    arm_boundary_idx: np.ndarray  # (N, m, 2) boundary-point index for cut arms, -1 otherwise
    boundary_points: np.ndarray  # (B, m) Dirichlet points: arm endpoints then rim nodes
    rim_boundary_idx: np.ndarray  # (N,) boundary-point index of each rim node, -1 otherwise
    unknown_index: np.ndarray    # (N,) index into the unknown vector, -1 for rim nodes
    unknown_nodes: np.ndarray = field(init=False)

    def __post_init__(self):
        self.unknown_nodes = np.flatnonzero(self.unknown_index >= 0)

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_unknowns(self) -> int:
        return int(self.unknown_nodes.size)

    @property
    def interior_mask(self) -> np.ndarray:
        return self.classes == INTERIOR

    @property
    def cut_mask(self) -> np.ndarray:
        return self.classes == CUT

    @property
    def rim_mask(self) -> np.ndarray:
        return self.classes == RIM

    @property
    def unknown_mask(self) -> np.ndarray:
        return self.classes != RIM

    def deep_mask(self) -> np.ndarray:
        """Nodes whose full box stencil (axis and diagonal neighbors) exists.

        Central cross-derivative stencils are exact only here; consistency
        studies measure truncation on these nodes.
        """
        ok = self.interior_mask.copy()
        m = self.dim
        for i in range(m):
            for j in range(i + 1, m):
                for si in (0, 1):
                    for sj in (0, 1):
                        ni = self.neighbors[:, i, si]
                        has = ni >= 0
                        nj = np.where(has, self.neighbors[np.maximum(ni, 0), j, sj], -1)
                        ok &= has & (nj >= 0)
        return ok

    def coordinate_radii(self) -> np.ndarray:
        return np.linalg.norm(self.nodes - self.center, axis=1)

    def select_ball(self, radius: float) -> np.ndarray:
        """Mask of nodes within coordinate radius ``radius`` of the center."""
        return self.coordinate_radii() <= radius * (1.0 + _REL_TOL)

    def node_volumes(self) -> np.ndarray:
        """Midpoint-rule volume weights sqrt(det g) * h^m per node."""
        return self.manifold.chart.sqrt_det(self.nodes) * self.spacing ** self.dim

    def boundary_values(self, data) -> np.ndarray:
        """Resolve Dirichlet data (callable or array) on boundary_points."""
        if callable(data):
            pts = self.boundary_points
            vals = np.asarray([data(p) for p in pts], dtype=float) if pts.size else np.zeros(0)
            return vals
        vals = np.asarray(data, dtype=float)
        if vals.shape != (self.boundary_points.shape[0],):
            raise ParameterError(
                f"boundary data must have shape ({self.boundary_points.shape[0]},)")
        return vals


def build_ball_grid(M: ModelManifold, x, r: float, h: float) -> BallGrid:
    """Build the lattice grid over the closed geodesic ball B(x, r).

    Requires 0 < r < injectivity radius at x and 0 < h <= r/4, and for
    curved normal charts the center must be the chart base point (origin),
    where coordinate radius equals geodesic distance.
    """
    x = np.asarray(x, dtype=float)
    if not M.normal_chart:
        raise ChartError(f"ball grids need a normal chart, not kind {M.kind!r}")
    if r <= 0 or h <= 0:
        raise ParameterError("radius and spacing must be positive")
    # h <= r/4 is the documented sweet spot; anything beyond r/2 cannot carry
    # a meaningful stencil at all.
    if h > r / 2.0 * (1.0 + _REL_TOL):
        raise ParameterError("spacing must satisfy h <= r/2")
    if r >= M.inj_radius_at(x):
        raise ChartError("ball radius must stay below the injectivity radius")
    if M.kind in ("sphere", "hyperbolic") and np.linalg.norm(x) > _REL_TOL:
        raise ChartError("center of a curved-chart ball must be the chart base point")

    m = M.dim
    tol = _REL_TOL * max(r, 1.0)
    kmax = int(np.floor(r / h + 0.5 + _REL_TOL)) + 1
    axes = [np.arange(-kmax, kmax + 1)] * m
    mesh = np.meshgrid(*axes, indexing="ij")
    lattice = np.stack([a.ravel() for a in mesh], axis=-1)
    coords = lattice * h + x
    dist = np.linalg.norm(coords - x, axis=1)
    keep = dist <= r + tol
    lattice = lattice[keep]
    coords = coords[keep]
    dist = dist[keep]

    n = coords.shape[0]
    shape = (2 * kmax + 1,) * m
    index_grid = -np.ones(shape, dtype=np.int64)
    lattice_idx = tuple((lattice[:, d] + kmax for d in range(m)))
    index_grid[lattice_idx] = np.arange(n)

    is_rim = dist >= r - tol
    neighbors = -np.ones((n, m, 2), dtype=np.int64)
    for d in range(m):
        for side, step in ((0, -1), (1, +1)):
            shifted = lattice.copy()
            shifted[:, d] += step
            inside_box = np.all(np.abs(shifted) <= kmax, axis=1)
            idx = np.full(n, -1, dtype=np.int64)
            sel = tuple(shifted[inside_box, dd] + kmax for dd in range(m))
            idx[inside_box] = index_grid[sel]
            neighbors[:, d, side] = idx

    full = np.all(neighbors >= 0, axis=(1, 2))
    classes = np.where(is_rim, RIM, np.where(full, INTERIOR, CUT))

    if not np.any(classes == INTERIOR):
        raise ResolutionError("grid too coarse: no interior node")

    # Shortley-Weller arms for missing neighbors of strictly-inside nodes.
    arms = np.full((n, m, 2), h, dtype=float)
    arm_boundary_idx = -np.ones((n, m, 2), dtype=np.int64)
    bpts = []
    d_rel = coords - x
    sq = r * r - dist * dist
    for d in range(m):
        for side, sgn in ((0, -1.0), (1, +1.0)):
            missing = (neighbors[:, d, side] < 0) & (classes != RIM)
            if not np.any(missing):
                continue
            di = d_rel[missing, d]
            s = -sgn * di + np.sqrt(di * di + np.maximum(sq[missing], 0.0))
            s = np.clip(s, _REL_TOL * h, h)
            arms[missing, d, side] = s
            pts = coords[missing].copy()
            pts[:, d] += sgn * s
            start = len(bpts)
            bpts.extend(pts)
            arm_boundary_idx[missing, d, side] = np.arange(start, len(bpts))

    rim_boundary_idx = -np.ones(n, dtype=np.int64)
    rim_nodes = np.flatnonzero(classes == RIM)
    start = len(bpts)
    bpts.extend(coords[rim_nodes])
    rim_boundary_idx[rim_nodes] = np.arange(start, start + rim_nodes.size)

    boundary_points = np.asarray(bpts, dtype=float).reshape(-1, m)

    unknown_index = -np.ones(n, dtype=np.int64)
    unk = np.flatnonzero(classes != RIM)
    unknown_index[unk] = np.arange(unk.size)

    return BallGrid(
        manifold=M, center=x, radius=float(r), spacing=float(h),
        nodes=coords, classes=classes, neighbors=neighbors, arms=arms,
        arm_boundary_idx=arm_boundary_idx, boundary_points=boundary_points,
        rim_boundary_idx=rim_boundary_idx, unknown_index=unknown_index,
    )


@dataclass
class ScalarField:
    """Real values attached to every node of a ball grid."""

    grid: BallGrid
    values: np.ndarray
    solve_info: Optional[dict] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n_nodes,):
            raise ParameterError("field length must equal the node count")
        if not np.all(np.isfinite(self.values)):
            raise ParameterError("field values must be finite")

    @staticmethod
    def from_function(grid: BallGrid, fn: Callable) -> "ScalarField":
        vals = np.asarray(fn(grid.nodes), dtype=float)
        if vals.shape != (grid.n_nodes,):
            vals = np.asarray([fn(p) for p in grid.nodes], dtype=float)
        return ScalarField(grid=grid, values=vals)

    @staticmethod
    def zeros(grid: BallGrid) -> "ScalarField":
        return ScalarField(grid=grid, values=np.zeros(grid.n_nodes))

    def copy_with(self, values: np.ndarray) -> "ScalarField":
        return ScalarField(grid=self.grid, values=np.asarray(values, dtype=float))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"x{i+1}" for i in range(self.grid.dim)] + ["value"])
            for p, v in zip(self.grid.nodes, self.values):
                writer.writerow([repr(float(c)) for c in p] + [repr(float(v))])

    @staticmethod
    def from_csv(grid: BallGrid, path) -> "ScalarField":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        data = np.asarray(rows[1:], dtype=float)
        pts, vals = data[:, :-1], data[:, -1]
        if pts.shape != grid.nodes.shape or not np.allclose(pts, grid.nodes, atol=1e-12):
            raise ParameterError("CSV nodes do not match the grid")
        return ScalarField(grid=grid, values=vals)
