"""Finite-difference gradient norm and Laplace-Beltrami operator on ball grids.

The Laplacian is discretized in non-divergence form

    L phi = sum_ij g^{ij} d_i d_j phi + sum_j b^j d_j phi,
    b^j = (1/sqrt(det g)) d_i (sqrt(det g) g^{ij}),

with central second differences at full-stencil nodes, Shortley-Weller
unequal-arm stencils along cut axes, and one-sided cross differences (toward
the origin, where the diagonal neighbor always exists) when a corner of the
cross stencil is missing.  The drift coefficients b^j come from closed-form
metric derivatives, so the only discretization error is in the differences
applied to the field.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import sparse

from .errors import ConditioningError, ParameterError
from .grids import RIM, BallGrid, ScalarField

__all__ = ["DiscreteLaplacian", "assemble_laplacian", "gradient_norm",
           "drift_coefficients", "drift_at"]

_DET_FLOOR = 1e-12


def drift_at(chart, pts: np.ndarray) -> np.ndarray:
    """b^j = d_i g^{ij} + (1/2) g^{ij} tr(g^{-1} d_i g) from exact metric data."""
    g = chart.metric(pts)
    D = chart.metric_derivs(pts)  # [..., i, a, b] = d_i g_ab
    ginv = np.linalg.inv(g)
    # d_i g^{jk} = -(g^{-1} (d_i g) g^{-1})^{jk}
    dginv = -np.einsum("...ja,...iab,...bk->...ijk", ginv, D, ginv)
    tr = np.einsum("...ab,...iba->...i", ginv, D)
    return np.einsum("...iij->...j", dginv) + 0.5 * np.einsum("...i,...ij->...j", tr, ginv)


def drift_coefficients(grid: BallGrid) -> np.ndarray:
    """Drift coefficients of the non-divergence Laplacian at every grid node."""
    return drift_at(grid.manifold.chart, grid.nodes)


def _axis_derivatives(grid: BallGrid, values: np.ndarray) -> np.ndarray:
    """d_i phi at every node: central where both neighbors exist, one-sided
    (second order when two same-side neighbors exist, else first order)
    otherwise, zero in the degenerate no-neighbor case."""
    n, m = grid.n_nodes, grid.dim
    h = grid.spacing
    out = np.zeros((n, m))
    nb = grid.neighbors
    for d in range(m):
        minus = nb[:, d, 0]
        plus = nb[:, d, 1]
        both = (minus >= 0) & (plus >= 0)
        out[both, d] = (values[plus[both]] - values[minus[both]]) / (2.0 * h)
        for side, sgn in ((1, 1.0), (0, -1.0)):
            only = (nb[:, d, side] >= 0) & (nb[:, d, 1 - side] < 0)
            if not np.any(only):
                continue
            n1 = nb[only, d, side]
            n2 = nb[n1, d, side]
            two = n2 >= 0
            idx = np.flatnonzero(only)
            i2 = idx[two]
            if i2.size:
                a = values[nb[i2, d, side]]
                b = values[nb[nb[i2, d, side], d, side]]
                out[i2, d] = sgn * (-3.0 * values[i2] + 4.0 * a - b) / (2.0 * h)
            i1 = idx[~two]
            if i1.size:
                a = values[nb[i1, d, side]]
                out[i1, d] = sgn * (a - values[i1]) / h
        # rim corner case: no lattice neighbor on either side of axis d.
        # Difference along a diagonal against the matching axis neighbor,
        # which is exact on linear functions.
        none = (minus < 0) & (plus < 0)
        for node in np.flatnonzero(none):
            for j in range(m):
                if j == d:
                    continue
                done = False
                for sj in (0, 1):
                    aj = nb[node, j, sj]
                    if aj < 0:
                        continue
                    for si, sgn_i in ((0, -1.0), (1, 1.0)):
                        diag = nb[aj, d, si]
                        if diag >= 0:
                            out[node, d] = (values[diag] - values[aj]) / (sgn_i * h)
                            done = True
                            break
                    if done:
                        break
                if done:
                    break
    return out


def gradient_norm(phi: ScalarField) -> ScalarField:
    """Pointwise |d phi|_g = sqrt(sum g^{ij} d_i phi d_j phi) on the grid."""
    grid = phi.grid
    d = _axis_derivatives(grid, phi.values)
    ginv = grid.manifold.chart.inverse_metric(grid.nodes)
    sq = np.einsum("...ij,...i,...j->...", ginv, d, d)
    return ScalarField(grid=grid, values=np.sqrt(np.maximum(sq, 0.0)))


def second_differences(grid: BallGrid, values: np.ndarray) -> np.ndarray:
    """d_i d_j phi at every node by the same stencils the Laplacian uses,
    with plain grid data (no boundary values: missing arms fall back to the
    nearest available one-sided formula).  Used by Sobolev-type norms."""
    n, m = grid.n_nodes, grid.dim
    h = grid.spacing
    nb = grid.neighbors
    out = np.zeros((n, m, m))
    # pure second differences d_i^2
    for d in range(m):
        minus, plus = nb[:, d, 0], nb[:, d, 1]
        both = (minus >= 0) & (plus >= 0)
        out[both, d, d] = (values[plus[both]] - 2 * values[both] + values[minus[both]]) / h ** 2
        for side in (0, 1):
            only = (nb[:, d, side] >= 0) & (nb[:, d, 1 - side] < 0)
            idx = np.flatnonzero(only)
            if idx.size == 0:
                continue
            n1 = nb[idx, d, side]
            n2 = nb[n1, d, side]
            ok = n2 >= 0
            i2, a, b = idx[ok], n1[ok], n2[ok]
            out[i2, d, d] = (values[i2] - 2 * values[a] + values[b]) / h ** 2
    # cross differences d_i d_j, central when the 4 corners exist, else
    # one-sided toward the origin
    rel = grid.nodes - grid.center
    for i in range(m):
        for j in range(i + 1, m):
            val = np.zeros(n)
            done = np.zeros(n, dtype=bool)
            ipp = _corner(grid, i, 1, j, 1)
            imm = _corner(grid, i, 0, j, 0)
            ipm = _corner(grid, i, 1, j, 0)
            imp = _corner(grid, i, 0, j, 1)
            cen = (ipp >= 0) & (imm >= 0) & (ipm >= 0) & (imp >= 0)
            val[cen] = (values[ipp[cen]] - values[ipm[cen]]
                        - values[imp[cen]] + values[imm[cen]]) / (4.0 * h * h)
            done |= cen
            rest = ~done
            if np.any(rest):
                si = np.where(rel[rest, i] > 0, 0, 1)
                sj = np.where(rel[rest, j] > 0, 0, 1)
                sgn_i = np.where(si == 1, 1.0, -1.0)
                sgn_j = np.where(sj == 1, 1.0, -1.0)
                idx = np.flatnonzero(rest)
                ai = nb[idx, i, si]
                aj = nb[idx, j, sj]
                diag = np.where((ai >= 0), _corner_at(grid, idx, i, si, j, sj), -1)
                ok = (ai >= 0) & (aj >= 0) & (diag >= 0)
                sel = idx[ok]
                val[sel] = (values[diag[ok]] - values[ai[ok]] - values[aj[ok]]
                            + values[sel]) / (sgn_i[ok] * sgn_j[ok] * h * h)
            out[:, i, j] = val
            out[:, j, i] = val
    return out


def _corner(grid: BallGrid, i: int, si: int, j: int, sj: int) -> np.ndarray:
    """Index of the (i:si, j:sj) diagonal neighbor of every node (-1 if absent)."""
    step1 = grid.neighbors[:, i, si]
    out = -np.ones(grid.n_nodes, dtype=np.int64)
    has = step1 >= 0
    out[has] = grid.neighbors[step1[has], j, sj]
    return out


def _corner_at(grid: BallGrid, idx: np.ndarray, i: int, si, j: int, sj) -> np.ndarray:
    step1 = grid.neighbors[idx, i, si]
    out = -np.ones(idx.size, dtype=np.int64)
    has = step1 >= 0
    if np.isscalar(si):
        out[has] = grid.neighbors[step1[has], j, sj]
    else:
        out[has] = grid.neighbors[step1[has], j, sj[has]]
    return out


@dataclass
class DiscreteLaplacian:
    """Sparse Laplace-Beltrami operator on the unknown (non-rim) nodes.

    ``node_matrix`` maps node values to operator values on unknowns;
    ``arm_matrix`` carries the Shortley-Weller contributions of Dirichlet
    values at cut-arm endpoints (columns index ``grid.boundary_points``).
    """

    grid: BallGrid
    node_matrix: sparse.csr_matrix   # (n_unknowns, n_nodes)
    arm_matrix: sparse.csr_matrix    # (n_unknowns, n_boundary_points)

    @property
    def shape(self):
        return self.node_matrix.shape

    def apply(self, phi: ScalarField, boundary=None) -> np.ndarray:
        """L phi on unknown nodes; ``boundary`` supplies Dirichlet values at
        the grid's boundary points (default zero)."""
        if phi.grid is not self.grid and phi.grid.n_nodes != self.grid.n_nodes:
            raise ParameterError("field and operator live on different grids")
        out = self.node_matrix @ phi.values
        if boundary is not None:
            out = out + self.arm_matrix @ self.grid.boundary_values(boundary)
        return out

    def system(self, f_values: np.ndarray, boundary) -> tuple:
        """Square system (A, rhs) over unknowns for L psi = f with Dirichlet
        data on the boundary trace."""
        grid = self.grid
        bvals = grid.boundary_values(boundary)
        A = self.node_matrix[:, grid.unknown_nodes].tocsr()
        rhs = np.asarray(f_values, dtype=float)[grid.unknown_nodes].copy()
        rim_nodes = np.flatnonzero(grid.classes == RIM)
        if rim_nodes.size:
            rim_vals = np.zeros(grid.n_nodes)
            rim_vals[rim_nodes] = bvals[grid.rim_boundary_idx[rim_nodes]]
            rhs -= self.node_matrix @ rim_vals
        rhs -= self.arm_matrix @ bvals
        return A, rhs


def assemble_laplacian(grid: BallGrid) -> DiscreteLaplacian:
    """Assemble the sparse non-divergence-form Laplace-Beltrami operator."""
    chart = grid.manifold.chart
    det = np.linalg.det(chart.metric(grid.nodes))
    if np.any(det < _DET_FLOOR):
        raise ConditioningError("metric determinant below 1e-12 on the grid")
    ginv = np.linalg.inv(chart.metric(grid.nodes))
    b = drift_coefficients(grid)

    n, m = grid.n_nodes, grid.dim
    h = grid.spacing
    nb = grid.neighbors
    arms = grid.arms
    unknowns = grid.unknown_nodes
    n_unk = unknowns.size
    row_of = grid.unknown_index

    rows_n, cols_n, vals_n = [], [], []
    rows_a, cols_a, vals_a = [], [], []

    def add_node(r, c, v):
        rows_n.append(r)
        cols_n.append(c)
        vals_n.append(v)

    def add_arm(r, c, v):
        rows_a.append(r)
        cols_a.append(c)
        vals_a.append(v)

    rel = grid.nodes - grid.center
    for node in unknowns:
        r = row_of[node]
        gi = ginv[node]
        bx = b[node]
        # axis terms: g^{dd} d_d^2 + b^d d_d with unequal arms a- / a+
        for d in range(m):
            am, ap = arms[node, d, 0], arms[node, d, 1]
            nm, np_ = nb[node, d, 0], nb[node, d, 1]
            c2 = gi[d, d]
            c1 = bx[d]
            denom = am * ap * (am + ap)
            w_m = 2.0 * ap / denom
            w_p = 2.0 * am / denom
            w_0 = -2.0 / (am * ap)
            u_m = -ap * ap / denom
            u_p = am * am / denom
            u_0 = (ap * ap - am * am) / denom
            add_node(r, node, c2 * w_0 + c1 * u_0)
            for side, nidx, w2, w1 in ((0, nm, w_m, u_m), (1, np_, w_p, u_p)):
                coeff = c2 * w2 + c1 * w1
                if nidx >= 0:
                    add_node(r, nidx, coeff)
                else:
                    add_arm(r, grid.arm_boundary_idx[node, d, side], coeff)
        # cross terms: 2 g^{ij} d_i d_j for i < j
        for i in range(m):
            for j in range(i + 1, m):
                cij = 2.0 * gi[i, j]
                if cij == 0.0:
                    continue
                ipp = _corner_idx(grid, node, i, 1, j, 1)
                imm = _corner_idx(grid, node, i, 0, j, 0)
                ipm = _corner_idx(grid, node, i, 1, j, 0)
                imp = _corner_idx(grid, node, i, 0, j, 1)
                if min(ipp, imm, ipm, imp) >= 0:
                    q = cij / (4.0 * h * h)
                    add_node(r, ipp, q)
                    add_node(r, imm, q)
                    add_node(r, ipm, -q)
                    add_node(r, imp, -q)
                else:
                    si = 0 if rel[node, i] > 0 else 1
                    sj = 0 if rel[node, j] > 0 else 1
                    sgn = (1.0 if si == 1 else -1.0) * (1.0 if sj == 1 else -1.0)
                    ai = nb[node, i, si]
                    aj = nb[node, j, sj]
                    diag = _corner_idx(grid, node, i, si, j, sj)
                    if min(ai, aj, diag) < 0:
                        raise ConditioningError(
                            "no usable cross stencil at a cut node; refine the grid")
                    q = cij / (sgn * h * h)
                    add_node(r, diag, q)
                    add_node(r, ai, -q)
                    add_node(r, aj, -q)
                    add_node(r, node, q)

    node_matrix = sparse.coo_matrix(
        (vals_n, (rows_n, cols_n)), shape=(n_unk, n)).tocsr()
    arm_matrix = sparse.coo_matrix(
        (vals_a, (rows_a, cols_a)),
        shape=(n_unk, grid.boundary_points.shape[0])).tocsr()
    node_matrix.sum_duplicates()
    arm_matrix.sum_duplicates()
    node_matrix.eliminate_zeros()
    arm_matrix.eliminate_zeros()
    return DiscreteLaplacian(grid=grid, node_matrix=node_matrix, arm_matrix=arm_matrix)


def _corner_idx(grid: BallGrid, node: int, i: int, si: int, j: int, sj: int) -> int:
    step1 = grid.neighbors[node, i, si]
    if step1 < 0:
        return -1
    return int(grid.neighbors[step1, j, sj])
