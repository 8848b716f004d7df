"""Taylor-Hood Q2/Q1 spaces on uniform quad meshes.

Provides DOF enumeration for the biquadratic vector velocity and bilinear
scalar pressure, reference-cell basis tables, tensor Gauss quadrature, the
discontinuous coarse space the local projection filters against, and
Dirichlet bookkeeping.  Because every cell is the same rectangle, the
reference-to-physical map is affine with one global scaling, so all basis
tables are shared by every cell.
"""

import numpy as np
from numpy.polynomial.legendre import leggauss

from .mesh import Mesh, PERIODIC


def q1_shape(points):
    """Bilinear basis on [-1,1]^2 at ``points`` (n, 2).

    Returns values (4, n) and reference gradients (4, n, 2).  Local node
    order is tensor-product: (x fastest) (-1,-1), (1,-1), (-1,1), (1,1).
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    xi, eta = pts[:, 0], pts[:, 1]
    lx = np.stack([(1 - xi) / 2, (1 + xi) / 2])
    ly = np.stack([(1 - eta) / 2, (1 + eta) / 2])
    dlx = np.stack([np.full_like(xi, -0.5), np.full_like(xi, 0.5)])
    dly = np.stack([np.full_like(eta, -0.5), np.full_like(eta, 0.5)])
    vals = np.empty((4, len(xi)))
    grads = np.empty((4, len(xi), 2))
    for b in range(2):
        for a in range(2):
            k = 2 * b + a
            vals[k] = lx[a] * ly[b]
            grads[k, :, 0] = dlx[a] * ly[b]
            grads[k, :, 1] = lx[a] * dly[b]
    return vals, grads


def q2_shape(points):
    """Biquadratic basis on [-1,1]^2; nodes at the 3x3 tensor grid.

    Same conventions as :func:`q1_shape`; returns (9, n) values and
    (9, n, 2) reference gradients.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    xi, eta = pts[:, 0], pts[:, 1]

    def line(z):
        return np.stack([z * (z - 1) / 2, 1 - z * z, z * (z + 1) / 2])

    def dline(z):
        return np.stack([z - 0.5, -2 * z, z + 0.5])

    lx, ly = line(xi), line(eta)
    dlx, dly = dline(xi), dline(eta)
    vals = np.empty((9, len(xi)))
    grads = np.empty((9, len(xi), 2))
    for b in range(3):
        for a in range(3):
            k = 3 * b + a
            vals[k] = lx[a] * ly[b]
            grads[k, :, 0] = dlx[a] * ly[b]
            grads[k, :, 1] = lx[a] * dly[b]
    return vals, grads


def gauss_rule(order):
    """Tensor Gauss-Legendre rule on [-1,1]^2.

    Exact for polynomials of degree <= 2*order - 1 per axis; the weights sum
    to the reference measure 4.
    """
    if order < 1:
        raise ValueError("quadrature order must be >= 1")
    x, w = leggauss(order)
    xi, eta = np.meshgrid(x, x, indexing="xy")
    wx, wy = np.meshgrid(w, w, indexing="xy")
    points = np.column_stack([xi.ravel(), eta.ravel()])
    weights = (wx * wy).ravel()
    return points, weights


class CoarseProjectionSpace:
    """Discontinuous per-cell space the fluctuation operator projects out.

    ``kind`` selects piecewise constants ("p0") or discontinuous bilinears
    ("q1"); the induced approximation degree ``s`` is 1 or 2 respectively.
    The local mass matrix is identical on every cell and is prefactored.
    """

    def __init__(self, kind, ref_points, ref_weights, jacobian):
        if kind not in ("p0", "q1"):
            raise ValueError(f"unknown coarse space kind {kind!r}")
        self.kind = kind
        self.degree = 1 if kind == "p0" else 2
        if kind == "p0":
            self.basis = np.ones((1, len(ref_weights)))
        else:
            self.basis, _ = q1_shape(ref_points)
        w = ref_weights * jacobian
        self.local_mass = np.einsum("q,iq,jq->ij", w, self.basis, self.basis)
        self._mass_inv = np.linalg.inv(self.local_mass)
        self._weights = w

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def project_coefficients(self, samples):
        """Coefficients of the local L2 projection of quadrature samples.

        ``samples`` has shape (..., nq); returns (..., dim) coefficients in
        the local basis.
        """
        moments = np.einsum("q,kq,...q->...k", self._weights, self.basis, samples)
        return moments @ self._mass_inv.T

    def project_values(self, samples):
        """Quadrature-point values of the local L2 projection."""
        coef = self.project_coefficients(samples)
        return np.einsum("...k,kq->...q", coef, self.basis)


class TaylorHoodSpace:
    """Q2 vector velocity / Q1 scalar pressure on a uniform quad mesh.

    Velocity DOFs are component-major: DOF = comp * n_vnodes + node, with
    scalar nodes numbered row-major on the refined (2nx+1) x (2ny+1) grid
    (2nx x 2ny under periodic identification).  Pressure DOFs live on the
    mesh vertex grid.  The inf-sup stability of the pair is structural and
    spot-checked in the test suite.
    """

    def __init__(self, mesh: Mesh, quad_order: int = 4, coarse: str = "q1"):
        if quad_order < 3:
            raise ValueError("quadrature order must be >= 3 for Q2/Q1 forms")
        self.mesh = mesh
        self.quad_order = quad_order
        nx, ny = mesh.cells_per_axis
        periodic = mesh.periodic
        if periodic and min(nx, ny) < 2:
            raise ValueError("periodic Taylor-Hood needs at least 2 cells per axis")

        # scalar velocity node grid (Q2 refinement of the mesh)
        self._vgrid = (2 * nx if periodic else 2 * nx + 1,
                       2 * ny if periodic else 2 * ny + 1)
        self._pgrid = (nx if periodic else nx + 1,
                       ny if periodic else ny + 1)
        self.n_vnodes = self._vgrid[0] * self._vgrid[1]
        self.n_pdofs = self._pgrid[0] * self._pgrid[1]
        self.n_vdofs = 2 * self.n_vnodes

        self.vnode_coords = self._node_coords(self._vgrid, mesh.hx / 2, mesh.hy / 2)
        self.pnode_coords = self._node_coords(self._pgrid, mesh.hx, mesh.hy)

        self.cell_vnodes = self._cell_map(3, self._vgrid, periodic)
        self.cell_pnodes = self._cell_map(2, self._pgrid, periodic)
        # 18 local velocity DOFs: 9 x-component then 9 y-component
        self.cell_vdofs = np.concatenate(
            [self.cell_vnodes, self.cell_vnodes + self.n_vnodes], axis=1)

        if periodic:
            self.dirichlet_nodes = np.array([], dtype=int)
        else:
            gx, gy = self._vgrid
            jx, jy = np.meshgrid(np.arange(gx), np.arange(gy), indexing="xy")
            on_bdy = (jx == 0) | (jx == gx - 1) | (jy == 0) | (jy == gy - 1)
            self.dirichlet_nodes = np.flatnonzero(on_bdy.ravel())
        self.dirichlet_vdofs = np.concatenate(
            [self.dirichlet_nodes, self.dirichlet_nodes + self.n_vnodes])
        free = np.ones(self.n_vdofs, dtype=bool)
        free[self.dirichlet_vdofs] = False
        self.free_vdofs = np.flatnonzero(free)

        # quadrature and shared basis tables
        self.quad_points, self.quad_weights = gauss_rule(quad_order)
        self.n_quad = len(self.quad_weights)
        self.jacobian = mesh.hx * mesh.hy / 4.0
        self.wq = self.quad_weights * self.jacobian   # physical weights per cell

        self.v_val, v_dref = q2_shape(self.quad_points)
        self.p_val, p_dref = q1_shape(self.quad_points)
        # physical gradients: affine map with scales hx/2, hy/2
        self.v_grad = np.empty_like(v_dref)
        self.v_grad[:, :, 0] = v_dref[:, :, 0] * (2.0 / mesh.hx)
        self.v_grad[:, :, 1] = v_dref[:, :, 1] * (2.0 / mesh.hy)
        self.p_grad = np.empty_like(p_dref)
        self.p_grad[:, :, 0] = p_dref[:, :, 0] * (2.0 / mesh.hx)
        self.p_grad[:, :, 1] = p_dref[:, :, 1] * (2.0 / mesh.hy)

        # physical quadrature coordinates per cell, (n_cells, nq, 2)
        origins = mesh.cell_origins()
        half = np.array([mesh.hx / 2.0, mesh.hy / 2.0])
        self.quad_coords = (origins[:, None, :]
                            + (self.quad_points[None, :, :] + 1.0) * half)

        self.coarse = CoarseProjectionSpace(
            coarse, self.quad_points, self.quad_weights, self.jacobian)

    def _node_coords(self, grid, dx, dy):
        gx, gy = grid
        jx, jy = np.meshgrid(np.arange(gx), np.arange(gy), indexing="xy")
        return np.column_stack([
            self.mesh.origin[0] + jx.ravel() * dx,
            self.mesh.origin[1] + jy.ravel() * dy,
        ])

    def _cell_map(self, nodes_per_axis, grid, periodic):
        nx, ny = self.mesh.cells_per_axis
        gx, gy = grid
        step = nodes_per_axis - 1
        cx, cy = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
        cx, cy = cx.ravel(), cy.ravel()
        cols = []
        for b in range(nodes_per_axis):
            for a in range(nodes_per_axis):
                jx = step * cx + a
                jy = step * cy + b
                if periodic:
                    jx %= gx
                    jy %= gy
                cols.append(jy * gx + jx)
        return np.column_stack(cols)

    def velocity_components(self, u):
        """Split a velocity DOF vector into per-component nodal arrays."""
        return u[: self.n_vnodes], u[self.n_vnodes:]


def eval_basis(space: TaylorHoodSpace, cell: int, point):
    """Evaluate all local basis functions of one cell at a reference point.

    Returns (velocity values (9,), velocity physical gradients (9, 2),
    pressure values (4,), pressure physical gradients (4, 2)).  The affine
    map makes the physical gradients identical on every cell; ``cell`` is
    kept for interface symmetry and bounds checking.
    """
    if not 0 <= cell < space.mesh.n_cells:
        raise IndexError(f"cell {cell} out of range")
    pt = np.asarray(point, dtype=float).reshape(1, 2)
    vv, vg = q2_shape(pt)
    pv, pg = q1_shape(pt)
    sx, sy = 2.0 / space.mesh.hx, 2.0 / space.mesh.hy
    vg_phys = np.column_stack([vg[:, 0, 0] * sx, vg[:, 0, 1] * sy])
    pg_phys = np.column_stack([pg[:, 0, 0] * sx, pg[:, 0, 1] * sy])
    return vv[:, 0], vg_phys, pv[:, 0], pg_phys


def quadrature(space: TaylorHoodSpace):
    """Reference quadrature rule as (points (nq, 2), weights (nq,))."""
    return space.quad_points, space.quad_weights


def interpolate_nodal(space: TaylorHoodSpace, fn, target: str = "velocity"):
    """Nodal interpolation into the velocity or pressure space.

    ``fn`` is vectorized over coordinates: for velocity it maps (x, y) to a
    pair of component arrays, for pressure to a scalar array.  Functions
    already in the space are reproduced exactly at the DOFs.
    """
    if target == "velocity":
        x, y = space.vnode_coords[:, 0], space.vnode_coords[:, 1]
        u1, u2 = fn(x, y)
        out = np.empty(space.n_vdofs)
        out[: space.n_vnodes] = u1
        out[space.n_vnodes:] = u2
        return out
    if target == "pressure":
        x, y = space.pnode_coords[:, 0], space.pnode_coords[:, 1]
        return np.asarray(fn(x, y), dtype=float)
    raise ValueError(f"unknown interpolation target {target!r}")
