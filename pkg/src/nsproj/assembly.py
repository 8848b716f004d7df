"""Assembly of all bilinear and trilinear forms into sparse operators.

Static operators (mass, viscous stiffness, grad-div, divergence coupling,
pressure mass/stiffness) share one local matrix across all cells because the
mesh is uniform.  The advection-dependent operators (skew convection and the
streamline-upwind local-projection term) are reassembled from the current
advecting field.  All cell loops are vectorized; contributions are merged in
deterministic cell order via COO duplication.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .fespace import TaylorHoodSpace

TAU_KINDS = ("off", "constant", "su_half", "dimensional")


@dataclass
class StabilizationParams:
    """Grad-div coefficient and streamline-upwind weight rule.

    ``tau_kind`` is one of "off", "constant", "su_half" (h/(2|u_M|)) or
    "dimensional" (min{h/|u_M|, h^2/nu}); ``tau_constant`` is the value used
    by the constant rule.  ``eps_velocity`` floors |u_M| so the per-cell
    weights stay finite.
    """

    gamma: float = 1.0
    tau_kind: str = "su_half"
    tau_constant: float = 1.0
    eps_velocity: float = 1e-12

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        if self.tau_kind not in TAU_KINDS:
            raise ValueError(f"unknown tau rule {self.tau_kind!r}")
        if self.tau_kind == "constant" and self.tau_constant < 0:
            raise ValueError("constant tau must be nonnegative")

    @staticmethod
    def parse_tau(text: str):
        """Parse a tau rule string: "off", "su_half", "dimensional",
        "constant:<value>" or a bare number (treated as constant)."""
        text = text.strip().lower().replace("-", "_")
        if text in ("off", "su_half", "dimensional"):
            return text, 1.0
        if text.startswith("constant"):
            _, _, val = text.partition(":")
            return "constant", float(val) if val else 1.0
        return "constant", float(text)


@dataclass
class AssembledOperators:
    """The time-independent operators of one discretization.

    ``convection_su`` is the per-step slot for the advection-dependent sum
    C(w) + S(w); it starts empty and is refreshed by the stepper.
    """

    mass: sp.csr_matrix
    stiffness: sp.csr_matrix
    graddiv: sp.csr_matrix
    div_coupling: sp.csr_matrix
    pressure_mass: sp.csr_matrix
    pressure_stiffness: sp.csr_matrix
    convection_su: sp.csr_matrix | None = field(default=None)


def tau_value(params: StabilizationParams, h, speed, nu):
    """Per-cell streamline-upwind weight for diameter ``h`` and |u_M|.

    Vectorized over ``speed``.  The floor on |u_M| keeps the su_half and
    dimensional rules finite for vanishing mean velocity.
    """
    speed = np.asarray(speed, dtype=float)
    if params.tau_kind == "off":
        return np.zeros_like(speed)
    if params.tau_kind == "constant":
        return np.full_like(speed, params.tau_constant)
    floored = np.maximum(speed, params.eps_velocity)
    if params.tau_kind == "su_half":
        return h / (2.0 * floored)
    if nu <= 0:
        raise ValueError("dimensional tau rule needs nu > 0")
    return np.minimum(h / floored, h * h / nu)


def _scatter(space, local, row_map, col_map, shape):
    """Sum per-cell local matrices into a global CSR matrix.

    ``local`` is (n_cells, nr, nc) or a single (nr, nc) block shared by all
    cells; ``row_map``/``col_map`` are the cell-to-global index maps.
    """
    ncells = space.mesh.n_cells
    nr, nc = row_map.shape[1], col_map.shape[1]
    if local.ndim == 2:
        data = np.broadcast_to(local, (ncells, nr, nc))
    else:
        data = local
    rows = np.broadcast_to(row_map[:, :, None], (ncells, nr, nc))
    cols = np.broadcast_to(col_map[:, None, :], (ncells, nr, nc))
    mat = sp.coo_matrix(
        (data.ravel(), (rows.ravel(), cols.ravel())), shape=shape)
    out = mat.tocsr()
    out.sum_duplicates()
    out.sort_indices()
    return out


def _scatter_velocity_blockdiag(space, local_scalar):
    """Scatter a per-cell scalar 9x9 block into both velocity components."""
    ncells = space.mesh.n_cells
    if local_scalar.ndim == 2:
        local_scalar = np.broadcast_to(local_scalar, (ncells, 9, 9))
    maps = (space.cell_vnodes, space.cell_vnodes + space.n_vnodes)
    data = np.concatenate([local_scalar, local_scalar], axis=0)
    rows = np.concatenate([np.broadcast_to(m[:, :, None], (ncells, 9, 9)) for m in maps])
    cols = np.concatenate([np.broadcast_to(m[:, None, :], (ncells, 9, 9)) for m in maps])
    mat = sp.coo_matrix(
        (data.ravel(), (rows.ravel(), cols.ravel())),
        shape=(space.n_vdofs, space.n_vdofs))
    out = mat.tocsr()
    out.sum_duplicates()
    out.sort_indices()
    return out


def _local_grads(space):
    """Physical gradient tables: (gx, gy) each (9, nq)."""
    return space.v_grad[:, :, 0], space.v_grad[:, :, 1]


def assemble_mass(space: TaylorHoodSpace) -> sp.csr_matrix:
    """Velocity mass matrix (u, v), block-diagonal over components."""
    local = np.einsum("q,iq,jq->ij", space.wq, space.v_val, space.v_val)
    return _scatter_velocity_blockdiag(space, local)


def assemble_stiffness(space: TaylorHoodSpace) -> sp.csr_matrix:
    """Velocity stiffness (grad u, grad v), unscaled by viscosity."""
    gx, gy = _local_grads(space)
    local = (np.einsum("q,iq,jq->ij", space.wq, gx, gx)
             + np.einsum("q,iq,jq->ij", space.wq, gy, gy))
    return _scatter_velocity_blockdiag(space, local)


def assemble_graddiv(space: TaylorHoodSpace) -> sp.csr_matrix:
    """Grad-div matrix realizing (div u, div v); symmetric PSD."""
    gx, gy = _local_grads(space)
    comp = (gx, gy)
    local = np.empty((18, 18))
    for ci in range(2):
        for cj in range(2):
            local[ci * 9:(ci + 1) * 9, cj * 9:(cj + 1) * 9] = np.einsum(
                "q,iq,jq->ij", space.wq, comp[ci], comp[cj])
    return _scatter(space, local, space.cell_vdofs, space.cell_vdofs,
                    (space.n_vdofs, space.n_vdofs))


def assemble_div_coupling(space: TaylorHoodSpace) -> sp.csr_matrix:
    """Pressure-by-velocity coupling B with entries (div v_j, q_i)."""
    gx, gy = _local_grads(space)
    local = np.empty((4, 18))
    local[:, :9] = np.einsum("q,kq,jq->kj", space.wq, space.p_val, gx)
    local[:, 9:] = np.einsum("q,kq,jq->kj", space.wq, space.p_val, gy)
    return _scatter(space, local, space.cell_pnodes, space.cell_vdofs,
                    (space.n_pdofs, space.n_vdofs))


def assemble_pressure_mass(space: TaylorHoodSpace) -> sp.csr_matrix:
    local = np.einsum("q,iq,jq->ij", space.wq, space.p_val, space.p_val)
    return _scatter(space, local, space.cell_pnodes, space.cell_pnodes,
                    (space.n_pdofs, space.n_pdofs))


def assemble_pressure_stiffness(space: TaylorHoodSpace) -> sp.csr_matrix:
    """Pressure Laplacian (grad q, grad r); pure-Neumann, constants in kernel."""
    gx = space.p_grad[:, :, 0]
    gy = space.p_grad[:, :, 1]
    local = (np.einsum("q,iq,jq->ij", space.wq, gx, gx)
             + np.einsum("q,iq,jq->ij", space.wq, gy, gy))
    return _scatter(space, local, space.cell_pnodes, space.cell_pnodes,
                    (space.n_pdofs, space.n_pdofs))


def build_operators(space: TaylorHoodSpace) -> AssembledOperators:
    """Assemble every time-independent operator once."""
    return AssembledOperators(
        mass=assemble_mass(space),
        stiffness=assemble_stiffness(space),
        graddiv=assemble_graddiv(space),
        div_coupling=assemble_div_coupling(space),
        pressure_mass=assemble_pressure_mass(space),
        pressure_stiffness=assemble_pressure_stiffness(space),
    )


def _cell_local_velocity(space, w):
    """Gather a velocity DOF vector into per-cell local values (nc, 9, 2)."""
    u1, u2 = space.velocity_components(w)
    return np.stack([u1[space.cell_vnodes], u2[space.cell_vnodes]], axis=2)


def velocity_at_quadrature(space, w):
    """Velocity values at all quadrature points, (n_cells, nq, 2)."""
    wloc = _cell_local_velocity(space, w)
    return np.einsum("cld,lq->cqd", wloc, space.v_val)


def averaged_direction(space: TaylorHoodSpace, cell: int, w) -> np.ndarray:
    """Cell mean of the velocity field, the frozen streamline direction."""
    return averaged_directions(space, w)[cell]


def averaged_directions(space: TaylorHoodSpace, w) -> np.ndarray:
    """Cell means of the velocity for every cell, (n_cells, 2)."""
    wq = velocity_at_quadrature(space, w)
    measure = space.wq.sum()
    return np.einsum("q,cqd->cd", space.wq, wq) / measure


def fluctuation_apply(space: TaylorHoodSpace, cell: int, samples):
    """Apply the fluctuation operator (identity minus local L2 projection).

    ``samples`` holds quadrature-point values on one cell, shape (nq,) or
    (k, nq); the projection targets the coarse space attached to the FE
    space.  The output is L2(M)-orthogonal to that coarse space.
    """
    if not 0 <= cell < space.mesh.n_cells:
        raise IndexError(f"cell {cell} out of range")
    samples = np.asarray(samples, dtype=float)
    return samples - space.coarse.project_values(samples)


def assemble_convection_skew(space: TaylorHoodSpace, w) -> sp.csr_matrix:
    """Skew-symmetric convection matrix C(w).

    Realizes c(w; u, v) = 1/2 [((w.grad)u, v) - ((w.grad)v, u)]; the matrix
    is exactly skew-symmetric by construction and block-diagonal over
    velocity components.
    """
    wq = velocity_at_quadrature(space, w)
    gx, gy = _local_grads(space)
    # (w . grad) phi_j at quadrature points, per cell
    wdotgrad = (wq[:, :, 0, None] * gx.T[None, :, :]
                + wq[:, :, 1, None] * gy.T[None, :, :])   # (nc, nq, 9)
    d = np.einsum("q,iq,cqj->cij", space.wq, space.v_val, wdotgrad)
    local = 0.5 * (d - np.transpose(d, (0, 2, 1)))
    return _scatter_velocity_blockdiag(space, local)


def assemble_lps_su(space: TaylorHoodSpace, params: StabilizationParams,
                    w, nu: float) -> sp.csr_matrix:
    """Streamline-upwind local-projection matrix S(w).

    Realizes sum_M tau_M (kappa_M((w_M.grad)u), kappa_M((w_M.grad)v))_M with
    w_M the cell-averaged direction of ``w`` and kappa_M the fluctuation
    with respect to the coarse space.  Symmetric positive semidefinite.
    """
    u_m = averaged_directions(space, w)
    speed = np.hypot(u_m[:, 0], u_m[:, 1])
    tau = tau_value(params, space.mesh.h, speed, nu)
    if not np.any(tau):
        n = space.n_vdofs
        return sp.csr_matrix((n, n))
    gx, gy = _local_grads(space)
    # streamline derivative of each scalar basis function, (nc, 9, nq)
    g = (u_m[:, 0, None, None] * gx[None, :, :]
         + u_m[:, 1, None, None] * gy[None, :, :])
    gram = np.einsum("q,ciq,cjq->cij", space.wq, g, g)
    coef = space.coarse.project_coefficients(g)          # (nc, 9, dim)
    md = space.coarse.local_mass
    proj_gram = np.einsum("cik,kl,cjl->cij", coef, md, coef)
    local = tau[:, None, None] * (gram - proj_gram)
    return _scatter_velocity_blockdiag(space, local)


def assemble_load(space: TaylorHoodSpace, f, t: float | None = None):
    """Load vector (f, v) for a vectorized body force callback.

    ``f(x, y)`` or ``f(x, y, t)`` must return the two force components as
    arrays broadcast over the quadrature coordinates.
    """
    x = space.quad_coords[:, :, 0]
    y = space.quad_coords[:, :, 1]
    f1, f2 = f(x, y) if t is None else f(x, y, t)
    f1 = np.broadcast_to(np.asarray(f1, dtype=float), x.shape)
    f2 = np.broadcast_to(np.asarray(f2, dtype=float), x.shape)
    loc1 = np.einsum("q,cq,lq->cl", space.wq, f1, space.v_val)
    loc2 = np.einsum("q,cq,lq->cl", space.wq, f2, space.v_val)
    out = np.zeros(space.n_vdofs)
    np.add.at(out, space.cell_vnodes, loc1)
    np.add.at(out, space.cell_vnodes + space.n_vnodes, loc2)
    return out
