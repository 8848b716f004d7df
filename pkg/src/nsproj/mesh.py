"""Uniform quadrilateral meshes of rectangles, with Dirichlet or periodic topology.

Cells double as the macro elements of the one-level local-projection
decomposition, so every cell carries the macro geometry (diameter, measure)
directly.
"""

from dataclasses import dataclass

import numpy as np

DIRICHLET = "dirichlet"
PERIODIC = "periodic"


@dataclass(frozen=True)
class CellGeometry:
    """Geometry of one macro element (identical to one mesh cell here)."""

    index: int
    origin: tuple[float, float]   # lower-left corner
    scales: tuple[float, float]   # (hx/2, hy/2): reference [-1,1]^2 -> cell
    diameter: float               # diagonal length h_M
    measure: float                # |M| = hx*hy


class Mesh:
    """Uniform mesh of ``cells[0] x cells[1]`` axis-aligned rectangles.

    Vertices are numbered row-major with x fastest.  Under periodic topology
    opposite faces are identified: the vertex grid then has exactly
    ``cells[0] * cells[1]`` entries and cell connectivity wraps around, so no
    boundary vertices exist.
    """

    def __init__(self, origin, extent, cells, boundary_kind=DIRICHLET):
        origin = np.asarray(origin, dtype=float)
        extent = np.asarray(extent, dtype=float)
        cells = np.asarray(cells, dtype=int)
        if origin.shape != (2,) or extent.shape != (2,):
            raise ValueError("origin and extent must be 2-vectors")
        if np.any(extent <= 0.0):
            raise ValueError(f"domain extent must be positive, got {extent}")
        if cells.shape != (2,) or np.any(cells < 1):
            raise ValueError(f"cell counts must be positive integers, got {cells}")
        if boundary_kind not in (DIRICHLET, PERIODIC):
            raise ValueError(f"unknown boundary kind {boundary_kind!r}")

        self.origin = origin
        self.extent = extent
        self.cells_per_axis = (int(cells[0]), int(cells[1]))
        self.boundary_kind = boundary_kind

        nx, ny = self.cells_per_axis
        self.n_cells = nx * ny
        self.hx = float(extent[0]) / nx
        self.hy = float(extent[1]) / ny
        self.h = float(np.hypot(self.hx, self.hy))   # shared diameter of every cell
        self.cell_measure = self.hx * self.hy
        self.domain_measure = float(extent[0] * extent[1])

        periodic = boundary_kind == PERIODIC
        gx = nx if periodic else nx + 1
        gy = ny if periodic else ny + 1
        ix, iy = np.meshgrid(np.arange(gx), np.arange(gy), indexing="xy")
        self.vertices = np.column_stack([
            origin[0] + ix.ravel() * self.hx,
            origin[1] + iy.ravel() * self.hy,
        ])

        cx, cy = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
        cx, cy = cx.ravel(), cy.ravel()
        self._cell_xy = (cx, cy)

        def vid(i, j):
            if periodic:
                return (j % gy) * gx + (i % gx)
            return j * gx + i

        # counterclockwise order: SW, SE, NE, NW
        self.cell_vertices = np.column_stack([
            vid(cx, cy), vid(cx + 1, cy), vid(cx + 1, cy + 1), vid(cx, cy + 1),
        ])

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def periodic(self) -> bool:
        return self.boundary_kind == PERIODIC

    def cell_origins(self):
        """Lower-left corner of every cell, shape (n_cells, 2)."""
        cx, cy = self._cell_xy
        return np.column_stack([
            self.origin[0] + cx * self.hx,
            self.origin[1] + cy * self.hy,
        ])

    def boundary_vertices(self):
        """Indices of vertices on the domain boundary (empty when periodic)."""
        if self.periodic:
            return np.array([], dtype=int)
        nx, ny = self.cells_per_axis
        gx, gy = nx + 1, ny + 1
        ix, iy = np.meshgrid(np.arange(gx), np.arange(gy), indexing="xy")
        on_bdy = (ix == 0) | (ix == nx) | (iy == 0) | (iy == ny)
        return np.flatnonzero(on_bdy.ravel())


def build_mesh(origin, extent, n, boundary_kind=DIRICHLET) -> Mesh:
    """Build a conforming uniform rectangle mesh.

    ``extent`` components must be positive and ``n`` components at least 1;
    anything else raises ``ValueError``.
    """
    return Mesh(origin, extent, n, boundary_kind)


def macro_cells(mesh: Mesh):
    """Iterate over the macro elements (one per cell) in index order."""
    origins = mesh.cell_origins()
    scales = (mesh.hx / 2.0, mesh.hy / 2.0)
    for c in range(mesh.n_cells):
        yield CellGeometry(
            index=c,
            origin=(float(origins[c, 0]), float(origins[c, 1])),
            scales=scales,
            diameter=mesh.h,
            measure=mesh.cell_measure,
        )
