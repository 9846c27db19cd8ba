"""Structured triangle meshes on axis-aligned rectangles with quadrature.

Every volume integral uses one of two rules carried by the mesh: a one-point
(centroid) rule per triangle, exact for cellwise-constant integrands such as
powers of piecewise-constant gradients, and a vertex (lumped/trapezoidal)
rule for pointwise powers of the function itself. Boundary integrals use the
trapezoid rule on the boundary facets, so boundary data lives on boundary
nodes. All weights are strictly positive and sum exactly to area/perimeter.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "MeshDomain",
    "build_rectangle_mesh",
    "integrate_volume",
    "integrate_boundary",
    "save_field",
    "load_field",
]


@dataclass(frozen=True)
class MeshDomain:
    """Triangulated rectangle [0,lx] x [0,ly] with nodal P1 basis.

    Nodes are laid out row-major: node (ix, iy) has index iy*(nx+1)+ix and
    coordinates (ix*lx/nx, iy*ly/ny). Each grid cell is split into two
    triangles. Immutable after construction; concurrent reads are safe.
    """

    lx: float
    ly: float
    nx: int
    ny: int
    nodes: np.ndarray            # (N, 2)
    cells: np.ndarray            # (T, 3) node indices
    boundary_facets: np.ndarray  # (F, 2) node indices, ordered along the boundary
    cell_areas: np.ndarray       # (T,)
    cell_grads: np.ndarray       # (T, 3, 2) P1 basis gradients, constant per cell
    volume_points: np.ndarray    # (T, 2) centroids
    volume_weights: np.ndarray   # (T,) = cell areas
    node_weights: np.ndarray     # (N,) vertex-rule volume weights
    boundary_nodes: np.ndarray   # (B,) node indices on the boundary
    boundary_weights: np.ndarray  # (B,) trapezoid weights, sum = perimeter
    area: float = field(init=False, default=0.0)
    perimeter: float = field(init=False, default=0.0)

    def __post_init__(self):
        object.__setattr__(self, "area", float(self.lx * self.ly))
        object.__setattr__(self, "perimeter", float(2.0 * (self.lx + self.ly)))

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_cells(self) -> int:
        return self.cells.shape[0]

    def same_mesh(self, other: "MeshDomain") -> bool:
        return self is other or (
            (self.nx, self.ny) == (other.nx, other.ny)
            and np.isclose(self.lx, other.lx)
            and np.isclose(self.ly, other.ly)
        )

    # -- nodal P1 basis evaluated at the quadrature points -------------------

    def value_at_cells(self, nodal: np.ndarray) -> np.ndarray:
        """Values of the P1 interpolant at cell centroids, shape (T,)."""
        return nodal[self.cells].mean(axis=1)

    def gradient_at_cells(self, nodal: np.ndarray) -> np.ndarray:
        """Cellwise-constant gradient of the P1 interpolant, shape (T, 2)."""
        return np.einsum("ti,tik->tk", nodal[self.cells], self.cell_grads)

    def boundary_values(self, nodal: np.ndarray) -> np.ndarray:
        """Restriction to boundary nodes, shape (B,)."""
        return nodal[self.boundary_nodes]

    def scatter_cell_gradient(self, flux: np.ndarray) -> np.ndarray:
        """Nodal covector of v -> sum_T area_T * flux_T . grad v|_T.

        flux has shape (T, 2); returns shape (N,). This is the adjoint of
        gradient_at_cells weighted by cell areas.
        """
        contrib = np.einsum("tk,tik->ti", flux * self.cell_areas[:, None], self.cell_grads)
        return np.bincount(self.cells.ravel(), weights=contrib.ravel(), minlength=self.n_nodes)


def build_rectangle_mesh(lx: float, ly: float, nx: int, ny: int) -> MeshDomain:
    """Build a conforming triangulation of [0,lx] x [0,ly] with nx*ny grid cells.

    Each cell is split along its (+,+) diagonal into two triangles, giving a
    first-order nodal basis whose gradients are constant per triangle.
    """
    if not (lx > 0 and ly > 0):
        raise ValueError(f"rectangle sides must be positive, got lx={lx}, ly={ly}")
    if nx < 2 or ny < 2:
        raise ValueError(f"need at least 2 cells per direction, got nx={nx}, ny={ny}")

    nx, ny = int(nx), int(ny)
    xs = np.linspace(0.0, lx, nx + 1)
    ys = np.linspace(0.0, ly, ny + 1)
    X, Y = np.meshgrid(xs, ys)              # row-major: Y varies over rows
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    def nid(ix, iy):
        return iy * (nx + 1) + ix

    ix, iy = np.meshgrid(np.arange(nx), np.arange(ny))
    ix, iy = ix.ravel(), iy.ravel()
    n00, n10 = nid(ix, iy), nid(ix + 1, iy)
    n01, n11 = nid(ix, iy + 1), nid(ix + 1, iy + 1)
    lower = np.column_stack([n00, n10, n11])
    upper = np.column_stack([n00, n11, n01])
    cells = np.vstack([lower, upper])

    p0, p1, p2 = (nodes[cells[:, k]] for k in range(3))
    det = (p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1]) - (p2[:, 0] - p0[:, 0]) * (p1[:, 1] - p0[:, 1])
    areas = 0.5 * det  # positive by construction (counterclockwise)

    grads = np.empty((cells.shape[0], 3, 2))
    for k, (a, b) in enumerate(((p1, p2), (p2, p0), (p0, p1))):
        # gradient of the hat function at vertex k: perpendicular of the opposite edge
        grads[:, k, 0] = (a[:, 1] - b[:, 1]) / det
        grads[:, k, 1] = (b[:, 0] - a[:, 0]) / det

    centroids = (p0 + p1 + p2) / 3.0

    node_w = np.bincount(cells.ravel(), weights=np.repeat(areas / 3.0, 3), minlength=nodes.shape[0])

    # boundary facets ordered counterclockwise: bottom, right, top, left
    bottom = [(nid(i, 0), nid(i + 1, 0)) for i in range(nx)]
    right = [(nid(nx, j), nid(nx, j + 1)) for j in range(ny)]
    top = [(nid(i + 1, ny), nid(i, ny)) for i in reversed(range(nx))]
    left = [(nid(0, j + 1), nid(0, j)) for j in reversed(range(ny))]
    facets = np.array(bottom + right + top + left, dtype=np.int64)

    bnodes = facets[:, 0].copy()  # each boundary node appears once as a facet start
    hlen = np.linalg.norm(nodes[facets[:, 1]] - nodes[facets[:, 0]], axis=1)
    bw = np.zeros(nodes.shape[0])
    np.add.at(bw, facets[:, 0], 0.5 * hlen)
    np.add.at(bw, facets[:, 1], 0.5 * hlen)
    bweights = bw[bnodes]

    return MeshDomain(
        lx=float(lx), ly=float(ly), nx=nx, ny=ny,
        nodes=nodes, cells=cells, boundary_facets=facets,
        cell_areas=areas, cell_grads=grads,
        volume_points=centroids, volume_weights=areas.copy(),
        node_weights=node_w, boundary_nodes=bnodes, boundary_weights=bweights,
    )


def _check_finite(samples: np.ndarray, points: np.ndarray, where: str) -> None:
    bad = ~np.isfinite(samples)
    if bad.any():
        i = int(np.argmax(bad))
        raise ValueError(
            f"non-finite {where} sample {samples[i]!r} at quadrature point "
            f"index {i}, x={points[i, 0]:.6g}, y={points[i, 1]:.6g}"
        )


def integrate_volume(m: MeshDomain, f: np.ndarray) -> float:
    """Sum of centroid-rule weights times samples; exact for cellwise constants."""
    f = np.asarray(f, dtype=float)
    if f.shape != m.volume_weights.shape:
        raise ValueError(f"expected {m.volume_weights.shape[0]} volume samples, got {f.shape}")
    _check_finite(f, m.volume_points, "volume")
    return float(m.volume_weights @ f)


def integrate_boundary(m: MeshDomain, g: np.ndarray) -> float:
    """Trapezoid rule over boundary nodes; exact for facetwise constants."""
    g = np.asarray(g, dtype=float)
    if g.shape != m.boundary_weights.shape:
        raise ValueError(f"expected {m.boundary_weights.shape[0]} boundary samples, got {g.shape}")
    _check_finite(g, m.nodes[m.boundary_nodes], "boundary")
    return float(m.boundary_weights @ g)


# -- field dump format v1 ----------------------------------------------------

def save_field(path, m: MeshDomain, nodal: np.ndarray, config_hash: str | None = None) -> None:
    """Write a nodal field: header `pq-field v1 nx ny lx ly`, one value per line.

    Values are row-major over the (ny+1) x (nx+1) node grid. Comment lines
    starting with '#' may follow the header and are skipped on load.
    """
    nodal = np.asarray(nodal, dtype=float)
    if nodal.shape != (m.n_nodes,):
        raise ValueError(f"field has {nodal.shape} values, mesh has {m.n_nodes} nodes")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"pq-field v1 {m.nx} {m.ny} {float(m.lx)!r} {float(m.ly)!r}\n")
        if config_hash:
            fh.write(f"# config={config_hash}\n")
        for v in nodal:
            fh.write(f"{float(v)!r}\n")


def load_field(path):
    """Read a field dump; returns (values, (nx, ny, lx, ly))."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 6 or header[0] != "pq-field" or header[1] != "v1":
            raise ValueError(f"{path}: not a pq-field v1 file")
        nx, ny = int(header[2]), int(header[3])
        lx, ly = float(header[4]), float(header[5])
        values = [float(line) for line in fh if line.strip() and not line.startswith("#")]
    expected = (nx + 1) * (ny + 1)
    if len(values) != expected:
        raise ValueError(f"{path}: expected {expected} nodal values, found {len(values)}")
    return np.array(values), (nx, ny, lx, ly)
