# services/mesh_service.py
from core.exceptions import MeshError
from models.mesh import ElementMap, Mesh, MeshSummary
from models.pml import PmlConfig
from models.run_spec import HoleSpec, MeshSpec
from services.external import msh_handler
from collections import Counter
from typing import Optional, Tuple
import logging
import numpy as np

logger = logging.getLogger(__name__)


def _grid_index(lines: np.ndarray, value: float, name: str) -> int:
    """Index of the grid line matching value; holes must sit on cell boundaries."""
    tol = 1e-12 * max(abs(lines[-1] - lines[0]), 1.0)
    hits = np.flatnonzero(np.abs(lines - value) <= tol)
    if len(hits) == 0:
        raise MeshError(f"Hole bound {name}={value} is not aligned to a cell boundary.")
    return int(hits[0])


def generate_rect_mesh(
    x_range: Tuple[float, float],
    y_range: Tuple[float, float],
    nx: int,
    ny: int,
    hole: Optional[HoleSpec] = None,
    pml: Optional[PmlConfig] = None,
) -> Mesh:
    """
    Structured triangulation of a rectangle. Every cell (i, j) is split into
    the triangles (v00, v10, v11) and (v00, v11, v01); cells inside the hole
    are omitted and unused vertices are dropped. Vertices are numbered
    row-major (x1 fastest), so the output is deterministic.

    Boundary edges are tagged 'left', 'right', 'bottom', 'top' or 'hole'.
    With a PmlConfig, elements whose centroid lies left of x_minus or right
    of x_plus are tagged 'pml_left' / 'pml_right'.

    Raises:
        MeshError: If the ranges are empty, nx or ny is below 1, or the hole
            is not strictly inside the rectangle and aligned to cell boundaries.
    """
    (x0, x1), (y0, y1) = x_range, y_range
    if nx < 1 or ny < 1:
        raise MeshError(f"nx and ny must be at least 1, got nx={nx}, ny={ny}.")
    if not (x0 < x1 and y0 < y1):
        raise MeshError(f"Empty rectangle x_range={x_range}, y_range={y_range}.")

    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    keep = np.ones((ny, nx), dtype=bool)
    if hole is not None:
        i0 = _grid_index(xs, hole.x_min, "x_min")
        i1 = _grid_index(xs, hole.x_max, "x_max")
        j0 = _grid_index(ys, hole.y_min, "y_min")
        j1 = _grid_index(ys, hole.y_max, "y_max")
        if not (0 < i0 < i1 < nx and 0 < j0 < j1 < ny):
            raise MeshError("Hole must lie strictly inside the rectangle.")
        keep[j0:j1, i0:i1] = False

    cells = np.argwhere(keep)  # (j, i) pairs in row-major order
    v00 = cells[:, 0] * (nx + 1) + cells[:, 1]
    v10 = v00 + 1
    v01 = v00 + nx + 1
    v11 = v01 + 1
    triangles = np.empty((2 * len(cells), 3), dtype=np.int64)
    triangles[0::2] = np.column_stack([v00, v10, v11])
    triangles[1::2] = np.column_stack([v00, v11, v01])

    gx, gy = np.meshgrid(xs, ys)
    grid_points = np.column_stack([gx.ravel(), gy.ravel()])
    used = np.unique(triangles)
    elements = np.searchsorted(used, triangles)
    vertices = grid_points[used]

    edges, tags = _tag_rect_boundary(vertices, elements, x_range, y_range)

    regions = ["interior"] * len(elements)
    if pml is not None:
        cx = vertices[elements].mean(axis=1)[:, 0]
        regions = np.where(cx < pml.x_minus, "pml_left", np.where(cx > pml.x_plus, "pml_right", "interior")).tolist()

    mesh = Mesh(
        vertices=vertices,
        elements=elements,
        boundary_edges=edges,
        boundary_tags=tuple(tags),
        element_regions=tuple(regions),
    )
    logger.debug(f"Generated {nx}x{ny} mesh: {mesh.n_vertices} vertices, {mesh.n_elements} elements")
    return mesh


def _tag_rect_boundary(vertices, elements, x_range, y_range):
    raw = np.concatenate([elements[:, [0, 1]], elements[:, [1, 2]], elements[:, [2, 0]]])
    raw.sort(axis=1)
    unique, counts = np.unique(raw, axis=0, return_counts=True)
    edges = unique[counts == 1]
    (x0, x1), (y0, y1) = x_range, y_range
    tol = 1e-12 * max(x1 - x0, y1 - y0)
    p, q = vertices[edges[:, 0]], vertices[edges[:, 1]]

    def on(coord: int, value: float) -> np.ndarray:
        return (np.abs(p[:, coord] - value) <= tol) & (np.abs(q[:, coord] - value) <= tol)

    tags = np.full(len(edges), "hole", dtype=object)
    tags[on(1, y1)] = "top"
    tags[on(1, y0)] = "bottom"
    tags[on(0, x1)] = "right"
    tags[on(0, x0)] = "left"
    return edges, [str(t) for t in tags]


def element_map(mesh: Mesh, index: int) -> ElementMap:
    """
    Affine map of one element: B = [v2 - v1, v3 - v1], b = v1, area = det(B) / 2.

    Raises:
        IndexError: If index is not a valid element index.
    """
    if not 0 <= index < mesh.n_elements:
        raise IndexError(f"Element index {index} out of range [0, {mesh.n_elements}).")
    v1, v2, v3 = mesh.vertices[mesh.elements[index]]
    B = np.column_stack([v2 - v1, v3 - v1])
    return ElementMap(B=B, b=v1.copy(), area=float(np.linalg.det(B)) / 2.0)


def element_geometry(mesh: Mesh) -> Tuple[np.ndarray, np.ndarray]:
    """Jacobians B (n_elements, 2, 2) and areas of all elements at once."""
    p = mesh.vertices[mesh.elements]
    B = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)
    areas = 0.5 * (B[:, 0, 0] * B[:, 1, 1] - B[:, 0, 1] * B[:, 1, 0])
    return B, areas


def mesh_summary(mesh: Mesh) -> MeshSummary:
    return MeshSummary(
        n_vertices=mesh.n_vertices,
        n_elements=mesh.n_elements,
        n_boundary_edges=len(mesh.boundary_edges),
        area=mesh.total_area(),
        regions=dict(Counter(mesh.element_regions)),
        boundary_tags=dict(Counter(mesh.boundary_tags)),
    )


def load_mesh(spec: MeshSpec, pml: Optional[PmlConfig] = None) -> Mesh:
    """Builds the mesh a run configuration asks for (file or generator)."""
    if spec.file is not None:
        mesh = msh_handler.read_msh(spec.file)
    else:
        gen = spec.generator
        mesh = generate_rect_mesh(gen.x_range, gen.y_range, gen.nx, gen.ny, hole=gen.hole, pml=pml)
    logger.info(f"Mesh ready: {mesh.n_vertices} vertices, {mesh.n_elements} elements, area {mesh.total_area():.6g}")
    return mesh
