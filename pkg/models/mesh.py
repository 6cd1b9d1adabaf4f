# models/mesh.py
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from typing import Tuple
import numpy as np

from core.exceptions import MeshError

REGION_TAGS = ("interior", "pml_left", "pml_right")


class Mesh(BaseModel):
    """
    Conforming triangulation. Immutable after construction; every invariant is
    checked by the model validator, so a Mesh instance is always valid.
    Vertex indices are 0-based.
    """
    vertices: np.ndarray = Field(..., description="(n_vertices, 2) float coordinates.")
    elements: np.ndarray = Field(..., description="(n_elements, 3) vertex indices, counterclockwise.")
    boundary_edges: np.ndarray = Field(..., description="(n_boundary, 2) vertex index pairs.")
    boundary_tags: Tuple[str, ...] = Field(..., description="Tag of each boundary edge.")
    element_regions: Tuple[str, ...] = Field(..., description="Region tag of each element.")

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @field_validator("vertices", mode="before")
    @classmethod
    def _coerce_vertices(cls, value):
        arr = np.ascontiguousarray(value, dtype=np.float64).reshape(-1, 2)
        arr.setflags(write=False)
        return arr

    @field_validator("elements", "boundary_edges", mode="before")
    @classmethod
    def _coerce_indices(cls, value, info):
        width = 3 if info.field_name == "elements" else 2
        arr = np.ascontiguousarray(value, dtype=np.int64).reshape(-1, width)
        arr.setflags(write=False)
        return arr

    @model_validator(mode="after")
    def _check_invariants(self):
        n_vertices = len(self.vertices)
        if len(self.elements) == 0:
            raise MeshError("Mesh has no elements.")
        if self.elements.min() < 0 or self.elements.max() >= n_vertices:
            raise MeshError("Element references a vertex index outside the vertex table.")
        e = self.elements
        if np.any((e[:, 0] == e[:, 1]) | (e[:, 1] == e[:, 2]) | (e[:, 0] == e[:, 2])):
            raise MeshError("Element with repeated vertex indices.")
        if np.any(self.signed_areas() <= 0.0):
            bad = int(np.argmin(self.signed_areas()))
            raise MeshError(f"Element {bad} has non-positive signed area (clockwise or degenerate).")
        if len(self.element_regions) != len(self.elements):
            raise MeshError("element_regions length does not match the element count.")
        unknown = set(self.element_regions) - set(REGION_TAGS)
        if unknown:
            raise MeshError(f"Unknown region tags: {sorted(unknown)}")
        if len(self.boundary_tags) != len(self.boundary_edges):
            raise MeshError("boundary_tags length does not match the boundary edge count.")
        self._check_boundary_edges()
        self._check_coincident_vertices()
        return self

    def _check_boundary_edges(self) -> None:
        if len(self.boundary_edges) == 0:
            return
        if self.boundary_edges.min() < 0 or self.boundary_edges.max() >= len(self.vertices):
            raise MeshError("Boundary edge references a vertex index outside the vertex table.")
        all_edges, counts = self.edges(return_counts=True)
        lookup = {tuple(edge): int(c) for edge, c in zip(all_edges, counts)}
        for a, b in np.sort(self.boundary_edges, axis=1):
            if lookup.get((int(a), int(b)), 0) != 1:
                raise MeshError(f"Boundary edge ({a}, {b}) does not belong to exactly one element.")

    def _check_coincident_vertices(self) -> None:
        from scipy.spatial import cKDTree

        span = self.vertices.max(axis=0) - self.vertices.min(axis=0)
        tol = 1e-12 * float(np.hypot(*span))
        pairs = cKDTree(self.vertices).query_pairs(r=tol)
        if pairs:
            a, b = next(iter(pairs))
            raise MeshError(f"Vertices {a} and {b} coincide within {tol:.3e}.")

    # --- Queries ---

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    def signed_areas(self) -> np.ndarray:
        """Signed area of every element, positive for counterclockwise orientation."""
        p = self.vertices[self.elements]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def total_area(self) -> float:
        return float(self.signed_areas().sum())

    def edges(self, return_counts: bool = False):
        """Unique element edges as sorted vertex pairs (optionally with their element counts)."""
        e = self.elements
        raw = np.concatenate([e[:, [0, 1]], e[:, [1, 2]], e[:, [2, 0]]])
        raw.sort(axis=1)
        return np.unique(raw, axis=0, return_counts=return_counts)

    def boundary_vertices(self, tags) -> np.ndarray:
        """Sorted vertex indices lying on boundary edges carrying any of the given tags."""
        tags = set(tags)
        mask = np.array([t in tags for t in self.boundary_tags], dtype=bool)
        if not mask.any():
            return np.zeros(0, dtype=np.int64)
        return np.unique(self.boundary_edges[mask])

    def region_mask(self, *regions: str) -> np.ndarray:
        return np.isin(np.asarray(self.element_regions), regions)

    def centroids(self) -> np.ndarray:
        return self.vertices[self.elements].mean(axis=1)


class ElementMap(BaseModel):
    """Affine map T(x_hat) = B x_hat + b from the reference triangle onto one element."""
    B: np.ndarray = Field(..., description="2x2 Jacobian, columns v2 - v1 and v3 - v1.")
    b: np.ndarray = Field(..., description="Translation, the first vertex.")
    area: float = Field(..., gt=0, description="Element area, det(B) / 2.")

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @model_validator(mode="after")
    def _check_det(self):
        det = float(np.linalg.det(self.B))
        if det <= 0:
            raise MeshError("Element map with non-positive determinant.")
        if abs(self.area - det / 2.0) > 1e-12 * max(det, 1.0):
            raise MeshError("Element map area differs from det(B) / 2.")
        return self

    def apply(self, x_hat: np.ndarray) -> np.ndarray:
        return np.asarray(x_hat) @ self.B.T + self.b

    def inverse(self, x: np.ndarray) -> np.ndarray:
        return np.linalg.solve(self.B, (np.asarray(x) - self.b).T).T


class MeshSummary(BaseModel):
    """Line-oriented mesh summary printed by `crbm mesh info`."""
    n_vertices: int
    n_elements: int
    n_boundary_edges: int
    area: float
    regions: dict[str, int]
    boundary_tags: dict[str, int]

    def to_text(self) -> str:
        lines = [
            f"vertices {self.n_vertices}",
            f"elements {self.n_elements}",
            f"boundary_edges {self.n_boundary_edges}",
            f"area {self.area:.17g}",
        ]
        lines += [f"region {name} {count}" for name, count in sorted(self.regions.items())]
        lines += [f"boundary {name} {count}" for name, count in sorted(self.boundary_tags.items())]
        return "\n".join(lines) + "\n"
