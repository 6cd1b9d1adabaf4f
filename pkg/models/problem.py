# models/problem.py
from enum import Enum
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, model_validator
from typing import Any, Callable, List, Literal, Optional, Tuple
import numpy as np
import scipy.sparse as sp

from models.affine import AffineForm
from models.mesh import Mesh
from models.parameters import ParameterPoint

# (points (n, 2), mu) -> complex values (n,)
BoundaryValue = Callable[[np.ndarray, Optional[ParameterPoint]], np.ndarray]


class DirichletMode(str, Enum):
    HOMOGENEOUS = "homogeneous"
    PARAMETER_INDEPENDENT = "parameter-independent"
    PER_PARAMETER = "per-parameter"


class DirichletData(BaseModel):
    """Dirichlet data g on the boundary edges carrying one of `tags`."""
    tags: Tuple[str, ...] = Field(..., description="Boundary tags with prescribed values.")
    value: Optional[BoundaryValue] = Field(None, description="g(x, mu); ignored in homogeneous mode.")
    mode: DirichletMode = DirichletMode.HOMOGENEOUS

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @model_validator(mode="after")
    def _check_value(self):
        if self.mode != DirichletMode.HOMOGENEOUS and self.value is None:
            raise ValueError(f"Dirichlet mode '{self.mode.value}' needs a value function")
        return self

    @property
    def affine(self) -> bool:
        """Per-parameter data forbids the offline/online split of the right-hand side."""
        return self.mode != DirichletMode.PER_PARAMETER

    def nodal_values(self, points: np.ndarray, mu: Optional[ParameterPoint] = None) -> np.ndarray:
        if self.mode == DirichletMode.HOMOGENEOUS:
            return np.zeros(len(points), dtype=np.complex128)
        if self.mode == DirichletMode.PER_PARAMETER and mu is None:
            raise ValueError("Per-parameter Dirichlet data needs a parameter point")
        return np.asarray(self.value(points, mu), dtype=np.complex128).reshape(len(points))


class DofMap(BaseModel):
    """Split of mesh vertices into free (interior) and prescribed (boundary) dofs."""
    interior: np.ndarray = Field(..., description="Sorted free vertex indices.")
    boundary: np.ndarray = Field(..., description="Sorted prescribed vertex indices.")
    n_total: int

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @model_validator(mode="after")
    def _check_partition(self):
        if len(self.interior) + len(self.boundary) != self.n_total:
            raise ValueError("interior and boundary dofs must partition all vertices")
        if np.intersect1d(self.interior, self.boundary).size:
            raise ValueError("interior and boundary dofs overlap")
        return self

    @property
    def n_interior(self) -> int:
        return len(self.interior)


class AssembledRhs(BaseModel):
    """Right-hand side on interior dofs plus its affine metadata."""
    vector: np.ndarray
    affine: bool = True
    mode: DirichletMode = DirichletMode.HOMOGENEOUS

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)


class TruthProblem(BaseModel):
    """
    Full-order (truth) problem on interior dofs: A(mu) u = F(mu), inner
    product matrix X and output functional s = L(mu)^H u. Synthetic problems
    set only the algebraic fields; mesh-based problems also carry the mesh,
    the dof map and the Dirichlet lifting used to rebuild nodal fields.
    """
    kind: Literal["bounded", "pml", "synthetic"] = "synthetic"
    operator: AffineForm
    rhs: AffineForm
    x_inner: Any = Field(..., description="Hermitian positive-definite sparse matrix on interior dofs.")
    output: Optional[AffineForm] = None
    mesh: Optional[Mesh] = None
    dofmap: Optional[DofMap] = None
    dirichlet: Optional[DirichletData] = None
    coupling_blocks: List[Any] = Field(default_factory=list, description="A_m restricted to interior x boundary.")
    output_boundary: Optional[np.ndarray] = Field(None, description="Output functional on boundary dofs.")
    physical_mask: Optional[np.ndarray] = Field(None, description="Elements of the physical region (error norms).")

    model_config = ConfigDict(arbitrary_types_allowed=True)

    _x_factor: Any = PrivateAttr(default=None)

    @model_validator(mode="after")
    def _check_sizes(self):
        n = self.operator.size
        if not self.operator.is_operator:
            raise ValueError("operator must be a matrix-valued affine form")
        if self.rhs.is_operator or self.rhs.size != n:
            raise ValueError("rhs must be a vector-valued affine form of the operator dimension")
        if self.x_inner.shape != (n, n):
            raise ValueError(f"x_inner has shape {self.x_inner.shape}, expected {(n, n)}")
        if self.output is not None and (self.output.is_operator or self.output.size != n):
            raise ValueError("output must be a vector-valued affine form of the operator dimension")
        if not self.rhs.affine and (self.dirichlet is None or self.dofmap is None or self.mesh is None):
            raise ValueError("a non-affine rhs needs mesh, dof map and Dirichlet data")
        return self

    @property
    def n_dofs(self) -> int:
        return self.operator.size

    @property
    def affine_rhs(self) -> bool:
        return self.rhs.affine

    def x_factorization(self):
        """Cached Hermitian positive-definite factorization of X."""
        if self._x_factor is None:
            from services.linsolve_service import hpd_factorize

            self._x_factor = hpd_factorize(self.x_inner)
        return self._x_factor

    def operator_at(self, mu: ParameterPoint) -> sp.csr_matrix:
        return self.operator.evaluate(mu)

    def boundary_values(self, mu: Optional[ParameterPoint]) -> np.ndarray:
        if self.dirichlet is None or self.dofmap is None or self.mesh is None:
            return np.zeros(0, dtype=np.complex128)
        points = self.mesh.vertices[self.dofmap.boundary]
        return self.dirichlet.nodal_values(points, mu)

    def rhs_at(self, mu: ParameterPoint) -> np.ndarray:
        """F(mu); the per-parameter lifting is added for non-affine right-hand sides."""
        F = self.rhs.evaluate(mu)
        if not self.rhs.affine:
            g = self.boundary_values(mu)
            for theta, block in zip(self.operator.coefficients(mu), self.coupling_blocks):
                F = F - theta * (block @ g)
        return F

    def output_at(self, mu: ParameterPoint) -> Optional[np.ndarray]:
        return None if self.output is None else self.output.evaluate(mu)

    def output_offset(self, mu: Optional[ParameterPoint]) -> complex:
        """Boundary contribution L_B^H g_B to the output."""
        if self.output_boundary is None or len(self.output_boundary) == 0:
            return 0.0j
        return complex(np.vdot(self.output_boundary, self.boundary_values(mu)))

    def reconstruct(self, u_interior: np.ndarray, mu: Optional[ParameterPoint] = None) -> np.ndarray:
        """Nodal field on all vertices: interior values plus Dirichlet data."""
        if self.dofmap is None:
            return np.asarray(u_interior, dtype=np.complex128)
        full = np.zeros(self.dofmap.n_total, dtype=np.complex128)
        full[self.dofmap.interior] = u_interior
        full[self.dofmap.boundary] = self.boundary_values(mu)
        return full
