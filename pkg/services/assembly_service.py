# services/assembly_service.py
from core.exceptions import ConfigError, MeshError
from models.affine import AffineForm
from models.mesh import ElementMap, Mesh
from models.parameters import ParameterPoint
from models.problem import AssembledRhs, DirichletData, DirichletMode, DofMap
from models.run_spec import OutputSpec, SourceSpec
from services.mesh_service import element_geometry, element_map
from typing import Callable, List, Optional, Tuple
import logging
import numpy as np
import scipy.sparse as sp

logger = logging.getLogger(__name__)

SourceFunction = Callable[[np.ndarray], np.ndarray]


class LocalTemplates:
    """Parameter-independent 3x3 reference matrices of the P1 element."""
    S1 = np.array([[1, -1, 0], [-1, 1, 0], [0, 0, 0]])
    S2 = np.array([[2, -1, -1], [-1, 0, 1], [-1, 1, 0]])
    S3 = np.array([[1, 0, -1], [0, 0, 0], [-1, 0, 1]])
    Mmat = np.array([[2, 1, 1], [1, 2, 1], [1, 1, 2]])
    C1 = np.array([[-1, -1, -1], [1, 1, 1], [0, 0, 0]])
    C2 = np.array([[-1, -1, -1], [0, 0, 0], [1, 1, 1]])


# Reference gradients of the three hat functions, rows (d/dx1_hat, d/dx2_hat)
REFERENCE_GRADIENTS = np.array([[-1.0, 1.0, 0.0], [-1.0, 0.0, 1.0]])

# Barycentric coordinates of the edge midpoints; the rule weights each point |K|/3
MIDPOINT_BARYCENTRIC = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])


# --- Local element quantities ---

def _alpha_parts(B: np.ndarray, area: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Split alpha_l(M) = alpha0_l + M^2 alpha1_l for arrays of Jacobians (n, 2, 2)."""
    B11, B12, B21, B22 = B[:, 0, 0], B[:, 0, 1], B[:, 1, 0], B[:, 1, 1]
    scale = 4.0 * area
    alpha0 = np.column_stack([B12 ** 2 + B22 ** 2, -B11 * B12 - B21 * B22, B11 ** 2 + B21 ** 2]) / scale[:, None]
    alpha1 = np.column_stack([-B22 ** 2, B21 * B22, -B21 ** 2]) / scale[:, None]
    return alpha0, alpha1


def local_alpha(emap: ElementMap, M: float) -> Tuple[float, float, float]:
    """Stiffness coefficients (alpha1, alpha2, alpha3) of one element at Mach number M."""
    alpha0, alpha1 = _alpha_parts(emap.B[None], np.array([emap.area]))
    alpha = alpha0[0] + M ** 2 * alpha1[0]
    return float(alpha[0]), float(alpha[1]), float(alpha[2])


def _convection_template(B: np.ndarray) -> np.ndarray:
    """-(1/3)(B22 C1 - B21 C2) = -2 * int(phi_j d1 phi_i) per element, shape (n, 3, 3)."""
    return -(B[:, 1, 1, None, None] * LocalTemplates.C1 - B[:, 1, 0, None, None] * LocalTemplates.C2) / 3.0


def local_matrices(emap: ElementMap, mu: ParameterPoint) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Local stiffness, mass and convection matrices of one element; the local
    system is -S + Mass + C.
    """
    a1, a2, a3 = local_alpha(emap, mu.M)
    S = (a1 * LocalTemplates.S1 + a2 * LocalTemplates.S2 + a3 * LocalTemplates.S3).astype(np.complex128)
    mass = (mu.k ** 2 * emap.area / 12.0 * LocalTemplates.Mmat).astype(np.complex128)
    C = 1j * mu.k * mu.M * _convection_template(emap.B[None])[0]
    return S, mass, C


# --- Global assembly ---

def scatter(mesh: Mesh, local: np.ndarray, n: Optional[int] = None) -> sp.csr_matrix:
    """Sums local (n_elements, 3, 3) matrices into a global CSR matrix; A_ij pairs trial j with test i."""
    n = mesh.n_vertices if n is None else n
    e = mesh.elements
    rows = np.broadcast_to(e[:, :, None], local.shape).ravel()
    cols = np.broadcast_to(e[:, None, :], local.shape).ravel()
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def scatter_vector(mesh: Mesh, local: np.ndarray) -> np.ndarray:
    out = np.zeros(mesh.n_vertices, dtype=np.complex128)
    np.add.at(out, mesh.elements.ravel(), local.ravel())
    return out


def stiffness_blocks(mesh: Mesh) -> Tuple[sp.csr_matrix, sp.csr_matrix]:
    """M-independent stiffness S0 and its M^2 correction S1 (S = S0 + M^2 S1)."""
    B, area = element_geometry(mesh)
    alpha0, alpha1 = _alpha_parts(B, area)
    T = np.stack([LocalTemplates.S1, LocalTemplates.S2, LocalTemplates.S3]).astype(np.float64)
    return scatter(mesh, np.einsum("el,lij->eij", alpha0, T)), scatter(mesh, np.einsum("el,lij->eij", alpha1, T))


def mass_matrix(mesh: Mesh) -> sp.csr_matrix:
    _, area = element_geometry(mesh)
    return scatter(mesh, area[:, None, None] / 12.0 * LocalTemplates.Mmat)


def convection_matrix(mesh: Mesh) -> sp.csr_matrix:
    B, _ = element_geometry(mesh)
    return scatter(mesh, _convection_template(B))


def assemble_affine_bounded(mesh: Mesh) -> AffineForm:
    """
    Affine decomposition of the bounded-domain form on all vertices:
    A(mu) = 1 * (-S0) + M^2 * (-S1) + k^2 * Mass + ikM * C.

    Raises:
        MeshError: If the mesh has no elements.
    """
    if mesh.n_elements == 0:
        raise MeshError("Cannot assemble on an empty mesh.")
    S0, S1 = stiffness_blocks(mesh)
    blocks = [(-S0).tocsr(), (-S1).tocsr(), mass_matrix(mesh), convection_matrix(mesh)]
    logger.debug(f"Assembled bounded affine form: {mesh.n_vertices} dofs, {len(blocks)} blocks")
    return AffineForm(blocks=[b.astype(np.complex128) for b in blocks], coefficient_ids=("1", "M2", "k2", "ikM"))


def assemble_operator(mesh: Mesh, mu: ParameterPoint) -> sp.csr_matrix:
    """Element-by-element assembly of -S + Mass + C at one parameter point."""
    local = np.empty((mesh.n_elements, 3, 3), dtype=np.complex128)
    for idx in range(mesh.n_elements):
        S, mass, C = local_matrices(element_map(mesh, idx), mu)
        local[idx] = -S + mass + C
    return scatter(mesh, local)


def eval_operator(affine: AffineForm, mu: ParameterPoint):
    """Sum of theta_m(mu) * block_m."""
    return affine.evaluate(mu)


def x_inner_matrix(mesh: Mesh, dofs: Optional[np.ndarray] = None) -> sp.csr_matrix:
    """H1 inner-product matrix (grad u, grad v) + (u, v), restricted to `dofs` when given."""
    S0, _ = stiffness_blocks(mesh)
    X = (S0 + mass_matrix(mesh)).astype(np.complex128).tocsr()
    if dofs is not None:
        X = X[dofs][:, dofs].tocsr()
    return X


# --- Quadrature and loads ---

def quadrature_points(mesh: Mesh) -> np.ndarray:
    """Edge-midpoint quadrature points, shape (n_elements, 3, 2)."""
    return np.einsum("qv,evd->eqd", MIDPOINT_BARYCENTRIC, mesh.vertices[mesh.elements])


def load_vector(mesh: Mesh, f: SourceFunction) -> np.ndarray:
    """int f phi_i by the edge-midpoint rule, on all vertices."""
    points = quadrature_points(mesh)
    values = np.asarray(f(points.reshape(-1, 2)), dtype=np.complex128).reshape(mesh.n_elements, 3)
    _, area = element_geometry(mesh)
    local = (area / 3.0)[:, None] * (values @ MIDPOINT_BARYCENTRIC)
    return scatter_vector(mesh, local)


def line_source_vector(mesh: Mesh, x0: float, amplitude: float = 1.0) -> np.ndarray:
    """
    Load of the line source amplitude * delta(x1 - x0), integrated exactly along
    the mesh edges lying on x1 = x0.

    Raises:
        MeshError: If no mesh edge lies on the line.
    """
    edges = mesh.edges()
    p, q = mesh.vertices[edges[:, 0]], mesh.vertices[edges[:, 1]]
    span = float(np.ptp(mesh.vertices[:, 0])) or 1.0
    on_line = (np.abs(p[:, 0] - x0) <= 1e-12 * span) & (np.abs(q[:, 0] - x0) <= 1e-12 * span)
    if not on_line.any():
        raise MeshError(f"No mesh edge lies on the source line x1 = {x0}.")
    length = np.abs(q[on_line, 1] - p[on_line, 1])
    out = np.zeros(mesh.n_vertices, dtype=np.complex128)
    np.add.at(out, edges[on_line, 0], amplitude * length / 2.0)
    np.add.at(out, edges[on_line, 1], amplitude * length / 2.0)
    return out


def gaussian_source(spec: SourceSpec) -> SourceFunction:
    """Normalized gaussian, amplitude * exp(-r^2 / 2w^2) / (2 pi w^2)."""
    cx, cy = spec.center
    w2 = spec.width ** 2

    def f(points: np.ndarray) -> np.ndarray:
        r2 = (points[:, 0] - cx) ** 2 + (points[:, 1] - cy) ** 2
        return spec.amplitude * np.exp(-r2 / (2.0 * w2)) / (2.0 * np.pi * w2)

    return f


def source_vector(mesh: Mesh, spec: SourceSpec) -> np.ndarray:
    """Load vector of a configured source on all vertices."""
    if spec.kind == "none":
        return np.zeros(mesh.n_vertices, dtype=np.complex128)
    if spec.kind == "gaussian":
        return load_vector(mesh, gaussian_source(spec))
    return line_source_vector(mesh, spec.x0, spec.amplitude)


def output_vector(mesh: Mesh, spec: OutputSpec, region_mask: Optional[np.ndarray] = None) -> np.ndarray:
    """
    L with L^H u = mean of u over the measurement rectangle (elements by
    centroid), or over `region_mask` elements when no rectangle is set.

    Raises:
        ConfigError: If the measurement region contains no element.
    """
    if spec.rectangle is not None:
        x_min, x_max, y_min, y_max = spec.rectangle
        c = mesh.centroids()
        mask = (c[:, 0] >= x_min) & (c[:, 0] <= x_max) & (c[:, 1] >= y_min) & (c[:, 1] <= y_max)
    else:
        mask = np.ones(mesh.n_elements, dtype=bool) if region_mask is None else region_mask
    if not mask.any():
        raise ConfigError(f"Output rectangle {spec.rectangle} contains no element centroid.")
    _, area = element_geometry(mesh)
    local = np.where(mask, area / 3.0, 0.0)[:, None] * np.ones(3)
    return (scatter_vector(mesh, local) / area[mask].sum()).astype(np.complex128)


# --- Dirichlet treatment ---

def build_dofmap(mesh: Mesh, dirichlet: DirichletData) -> DofMap:
    """
    Free dofs are all vertices that belong to an element and do not lie on a
    Dirichlet-tagged edge.

    Raises:
        ConfigError: If a Dirichlet tag does not occur on the mesh boundary.
    """
    missing = sorted(set(dirichlet.tags) - set(mesh.boundary_tags))
    if missing:
        raise ConfigError(f"Dirichlet tags {missing} do not occur on the mesh boundary {sorted(set(mesh.boundary_tags))}.")
    prescribed = mesh.boundary_vertices(dirichlet.tags)
    orphans = np.setdiff1d(np.arange(mesh.n_vertices), np.unique(mesh.elements))
    if len(orphans):
        logger.warning(f"{len(orphans)} vertices belong to no element; they are held at their boundary value.")
    boundary = np.union1d(prescribed, orphans).astype(np.int64)
    interior = np.setdiff1d(np.arange(mesh.n_vertices), boundary).astype(np.int64)
    return DofMap(interior=interior, boundary=boundary, n_total=mesh.n_vertices)


def apply_dirichlet(
    A: sp.spmatrix, F: np.ndarray, dofmap: DofMap, g_boundary: np.ndarray
) -> Tuple[sp.csr_matrix, np.ndarray]:
    """
    Eliminates prescribed dofs: returns (A_II, F_I - A_IB g_B).

    Raises:
        ValueError: If the matrix, vector and dof map sizes disagree.
    """
    A = sp.csr_matrix(A)
    if A.shape != (dofmap.n_total, dofmap.n_total) or len(F) != dofmap.n_total:
        raise ValueError(f"System of size {A.shape} / {len(F)} does not match {dofmap.n_total} dofs")
    if len(g_boundary) != len(dofmap.boundary):
        raise ValueError(f"Got {len(g_boundary)} boundary values for {len(dofmap.boundary)} boundary dofs")
    I, Bd = dofmap.interior, dofmap.boundary
    A_rows = A[I]
    F_I = np.asarray(F, dtype=np.complex128)[I] - A_rows[:, Bd] @ g_boundary
    return A_rows[:, I].tocsr(), F_I


def reconstruct(u_interior: np.ndarray, dofmap: DofMap, g_boundary: np.ndarray) -> np.ndarray:
    if len(u_interior) != dofmap.n_interior or len(g_boundary) != len(dofmap.boundary):
        raise ValueError("Interior/boundary value counts do not match the dof map")
    full = np.zeros(dofmap.n_total, dtype=np.complex128)
    full[dofmap.interior] = u_interior
    full[dofmap.boundary] = g_boundary
    return full


def assemble_rhs(
    mesh: Mesh,
    source: Optional[SourceFunction],
    dirichlet: DirichletData,
    mu: ParameterPoint,
    lifted_operator: AffineForm,
    dofmap: Optional[DofMap] = None,
) -> AssembledRhs:
    """
    Right-hand side on interior dofs at one parameter point: quadrature load
    of `source` minus the lifting A(mu)_IB g_B. Per-parameter Dirichlet data
    marks the result non-affine.

    Raises:
        ConfigError: If a Dirichlet tag is absent from the mesh.
    """
    dofmap = dofmap or build_dofmap(mesh, dirichlet)
    F = load_vector(mesh, source) if source is not None else np.zeros(mesh.n_vertices, dtype=np.complex128)
    g = dirichlet.nodal_values(mesh.vertices[dofmap.boundary], mu)
    _, F_I = apply_dirichlet(lifted_operator.evaluate(mu), F, dofmap, g)
    return AssembledRhs(vector=F_I, affine=dirichlet.affine, mode=dirichlet.mode)


def affine_rhs(
    F_source: np.ndarray, operator: AffineForm, dofmap: DofMap, dirichlet: DirichletData, mesh: Mesh
) -> Tuple[AffineForm, List[sp.csr_matrix]]:
    """
    Affine form of F(mu) on interior dofs and the interior x boundary
    coupling blocks of the operator.

    Homogeneous data gives one block. Parameter-independent data keeps the
    split, F = F_src - sum_m theta_m A_m,IB g_B, with 1 + M_a blocks.
    Per-parameter data returns only F_src, flagged non-affine; the lifting is
    added per query from the coupling blocks.
    """
    I = dofmap.interior
    coupling = operator.coupling_blocks(I, dofmap.boundary)
    blocks = [np.asarray(F_source, dtype=np.complex128)[I]]
    ids = ["1"]
    if dirichlet.mode == DirichletMode.PARAMETER_INDEPENDENT:
        g = dirichlet.nodal_values(mesh.vertices[dofmap.boundary])
        for cid, block in zip(operator.coefficient_ids, coupling):
            blocks.append(np.asarray(block @ g, dtype=np.complex128))
            ids.append(f"neg:{cid}")
    return AffineForm(blocks=blocks, coefficient_ids=tuple(ids), affine=dirichlet.affine), coupling
