# services/problem_service.py
from core.exceptions import ConfigError
from core.run_config import RunConfig
from models.affine import AffineForm
from models.mesh import Mesh
from models.problem import BoundaryValue, DirichletData, DirichletMode, TruthProblem
from models.run_spec import BoundarySpec
from services.analytic_service import fundamental_solution
from services.assembly_service import (
    affine_rhs,
    assemble_affine_bounded,
    build_dofmap,
    output_vector,
    source_vector,
    x_inner_matrix,
)
from services.mesh_service import load_mesh
from services.pml_service import assemble_affine_pml
from typing import Optional, Tuple
import logging
import numpy as np

logger = logging.getLogger(__name__)

PML_DIRICHLET_TAGS = ("left", "right")


def default_dirichlet_tags(problem: str, mesh: Mesh) -> Tuple[str, ...]:
    """Every boundary tag for bounded problems; the duct ends for PML problems."""
    if problem == "pml":
        return PML_DIRICHLET_TAGS
    return tuple(sorted(set(mesh.boundary_tags)))


def _boundary_value(spec: BoundarySpec) -> Tuple[Optional[BoundaryValue], DirichletMode]:
    if spec.value == "zero":
        return None, DirichletMode.HOMOGENEOUS
    if spec.value == "constant":
        value = complex(spec.constant_re, spec.constant_im)
        return (lambda points, mu: np.full(len(points), value, dtype=np.complex128)), DirichletMode.PARAMETER_INDEPENDENT
    source = spec.source_point

    def fundamental(points: np.ndarray, mu) -> np.ndarray:
        return fundamental_solution(points[:, 0], points[:, 1], mu, source)

    return fundamental, DirichletMode.PER_PARAMETER


def dirichlet_data(spec: BoundarySpec, problem: str, mesh: Mesh) -> DirichletData:
    tags = tuple(spec.dirichlet_tags) if spec.dirichlet_tags is not None else default_dirichlet_tags(problem, mesh)
    value, mode = _boundary_value(spec)
    return DirichletData(tags=tags, value=value, mode=mode)


def build_problem(cfg: RunConfig, mesh: Optional[Mesh] = None) -> TruthProblem:
    """
    Assembles the truth problem of a run configuration on interior dofs:
    affine operator, affine (or flagged non-affine) right-hand side, X inner
    product and the mean-value output functional.

    Raises:
        MeshError: If the mesh cannot be loaded or violates the mesh invariants.
        ConfigError: If boundary tags, source or output region do not fit the mesh.
    """
    mesh = mesh if mesh is not None else load_mesh(cfg.mesh, cfg.pml if cfg.problem == "pml" else None)
    if cfg.problem == "pml":
        full_operator = assemble_affine_pml(mesh, cfg.pml)
    else:
        full_operator = assemble_affine_bounded(mesh)

    dirichlet = dirichlet_data(cfg.boundary, cfg.problem, mesh)
    dofmap = build_dofmap(mesh, dirichlet)
    if dofmap.n_interior == 0:
        raise ConfigError(f"Dirichlet tags {list(dirichlet.tags)} leave no free degree of freedom")
    I, B = dofmap.interior, dofmap.boundary

    rhs, coupling = affine_rhs(source_vector(mesh, cfg.source), full_operator, dofmap, dirichlet, mesh)
    physical = mesh.region_mask("interior")
    L = output_vector(mesh, cfg.output, physical)

    problem = TruthProblem(
        kind=cfg.problem,
        operator=full_operator.restrict(I),
        rhs=rhs,
        x_inner=x_inner_matrix(mesh, I),
        output=AffineForm(blocks=[L[I]], coefficient_ids=("1",)),
        mesh=mesh,
        dofmap=dofmap,
        dirichlet=dirichlet,
        coupling_blocks=coupling,
        output_boundary=L[B],
        physical_mask=physical,
    )
    logger.info(
        f"Truth problem '{cfg.problem}': {problem.n_dofs} interior dofs, M_a={problem.operator.n_blocks}, "
        f"M_f={problem.rhs.n_blocks}, Dirichlet {dirichlet.mode.value} on {list(dirichlet.tags)}"
    )
    return problem
