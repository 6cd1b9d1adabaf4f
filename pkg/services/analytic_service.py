# services/analytic_service.py
from models.analytic import ErrorNorms, ExactField
from models.mesh import Mesh
from models.parameters import ParameterPoint
from models.run_spec import ExactSpec, SourceSpec
from services.assembly_service import MIDPOINT_BARYCENTRIC, REFERENCE_GRADIENTS, quadrature_points
from services.mesh_service import element_geometry
from services.special_functions import hankel0_first_kind, hankel1_first_kind
from typing import Optional, Tuple
import logging
import numpy as np

logger = logging.getLogger(__name__)


def _shifted(x1, x2, source: Tuple[float, float]):
    d1 = np.asarray(x1, dtype=np.float64) - source[0]
    d2 = np.asarray(x2, dtype=np.float64) - source[1]
    return d1, d2


def _kernel_parts(d1, d2, mu: ParameterPoint):
    beta2 = 1.0 - mu.M ** 2
    rho = np.sqrt(d1 ** 2 + beta2 * d2 ** 2)
    if np.any(rho == 0.0):
        raise ValueError("Fundamental solution evaluated at the source point")
    z = mu.k * rho / beta2
    phase = np.exp(-1j * mu.k * mu.M * d1 / beta2)
    c = 1j / (4.0 * np.sqrt(beta2))
    return beta2, rho, z, phase, c


def fundamental_solution(x1, x2, mu: ParameterPoint, source: Tuple[float, float] = (0.0, 0.0)):
    """
    Fundamental solution of the convected Helmholtz operator for a point source:

        i / (4 beta) H0^(1)(k sqrt(d1^2 + beta^2 d2^2) / beta^2) exp(-i k M d1 / beta^2)

    with beta^2 = 1 - M^2 and d = x - source.

    Raises:
        ValueError: At the source point.
    """
    d1, d2 = _shifted(x1, x2, source)
    _, _, z, phase, c = _kernel_parts(d1, d2, mu)
    value = c * hankel0_first_kind(z) * phase
    return complex(value) if np.ndim(value) == 0 else value


def fundamental_solution_gradient(x1, x2, mu: ParameterPoint, source: Tuple[float, float] = (0.0, 0.0)):
    """Analytic gradient (d/dx1, d/dx2) of the fundamental solution, using H0' = -H1."""
    d1, d2 = _shifted(x1, x2, source)
    beta2, rho, z, phase, c = _kernel_parts(d1, d2, mu)
    h0 = hankel0_first_kind(z)
    h1 = hankel1_first_kind(z)
    gamma = mu.k * mu.M / beta2
    g1 = c * phase * (-h1 * mu.k * d1 / (beta2 * rho) - 1j * gamma * h0)
    g2 = c * phase * (-h1 * mu.k * d2 / rho)
    return g1, g2


def fundamental_field(mu: ParameterPoint, source: Tuple[float, float] = (0.0, 0.0)) -> ExactField:
    return ExactField(
        name="fundamental",
        value=lambda p: fundamental_solution(p[:, 0], p[:, 1], mu, source),
        gradient=lambda p: np.column_stack(fundamental_solution_gradient(p[:, 0], p[:, 1], mu, source)),
        singular_point=tuple(source),
    )


def duct_wavenumbers(mu: ParameterPoint) -> Tuple[float, float]:
    """Downstream and upstream axial wavenumbers k/(1+M) and -k/(1-M)."""
    return mu.k / (1.0 + mu.M), -mu.k / (1.0 - mu.M)


def duct_mode(x1, mu: ParameterPoint, x0: float = 0.0, amplitude: float = 1.0):
    """
    Plane-wave field of the line source amplitude * delta(x1 - x0) in a
    hard-walled duct: amplitude * exp(i kappa (x1 - x0)) / (2ik), with the
    downstream wavenumber for x1 >= x0 and the upstream one for x1 < x0.
    """
    kappa_plus, kappa_minus = duct_wavenumbers(mu)
    d = np.asarray(x1, dtype=np.float64) - x0
    kappa = np.where(d >= 0.0, kappa_plus, kappa_minus)
    value = amplitude * np.exp(1j * kappa * d) / (2j * mu.k)
    return complex(value) if value.ndim == 0 else value


def duct_mode_field(mu: ParameterPoint, x0: float = 0.0, amplitude: float = 1.0) -> ExactField:
    kappa_plus, kappa_minus = duct_wavenumbers(mu)

    def gradient(p: np.ndarray) -> np.ndarray:
        d = p[:, 0] - x0
        kappa = np.where(d >= 0.0, kappa_plus, kappa_minus)
        return np.column_stack([1j * kappa * duct_mode(p[:, 0], mu, x0, amplitude), np.zeros(len(p))])

    return ExactField(name="duct_mode", value=lambda p: duct_mode(p[:, 0], mu, x0, amplitude), gradient=gradient)


def exact_field(spec: ExactSpec, mu: ParameterPoint, source: Optional[SourceSpec] = None) -> Optional[ExactField]:
    """Exact field configured for a run, or None."""
    if spec.kind == "fundamental":
        return fundamental_field(mu, spec.source_point)
    if spec.kind == "duct_mode":
        amplitude = source.amplitude if source is not None and source.kind == "line" else 1.0
        return duct_mode_field(mu, spec.x0, amplitude)
    return None


def interpolate(mesh: Mesh, exact: ExactField) -> np.ndarray:
    """Nodal interpolant of an exact field."""
    return exact(mesh.vertices)


def error_norms(
    mesh: Mesh, u_h: np.ndarray, exact: ExactField, element_mask: Optional[np.ndarray] = None
) -> ErrorNorms:
    """
    L-infinity (nodal), L2 and H1 norms of u_h - u over the selected elements,
    with edge-midpoint quadrature. Relative values divide by the same norms of u.

    Raises:
        ValueError: If the exact field is undefined at a vertex or quadrature point.
    """
    mask = np.ones(mesh.n_elements, dtype=bool) if element_mask is None else np.asarray(element_mask, dtype=bool)
    elements = mesh.elements[mask]
    u_h = np.asarray(u_h, dtype=np.complex128)
    if len(u_h) != mesh.n_vertices:
        raise ValueError(f"Nodal field has {len(u_h)} values for {mesh.n_vertices} vertices")

    nodes = np.unique(elements)
    u_nodes = exact(mesh.vertices[nodes])
    linf = float(np.max(np.abs(u_h[nodes] - u_nodes)))
    ref_linf = float(np.max(np.abs(u_nodes)))

    B, area = element_geometry(mesh)
    B, area = B[mask], area[mask]
    weight = area / 3.0
    points = quadrature_points(mesh)[mask]
    u_q = exact(points.reshape(-1, 2)).reshape(len(elements), 3)
    uh_q = u_h[elements] @ MIDPOINT_BARYCENTRIC.T
    diff = uh_q - u_q
    l2_sq = float(np.sum(weight[:, None] * np.abs(diff) ** 2))
    ref_l2_sq = float(np.sum(weight[:, None] * np.abs(u_q) ** 2))

    grads = np.einsum("edk,kv->edv", np.linalg.inv(B).transpose(0, 2, 1), REFERENCE_GRADIENTS)
    grad_h = np.einsum("edv,ev->ed", grads, u_h[elements])
    step = np.repeat(1e-6 * np.sqrt(2.0 * area), 3)
    grad_q = exact.grad(points.reshape(-1, 2), step=step).reshape(len(elements), 3, 2)
    semi_sq = float(np.sum(weight[:, None] * np.sum(np.abs(grad_h[:, None, :] - grad_q) ** 2, axis=2)))
    ref_semi_sq = float(np.sum(weight[:, None] * np.sum(np.abs(grad_q) ** 2, axis=2)))

    l2 = np.sqrt(l2_sq)
    h1 = np.sqrt(l2_sq + semi_sq)
    ref_l2 = np.sqrt(ref_l2_sq)
    ref_h1 = np.sqrt(ref_l2_sq + ref_semi_sq)
    return ErrorNorms(
        linf=linf,
        l2=float(l2),
        h1=float(h1),
        rel_linf=linf / ref_linf if ref_linf > 0 else None,
        rel_l2=float(l2 / ref_l2) if ref_l2 > 0 else None,
        rel_h1=float(h1 / ref_h1) if ref_h1 > 0 else None,
    )
