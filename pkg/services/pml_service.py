# services/pml_service.py
from core.exceptions import ConfigError, MeshError
from models.affine import AffineForm
from models.mesh import Mesh
from models.pml import PmlConfig
from services.assembly_service import MIDPOINT_BARYCENTRIC, REFERENCE_GRADIENTS, quadrature_points, scatter
from services.mesh_service import element_geometry
import logging
import numpy as np

logger = logging.getLogger(__name__)

PML_COEFFICIENTS = ("-(1-M2)", "-1", "-2ikM", "-ikM", "k2/(1-M2)", "-k2M2/(1-M2)")


def damping_sigma(x1, cfg: PmlConfig):
    """sigma0 (x1 - x_minus)^2 left of x_minus, sigma0 (x1 - x_plus)^2 right of x_plus, 0 between."""
    x1 = np.asarray(x1, dtype=np.float64)
    left = np.where(x1 < cfg.x_minus, (x1 - cfg.x_minus) ** 2, 0.0)
    right = np.where(x1 > cfg.x_plus, (x1 - cfg.x_plus) ** 2, 0.0)
    sigma = cfg.sigma0 * (left + right)
    return float(sigma) if sigma.ndim == 0 else sigma


def damping_sigma_derivative(x1, cfg: PmlConfig):
    x1 = np.asarray(x1, dtype=np.float64)
    d = 2.0 * cfg.sigma0 * (np.where(x1 < cfg.x_minus, x1 - cfg.x_minus, 0.0) + np.where(x1 > cfg.x_plus, x1 - cfg.x_plus, 0.0))
    return float(d) if d.ndim == 0 else d


def _omega(cfg: PmlConfig) -> float:
    if cfg.omega is None:
        raise ConfigError("PML frequency constant omega is not set.")
    return cfg.omega


def damping_hat(x1, cfg: PmlConfig):
    """sigma_hat = -i omega / (-i omega + sigma(x1)); exactly 1 where sigma vanishes."""
    omega = _omega(cfg)
    sigma = np.asarray(damping_sigma(x1, cfg))
    hat = np.where(sigma == 0.0, 1.0 + 0.0j, -1j * omega / (-1j * omega + sigma))
    return complex(hat) if hat.ndim == 0 else hat


def damping_hat_derivative(x1, cfg: PmlConfig):
    """d sigma_hat / d x1 = i omega sigma'(x1) / (-i omega + sigma(x1))^2."""
    omega = _omega(cfg)
    sigma = np.asarray(damping_sigma(x1, cfg))
    d_sigma = np.asarray(damping_sigma_derivative(x1, cfg))
    d_hat = 1j * omega * d_sigma / (-1j * omega + sigma) ** 2
    return complex(d_hat) if d_hat.ndim == 0 else d_hat


def check_layer_tags(mesh: Mesh, cfg: PmlConfig) -> None:
    """
    Raises:
        MeshError: If an element inside a layer is not tagged with that layer.
    """
    cx = mesh.centroids()[:, 0]
    regions = np.asarray(mesh.element_regions)
    bad_left = (cx < cfg.x_minus) & (regions != "pml_left")
    bad_right = (cx > cfg.x_plus) & (regions != "pml_right")
    if bad_left.any() or bad_right.any():
        n_bad = int(bad_left.sum() + bad_right.sum())
        raise MeshError(f"{n_bad} elements inside the PML layers are not tagged pml_left / pml_right.")
    extent = mesh.vertices[:, 0].min(), mesh.vertices[:, 0].max()
    expected = cfg.x_minus - cfg.L, cfg.x_plus + cfg.L
    if not np.allclose(extent, expected, atol=1e-9 * max(1.0, cfg.L)):
        logger.warning(f"Mesh spans x1 in {extent}, layers of width L={cfg.L} expect {expected}.")


def assemble_affine_pml(mesh: Mesh, cfg: PmlConfig) -> AffineForm:
    """
    Six-block affine decomposition of the PML form on the extended domain:

        B1 = int sh d1u d1v,   B2 = int sh^-1 d2u d2v,  B3 = int sh u d1v,
        B4 = int sh' u v,      B5 = int sh^-1 u v,      B6 = int sh u v,

    with sh = sigma_hat and coefficients -(1-M^2), -1, -2ikM, -ikM,
    k^2/(1-M^2), -k^2 M^2/(1-M^2). Damping-weighted integrals use the
    edge-midpoint rule.

    Raises:
        MeshError: If the mesh is empty or layer elements are untagged.
        ConfigError: If omega is not set.
    """
    if mesh.n_elements == 0:
        raise MeshError("Cannot assemble on an empty mesh.")
    check_layer_tags(mesh, cfg)

    B, area = element_geometry(mesh)
    weight = area / 3.0
    # physical gradients of the hat functions, (n, 2, 3)
    grads = np.einsum("edk,kv->edv", np.linalg.inv(B).transpose(0, 2, 1), REFERENCE_GRADIENTS)
    g1, g2 = grads[:, 0, :], grads[:, 1, :]

    x1 = quadrature_points(mesh)[:, :, 0]
    hat = damping_hat(x1, cfg)
    hat_inv = 1.0 / hat
    d_hat = damping_hat_derivative(x1, cfg)

    def outer(c, a, b):
        return c[:, None, None] * a[:, :, None] * b[:, None, :]

    def weighted_mass(values):
        return weight[:, None, None] * np.einsum("eq,qi,qj->eij", values, MIDPOINT_BARYCENTRIC, MIDPOINT_BARYCENTRIC)

    local_b1 = outer(weight * hat.sum(axis=1), g1, g1)
    local_b2 = outer(weight * hat_inv.sum(axis=1), g2, g2)
    # B3[i, j] = d1 phi_i * int sh phi_j
    local_b3 = g1[:, :, None] * (weight[:, None] * (hat @ MIDPOINT_BARYCENTRIC))[:, None, :]
    locals_ = [local_b1, local_b2, local_b3, weighted_mass(d_hat), weighted_mass(hat_inv), weighted_mass(hat)]

    blocks = [scatter(mesh, local.astype(np.complex128)) for local in locals_]
    logger.debug(f"Assembled PML affine form: {mesh.n_vertices} dofs, sigma0={cfg.sigma0}, omega={cfg.omega}")
    return AffineForm(blocks=blocks, coefficient_ids=PML_COEFFICIENTS)
