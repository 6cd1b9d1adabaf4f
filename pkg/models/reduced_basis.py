# models/reduced_basis.py
from pydantic import BaseModel, ConfigDict, Field, model_validator
from typing import Dict, List, Literal, Optional, Tuple
import numpy as np

from models.affine import coefficient
from models.parameters import ParameterPoint

ARCHIVE_VERSION = 1


def _thetas(ids: Tuple[str, ...], mu: ParameterPoint) -> np.ndarray:
    return np.array([coefficient(cid, mu) for cid in ids], dtype=np.complex128)


class ReducedBasis(BaseModel):
    """
    X-orthonormal reduced basis Phi plus the offline data of the online stage.

    Reduced Gram data is indexed snapshot-major: column j * M_a + m holds the
    Riesz representative of A_m phi_j, so extending the basis appends rows
    and columns. The Riesz representatives themselves (riesz_f, riesz_a) are
    offline-only and not archived.
    """
    problem_kind: str = "synthetic"
    operator_ids: Tuple[str, ...]
    rhs_ids: Tuple[str, ...]
    output_ids: Tuple[str, ...] = ()
    affine_rhs: bool = True
    beta_const: float = Field(1.0, gt=0)
    output_offset: complex = Field(0j, description="Boundary part L_B^H g_B of the output (affine modes).")

    phi: np.ndarray = Field(..., description="(n_dofs, N) basis matrix.")
    snapshot_params: List[ParameterPoint] = Field(default_factory=list)
    reduced_blocks: np.ndarray = Field(..., description="(M_a, N, N) Phi^H A_m Phi.")
    reduced_rhs: np.ndarray = Field(..., description="(M_f, N) Phi^H F_m.")
    reduced_output: np.ndarray = Field(..., description="(M_l, N) L_m^H Phi.")
    gram_ff: np.ndarray = Field(..., description="(M_f, M_f) (f_m, f_n)_X.")
    gram_fa: np.ndarray = Field(..., description="(M_f, M_a N) (f_m, A_{n,j})_X.")
    gram_aa: np.ndarray = Field(..., description="(M_a N, M_a N) (A_{m,j}, A_{n,l})_X.")
    riesz_f: Optional[np.ndarray] = None
    riesz_a: Optional[np.ndarray] = None

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @model_validator(mode="after")
    def _check_dimensions(self):
        N, Ma, Mf, Ml = self.N, self.M_a, self.M_f, self.M_l
        expected = {
            "reduced_blocks": (Ma, N, N),
            "reduced_rhs": (Mf, N),
            "reduced_output": (Ml, N),
            "gram_ff": (Mf, Mf),
            "gram_fa": (Mf, Ma * N),
            "gram_aa": (Ma * N, Ma * N),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ValueError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")
        if len(self.snapshot_params) != N:
            raise ValueError(f"{len(self.snapshot_params)} snapshot parameters for N={N}")
        return self

    @classmethod
    def empty(
        cls,
        n_dofs: int,
        operator_ids: Tuple[str, ...],
        rhs_ids: Tuple[str, ...],
        output_ids: Tuple[str, ...] = (),
        **kwargs,
    ) -> "ReducedBasis":
        Ma, Mf, Ml = len(operator_ids), len(rhs_ids), len(output_ids)
        c = np.complex128
        return cls(
            operator_ids=operator_ids,
            rhs_ids=rhs_ids,
            output_ids=output_ids,
            phi=np.zeros((n_dofs, 0), dtype=c),
            reduced_blocks=np.zeros((Ma, 0, 0), dtype=c),
            reduced_rhs=np.zeros((Mf, 0), dtype=c),
            reduced_output=np.zeros((Ml, 0), dtype=c),
            gram_ff=np.zeros((Mf, Mf), dtype=c),
            gram_fa=np.zeros((Mf, 0), dtype=c),
            gram_aa=np.zeros((0, 0), dtype=c),
            **kwargs,
        )

    @property
    def N(self) -> int:
        return self.phi.shape[1]

    @property
    def n_dofs(self) -> int:
        return self.phi.shape[0]

    @property
    def M_a(self) -> int:
        return len(self.operator_ids)

    @property
    def M_f(self) -> int:
        return len(self.rhs_ids)

    @property
    def M_l(self) -> int:
        return len(self.output_ids)

    def theta_a(self, mu: ParameterPoint) -> np.ndarray:
        return _thetas(self.operator_ids, mu)

    def theta_f(self, mu: ParameterPoint) -> np.ndarray:
        return _thetas(self.rhs_ids, mu)

    def theta_l(self, mu: ParameterPoint) -> np.ndarray:
        return _thetas(self.output_ids, mu)

    def gram(self) -> np.ndarray:
        """Full Hermitian Gram matrix [[ff, fa], [fa^H, aa]]."""
        return np.block([[self.gram_ff, self.gram_fa], [self.gram_fa.conj().T, self.gram_aa]])

    def expand(self, xi: np.ndarray) -> np.ndarray:
        """u_N = Phi xi on interior dofs."""
        return self.phi @ xi


class DualBasis(BaseModel):
    """
    Reduced basis of the adjoint problem A(mu)^H w = -L(mu), with the cross
    terms against the primal basis needed by the corrected output.
    """
    phi_du: np.ndarray = Field(..., description="(n_dofs, N_du) basis matrix.")
    snapshot_params: List[ParameterPoint] = Field(default_factory=list)
    reduced_blocks_du: np.ndarray = Field(..., description="(M_a, N_du, N_du) Phi_du^H A_m^H Phi_du.")
    reduced_output_du: np.ndarray = Field(..., description="(M_l, N_du) Phi_du^H L_m.")
    cross_blocks: np.ndarray = Field(..., description="(M_a, N_du, N) Phi_du^H A_m Phi.")
    cross_rhs: np.ndarray = Field(..., description="(M_f, N_du) Phi_du^H F_m.")

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @model_validator(mode="after")
    def _check_dimensions(self):
        N_du = self.N_du
        if self.reduced_blocks_du.shape[1:] != (N_du, N_du):
            raise ValueError("reduced_blocks_du does not match N_du")
        if self.reduced_output_du.shape[1] != N_du or self.cross_rhs.shape[1] != N_du:
            raise ValueError("dual reduced vectors do not match N_du")
        if self.cross_blocks.shape[1] != N_du:
            raise ValueError("cross_blocks does not match N_du")
        if self.cross_blocks.shape[0] != self.reduced_blocks_du.shape[0]:
            raise ValueError("cross_blocks and reduced_blocks_du disagree on M_a")
        return self

    @property
    def N_du(self) -> int:
        return self.phi_du.shape[1]


class ArchiveHeader(BaseModel):
    """JSON header stored next to the arrays of a basis archive."""
    format: Literal["crbm-basis"] = "crbm-basis"
    version: int = ARCHIVE_VERSION
    problem_kind: str
    n_dofs: int = Field(..., ge=0)
    N: int = Field(..., ge=0)
    N_du: int = Field(0, ge=0)
    operator_ids: Tuple[str, ...]
    rhs_ids: Tuple[str, ...]
    output_ids: Tuple[str, ...] = ()
    affine_rhs: bool
    beta_const: float
    output_offset: Tuple[float, float] = (0.0, 0.0)
    snapshot_params: List[ParameterPoint]
    dual_snapshot_params: List[ParameterPoint] = Field(default_factory=list)
    config_path: Optional[str] = Field(None, description="Run config the basis was built from.")
    costs: Dict[str, float] = Field(default_factory=dict, description="Offline cost summary (seconds and operation counts).")
