# models/affine.py
from pydantic import BaseModel, ConfigDict, Field, model_validator
from typing import Callable, Dict, List, Tuple, Union
import numpy as np
import scipy.sparse as sp

from models.parameters import ParameterPoint

Block = Union[sp.csr_matrix, np.ndarray]

# Named coefficient functions theta(mu). Names travel with the basis archive,
# so the online stage rebuilds theta without pickling callables.
COEFFICIENTS: Dict[str, Callable[[ParameterPoint], complex]] = {
    "1": lambda mu: 1.0,
    "-1": lambda mu: -1.0,
    "k": lambda mu: mu.k,
    "k2": lambda mu: mu.k ** 2,
    "M2": lambda mu: mu.M ** 2,
    "ikM": lambda mu: 1j * mu.k * mu.M,
    # PML form
    "-(1-M2)": lambda mu: -(1.0 - mu.M ** 2),
    "-2ikM": lambda mu: -2j * mu.k * mu.M,
    "-ikM": lambda mu: -1j * mu.k * mu.M,
    "k2/(1-M2)": lambda mu: mu.k ** 2 / (1.0 - mu.M ** 2),
    "-k2M2/(1-M2)": lambda mu: -(mu.k ** 2) * mu.M ** 2 / (1.0 - mu.M ** 2),
}

NEGATED = "neg:"


def coefficient(name: str, mu: ParameterPoint) -> complex:
    """Evaluates a named coefficient; 'neg:<name>' is the negated coefficient."""
    if name.startswith(NEGATED):
        return -coefficient(name[len(NEGATED):], mu)
    try:
        return COEFFICIENTS[name](mu)
    except KeyError:
        raise KeyError(f"Unknown affine coefficient '{name}'") from None


def is_known_coefficient(name: str) -> bool:
    while name.startswith(NEGATED):
        name = name[len(NEGATED):]
    return name in COEFFICIENTS


class AffineForm(BaseModel):
    """
    Parameter-separable operator or vector: sum_m theta_m(mu) * block_m.
    Matrix blocks are square sparse matrices sharing one dimension; vector
    blocks are 1-D arrays sharing one length.
    """
    blocks: List[Block] = Field(..., description="Parameter-independent blocks.")
    coefficient_ids: Tuple[str, ...] = Field(..., description="Registry name of theta_m for each block.")
    affine: bool = Field(True, description="False when an extra non-affine term is assembled per parameter.")

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @model_validator(mode="after")
    def _check_blocks(self):
        if len(self.blocks) != len(self.coefficient_ids):
            raise ValueError("one coefficient id is required per block")
        if not self.blocks:
            raise ValueError("an affine form needs at least one block")
        unknown = [cid for cid in self.coefficient_ids if not is_known_coefficient(cid)]
        if unknown:
            raise ValueError(f"unknown coefficient ids {unknown}")
        shapes = {b.shape for b in self.blocks}
        if len(shapes) != 1:
            raise ValueError(f"blocks have inconsistent shapes {sorted(shapes)}")
        kinds = {sp.issparse(b) for b in self.blocks}
        if len(kinds) != 1:
            raise ValueError("cannot mix matrix and vector blocks")
        shape = next(iter(shapes))
        if self.is_operator and shape[0] != shape[1]:
            raise ValueError("matrix blocks must be square")
        return self

    @property
    def is_operator(self) -> bool:
        return sp.issparse(self.blocks[0])

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    @property
    def size(self) -> int:
        return self.blocks[0].shape[0]

    def coefficients(self, mu: ParameterPoint) -> np.ndarray:
        return np.array([coefficient(cid, mu) for cid in self.coefficient_ids], dtype=np.complex128)

    def combine(self, theta: np.ndarray) -> Block:
        """Sum of theta_m * block_m for explicit coefficient values."""
        theta = np.asarray(theta)
        if theta.shape != (self.n_blocks,):
            raise ValueError(f"expected {self.n_blocks} coefficients, got {theta.shape}")
        if self.is_operator:
            total = sp.csr_matrix(self.blocks[0].shape, dtype=np.complex128)
            for t, block in zip(theta, self.blocks):
                total = total + complex(t) * block
            return total.tocsr()
        total = np.zeros(self.size, dtype=np.complex128)
        for t, block in zip(theta, self.blocks):
            total += t * block
        return total

    def evaluate(self, mu: ParameterPoint) -> Block:
        return self.combine(self.coefficients(mu))

    def restrict(self, dofs: np.ndarray) -> "AffineForm":
        """Restriction of every block to the given degrees of freedom."""
        if self.is_operator:
            blocks = [b.tocsr()[dofs][:, dofs].tocsr() for b in self.blocks]
        else:
            blocks = [np.asarray(b)[dofs] for b in self.blocks]
        return AffineForm(blocks=blocks, coefficient_ids=self.coefficient_ids, affine=self.affine)

    def coupling_blocks(self, rows: np.ndarray, cols: np.ndarray) -> List[sp.csr_matrix]:
        """Rectangular row/column slices of the matrix blocks (interior x boundary for lifting)."""
        if not self.is_operator:
            raise ValueError("coupling blocks exist only for operator forms")
        return [b.tocsr()[rows][:, cols].tocsr() for b in self.blocks]
