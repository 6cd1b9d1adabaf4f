# core/exceptions.py
from typing import Optional


class CrbmError(Exception):
    """Base class for every error raised by the solver packages."""


class ConfigError(CrbmError):
    """Run configuration is missing, malformed or violates an invariant."""


class ArchiveError(CrbmError):
    """Basis archive cannot be read (bad header, unsupported version, missing arrays)."""


class MeshError(CrbmError):
    """Mesh file or generated mesh violates the mesh invariants."""


class NumericalError(CrbmError):
    """A numerical stage (factorization, solve, residual evaluation) failed."""


class SingularMatrixError(NumericalError):
    """Sparse direct factorization hit a singular or structurally deficient matrix."""


class NotPositiveDefiniteError(NumericalError):
    """Inner-product matrix is not Hermitian positive definite."""


class DegenerateTrainingSetError(NumericalError):
    """Every candidate snapshot of the training set was rejected."""


class RoundOffError(NumericalError):
    """Online residual expansion went negative beyond the round-off clamp."""

    def __init__(self, message: str, value: float, scale: float):
        super().__init__(message)
        self.value = value
        self.scale = scale


class ReducedSystemError(NumericalError):
    """Reduced N x N system is singular at the requested parameter."""

    def __init__(self, message: str, mu: Optional[object] = None, dimension: Optional[int] = None):
        super().__init__(message)
        self.mu = mu
        self.dimension = dimension
