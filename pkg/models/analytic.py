# models/analytic.py
from pydantic import BaseModel, ConfigDict, Field
from typing import Callable, Optional, Tuple
import numpy as np

# (points (n, 2)) -> values (n,) or gradients (n, 2)
FieldFunction = Callable[[np.ndarray], np.ndarray]


class ExactField(BaseModel):
    """Exact solution with an optional analytic gradient."""
    name: str
    value: FieldFunction
    gradient: Optional[FieldFunction] = None
    singular_point: Optional[Tuple[float, float]] = Field(None, description="Point where the field is undefined.")

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    def __call__(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return np.asarray(self.value(points), dtype=np.complex128)

    def grad(self, points: np.ndarray, step: Optional[np.ndarray] = None) -> np.ndarray:
        """Analytic gradient, or central differences with per-point `step` as fallback."""
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if self.gradient is not None:
            return np.asarray(self.gradient(points), dtype=np.complex128)
        h = np.full(len(points), 1e-6) if step is None else np.broadcast_to(step, (len(points),))
        out = np.empty((len(points), 2), dtype=np.complex128)
        for d in range(2):
            shift = np.zeros_like(points)
            shift[:, d] = h
            out[:, d] = (self(points + shift) - self(points - shift)) / (2.0 * h)
        return out


class ErrorNorms(BaseModel):
    """Discrete error norms of a nodal field against an exact field."""
    linf: float = Field(..., ge=0, description="Max nodal |u_h - u|.")
    l2: float = Field(..., ge=0)
    h1: float = Field(..., ge=0, description="Full H1 norm of the error (L2 and gradient parts).")
    rel_linf: Optional[float] = None
    rel_l2: Optional[float] = None
    rel_h1: Optional[float] = None
