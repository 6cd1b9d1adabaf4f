# models/online.py
from pydantic import BaseModel, ConfigDict, Field
from typing import List, Optional, Tuple

from models.parameters import ParameterPoint

ComplexPair = Tuple[float, float]


def as_pair(z: complex) -> ComplexPair:
    return (float(z.real), float(z.imag))


class OnlineRequest(BaseModel):
    """Batch of online queries."""
    queries: List[ParameterPoint] = Field(..., description="Parameter points to evaluate.")

    model_config = ConfigDict(
        json_schema_extra={
            "examples": [
                {"queries": [{"k": 3.0, "M": 0.3}, {"k": 4.5, "M": 0.3}]}
            ]
        }
    )


class OnlineResult(BaseModel):
    """Reduced solution, estimator and outputs at one parameter point."""
    k: float
    M: float
    xi: List[ComplexPair] = Field(..., description="Reduced coefficients as [re, im] pairs.")
    delta: float = Field(..., ge=0, description="Error estimator.")
    s_N: Optional[ComplexPair] = Field(None, description="Reduced output.")
    s_pd: Optional[ComplexPair] = Field(None, description="Dual-corrected output.")
    seconds: float = Field(..., ge=0)
    extrapolated: bool = Field(False, description="Query lies outside the configured parameter box.")


class OnlineResponse(BaseModel):
    dimension: int
    results: List[OnlineResult]
    mean_seconds: float = 0.0


class BasisSummary(BaseModel):
    """Shape of the reduced basis currently served."""
    problem_kind: str
    n_dofs: int
    N: int
    N_du: int
    M_a: int
    M_f: int
    M_l: int
    affine_rhs: bool
    snapshot_params: List[ParameterPoint]
