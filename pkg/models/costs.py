# models/costs.py
from pydantic import BaseModel, Field, model_validator
from typing import Dict, List, Literal, Union

Marginal = Union[int, Literal["never"]]


class PhaseTiming(BaseModel):
    label: str
    seconds: float = Field(..., ge=0)
    count: int = Field(..., ge=0)


class CostReport(BaseModel):
    """
    Offline/online/Galerkin costs in one unit and the resulting marginal
    number. Measured seconds and operation counts go in separate reports.
    """
    unit: Literal["seconds", "operations"]
    C_off: float = Field(..., ge=0)
    C_on: float = Field(..., ge=0)
    C_galerkin: float = Field(..., ge=0)
    marginal: Marginal
    model: Dict[str, float] = Field(default_factory=dict, description="N, n_dofs, M_a, M_f, C_truth, C_res, C_riesz.")
    phases: List[PhaseTiming] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_marginal(self):
        if isinstance(self.marginal, int) and self.marginal < 1:
            raise ValueError("marginal number must be a positive integer or 'never'")
        return self
