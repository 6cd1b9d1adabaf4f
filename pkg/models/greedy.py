# models/greedy.py
from pydantic import BaseModel, Field, model_validator
from typing import List, Literal, Optional

from models.parameters import ParameterPoint


class GreedyRecord(BaseModel):
    """One iteration of the greedy loop."""
    iteration: int = Field(..., ge=1)
    mu: ParameterPoint = Field(..., description="Parameter whose snapshot was computed in this iteration.")
    residuum: float = Field(..., ge=0, description="Max estimator over the training set after this iteration.")
    dimension: int = Field(..., ge=0, description="Basis dimension after this iteration.")
    seconds: float = Field(..., ge=0, description="Wall-clock seconds of this iteration.")
    galerkin_seconds: float = Field(0.0, ge=0, description="Seconds of the truth solve.")
    offline_ops: int = Field(0, ge=0, description="Operation-count model of the offline stage so far.")
    accepted: bool = True


class GreedyTrace(BaseModel):
    records: List[GreedyRecord] = Field(default_factory=list)
    tolerance: float
    n_max: int
    stopped: Optional[Literal["tolerance", "n_max", "exhausted"]] = None

    @model_validator(mode="after")
    def _check_dimensions(self):
        accepted = [r.dimension for r in self.records if r.accepted]
        if any(b <= a for a, b in zip(accepted, accepted[1:])):
            raise ValueError("basis dimensions of accepted iterations must increase strictly")
        return self

    @property
    def residua(self) -> List[float]:
        return [r.residuum for r in self.records]

    @property
    def dimensions(self) -> List[int]:
        return [r.dimension for r in self.records]

    @property
    def final_residuum(self) -> Optional[float]:
        return self.records[-1].residuum if self.records else None
