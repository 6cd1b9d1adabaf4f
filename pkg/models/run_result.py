# models/run_result.py
from pydantic import BaseModel, Field
from typing import List, Optional

from models.costs import CostReport


class OfflineSummary(BaseModel):
    """Artifacts and headline numbers of one offline run."""
    basis_path: str
    trace_path: str
    costs_path: str
    N: int = Field(..., ge=0)
    N_du: int = Field(0, ge=0)
    stopped: Optional[str] = None
    final_residuum: Optional[float] = None
    speedup: Optional[float] = Field(None, description="Mean Galerkin solve seconds / mean online query seconds.")
    costs: List[CostReport] = Field(default_factory=list)
