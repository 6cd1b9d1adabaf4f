# models/validation.py
from pydantic import BaseModel, Field
from typing import Literal, Optional


class EffectivityResult(BaseModel):
    """Estimator, true X-norm error and their ratio at one parameter point."""
    delta: float = Field(..., ge=0)
    error: float = Field(..., ge=0)
    eta: Optional[float] = Field(None, description="delta / error; None when the truth is reproduced exactly.")
    status: Literal["ok", "exact_reproduction"] = "ok"


class OutputPair(BaseModel):
    s_N: complex
    s_pd: complex


class ValidationRow(BaseModel):
    """One row of validate.csv."""
    k: float
    M: float
    N: int
    x_error: float
    rel_x_error: Optional[float] = None
    delta: float
    eta: Optional[float] = None
    eta_status: str = "ok"
    s_truth: Optional[complex] = None
    s_N: Optional[complex] = None
    s_pd: Optional[complex] = None
    output_error: Optional[float] = Field(None, description="|s - s_N|")
    output_error_pd: Optional[float] = Field(None, description="|s - s_pd|")
    output_bound: Optional[float] = None
    output_bound_pd: Optional[float] = None
    dual_residual: Optional[float] = None
    linf: Optional[float] = None
    l2: Optional[float] = None
    h1: Optional[float] = None
    rel_linf: Optional[float] = None
    rel_l2: Optional[float] = None
    rel_h1: Optional[float] = None
