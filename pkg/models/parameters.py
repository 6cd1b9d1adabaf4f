# models/parameters.py
from pydantic import BaseModel, ConfigDict, Field


class ParameterPoint(BaseModel):
    """One point mu = (k, M) of the parameter domain."""
    k: float = Field(..., gt=0, description="Wavenumber (nondimensional frequency).")
    M: float = Field(..., ge=0, lt=1, description="Mach number of the uniform mean flow, subsonic.")

    model_config = ConfigDict(
        frozen=True,
        json_schema_extra={
            "examples": [
                {"k": 10.0, "M": 0.3}
            ]
        },
    )

    def __str__(self) -> str:
        return f"(k={self.k:.6g}, M={self.M:.6g})"


class ParameterGrid(BaseModel):
    """Arithmetic-progression grid in k times arithmetic-progression grid in M."""
    k_min: float = Field(..., gt=0)
    k_max: float = Field(..., gt=0)
    n_k: int = Field(..., ge=1, description="N1, number of wavenumber samples (endpoints included).")
    M_min: float = Field(0.0, ge=0, lt=1)
    M_max: float = Field(0.0, ge=0, lt=1)
    n_M: int = Field(1, ge=1, description="N2, number of Mach samples; 1 gives a one-parameter study.")

    model_config = ConfigDict(extra="forbid")

    def contains(self, mu: ParameterPoint, rel_tol: float = 1e-12) -> bool:
        """True if mu lies inside the configured parameter box."""
        k_slack = rel_tol * max(abs(self.k_max), 1.0)
        m_slack = rel_tol
        k_lo, k_hi = sorted((self.k_min, self.k_max))
        m_lo, m_hi = sorted((self.M_min, self.M_max))
        return (k_lo - k_slack <= mu.k <= k_hi + k_slack) and (m_lo - m_slack <= mu.M <= m_hi + m_slack)
