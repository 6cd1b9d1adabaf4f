# models/pml.py
from pydantic import BaseModel, ConfigDict, Field, model_validator
from typing import Optional


class PmlConfig(BaseModel):
    """Perfectly matched layers on the left and right ends of the duct."""
    x_minus: float = Field(-1.0, description="Interface between the left layer and the physical domain.")
    x_plus: float = Field(1.0, description="Interface between the physical domain and the right layer.")
    L: float = Field(1.0, gt=0, description="Layer width.")
    sigma0: float = Field(15.0, ge=0, description="Damping magnitude.")
    omega: Optional[float] = Field(None, gt=0, description="PML frequency constant, fixed for all parameters; defaults to the geometric mean of the k-range in a run config.")

    model_config = ConfigDict(
        extra="forbid",
        frozen=True,
        json_schema_extra={
            "examples": [
                {"x_minus": -1.0, "x_plus": 1.0, "L": 1.0, "sigma0": 15.0, "omega": 9.8}
            ]
        },
    )

    @model_validator(mode="after")
    def _check_interfaces(self):
        if not self.x_minus < self.x_plus:
            raise ValueError("x_minus must be smaller than x_plus")
        return self
