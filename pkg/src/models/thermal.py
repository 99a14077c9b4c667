import math

from pydantic import BaseModel
from pydantic import ConfigDict
from pydantic import Field
from pydantic import field_validator


class ThermalContext(BaseModel):
    """Inverse temperature of a bath, in units with k_B = hbar = 1."""

    model_config = ConfigDict(frozen=True)

    beta: float = Field(..., gt=0.0, description="Inverse temperature (1/energy)")

    @field_validator("beta")
    @classmethod
    def _finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("beta must be finite.")
        return value

    @property
    def temperature(self) -> float:
        return 1.0 / self.beta


class FreeEnergyReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    energy: float = Field(..., description="tr(rho H)")
    entropy: float = Field(..., ge=-1e-12, description="von Neumann entropy in nats")
    free_energy: float = Field(..., description="energy - entropy / beta")
    partition_log: float = Field(
        math.nan, description="log Z of H; NaN unless rho is the Gibbs state of H"
    )
