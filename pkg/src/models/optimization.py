from pydantic import BaseModel
from pydantic import ConfigDict
from pydantic import Field
from pydantic import computed_field

from src.models.operators import HermitianOperator


class OptimumSolution(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    h_s_opt: HermitianOperator = Field(..., description="Optimal local Hamiltonian (traceless gauge)")
    residual_norm: float = Field(..., ge=0.0, description="Norm of the stationarity residual")
    objective: float = Field(..., ge=-1e-12, description="Minimized Delta F")
    iterations: int = Field(..., ge=0)
    converged: bool


class PerturbativeReport(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    first_order_shift: HermitianOperator = Field(
        ..., description="-g tr_B(V omega_beta(H_B)), gauge M = M' = 0"
    )
    h1_s: HermitianOperator = Field(..., description="H~_S + first_order_shift")
    hN_s: HermitianOperator = Field(..., description="H_S + first_order_shift")
    coefficient_irr: float = Field(..., ge=-1e-12, description="(beta/2) cov over omega(H~^(0))")
    coefficient_res: float = Field(..., ge=-1e-12, description="(beta/2) cov over omega(H^(0))")


class BoundReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    bound: float = Field(..., ge=0.0, description="2 ||gV||")
    delta_f_irr: float
    delta_f_res: float
    mutual_energy: float = Field(..., description="T I(omega^(N); S:B)")

    @computed_field
    @property
    def margins(self) -> dict[str, float]:
        return {
            "irr": self.bound - self.delta_f_irr,
            "res": self.bound - self.delta_f_res,
            "mutual": self.bound - self.mutual_energy,
        }

    @computed_field
    @property
    def violations(self) -> list[str]:
        return [name for name, margin in self.margins.items() if margin < -1e-12]
