import math

from pydantic import BaseModel
from pydantic import ConfigDict
from pydantic import Field
from pydantic import model_validator

from src.models.errors import DimensionMismatchError
from src.models.operators import CompositeSystem
from src.models.operators import HermitianOperator
from src.models.thermal import ThermalContext


class TwoBathSetup(BaseModel):
    """Working system S alternately coupled to a hot and a cold bath.

    The cycle runs hot isothermal A -> B, quench B -> C, cold isothermal
    C -> D, quench D -> A.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    sys_hot: CompositeSystem
    sys_cold: CompositeSystem
    ctx_hot: ThermalContext
    ctx_cold: ThermalContext
    h_a: HermitianOperator
    h_b: HermitianOperator
    h_c: HermitianOperator
    h_d: HermitianOperator

    @model_validator(mode="after")
    def _check(self):
        if not self.ctx_hot.beta < self.ctx_cold.beta:
            raise ValueError("The hot bath must have the smaller beta.")
        if self.sys_hot.dim_s != self.sys_cold.dim_s:
            raise DimensionMismatchError("Both baths must couple to the same system S.")
        for name in ("h_a", "h_b", "h_c", "h_d"):
            if getattr(self, name).dim != self.sys_hot.dim_s:
                raise DimensionMismatchError(f"{name} must act on S.")
        return self

    @property
    def eta_carnot(self) -> float:
        return 1.0 - self.ctx_hot.beta / self.ctx_cold.beta

    def swapped(self) -> "TwoBathSetup":
        """Relabel the baths; (A, B) and (C, D) exchange roles."""
        return TwoBathSetup.model_construct(
            sys_hot=self.sys_cold,
            sys_cold=self.sys_hot,
            ctx_hot=self.ctx_cold,
            ctx_cold=self.ctx_hot,
            h_a=self.h_c,
            h_b=self.h_d,
            h_c=self.h_a,
            h_d=self.h_b,
        )


class ContactPenalties(BaseModel):
    model_config = ConfigDict(frozen=True)

    res_b: float = Field(..., description="T S(rho_B || omega_beta(H_B)) after the contact")
    mutual: float = Field(..., description="T I(S:B) of the final coupled Gibbs state")
    irr: float = Field(..., description="Delta F^(irr) at the coupling point")
    dissipation: float = Field(0.0, description="Finite-N isothermal dissipation")

    @property
    def total(self) -> float:
        return self.res_b + self.mutual + self.irr + self.dissipation


class CycleReport(BaseModel):
    """Heats follow the bath-absorbs-positive convention: an engine has q_hot < 0."""

    model_config = ConfigDict(frozen=True)

    q_hot: float
    q_cold: float
    w_net: float
    eta: float = Field(..., description="Efficiency, NaN when the cycle is not an engine")
    eta_reversible: float = Field(
        ..., description="Efficiency with the finite-N dissipation removed, NaN for non-engines"
    )
    eta_carnot: float
    x_hot: float
    x_cold: float
    k_s_first_order: float = Field(..., description="Secant estimate of K_S in T_h Delta S")
    delta_s: float = Field(..., description="S(rho_1) - S(rho_2)")
    is_engine: bool
    penalties_hot: ContactPenalties
    penalties_cold: ContactPenalties
    first_law_gap: float = Field(..., description="w_net + q_hot + q_cold")
    g: float = 0.0

    @property
    def efficiency_defined(self) -> bool:
        return self.is_engine and math.isfinite(self.eta)


class PowerBoundReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    r_hot: float = Field(..., ge=0.0, description="||[H_Bh, V_h]||")
    r_cold: float = Field(..., ge=0.0, description="||[H_Bc, V_c]||")
    bound_tight: float
    bound_loose: float
    bound_expanded: float = Field(..., description="Tight bound with eta replaced by eta^C")
    tau_hot: float = Field(..., description="Lower bound |Q_h| / (g r_h)")
    tau_cold: float = Field(..., description="Lower bound |Q_c| / (g r_c)")
    contact_time: float = Field(..., ge=0.0, description="Executed duration of each bath contact")
    power_measured: float = Field(..., description="w_net over the executed cycle duration")

    @property
    def contacts_feasible(self) -> bool:
        """Both contacts last at least as long as their heat needs."""
        return self.contact_time >= self.tau_hot and self.contact_time >= self.tau_cold
