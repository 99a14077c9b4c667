from enum import Enum

import numpy as np
from pydantic import BaseModel
from pydantic import ConfigDict
from pydantic import Field
from pydantic import computed_field
from pydantic import model_validator

from src.models.operators import CompositeSystem
from src.models.operators import HermitianOperator


class StepKind(str, Enum):
    COUPLE_ON = "couple_on"
    COUPLE_OFF = "couple_off"
    QUENCH = "quench"
    EQUILIBRATE = "equilibrate"
    REFRESH_BATH = "refresh_bath"


class Phase(str, Enum):
    W1 = "W1"  # quenches before contact and switching the coupling on
    W2 = "W2"  # isothermal process while coupled
    W3 = "W3"  # switching off and quenches back


class ProtocolStep(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    kind: StepKind = Field(..., description="Elementary operation")
    new_h_s: HermitianOperator | None = Field(None, description="Target H_S of a quench")

    @model_validator(mode="after")
    def _quench_needs_target(self):
        if (self.kind == StepKind.QUENCH) != (self.new_h_s is not None):
            raise ValueError("new_h_s must be given exactly for quench steps.")
        return self

    @classmethod
    def couple_on(cls) -> "ProtocolStep":
        return cls(kind=StepKind.COUPLE_ON)

    @classmethod
    def couple_off(cls) -> "ProtocolStep":
        return cls(kind=StepKind.COUPLE_OFF)

    @classmethod
    def quench(cls, new_h_s: HermitianOperator) -> "ProtocolStep":
        return cls(kind=StepKind.QUENCH, new_h_s=new_h_s)

    @classmethod
    def equilibrate(cls) -> "ProtocolStep":
        return cls(kind=StepKind.EQUILIBRATE)


class ProtocolState(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    sys: CompositeSystem = Field(..., description="Current Hamiltonian pieces (h_s changes)")
    rho: HermitianOperator = Field(..., description="Density operator on SB")
    coupled: bool = Field(False, description="Whether gV is switched on")
    step_index: int = Field(0, ge=0, description="Index i of rho^(i), H^(i)")

    @model_validator(mode="after")
    def _check_state(self):
        if self.rho.dim != self.sys.dim:
            raise ValueError(f"rho has dimension {self.rho.dim}, expected {self.sys.dim}.")
        if abs(self.rho.trace() - 1.0) > 1e-9:
            raise ValueError(f"rho must have unit trace, got {self.rho.trace():.12f}.")
        if np.linalg.eigvalsh(self.rho.entries)[0] < -1e-9:
            raise ValueError("rho must be positive semidefinite.")
        return self


class LedgerEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    step_index: int
    kind: StepKind
    work: float = Field(..., description="Work extracted by the step (energy units)")
    heat: float = Field(0.0, description="Energy drawn from the reservoir by the step")
    phase: Phase | None = None


class WorkLedger(BaseModel):
    """Per-step work record. W > 0 means work was extracted."""

    entries: list[LedgerEntry] = Field(default_factory=list)

    def record(
        self,
        step_index: int,
        kind: StepKind,
        work: float,
        heat: float = 0.0,
        phase: Phase | None = None,
    ) -> None:
        self.entries.append(
            LedgerEntry(step_index=step_index, kind=kind, work=work, heat=heat, phase=phase)
        )

    def extend(self, other: "WorkLedger") -> None:
        self.entries.extend(other.entries)

    def _phase_total(self, phase: Phase) -> float:
        return float(sum(e.work for e in self.entries if e.phase == phase))

    @computed_field
    @property
    def total(self) -> float:
        return float(sum(e.work for e in self.entries))

    @computed_field
    @property
    def total_heat(self) -> float:
        return float(sum(e.heat for e in self.entries))

    @computed_field
    @property
    def w1(self) -> float:
        return self._phase_total(Phase.W1)

    @computed_field
    @property
    def w2(self) -> float:
        return self._phase_total(Phase.W2)

    @computed_field
    @property
    def w3(self) -> float:
        return self._phase_total(Phase.W3)


class CorrectionReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    w_weak: float = Field(..., description="F(rho_S,H_S) - F(omega(H_S),H_S)")
    delta_f_irr: float = Field(..., ge=-1e-12, description="Free energy dissipated at contact")
    delta_f_res: float = Field(..., ge=-1e-12, description="Free energy left after decoupling")
    w_total: float = Field(..., description="w_weak - delta_f_irr - delta_f_res")
    dissipation: float = Field(0.0, ge=-1e-12, description="Finite-N isothermal dissipation")

    @model_validator(mode="after")
    def _decomposition(self):
        expected = self.w_weak - self.delta_f_irr - self.delta_f_res
        if abs(self.w_total - expected) > 1e-9 * max(1.0, abs(expected)):
            raise ValueError("w_total must equal w_weak - delta_f_irr - delta_f_res.")
        return self

    @property
    def w_finite(self) -> float:
        """Work of the finite-N protocol, i.e. the ledger total."""
        return self.w_total - self.dissipation


class HeatReport(BaseModel):
    """Heat of the non-cyclic contact protocol.

    ``q_bath`` is the energy absorbed by the bath (positive when dissipated);
    ``q_system = -q_bath`` is the heat taken up by S.
    """

    model_config = ConfigDict(frozen=True)

    q_bath: float
    q_system: float
    entropy_change: float = Field(..., description="S(tr_B omega^(N)) - S(rho_S)")
    temperature: float
    res_b: float = Field(..., ge=-1e-12, description="T S(rho_B^(N) || omega_beta(H_B))")
    mutual: float = Field(..., ge=-1e-12, description="T I(omega^(N); S:B)")
    irr: float = Field(..., ge=-1e-12, description="Delta F^(irr)")
    dissipation: float = Field(0.0, ge=-1e-12)
    delta_e_s: float
    work: float

    @property
    def penalty_terms(self) -> tuple[float, float, float]:
        return self.res_b, self.mutual, self.irr

    @property
    def predicted_q_system(self) -> float:
        return (
            self.temperature * self.entropy_change
            - (self.res_b + self.mutual + self.irr)
            - self.dissipation
        )
