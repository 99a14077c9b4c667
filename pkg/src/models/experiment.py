from enum import Enum

import pandas as pd
from pydantic import BaseModel
from pydantic import ConfigDict
from pydantic import Field
from pydantic import field_validator
from pydantic import model_validator
from typing_extensions import TypedDict

from src.models.gaussian import EquilibrationMode

CSV_SCHEMA_VERSION = "1"


class ExperimentKind(str, Enum):
    WORK_SWEEP = "work_sweep"
    HEAT_SWEEP = "heat_sweep"
    CARNOT_SWEEP = "carnot_sweep"
    POWER_SWEEP = "power_sweep"
    CL_FIG1 = "cl_fig1"
    CL_EQUILIBRATION = "cl_equilibration"
    INVARIANTS = "invariants"


class Backend(str, Enum):
    EXACT = "exact"
    GAUSSIAN = "gaussian"


class InteractionKind(str, Enum):
    XX = "xx"  # position-like ladder operators on both sides
    ZZ = "zz"  # commuting with both local Hamiltonians


GAUSSIAN_EXPERIMENTS = {ExperimentKind.CL_FIG1, ExperimentKind.CL_EQUILIBRATION}


class SystemBlock(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    omega: float = Field(1.0, gt=0.0, description="Level spacing / oscillator frequency of S")
    mass: float = Field(1.0, gt=0.0, description="Oscillator mass (gaussian backend)")
    levels: int = Field(2, ge=2, le=8, description="Number of levels of S (exact backend)")


class BathBlock(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    omega: float = Field(1.0, gt=0.0, description="Level spacing of B (exact backend)")
    levels: int = Field(2, ge=2, le=16, description="Number of levels of B (exact backend)")
    interaction: InteractionKind = Field(InteractionKind.XX, description="Form of V")
    n_osc: int = Field(50, ge=1, description="Number of bath oscillators (gaussian backend)")
    omega_max: float = Field(5.0, gt=0.0, description="Ohmic cutoff Omega (gaussian backend)")


class ThermalBlock(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    beta: float = Field(1.0, gt=0.0, description="Inverse temperature of the bath")
    beta_s: float = Field(0.5, gt=0.0, description="Inverse temperature of the initial S state")
    beta_hot: float = Field(0.5, gt=0.0, description="Hot bath of the cycle")
    beta_cold: float = Field(1.0, gt=0.0, description="Cold bath of the cycle")

    @model_validator(mode="after")
    def _ordered(self):
        if not self.beta_hot < self.beta_cold:
            raise ValueError("beta_hot must be smaller than beta_cold")
        return self


class ProtocolBlock(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    n_steps: int = Field(200, ge=1, description="Quench/equilibrate pairs of the isothermal process")
    mode: EquilibrationMode | None = Field(
        None, description="Gaussian equilibration; unset runs both modes"
    )
    t_wait_factor: float = Field(10.0, gt=0.0, description="t_wait = t_wait_factor / g^2")
    scale_b: float = Field(1.0, gt=0.0, description="H^(B) = scale_b * H_S")
    scale_d: float = Field(1.0, gt=0.0, description="H^(D) = scale_d * H_S")
    n_times: int = Field(2000, ge=16, description="Samples of the simulated time window")
    t_max_factor: float = Field(
        10.0, gt=0.0, description="Window length in units of the dephasing time, capped at half the bath revival time"
    )
    t_hold: float = Field(1.0, gt=0.0, description="Time each isothermal step of a cycle contact is held")
    n_instances: int = Field(20, ge=1, description="Random instances of the invariant suite")


class OutputBlock(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    path: str = Field("results/output.csv", description="CSV destination; JSON sidecar next to it")


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: ExperimentKind = Field(..., description="Experiment recipe")
    backend: Backend = Field(Backend.EXACT, description="Exact dense or Gaussian simulation")
    g_grid: list[float] = Field(default_factory=lambda: [0.0], description="Coupling strengths")
    seed: int = Field(0, ge=0, description="Seed for every random draw")
    threads: int = Field(1, ge=1, description="Worker threads for sweep points")
    system: SystemBlock = Field(default_factory=SystemBlock)
    bath: BathBlock = Field(default_factory=BathBlock)
    thermal: ThermalBlock = Field(default_factory=ThermalBlock)
    protocol: ProtocolBlock = Field(default_factory=ProtocolBlock)
    output: OutputBlock = Field(default_factory=OutputBlock)

    @field_validator("g_grid")
    @classmethod
    def _ascending(cls, value: list[float]) -> list[float]:
        if not value:
            raise ValueError("g_grid must not be empty")
        if any(g < 0.0 for g in value):
            raise ValueError("g_grid must be non-negative")
        if any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError("g_grid must be strictly ascending")
        return value

    @model_validator(mode="after")
    def _backend_matches(self):
        if self.kind in GAUSSIAN_EXPERIMENTS and self.backend != Backend.GAUSSIAN:
            raise ValueError(f"backend: experiment {self.kind.value} needs the gaussian backend")
        if (
            self.kind not in GAUSSIAN_EXPERIMENTS
            and self.kind != ExperimentKind.INVARIANTS
            and self.backend != Backend.EXACT
        ):
            raise ValueError(f"backend: experiment {self.kind.value} needs the exact backend")
        return self


class InvariantSummary(TypedDict):
    checked: int
    passed: int
    failed: int
    failures: list[str]


class SweepResult(BaseModel):
    """Rows in g order plus the metadata written to the JSON sidecar."""

    kind: ExperimentKind
    columns: list[str]
    rows: list[dict[str, float | int | str]] = Field(default_factory=list)
    metadata: dict[str, str] = Field(default_factory=dict)
    checked: int = 0
    failures: list[str] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def summary(self) -> InvariantSummary:
        return InvariantSummary(
            checked=self.checked,
            passed=max(self.checked - len(self.failures), 0),
            failed=len(self.failures),
            failures=list(self.failures),
        )

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=self.columns)
