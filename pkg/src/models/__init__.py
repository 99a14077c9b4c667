from .engine import ContactPenalties
from .engine import CycleReport
from .engine import PowerBoundReport
from .engine import TwoBathSetup
from .errors import ConfigValidationError
from .errors import DimensionMismatchError
from .errors import NonPositiveSpectrumError
from .errors import ProtocolOrderError
from .errors import RankDeficientStateError
from .errors import ScheduleError
from .experiment import Backend
from .experiment import ExperimentConfig
from .experiment import ExperimentKind
from .experiment import SweepResult
from .gaussian import EquilibrationMode
from .gaussian import GaussianState
from .gaussian import OhmicBathSpec
from .gaussian import QuadraticHamiltonian
from .gaussian import TimeSignal
from .operators import CompositeSystem
from .operators import HermitianOperator
from .operators import Side
from .optimization import BoundReport
from .optimization import OptimumSolution
from .optimization import PerturbativeReport
from .protocol import CorrectionReport
from .protocol import HeatReport
from .protocol import Phase
from .protocol import ProtocolState
from .protocol import ProtocolStep
from .protocol import StepKind
from .protocol import WorkLedger
from .thermal import FreeEnergyReport
from .thermal import ThermalContext

__all__ = [
    "Backend",
    "BoundReport",
    "CompositeSystem",
    "ConfigValidationError",
    "ContactPenalties",
    "CorrectionReport",
    "CycleReport",
    "DimensionMismatchError",
    "EquilibrationMode",
    "ExperimentConfig",
    "ExperimentKind",
    "FreeEnergyReport",
    "GaussianState",
    "HeatReport",
    "HermitianOperator",
    "NonPositiveSpectrumError",
    "OhmicBathSpec",
    "OptimumSolution",
    "PerturbativeReport",
    "Phase",
    "PowerBoundReport",
    "ProtocolOrderError",
    "ProtocolState",
    "ProtocolStep",
    "QuadraticHamiltonian",
    "RankDeficientStateError",
    "ScheduleError",
    "Side",
    "StepKind",
    "SweepResult",
    "ThermalContext",
    "TimeSignal",
    "TwoBathSetup",
    "WorkLedger",
]
