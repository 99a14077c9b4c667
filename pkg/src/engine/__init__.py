from .carnot_engine import build_optimal_cycle
from .carnot_engine import coupled_marginal
from .carnot_engine import efficiency_correction
from .carnot_engine import fit_entropy_shift
from .carnot_engine import fit_heat_correction
from .carnot_engine import initial_setup
from .carnot_engine import power_bound
from .carnot_engine import run_cycle
from .carnot_engine import weak_entropy_change

__all__ = [
    "build_optimal_cycle",
    "coupled_marginal",
    "efficiency_correction",
    "fit_entropy_shift",
    "fit_heat_correction",
    "initial_setup",
    "power_bound",
    "run_cycle",
    "weak_entropy_change",
]
