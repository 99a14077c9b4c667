from .caldeira_leggett import band_entry_time
from .caldeira_leggett import build_cl_hamiltonian
from .caldeira_leggett import cl_work_protocol
from .caldeira_leggett import dephasing_terms
from .caldeira_leggett import energy
from .caldeira_leggett import energy_trace
from .caldeira_leggett import equilibration_time
from .caldeira_leggett import evolve
from .caldeira_leggett import gaussian_entropy
from .caldeira_leggett import gaussian_mutual_information
from .caldeira_leggett import marginal
from .caldeira_leggett import oscillator_thermal
from .caldeira_leggett import oscillator_weak_work
from .caldeira_leggett import product_state
from .caldeira_leggett import quadratic_expectation
from .caldeira_leggett import recurrence_time
from .caldeira_leggett import symplectic_eigenvalues
from .caldeira_leggett import system_block
from .caldeira_leggett import thermal_gaussian
from .caldeira_leggett import time_signal
from .caldeira_leggett import trace_values
from .caldeira_leggett import weak_coupling_schedule
from .caldeira_leggett import williamson

__all__ = [
    "band_entry_time",
    "build_cl_hamiltonian",
    "cl_work_protocol",
    "dephasing_terms",
    "energy",
    "energy_trace",
    "equilibration_time",
    "evolve",
    "gaussian_entropy",
    "gaussian_mutual_information",
    "marginal",
    "oscillator_thermal",
    "oscillator_weak_work",
    "product_state",
    "quadratic_expectation",
    "recurrence_time",
    "symplectic_eigenvalues",
    "system_block",
    "thermal_gaussian",
    "time_signal",
    "trace_values",
    "weak_coupling_schedule",
    "williamson",
]
