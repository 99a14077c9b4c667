from .protocol_engine import apply_step
from .protocol_engine import energy
from .protocol_engine import first_law_gap
from .protocol_engine import heat_report
from .protocol_engine import initial_state
from .protocol_engine import isothermal_process
from .protocol_engine import linear_path
from .protocol_engine import optimal_work_protocol
from .protocol_engine import record_step
from .protocol_engine import refresh_bath
from .protocol_engine import run_protocol
from .protocol_engine import weak_work

__all__ = [
    "apply_step",
    "energy",
    "first_law_gap",
    "heat_report",
    "initial_state",
    "isothermal_process",
    "linear_path",
    "optimal_work_protocol",
    "record_step",
    "refresh_bath",
    "run_protocol",
    "weak_work",
]
