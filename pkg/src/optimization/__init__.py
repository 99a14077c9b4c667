from .coupling_optimizer import bound_check
from .coupling_optimizer import delta_f_irr
from .coupling_optimizer import delta_f_irr_gradient
from .coupling_optimizer import delta_f_res
from .coupling_optimizer import delta_f_res_gradient
from .coupling_optimizer import delta_f_res_residual
from .coupling_optimizer import gradient_descent
from .coupling_optimizer import grid_search_qubit
from .coupling_optimizer import perturbative_endpoints
from .coupling_optimizer import shifted_interaction
from .coupling_optimizer import solve_irr
from .coupling_optimizer import solve_marginal
from .coupling_optimizer import solve_res
from .coupling_optimizer import strong_coupling_limit_gap
from .coupling_optimizer import traceless

__all__ = [
    "bound_check",
    "delta_f_irr",
    "delta_f_irr_gradient",
    "delta_f_res",
    "delta_f_res_gradient",
    "delta_f_res_residual",
    "gradient_descent",
    "grid_search_qubit",
    "perturbative_endpoints",
    "shifted_interaction",
    "solve_irr",
    "solve_marginal",
    "solve_res",
    "strong_coupling_limit_gap",
    "traceless",
]
