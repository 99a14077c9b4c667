from .gibbs_thermo import equilibrium_free_energy
from .gibbs_thermo import free_energy
from .gibbs_thermo import generalized_covariance
from .gibbs_thermo import gibbs_state
from .gibbs_thermo import kubo_mori_map
from .gibbs_thermo import kubo_mori_map_vectorized
from .gibbs_thermo import kubo_mori_product
from .gibbs_thermo import lemma1_gap
from .gibbs_thermo import log_partition
from .gibbs_thermo import mutual_information
from .gibbs_thermo import relative_entropy
from .gibbs_thermo import thermal_derivative
from .gibbs_thermo import thermal_free_energy
from .gibbs_thermo import von_neumann_entropy

__all__ = [
    "equilibrium_free_energy",
    "free_energy",
    "generalized_covariance",
    "gibbs_state",
    "kubo_mori_map",
    "kubo_mori_map_vectorized",
    "kubo_mori_product",
    "lemma1_gap",
    "log_partition",
    "mutual_information",
    "relative_entropy",
    "thermal_derivative",
    "thermal_free_energy",
    "von_neumann_entropy",
]
