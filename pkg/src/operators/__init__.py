from .operator_core import MatrixFunction
from .operator_core import commutator_norm
from .operator_core import embed
from .operator_core import matrix_function
from .operator_core import operator_norm
from .operator_core import partial_trace
from .operator_core import partial_trace_matrix
from .operator_core import random_density
from .operator_core import random_hermitian
from .operator_core import tensor
from .operator_core import total_hamiltonian

__all__ = [
    "MatrixFunction",
    "commutator_norm",
    "embed",
    "matrix_function",
    "operator_norm",
    "partial_trace",
    "partial_trace_matrix",
    "random_density",
    "random_hermitian",
    "tensor",
    "total_hamiltonian",
]
