from enum import Enum

import numpy as np

from src.models.errors import DimensionMismatchError
from src.models.errors import NonPositiveSpectrumError
from src.models.operators import CompositeSystem
from src.models.operators import HermitianOperator
from src.models.operators import Side


class MatrixFunction(str, Enum):
    EXP = "exp"
    LOG = "log"
    POWER = "power"


def _dims(sys: CompositeSystem | tuple[int, int]) -> tuple[int, int]:
    if isinstance(sys, CompositeSystem):
        return sys.dim_s, sys.dim_b
    dim_s, dim_b = sys
    return int(dim_s), int(dim_b)


def tensor(a: HermitianOperator, b: HermitianOperator) -> HermitianOperator:
    return HermitianOperator.trusted(np.kron(a.entries, b.entries))


def embed(op: HermitianOperator, side: Side, sys: CompositeSystem | tuple[int, int]) -> HermitianOperator:
    """op (x) 1 for side S, 1 (x) op for side B."""
    dim_s, dim_b = _dims(sys)
    side = Side(side)
    expected = dim_s if side == Side.S else dim_b
    if op.dim != expected:
        raise DimensionMismatchError(f"Operator of dimension {op.dim} cannot act on {side.value} ({expected}).")
    if side == Side.S:
        return HermitianOperator.trusted(np.kron(op.entries, np.eye(dim_b)))
    return HermitianOperator.trusted(np.kron(np.eye(dim_s), op.entries))


def partial_trace_matrix(matrix: np.ndarray, keep: Side, dims: tuple[int, int]) -> np.ndarray:
    """Partial trace of an arbitrary (not necessarily Hermitian) square matrix."""
    dim_s, dim_b = dims
    matrix = np.asarray(matrix)
    if matrix.shape != (dim_s * dim_b, dim_s * dim_b):
        raise DimensionMismatchError(
            f"Matrix of shape {matrix.shape} does not live on a {dim_s}x{dim_b} space."
        )
    blocks = matrix.reshape(dim_s, dim_b, dim_s, dim_b)
    if Side(keep) == Side.S:
        return np.einsum("ibjb->ij", blocks)
    return np.einsum("aiaj->ij", blocks)


def partial_trace(
    op: HermitianOperator, keep: Side, sys: CompositeSystem | tuple[int, int]
) -> HermitianOperator:
    return HermitianOperator.trusted(partial_trace_matrix(op.entries, keep, _dims(sys)))


def matrix_function(
    op: HermitianOperator, f: MatrixFunction, exponent: float = 1.0
) -> HermitianOperator:
    """Apply f to the eigenvalues of op.

    LOG and negative or fractional POWER need a positive spectrum.
    """
    f = MatrixFunction(f)
    values, vectors = op.eigh()
    if f == MatrixFunction.EXP:
        mapped = np.exp(values)
    elif f == MatrixFunction.LOG:
        if values[0] <= 0.0:
            raise NonPositiveSpectrumError(f"log needs a positive spectrum, smallest eigenvalue {values[0]:.3e}.")
        mapped = np.log(values)
    else:
        if float(exponent).is_integer() and exponent >= 0:
            mapped = values**int(exponent)
        elif values[0] <= 0.0 and exponent < 0:
            raise NonPositiveSpectrumError("Negative powers need a positive spectrum.")
        elif values[0] < 0.0:
            raise NonPositiveSpectrumError(
                f"Fractional power {exponent} needs a non-negative spectrum, smallest eigenvalue {values[0]:.3e}."
            )
        else:
            mapped = values**exponent
    return HermitianOperator.trusted((vectors * mapped) @ vectors.conj().T)


def operator_norm(op: HermitianOperator) -> float:
    values = op.eigh()[0]
    return float(max(abs(values[0]), abs(values[-1])))


def commutator_norm(a: HermitianOperator, b: HermitianOperator) -> float:
    if a.dim != b.dim:
        raise DimensionMismatchError(f"Cannot commute operators of dimensions {a.dim} and {b.dim}.")
    commutator = a.entries @ b.entries - b.entries @ a.entries
    return float(np.linalg.norm(commutator, ord=2))


def total_hamiltonian(sys: CompositeSystem, h_s: HermitianOperator | None = None, coupled: bool = True) -> HermitianOperator:
    """H_S (x) 1 + 1 (x) H_B (+ g V when coupled)."""
    h_s = sys.h_s if h_s is None else h_s
    total = np.kron(h_s.entries, np.eye(sys.dim_b)) + np.kron(np.eye(sys.dim_s), sys.h_b.entries)
    if coupled and sys.g != 0.0:
        total = total + sys.g * sys.v.entries
    return HermitianOperator.trusted(total)


def random_hermitian(dim: int, rng: np.random.Generator, scale: float = 1.0) -> HermitianOperator:
    """GUE-like sample rescaled to operator norm ``scale``."""
    raw = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    op = HermitianOperator.trusted(raw + raw.conj().T)
    norm = operator_norm(op)
    return op * (scale / norm) if norm > 0 else op


def random_density(dim: int, rng: np.random.Generator, rank: int | None = None) -> HermitianOperator:
    """Random state from a Ginibre matrix; full rank unless ``rank`` is given."""
    rank = dim if rank is None else rank
    ginibre = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = ginibre @ ginibre.conj().T
    return HermitianOperator.trusted(rho / np.trace(rho).real)
