import logging
from enum import Enum
from functools import cached_property

import numpy as np
from pydantic import BaseModel
from pydantic import ConfigDict
from pydantic import Field
from pydantic import field_validator
from pydantic import model_validator

from src.models.errors import DimensionMismatchError

logger = logging.getLogger(__name__)

HERMITICITY_TOL = 1e-12


class Side(str, Enum):
    S = "S"
    B = "B"


class HermitianOperator(BaseModel):
    """Dense self-adjoint matrix.

    Composite operators use the S-factor-major index convention
    ``index = s * dim_B + b``; every embedding and partial trace in
    ``src.operators`` relies on it.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    entries: np.ndarray = Field(..., description="dim x dim complex matrix")
    labels: tuple[str, ...] | None = Field(None, description="Optional basis labels")

    @field_validator("entries", mode="before")
    @classmethod
    def _symmetrize(cls, value):
        matrix = np.array(value, dtype=complex)
        if matrix.ndim == 0:
            matrix = matrix.reshape(1, 1)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise DimensionMismatchError(f"Operator must be square, got shape {matrix.shape}.")
        if matrix.shape[0] < 1:
            raise DimensionMismatchError("Operator dimension must be at least 1.")
        asymmetry = float(np.max(np.abs(matrix - matrix.conj().T)))
        if asymmetry > HERMITICITY_TOL:
            logger.warning(f"Symmetrizing operator with Hermiticity defect {asymmetry:.3e}")
        matrix = 0.5 * (matrix + matrix.conj().T)
        matrix.setflags(write=False)
        return matrix

    @model_validator(mode="after")
    def _check_labels(self):
        if self.labels is not None and len(self.labels) != self.dim:
            raise DimensionMismatchError(
                f"Got {len(self.labels)} labels for an operator of dimension {self.dim}."
            )
        return self

    @classmethod
    def trusted(cls, matrix: np.ndarray) -> "HermitianOperator":
        """Wrap a matrix known to be Hermitian (result of library arithmetic)."""
        matrix = np.asarray(matrix, dtype=complex)
        matrix = 0.5 * (matrix + matrix.conj().T)
        matrix.setflags(write=False)
        return cls.model_construct(entries=matrix, labels=None)

    @classmethod
    def identity(cls, dim: int) -> "HermitianOperator":
        return cls.trusted(np.eye(dim))

    @classmethod
    def zeros(cls, dim: int) -> "HermitianOperator":
        return cls.trusted(np.zeros((dim, dim)))

    @classmethod
    def diag(cls, values) -> "HermitianOperator":
        return cls.trusted(np.diag(np.asarray(values, dtype=float)))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @cached_property
    def spectrum(self) -> tuple[np.ndarray, np.ndarray]:
        """Eigenvalues (ascending) and eigenvectors, computed once."""
        return np.linalg.eigh(self.entries)

    def eigh(self) -> tuple[np.ndarray, np.ndarray]:
        return self.spectrum

    def trace(self) -> float:
        return float(np.trace(self.entries).real)

    def expectation(self, rho: "HermitianOperator") -> float:
        return float(np.einsum("ij,ji->", rho.entries, self.entries).real)

    def __add__(self, other: "HermitianOperator") -> "HermitianOperator":
        return HermitianOperator.trusted(self.entries + other.entries)

    def __sub__(self, other: "HermitianOperator") -> "HermitianOperator":
        return HermitianOperator.trusted(self.entries - other.entries)

    def __mul__(self, scalar: float) -> "HermitianOperator":
        return HermitianOperator.trusted(float(scalar) * self.entries)

    __rmul__ = __mul__

    def __neg__(self) -> "HermitianOperator":
        return HermitianOperator.trusted(-self.entries)

    def __matmul__(self, other: "HermitianOperator") -> np.ndarray:
        # products of Hermitian operators are generally not Hermitian
        return self.entries @ other.entries


class CompositeSystem(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    dim_s: int = Field(..., ge=1, description="Dimension of the system factor S")
    dim_b: int = Field(..., ge=1, description="Dimension of the bath factor B")
    h_s: HermitianOperator = Field(..., description="System Hamiltonian H_S")
    h_b: HermitianOperator = Field(..., description="Bath Hamiltonian H_B")
    v: HermitianOperator = Field(..., description="Interaction V on the full space")
    g: float = Field(0.0, ge=0.0, description="Dimensionless coupling strength")

    @model_validator(mode="after")
    def _check_dimensions(self):
        if self.h_s.dim != self.dim_s:
            raise DimensionMismatchError(f"h_s has dimension {self.h_s.dim}, expected {self.dim_s}.")
        if self.h_b.dim != self.dim_b:
            raise DimensionMismatchError(f"h_b has dimension {self.h_b.dim}, expected {self.dim_b}.")
        if self.v.dim != self.dim_s * self.dim_b:
            raise DimensionMismatchError(
                f"v has dimension {self.v.dim}, expected {self.dim_s * self.dim_b}."
            )
        return self

    @property
    def dim(self) -> int:
        return self.dim_s * self.dim_b

    def with_g(self, g: float) -> "CompositeSystem":
        return self.model_copy(update={"g": float(g)})

    def with_h_s(self, h_s: HermitianOperator) -> "CompositeSystem":
        if h_s.dim != self.dim_s:
            raise DimensionMismatchError(f"h_s has dimension {h_s.dim}, expected {self.dim_s}.")
        return self.model_copy(update={"h_s": h_s})
