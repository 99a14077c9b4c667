import logging
from enum import Enum

import numpy as np
from pydantic import BaseModel
from pydantic import ConfigDict
from pydantic import Field
from pydantic import field_validator
from pydantic import model_validator

from src.models.errors import DimensionMismatchError
from src.models.errors import NonPositiveSpectrumError

logger = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-12
UNCERTAINTY_TOL = 1e-9
AMPLITUDE_CHUNK = 4_000_000


def symplectic_form(n_modes: int) -> np.ndarray:
    """sigma for the ordering (x_1..x_L, p_1..p_L): [[0, -I], [I, 0]]."""
    eye = np.eye(n_modes)
    zero = np.zeros((n_modes, n_modes))
    return np.block([[zero, -eye], [eye, zero]])


def _symmetric(value, name: str) -> np.ndarray:
    matrix = np.array(value, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] % 2:
        raise DimensionMismatchError(f"{name} must be a 2L x 2L matrix, got shape {matrix.shape}.")
    asymmetry = float(np.max(np.abs(matrix - matrix.T)))
    if asymmetry > SYMMETRY_TOL * max(1.0, float(np.max(np.abs(matrix)))):
        logger.warning(f"Symmetrizing {name} with defect {asymmetry:.3e}")
    matrix = 0.5 * (matrix + matrix.T)
    matrix.setflags(write=False)
    return matrix


class EquilibrationMode(str, Enum):
    EXACT_UNITARY = "exact_unitary"  # evolve the full Gaussian state for t_wait
    GIBBS_REPLACEMENT = "gibbs_replacement"  # substitute the global thermal state


class QuadraticHamiltonian(BaseModel):
    """H = 1/2 r^T h_matrix r with r = (x_1..x_L, p_1..p_L)."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    h_matrix: np.ndarray = Field(..., description="2L x 2L real symmetric positive-definite matrix")
    system_modes: tuple[int, ...] = Field((0,), description="Mode indices belonging to S")

    @field_validator("h_matrix", mode="before")
    @classmethod
    def _check_matrix(cls, value):
        matrix = _symmetric(value, "h_matrix")
        try:
            np.linalg.cholesky(matrix)
        except np.linalg.LinAlgError:
            raise NonPositiveSpectrumError("h_matrix must be positive definite.") from None
        return matrix

    @model_validator(mode="after")
    def _check_modes(self):
        if any(k < 0 or k >= self.n_modes for k in self.system_modes):
            raise DimensionMismatchError(f"system_modes {self.system_modes} out of range.")
        return self

    @property
    def n_modes(self) -> int:
        return self.h_matrix.shape[0] // 2


class GaussianState(BaseModel):
    """First moments and covariance gamma_ij = tr(rho {r_i, r_j}) - 2 m_i m_j.

    The vacuum has gamma = identity; symplectic eigenvalues are >= 1.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    mean: np.ndarray = Field(..., description="First moments, length 2L")
    cov: np.ndarray = Field(..., description="2L x 2L covariance matrix")

    @field_validator("mean", mode="before")
    @classmethod
    def _vector(cls, value):
        vector = np.array(value, dtype=float).reshape(-1)
        vector.setflags(write=False)
        return vector

    @field_validator("cov", mode="before")
    @classmethod
    def _covariance(cls, value):
        return _symmetric(value, "cov")

    @model_validator(mode="after")
    def _physical(self):
        if self.mean.shape[0] != self.cov.shape[0]:
            raise DimensionMismatchError("mean and cov must describe the same number of modes.")
        sigma = symplectic_form(self.n_modes)
        lowest = float(np.linalg.eigvalsh(self.cov + 1j * sigma)[0])
        if lowest < -UNCERTAINTY_TOL * max(1.0, float(np.max(np.abs(self.cov)))):
            raise ValueError(f"cov violates the uncertainty relation (min eigenvalue {lowest:.3e}).")
        return self

    @classmethod
    def trusted(cls, mean: np.ndarray, cov: np.ndarray) -> "GaussianState":
        """Wrap moments produced by symplectic evolution or thermal construction."""
        mean = np.array(mean, dtype=float)
        cov = np.array(cov, dtype=float)
        cov = 0.5 * (cov + cov.T)
        mean.setflags(write=False)
        cov.setflags(write=False)
        return cls.model_construct(mean=mean, cov=cov)

    @property
    def n_modes(self) -> int:
        return self.cov.shape[0] // 2


class OhmicBathSpec(BaseModel):
    """Discretized Ohmic bath: unit masses, equally spaced frequencies up to omega_max."""

    model_config = ConfigDict(frozen=True)

    n_osc: int = Field(..., ge=1, description="Number of bath oscillators n")
    omega_max: float = Field(..., gt=0.0, description="Cutoff frequency Omega")

    @property
    def frequencies(self) -> np.ndarray:
        mu = np.arange(1, self.n_osc + 1)
        return mu * self.omega_max / self.n_osc

    @property
    def masses(self) -> np.ndarray:
        return np.ones(self.n_osc)

    @property
    def couplings(self) -> np.ndarray:
        return self.frequencies * np.sqrt(2.0 * self.omega_max / (np.pi * self.n_osc))

    def spectral_density(self) -> np.ndarray:
        """J(omega_mu) = pi/2 sum g_mu^2 / (m_mu omega_mu) delta(...), binned per spacing."""
        spacing = self.omega_max / self.n_osc
        return np.pi / 2.0 * self.couplings**2 / (self.masses * self.frequencies) / spacing


class TimeSignal(BaseModel):
    """A(t) = A_bar + Re f(t) with f(t) = sum_alpha v_alpha exp(-i omega_alpha t).

    Frequencies of both signs appear, so f(t) is real up to rounding.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    frequencies: np.ndarray = Field(..., description="Merged nonzero frequencies omega_alpha")
    weights: np.ndarray = Field(..., description="Complex amplitudes v_alpha")
    equilibrium_value: float = Field(..., description="Time average A_bar")
    dispersion: float = Field(..., ge=0.0, description="Weighted frequency standard deviation")
    tau_estimate: float = Field(..., ge=0.0, description="1 / dispersion, or 0 when nothing moves")

    @property
    def relevance(self) -> float:
        """Time average of (A(t) - A_bar)^2."""
        return float(np.sum(np.abs(self.weights) ** 2))

    def amplitude(self, times: np.ndarray) -> np.ndarray:
        times = np.asarray(times, dtype=float).reshape(-1)
        chunk = max(1, AMPLITUDE_CHUNK // max(1, self.frequencies.shape[0]))
        out = np.empty(times.shape[0], dtype=complex)
        for start in range(0, times.shape[0], chunk):
            block = times[start : start + chunk]
            out[start : start + chunk] = np.exp(-1j * np.outer(block, self.frequencies)) @ self.weights
        return out

    def evaluate(self, times: np.ndarray) -> np.ndarray:
        return self.equilibrium_value + self.amplitude(times).real
