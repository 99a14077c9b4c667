import math

import numpy as np
import scipy.linalg as la
from scipy.special import entr
from scipy.special import logsumexp

from src.models.errors import DimensionMismatchError
from src.models.operators import HermitianOperator
from src.models.operators import Side
from src.models.thermal import FreeEnergyReport
from src.models.thermal import ThermalContext
from src.operators.operator_core import operator_norm
from src.operators.operator_core import partial_trace

SUPPORT_FLOOR = 1e-14
DEGENERACY_TOL = 1e-10


def _boltzmann(h: HermitianOperator, ctx: ThermalContext) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Eigenvalues, eigenvectors and Gibbs populations, spectrum shifted by its minimum."""
    energies, vectors = h.eigh()
    weights = np.exp(-ctx.beta * (energies - energies[0]))
    return energies, vectors, weights / weights.sum()


def gibbs_state(h: HermitianOperator, ctx: ThermalContext) -> HermitianOperator:
    _, vectors, populations = _boltzmann(h, ctx)
    return HermitianOperator.trusted((vectors * populations) @ vectors.conj().T)


def log_partition(h: HermitianOperator, ctx: ThermalContext) -> float:
    return float(logsumexp(-ctx.beta * h.eigh()[0]))


def von_neumann_entropy(rho: HermitianOperator) -> float:
    populations = np.clip(np.linalg.eigvalsh(rho.entries), 0.0, None)
    return float(np.sum(entr(populations)))


def relative_entropy(rho: HermitianOperator, sigma: HermitianOperator) -> float:
    """S(rho || sigma) in nats; +inf when rho leaves the support of sigma."""
    if rho.dim != sigma.dim:
        raise DimensionMismatchError(f"Cannot compare states of dimensions {rho.dim} and {sigma.dim}.")
    sigma_values, sigma_vectors = np.linalg.eigh(sigma.entries)
    overlaps = np.einsum("ki,kl,li->i", sigma_vectors.conj(), rho.entries, sigma_vectors).real
    outside = sigma_values < SUPPORT_FLOOR
    if np.any(overlaps[outside] > SUPPORT_FLOOR):
        return math.inf
    cross = float(np.sum(overlaps[~outside] * np.log(sigma_values[~outside])))
    return -von_neumann_entropy(rho) - cross


def mutual_information(rho_sb: HermitianOperator, split: tuple[int, int]) -> float:
    dim_s, dim_b = split
    if rho_sb.dim != dim_s * dim_b:
        raise DimensionMismatchError(f"State of dimension {rho_sb.dim} does not split as {dim_s}x{dim_b}.")
    rho_s = partial_trace(rho_sb, Side.S, split)
    rho_b = partial_trace(rho_sb, Side.B, split)
    return von_neumann_entropy(rho_s) + von_neumann_entropy(rho_b) - von_neumann_entropy(rho_sb)


def free_energy(rho: HermitianOperator, h: HermitianOperator, ctx: ThermalContext) -> FreeEnergyReport:
    """F(rho, H) = tr(rho H) - T S(rho)."""
    energy = h.expectation(rho)
    entropy = von_neumann_entropy(rho)
    return FreeEnergyReport(
        energy=energy,
        entropy=entropy,
        free_energy=energy - entropy / ctx.beta,
    )


def thermal_free_energy(h: HermitianOperator, ctx: ThermalContext) -> FreeEnergyReport:
    energies, _, populations = _boltzmann(h, ctx)
    partition_log = log_partition(h, ctx)
    return FreeEnergyReport(
        energy=float(populations @ energies),
        entropy=float(np.sum(entr(populations))),
        free_energy=-partition_log / ctx.beta,
        partition_log=partition_log,
    )


def equilibrium_free_energy(h: HermitianOperator, ctx: ThermalContext) -> float:
    return -log_partition(h, ctx) / ctx.beta


def _filter(energies: np.ndarray, scale: float, beta: float) -> np.ndarray:
    """(exp(b d) - 1) / (b d) for every eigenvalue difference d = E_j - E_k."""
    gaps = energies[:, None] - energies[None, :]
    degenerate = np.abs(gaps) < DEGENERACY_TOL * max(scale, 1e-300)
    x = beta * np.where(degenerate, 1.0, gaps)
    return np.where(degenerate, 1.0, np.expm1(x) / x)


def kubo_mori_map(y: HermitianOperator, h: HermitianOperator, ctx: ThermalContext) -> np.ndarray:
    """Y_{H,beta} = int_0^1 exp(beta tau H) Y exp(-beta tau H) dtau.

    Computed in the eigenbasis of H. The result is not Hermitian in general,
    only omega_beta(H) Y_{H,beta} is, so a plain matrix is returned.
    """
    if y.dim != h.dim:
        raise DimensionMismatchError(f"Cannot map an operator of dimension {y.dim} with H of dimension {h.dim}.")
    energies, vectors = h.eigh()
    rotated = vectors.conj().T @ y.entries @ vectors
    filtered = rotated * _filter(energies, operator_norm(h), ctx.beta)
    return vectors @ filtered @ vectors.conj().T


def kubo_mori_map_vectorized(
    y: HermitianOperator, h: HermitianOperator, ctx: ThermalContext, eps: float = 1e-9
) -> np.ndarray:
    """Superoperator route: (exp(beta L) - 1)(beta L + i eps)^-1 vec(Y), L = H (x) 1 - 1 (x) H^T.

    The i eps regularization sends the kernel of L (the part of Y commuting
    with H) to zero instead of to itself; kubo_mori_map uses the analytic limit.
    """
    dim = h.dim
    eye = np.eye(dim)
    liouvillian = ctx.beta * (np.kron(h.entries, eye) - np.kron(eye, h.entries.T))
    propagated = la.expm(liouvillian) - np.eye(dim * dim)
    vec = la.solve(liouvillian + 1j * eps * np.eye(dim * dim), y.entries.reshape(-1))
    return (propagated @ vec).reshape(dim, dim)


def _kubo_mori_weights(h: HermitianOperator, ctx: ThermalContext) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Eigenvectors, populations and the symmetric kernel (p_k - p_j) / (beta (E_j - E_k))."""
    energies, vectors, populations = _boltzmann(h, ctx)
    gaps = energies[:, None] - energies[None, :]
    degenerate = np.abs(gaps) < DEGENERACY_TOL * max(operator_norm(h), 1e-300)
    safe = np.where(degenerate, 1.0, ctx.beta * gaps)
    kernel = np.where(
        degenerate,
        0.5 * (populations[:, None] + populations[None, :]),
        (populations[None, :] - populations[:, None]) / safe,
    )
    return vectors, populations, kernel


def kubo_mori_product(a: HermitianOperator, h: HermitianOperator, ctx: ThermalContext) -> HermitianOperator:
    """omega_beta(H) A_{H,beta}, which is Hermitian."""
    vectors, _, kernel = _kubo_mori_weights(h, ctx)
    a_rot = vectors.conj().T @ a.entries @ vectors
    return HermitianOperator.trusted(vectors @ (kernel * a_rot) @ vectors.conj().T)


def generalized_covariance(
    a: HermitianOperator, b: HermitianOperator, h: HermitianOperator, ctx: ThermalContext
) -> float:
    """cov(A, B) = tr(omega A_{H,beta} B) - tr(omega A) tr(omega B)."""
    if not a.dim == b.dim == h.dim:
        raise DimensionMismatchError("Covariance needs operators of a common dimension.")
    vectors, populations, kernel = _kubo_mori_weights(h, ctx)
    a_rot = vectors.conj().T @ a.entries @ vectors
    b_rot = vectors.conj().T @ b.entries @ vectors
    correlation = float(np.sum(kernel * a_rot * b_rot.T).real)
    mean_a = float(populations @ np.diag(a_rot).real)
    mean_b = float(populations @ np.diag(b_rot).real)
    return correlation - mean_a * mean_b


def thermal_derivative(h: HermitianOperator, direction: HermitianOperator, ctx: ThermalContext) -> HermitianOperator:
    """d/dt omega_beta(H + t D) at t = 0, equal to -beta omega (D_{H,beta} - tr(omega D))."""
    vectors, populations, kernel = _kubo_mori_weights(h, ctx)
    d_rot = vectors.conj().T @ direction.entries @ vectors
    mean = float(populations @ np.diag(d_rot).real)
    derivative_rot = -ctx.beta * (kernel * d_rot - mean * np.diag(populations))
    return HermitianOperator.trusted(vectors @ derivative_rot @ vectors.conj().T)


def lemma1_gap(
    h0: HermitianOperator, direction: HermitianOperator, t: float, ctx: ThermalContext
) -> float:
    """S(omega(h0) || omega(h0 + t D)) - S(omega(h0 + t D) || omega(h0)); O(t^3)."""
    reference = gibbs_state(h0, ctx)
    perturbed = gibbs_state(h0 + t * direction, ctx)
    return relative_entropy(reference, perturbed) - relative_entropy(perturbed, reference)
