import logging
from collections.abc import Sequence

import numpy as np
import pandas as pd
import scipy.linalg as la
from scipy.special import xlogy

from src.models.errors import DimensionMismatchError
from src.models.errors import NonPositiveSpectrumError
from src.models.errors import ScheduleError
from src.models.gaussian import AMPLITUDE_CHUNK
from src.models.gaussian import EquilibrationMode
from src.models.gaussian import GaussianState
from src.models.gaussian import OhmicBathSpec
from src.models.gaussian import QuadraticHamiltonian
from src.models.gaussian import TimeSignal
from src.models.gaussian import symplectic_form
from src.models.protocol import Phase
from src.models.protocol import StepKind
from src.models.protocol import WorkLedger
from src.models.thermal import ThermalContext

logger = logging.getLogger(__name__)

CONDITION_LIMIT = 1e12
FREQUENCY_TOL = 1e-10
WEIGHT_FLOOR = 1e-14
SCHEDULE_TOL = 1e-12


# Hamiltonian assembly. Mode 0 is S, modes 1..n are the bath oscillators.

def system_block(mass: float, omega: float, n_modes: int) -> np.ndarray:
    """2L x 2L matrix of H_S = p^2/2m + m omega^2 x^2 / 2 on mode 0."""
    if mass <= 0.0 or omega <= 0.0:
        raise NonPositiveSpectrumError(f"System mass and frequency must be positive, got m={mass}, omega={omega}.")
    block = np.zeros((2 * n_modes, 2 * n_modes))
    block[0, 0] = mass * omega**2
    block[n_modes, n_modes] = 1.0 / mass
    return block


def bath_block(bath: OhmicBathSpec) -> np.ndarray:
    n_modes = bath.n_osc + 1
    block = np.zeros((2 * n_modes, 2 * n_modes))
    x_idx = np.arange(1, n_modes)
    block[x_idx, x_idx] = bath.masses * bath.frequencies**2
    block[x_idx + n_modes, x_idx + n_modes] = 1.0 / bath.masses
    return block


def interaction_block(bath: OhmicBathSpec, g: float) -> np.ndarray:
    """gV + H_L with V = x sum_mu g_mu x_mu and H_L = x^2 g^2 sum_mu g_mu^2 / (m_mu omega_mu^2)."""
    n_modes = bath.n_osc + 1
    block = np.zeros((2 * n_modes, 2 * n_modes))
    block[0, 1:n_modes] = g * bath.couplings
    block[1:n_modes, 0] = g * bath.couplings
    block[0, 0] = 2.0 * g**2 * float(np.sum(bath.couplings**2 / (bath.masses * bath.frequencies**2)))
    return block


def build_cl_hamiltonian(mass: float, omega: float, bath: OhmicBathSpec, g: float) -> QuadraticHamiltonian:
    n_modes = bath.n_osc + 1
    h_matrix = system_block(mass, omega, n_modes) + bath_block(bath) + interaction_block(bath, g)
    return QuadraticHamiltonian(h_matrix=h_matrix, system_modes=(0,))


# Normal modes

def _separable(h_matrix: np.ndarray, n_modes: int) -> bool:
    """No x-p cross terms and a diagonal momentum block, as in every CL Hamiltonian."""
    p_block = h_matrix[n_modes:, n_modes:]
    return not np.any(h_matrix[:n_modes, n_modes:]) and not np.any(p_block - np.diag(np.diag(p_block)))


def _separable_williamson(h_matrix: np.ndarray, n_modes: int) -> tuple[np.ndarray, np.ndarray]:
    """H = (x^T K x + p^T M^-1 p) / 2: d^2 = spec(M^-1/2 K M^-1/2) and S = D^1/2 O^T M^1/2 + D^-1/2 O^T M^-1/2."""
    root_mass = np.diag(h_matrix[n_modes:, n_modes:]) ** -0.5
    scaled = h_matrix[:n_modes, :n_modes] / np.outer(root_mass, root_mass)
    values, vectors = np.linalg.eigh(0.5 * (scaled + scaled.T))
    if values[0] <= 0.0:
        raise NonPositiveSpectrumError(f"Potential matrix is not positive, smallest eigenvalue {values[0]:.3e}.")
    freqs = np.sqrt(values)
    transform = np.zeros((2 * n_modes, 2 * n_modes))
    transform[:n_modes, :n_modes] = np.sqrt(freqs)[:, None] * vectors.T * root_mass[None, :]
    transform[n_modes:, n_modes:] = (1.0 / np.sqrt(freqs))[:, None] * vectors.T / root_mass[None, :]
    return freqs, transform


def williamson(h: QuadraticHamiltonian) -> tuple[np.ndarray, np.ndarray]:
    """Normal frequencies d_k (ascending) and symplectic S with H_r = S^T (D + D) S and S sigma S^T = sigma.

    Separable Hamiltonians reduce to a real symmetric eigenproblem of half the size.
    Otherwise S comes from the spectrum of the Hermitian matrix i H^1/2 J H^1/2,
    J = -sigma, whose eigenvalues are +-d_k.
    """
    n_modes = h.n_modes
    h_values = np.linalg.eigvalsh(h.h_matrix)
    if h_values[-1] / h_values[0] > CONDITION_LIMIT:
        logger.warning(f"Near-singular quadratic Hamiltonian, condition number {h_values[-1] / h_values[0]:.3e}")
    if _separable(h.h_matrix, n_modes):
        return _separable_williamson(h.h_matrix, n_modes)

    root = la.sqrtm(h.h_matrix).real
    root = 0.5 * (root + root.T)
    j_form = -symplectic_form(n_modes)
    values, vectors = np.linalg.eigh(1j * (root @ j_form @ root))

    freqs = values[n_modes:]
    modes = vectors[:, n_modes:] * np.sqrt(2.0)
    rotation = np.hstack([modes.imag, modes.real])
    scale = np.concatenate([freqs, freqs]) ** -0.5
    transform = scale[:, None] * (rotation.T @ root)
    return freqs, transform


def symplectic_inverse(transform: np.ndarray) -> np.ndarray:
    sigma = symplectic_form(transform.shape[0] // 2)
    return -sigma @ transform.T @ sigma


def symplectic_eigenvalues(cov: np.ndarray) -> np.ndarray:
    cov = np.asarray(cov, dtype=float)
    n_modes = cov.shape[0] // 2
    root = la.sqrtm(cov).real
    values = np.linalg.eigvalsh(1j * (root @ (-symplectic_form(n_modes)) @ root))
    return values[n_modes:]


def thermal_gaussian(h: QuadraticHamiltonian, ctx: ThermalContext) -> GaussianState:
    """Global Gibbs state of H as a zero-mean Gaussian state."""
    freqs, transform = williamson(h)
    occupations = 1.0 / np.tanh(0.5 * ctx.beta * freqs)
    inverse = symplectic_inverse(transform)
    cov = (inverse * np.concatenate([occupations, occupations])) @ inverse.T
    return GaussianState.trusted(np.zeros(2 * h.n_modes), cov)


def oscillator_thermal(masses: np.ndarray, frequencies: np.ndarray, ctx: ThermalContext) -> GaussianState:
    """Product of uncoupled oscillator Gibbs states, gamma_x = coth / (m w), gamma_p = coth m w."""
    masses = np.asarray(masses, dtype=float)
    frequencies = np.asarray(frequencies, dtype=float)
    occupations = 1.0 / np.tanh(0.5 * ctx.beta * frequencies)
    diagonal = np.concatenate([occupations / (masses * frequencies), occupations * masses * frequencies])
    return GaussianState.trusted(np.zeros(diagonal.shape[0]), np.diag(diagonal))


# Dynamics and expectation values

def _rotation(freqs: np.ndarray, t: float) -> np.ndarray:
    cos = np.diag(np.cos(freqs * t))
    sin = np.diag(np.sin(freqs * t))
    return np.block([[cos, sin], [-sin, cos]])


def evolution_matrix(h: QuadraticHamiltonian, t: float) -> np.ndarray:
    """exp(-sigma H_r t), assembled from the normal-mode rotations."""
    freqs, transform = williamson(h)
    return symplectic_inverse(transform) @ _rotation(freqs, t) @ transform


def evolve(state: GaussianState, h: QuadraticHamiltonian, t: float) -> GaussianState:
    if state.n_modes != h.n_modes:
        raise DimensionMismatchError(f"State has {state.n_modes} modes, Hamiltonian {h.n_modes}.")
    propagator = evolution_matrix(h, t)
    return GaussianState.trusted(propagator @ state.mean, propagator @ state.cov @ propagator.T)


def second_moments(state: GaussianState) -> np.ndarray:
    """<r r^T> = (gamma - i sigma) / 2 + m m^T."""
    sigma = symplectic_form(state.n_modes)
    return 0.5 * (state.cov - 1j * sigma) + np.outer(state.mean, state.mean)


def quadratic_expectation(state: GaussianState, observable: np.ndarray) -> float:
    """<sum_ij A_ij r_i r_j> for a real symmetric A."""
    observable = np.asarray(observable, dtype=float)
    if observable.shape != state.cov.shape:
        raise DimensionMismatchError(f"Observable shape {observable.shape} does not match {state.cov.shape}.")
    return float(np.sum(observable * (0.5 * state.cov + np.outer(state.mean, state.mean))))


def energy(state: GaussianState, h: QuadraticHamiltonian | np.ndarray) -> float:
    """1/4 tr(H_r gamma) + 1/2 m^T H_r m."""
    h_matrix = h.h_matrix if isinstance(h, QuadraticHamiltonian) else np.asarray(h, dtype=float)
    return 0.5 * quadratic_expectation(state, h_matrix)


def gaussian_entropy(state: GaussianState) -> float:
    nu = np.clip(symplectic_eigenvalues(state.cov), 1.0, None)
    upper = 0.5 * (nu + 1.0)
    lower = 0.5 * (nu - 1.0)
    return float(np.sum(xlogy(upper, upper) - xlogy(lower, lower)))


def _mode_indices(modes: Sequence[int], n_modes: int) -> np.ndarray:
    modes = np.asarray(list(modes), dtype=int)
    if modes.size == 0 or np.any(modes < 0) or np.any(modes >= n_modes):
        raise DimensionMismatchError(f"Modes {modes.tolist()} out of range for {n_modes} modes.")
    return np.concatenate([modes, modes + n_modes])


def product_state(blocks: Sequence[GaussianState]) -> GaussianState:
    """Tensor product; block i occupies the next n_i modes in the (x..., p...) ordering."""
    n_modes = sum(block.n_modes for block in blocks)
    mean = np.zeros(2 * n_modes)
    cov = np.zeros((2 * n_modes, 2 * n_modes))
    offset = 0
    for block in blocks:
        idx = _mode_indices(range(offset, offset + block.n_modes), n_modes)
        mean[idx] = block.mean
        cov[np.ix_(idx, idx)] = block.cov
        offset += block.n_modes
    return GaussianState.trusted(mean, cov)


def marginal(state: GaussianState, modes: Sequence[int]) -> GaussianState:
    idx = _mode_indices(modes, state.n_modes)
    return GaussianState.trusted(state.mean[idx], state.cov[np.ix_(idx, idx)])


def gaussian_mutual_information(state: GaussianState, modes_a: Sequence[int]) -> float:
    modes_a = sorted(set(modes_a))
    modes_b = [k for k in range(state.n_modes) if k not in modes_a]
    if not modes_b:
        return 0.0
    return (
        gaussian_entropy(marginal(state, modes_a))
        + gaussian_entropy(marginal(state, modes_b))
        - gaussian_entropy(state)
    )


# Work extraction

def weak_coupling_schedule(
    mass: float, omega: float, beta: float, beta_s: float, n_steps: int
) -> list[tuple[float, float]]:
    """(m, w), then H_S scaled by lambda_1 = beta_S / beta, then linearly back to H_S.

    lambda H_S is the oscillator (m / lambda, lambda w); its beta-Gibbs state is the
    beta_S-Gibbs state of H_S.
    """
    if n_steps < 1:
        raise ScheduleError(f"n_steps must be at least 1, got {n_steps}.")
    start = beta_s / beta
    scales = [1.0, start] + [start + (i / n_steps) * (1.0 - start) for i in range(1, n_steps + 1)]
    return [(mass / lam, lam * omega) for lam in scales]


def _check_schedule(schedule: Sequence[tuple[float, float]]) -> None:
    if len(schedule) < 3:
        raise ScheduleError(f"A schedule needs a start, at least one target and an end, got {len(schedule)} entries.")
    (m0, w0), (m1, w1) = schedule[0], schedule[-1]
    if abs(m0 - m1) > SCHEDULE_TOL * max(1.0, m0) or abs(w0 - w1) > SCHEDULE_TOL * max(1.0, w0):
        raise ScheduleError(f"Schedule is not cyclic: starts at {schedule[0]} and ends at {schedule[-1]}.")
    for mass, omega in schedule:
        if mass <= 0.0 or omega <= 0.0:
            raise ScheduleError(f"Schedule entry (m={mass}, omega={omega}) must be positive.")


def oscillator_weak_work(mass: float, omega: float, beta: float, beta_s: float) -> float:
    """F(omega_{beta_S}(H_S), H_S) - F(omega_beta(H_S), H_S) at the bath temperature."""
    h_s = system_block(mass, omega, 1)
    hot = oscillator_thermal([mass], [omega], ThermalContext(beta=beta_s))
    bath_equilibrium = oscillator_thermal([mass], [omega], ThermalContext(beta=beta))
    free_hot = energy(hot, h_s) - gaussian_entropy(hot) / beta
    free_eq = energy(bath_equilibrium, h_s) - gaussian_entropy(bath_equilibrium) / beta
    return free_hot - free_eq


def _equilibrate(
    state: GaussianState,
    h_matrix: np.ndarray,
    mode: EquilibrationMode,
    ctx: ThermalContext,
    t_wait: float | None,
) -> GaussianState:
    h = QuadraticHamiltonian(h_matrix=h_matrix, system_modes=(0,))
    if mode == EquilibrationMode.GIBBS_REPLACEMENT:
        return thermal_gaussian(h, ctx)
    return evolve(state, h, t_wait)


def cl_work_protocol(
    bath: OhmicBathSpec,
    g: float,
    schedule: Sequence[tuple[float, float]],
    mode: EquilibrationMode,
    ctx: ThermalContext,
    beta_s: float,
    t_wait: float | None = None,
) -> WorkLedger:
    """Quench, couple gV + H_L, equilibrate, then one (quench, equilibrate) pair per
    remaining schedule entry, and decouple.

    S starts in omega_{beta_S}(H_S) and the bath in omega_beta(H_B), uncorrelated.
    """
    _check_schedule(schedule)
    if mode == EquilibrationMode.EXACT_UNITARY and (t_wait is None or t_wait <= 0.0):
        raise ValueError(f"Exact unitary equilibration needs a positive t_wait, got {t_wait}.")

    n_modes = bath.n_osc + 1
    h_bath = bath_block(bath)
    h_int = interaction_block(bath, g)
    h_sys = [system_block(mass, omega, n_modes) for mass, omega in schedule]

    mass0, omega0 = schedule[0]
    state = product_state(
        [
            oscillator_thermal([mass0], [omega0], ThermalContext(beta=beta_s)),
            oscillator_thermal(bath.masses, bath.frequencies, ctx),
        ]
    )

    ledger = WorkLedger()
    index = 0

    def quench(previous: np.ndarray, target: np.ndarray, phase: Phase) -> None:
        nonlocal index
        index += 1
        ledger.record(index, StepKind.QUENCH, energy(state, previous - target), phase=phase)

    def equilibrate(h_total: np.ndarray) -> None:
        nonlocal state, index
        before = energy(state, h_total)
        state = _equilibrate(state, h_total, mode, ctx, t_wait)
        index += 1
        ledger.record(index, StepKind.EQUILIBRATE, 0.0, heat=energy(state, h_total) - before, phase=Phase.W2)

    quench(h_sys[0], h_sys[1], Phase.W1)
    index += 1
    ledger.record(index, StepKind.COUPLE_ON, -energy(state, h_int), phase=Phase.W1)
    equilibrate(h_sys[1] + h_bath + h_int)

    for i in range(2, len(schedule)):
        quench(h_sys[i - 1], h_sys[i], Phase.W2)
        equilibrate(h_sys[i] + h_bath + h_int)

    index += 1
    ledger.record(index, StepKind.COUPLE_OFF, energy(state, h_int), phase=Phase.W3)
    logger.debug(f"CL protocol g={g} mode={mode.value}: W={ledger.total:.6e} over {len(schedule) - 2} quenches")
    return ledger


# Equilibration

def _to_ladder(x: np.ndarray, n_modes: int) -> np.ndarray:
    """Omega^T X Omega for q = Omega b, b = (a_1..a_L, a_1^+..a_L^+), by blocks."""
    a, b = x[:n_modes, :n_modes], x[:n_modes, n_modes:]
    c, d = x[n_modes:, :n_modes], x[n_modes:, n_modes:]
    left_top, left_bottom = a - 1j * c, a + 1j * c
    right_top, right_bottom = b - 1j * d, b + 1j * d
    return 0.5 * np.block(
        [
            [left_top - 1j * right_top, left_top + 1j * right_top],
            [left_bottom - 1j * right_bottom, left_bottom + 1j * right_bottom],
        ]
    )


def _from_ladder(y: np.ndarray, n_modes: int) -> np.ndarray:
    """Omega^-1 Y Omega^-T: second moments of q rewritten for b."""
    a, b = y[:n_modes, :n_modes], y[:n_modes, n_modes:]
    c, d = y[n_modes:, :n_modes], y[n_modes:, n_modes:]
    left_top, left_bottom = a + 1j * c, a - 1j * c
    right_top, right_bottom = b + 1j * d, b - 1j * d
    return 0.5 * np.block(
        [
            [left_top + 1j * right_top, left_top - 1j * right_top],
            [left_bottom + 1j * right_bottom, left_bottom - 1j * right_bottom],
        ]
    )


def _merge(frequencies: np.ndarray, weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sum weights of frequencies closer than FREQUENCY_TOL."""
    order = np.argsort(frequencies, kind="stable")
    sorted_freqs = frequencies[order]
    clusters = np.concatenate([[0], np.cumsum(np.diff(sorted_freqs) > FREQUENCY_TOL)])
    frame = pd.DataFrame(
        {
            "cluster": clusters,
            "frequency": sorted_freqs,
            "re": weights[order].real,
            "im": weights[order].imag,
        }
    )
    merged = frame.groupby("cluster", sort=True).agg(frequency=("frequency", "mean"), re=("re", "sum"), im=("im", "sum"))
    return merged["frequency"].to_numpy(), merged["re"].to_numpy() + 1j * merged["im"].to_numpy()


def dephasing_terms(
    h: QuadraticHamiltonian, initial: GaussianState, observable: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Signed normal frequencies d~ = (d, -d) and the matrix M = A~ * C (elementwise).

    <A>(t) = sum_kl M_kl exp(-i (d~_k + d~_l) t) in the normal-mode ladder basis b.
    """
    observable = np.asarray(observable, dtype=float)
    if observable.shape != (2 * h.n_modes, 2 * h.n_modes) or initial.n_modes != h.n_modes:
        raise DimensionMismatchError("Observable, state and Hamiltonian must share the mode count.")

    n_modes = h.n_modes
    freqs, transform = williamson(h)
    inverse = symplectic_inverse(transform)
    a_tilde = _to_ladder(inverse.T @ observable @ inverse, n_modes)

    # S sigma S^T = sigma
    normal = GaussianState.trusted(transform @ initial.mean, transform @ initial.cov @ transform.T)
    correlations = _from_ladder(second_moments(normal), n_modes)
    return np.concatenate([freqs, -freqs]), a_tilde * correlations


def time_signal(signed: np.ndarray, terms: np.ndarray) -> TimeSignal:
    """Merge the dephasing terms by frequency; tau_estimate is the inverse weighted spread.

    Pairs at zero frequency form the equilibrium value.
    """
    rows, cols = np.triu_indices(signed.shape[0])
    pair_freqs = signed[rows] + signed[cols]
    pair_weights = np.where(rows == cols, terms[rows, cols], terms[rows, cols] + terms[cols, rows])

    static = np.abs(pair_freqs) < FREQUENCY_TOL
    equilibrium_value = float(np.sum(pair_weights[static]).real)
    frequencies, weights = _merge(pair_freqs[~static], pair_weights[~static])

    scale = max(1.0, abs(equilibrium_value), float(np.sum(np.abs(weights))))
    keep = np.abs(weights) > WEIGHT_FLOOR * scale
    frequencies, weights = frequencies[keep], weights[keep]

    if weights.size == 0:
        return TimeSignal(
            frequencies=frequencies,
            weights=weights,
            equilibrium_value=equilibrium_value,
            dispersion=0.0,
            tau_estimate=0.0,
        )

    probabilities = np.abs(weights) ** 2 / np.sum(np.abs(weights) ** 2)
    mean = float(probabilities @ frequencies)
    dispersion = float(np.sqrt(max(float(probabilities @ frequencies**2) - mean**2, 0.0)))
    return TimeSignal(
        frequencies=frequencies,
        weights=weights,
        equilibrium_value=equilibrium_value,
        dispersion=dispersion,
        tau_estimate=1.0 / dispersion if dispersion > 0.0 else 0.0,
    )


def trace_values(signed: np.ndarray, terms: np.ndarray, times: np.ndarray) -> np.ndarray:
    """<A>(t) = e(t)^T M e(t) with e_k(t) = exp(-i d~_k t), in chunks of times."""
    times = np.asarray(times, dtype=float).reshape(-1)
    chunk = max(1, AMPLITUDE_CHUNK // signed.shape[0])
    values = np.empty(times.shape[0])
    for start in range(0, times.shape[0], chunk):
        phases = np.exp(-1j * np.outer(signed, times[start : start + chunk]))
        values[start : start + chunk] = np.einsum("kt,kt->t", phases, terms @ phases).real
    return values


def recurrence_time(signed: np.ndarray) -> float:
    """2 pi over the median spacing of the positive normal frequencies; inf for a single mode."""
    freqs = np.sort(signed[signed > 0.0])
    if freqs.size < 2:
        return float("inf")
    return float(2.0 * np.pi / np.median(np.diff(freqs)))


def equilibration_time(h: QuadraticHamiltonian, initial: GaussianState, observable: np.ndarray) -> TimeSignal:
    """Dephasing decomposition of <A>(t) for A = sum_ij A_ij r_i r_j under H."""
    return time_signal(*dephasing_terms(h, initial, observable))


def energy_trace(
    state: GaussianState, h: QuadraticHamiltonian, observable: np.ndarray, times: np.ndarray
) -> np.ndarray:
    """<A>(t) at each time, evaluated through the dephasing decomposition."""
    return trace_values(*dephasing_terms(h, state, observable), times)


def band_entry_time(
    times: np.ndarray, values: np.ndarray, band: float = 0.01, reference: float | None = None
) -> float:
    """Last time the series enters (a (1 - band), a (1 + band)) for good.

    a is ``reference`` when given, otherwise the mean over the final quarter of
    the window; inf if the last sample is outside.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.shape != values.shape or times.size < 4:
        raise DimensionMismatchError("times and values must be equal-length series of at least 4 samples.")
    if reference is None:
        reference = float(np.mean(values[-(values.size // 4) :]))
    inside = np.abs(values - reference) <= band * abs(reference)
    if not inside[-1]:
        return float("inf")
    outside = np.flatnonzero(~inside)
    if outside.size == 0:
        return float(times[0])
    return float(times[outside[-1] + 1])
