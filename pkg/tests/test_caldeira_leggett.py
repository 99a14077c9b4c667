import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import seed
from hypothesis import settings
from hypothesis import strategies as st

from src.gaussian.caldeira_leggett import band_entry_time
from src.gaussian.caldeira_leggett import build_cl_hamiltonian
from src.gaussian.caldeira_leggett import cl_work_protocol
from src.gaussian.caldeira_leggett import dephasing_terms
from src.gaussian.caldeira_leggett import energy
from src.gaussian.caldeira_leggett import energy_trace
from src.gaussian.caldeira_leggett import equilibration_time
from src.gaussian.caldeira_leggett import evolution_matrix
from src.gaussian.caldeira_leggett import evolve
from src.gaussian.caldeira_leggett import gaussian_entropy
from src.gaussian.caldeira_leggett import gaussian_mutual_information
from src.gaussian.caldeira_leggett import marginal
from src.gaussian.caldeira_leggett import oscillator_thermal
from src.gaussian.caldeira_leggett import oscillator_weak_work
from src.gaussian.caldeira_leggett import product_state
from src.gaussian.caldeira_leggett import quadratic_expectation
from src.gaussian.caldeira_leggett import recurrence_time
from src.gaussian.caldeira_leggett import symplectic_eigenvalues
from src.gaussian.caldeira_leggett import system_block
from src.gaussian.caldeira_leggett import thermal_gaussian
from src.gaussian.caldeira_leggett import time_signal
from src.gaussian.caldeira_leggett import trace_values
from src.gaussian.caldeira_leggett import weak_coupling_schedule
from src.gaussian.caldeira_leggett import williamson
from src.models.errors import DimensionMismatchError
from src.models.errors import NonPositiveSpectrumError
from src.models.errors import ScheduleError
from src.models.gaussian import EquilibrationMode
from src.models.gaussian import GaussianState
from src.models.gaussian import OhmicBathSpec
from src.models.gaussian import QuadraticHamiltonian
from src.models.gaussian import symplectic_form
from src.models.thermal import ThermalContext

OMEGA = 1.1


def _initial(bath: OhmicBathSpec, beta_s: float = 0.5, beta: float = 1.0) -> GaussianState:
    return product_state(
        [
            oscillator_thermal([1.0], [OMEGA], ThermalContext(beta=beta_s)),
            oscillator_thermal(bath.masses, bath.frequencies, ThermalContext(beta=beta)),
        ]
    )


def test_single_oscillator_frequency():
    freqs, transform = williamson(QuadraticHamiltonian(h_matrix=np.diag([4.0, 1.0])))
    assert freqs == pytest.approx([2.0])
    sigma = symplectic_form(1)
    assert np.allclose(transform @ sigma @ transform.T, sigma)


def test_uncoupled_normal_modes_are_bare_frequencies(small_bath):
    freqs, _ = williamson(build_cl_hamiltonian(1.0, OMEGA, small_bath, 0.0))
    expected = np.sort(np.concatenate([[OMEGA], small_bath.frequencies]))
    assert np.allclose(np.sort(freqs), expected)


def test_williamson_diagonalizes_hamiltonian(small_bath):
    h = build_cl_hamiltonian(1.0, OMEGA, small_bath, 0.4)
    freqs, transform = williamson(h)
    sigma = symplectic_form(h.n_modes)
    assert np.allclose(transform @ sigma @ transform.T, sigma, atol=1e-10)
    diagonal = np.diag(np.concatenate([freqs, freqs]))
    assert np.allclose(transform.T @ diagonal @ transform, h.h_matrix, atol=1e-10)


def test_separable_normal_modes_match_generic_symplectic_spectrum(small_bath):
    h = build_cl_hamiltonian(1.0, OMEGA, small_bath, 0.8)
    freqs, _ = williamson(h)
    assert np.allclose(freqs, np.sort(symplectic_eigenvalues(h.h_matrix)), atol=1e-10)


def test_williamson_handles_position_momentum_cross_terms():
    h_matrix = np.array(
        [
            [2.0, 0.5, 0.0, 0.1],
            [0.5, 1.5, 0.2, 0.0],
            [0.0, 0.2, 1.0, 0.3],
            [0.1, 0.0, 0.3, 1.2],
        ]
    )
    h = QuadraticHamiltonian(h_matrix=h_matrix)
    freqs, transform = williamson(h)
    sigma = symplectic_form(2)
    assert np.allclose(transform @ sigma @ transform.T, sigma, atol=1e-10)
    diagonal = np.diag(np.concatenate([freqs, freqs]))
    assert np.allclose(transform.T @ diagonal @ transform, h.h_matrix, atol=1e-10)


def test_counterterm_keeps_hamiltonian_positive_at_strong_coupling():
    bath = OhmicBathSpec(n_osc=20, omega_max=1.2)
    h = build_cl_hamiltonian(1.0, 1.0, bath, 3.0)
    freqs, _ = williamson(h)
    assert np.all(freqs > 0.0)


def test_counterterm_raises_normal_frequencies():
    bath = OhmicBathSpec(n_osc=20, omega_max=1.2)
    g = 0.5
    h = build_cl_hamiltonian(1.0, 1.0, bath, g)
    bare = np.array(h.h_matrix)
    bare[0, 0] -= 2.0 * g**2 * float(np.sum(bath.couplings**2 / (bath.masses * bath.frequencies**2)))
    with_counterterm, _ = williamson(h)
    without_counterterm, _ = williamson(QuadraticHamiltonian(h_matrix=bare))
    assert np.all(np.sort(with_counterterm) >= np.sort(without_counterterm) - 1e-12)


def test_system_block_rejects_non_positive_parameters():
    with pytest.raises(NonPositiveSpectrumError):
        system_block(0.0, 1.0, 2)


def test_hamiltonian_must_be_positive_definite():
    with pytest.raises(ValueError):
        QuadraticHamiltonian(h_matrix=np.diag([1.0, -1.0]))


def test_state_must_satisfy_uncertainty_relation():
    with pytest.raises(ValueError):
        GaussianState(mean=np.zeros(2), cov=0.5 * np.eye(2))
    assert GaussianState(mean=np.zeros(2), cov=np.eye(2)).n_modes == 1


def test_thermal_state_energy_and_spectrum(small_bath, ctx):
    h = build_cl_hamiltonian(1.0, OMEGA, small_bath, 0.3)
    state = thermal_gaussian(h, ctx)
    freqs, _ = williamson(h)
    occupations = 1.0 / np.tanh(0.5 * ctx.beta * freqs)
    assert energy(state, h) == pytest.approx(float(np.sum(0.5 * freqs * occupations)))
    assert np.allclose(np.sort(symplectic_eigenvalues(state.cov)), np.sort(occupations), atol=1e-8)


def test_single_oscillator_entropy_closed_form():
    beta, omega = 0.8, 1.5
    occupation = 1.0 / math.expm1(beta * omega)
    expected = (occupation + 1.0) * math.log(occupation + 1.0) - occupation * math.log(occupation)
    state = oscillator_thermal([2.0], [omega], ThermalContext(beta=beta))
    assert gaussian_entropy(state) == pytest.approx(expected)


def test_vacuum_has_zero_entropy():
    assert gaussian_entropy(GaussianState(mean=np.zeros(2), cov=np.eye(2))) == pytest.approx(0.0, abs=1e-12)


def test_mutual_information_vanishes_only_without_coupling(small_bath, ctx):
    assert gaussian_mutual_information(_initial(small_bath), [0]) == pytest.approx(0.0, abs=1e-9)
    coupled = thermal_gaussian(build_cl_hamiltonian(1.0, OMEGA, small_bath, 0.5), ctx)
    assert gaussian_mutual_information(coupled, [0]) > 1e-6


def test_marginal_of_product_state(small_bath):
    state = _initial(small_bath)
    system = marginal(state, [0])
    assert np.allclose(system.cov, oscillator_thermal([1.0], [OMEGA], ThermalContext(beta=0.5)).cov)
    with pytest.raises(DimensionMismatchError):
        marginal(state, [small_bath.n_osc + 1])


def test_evolution_is_symplectic(small_bath):
    h = build_cl_hamiltonian(1.0, OMEGA, small_bath, 0.4)
    propagator = evolution_matrix(h, 3.7)
    sigma = symplectic_form(h.n_modes)
    assert np.allclose(propagator @ sigma @ propagator.T, sigma, atol=1e-10)
    assert np.allclose(evolution_matrix(h, 0.0), np.eye(2 * h.n_modes), atol=1e-10)


@seed(5)
@settings(max_examples=15, deadline=None)
@given(st.floats(min_value=0.0, max_value=1.0), st.floats(min_value=0.0, max_value=60.0))
def test_evolution_conserves_energy_and_spectrum(g, t):
    bath = OhmicBathSpec(n_osc=5, omega_max=2.0)
    h = build_cl_hamiltonian(1.0, OMEGA, bath, g)
    state = _initial(bath)
    evolved = evolve(state, h, t)
    assert energy(evolved, h) == pytest.approx(energy(state, h), rel=1e-9)
    assert np.allclose(symplectic_eigenvalues(evolved.cov), symplectic_eigenvalues(state.cov), atol=1e-8)


def test_evolve_rejects_mode_mismatch(small_bath):
    h = build_cl_hamiltonian(1.0, OMEGA, small_bath, 0.2)
    with pytest.raises(DimensionMismatchError):
        evolve(GaussianState(mean=np.zeros(2), cov=np.eye(2)), h, 1.0)


def test_time_signal_matches_direct_evolution(small_bath):
    h = build_cl_hamiltonian(1.0, OMEGA, small_bath, 0.5)
    state = _initial(small_bath)
    observable = 0.5 * system_block(1.0, OMEGA, h.n_modes)
    times = np.array([0.0, 0.7, 3.1, 12.5])
    direct = [quadratic_expectation(evolve(state, h, t), observable) for t in times]
    assert np.allclose(energy_trace(state, h, observable, times), direct, atol=1e-9)


def test_time_signal_equilibrium_value_is_time_average(small_bath):
    h = build_cl_hamiltonian(1.0, OMEGA, small_bath, 0.5)
    state = _initial(small_bath)
    observable = 0.5 * system_block(1.0, OMEGA, h.n_modes)
    signal = equilibration_time(h, state, observable)
    samples = signal.evaluate(np.linspace(0.0, 5000.0, 200001))
    assert signal.equilibrium_value == pytest.approx(float(np.mean(samples)), abs=5e-3)
    assert signal.relevance > 0.0
    assert signal.tau_estimate == pytest.approx(1.0 / signal.dispersion)


def test_trace_values_agree_with_merged_signal(small_bath):
    h = build_cl_hamiltonian(1.0, OMEGA, small_bath, 0.5)
    observable = 0.5 * system_block(1.0, OMEGA, h.n_modes)
    signed, terms = dephasing_terms(h, _initial(small_bath), observable)
    times = np.linspace(0.0, 40.0, 97)
    assert np.allclose(trace_values(signed, terms, times), time_signal(signed, terms).evaluate(times), atol=1e-9)


def test_squared_deviation_averages_to_relevance(small_bath):
    h = build_cl_hamiltonian(1.0, OMEGA, small_bath, 0.5)
    observable = 0.5 * system_block(1.0, OMEGA, h.n_modes)
    signed, terms = dephasing_terms(h, _initial(small_bath), observable)
    signal = time_signal(signed, terms)
    samples = trace_values(signed, terms, np.linspace(0.0, 5000.0, 200001))
    assert float(np.mean((samples - signal.equilibrium_value) ** 2)) == pytest.approx(signal.relevance, rel=0.05)


def test_recurrence_time_from_mode_spacing():
    assert recurrence_time(np.array([1.0, 2.0, 3.0, -1.0, -2.0, -3.0])) == pytest.approx(2.0 * np.pi)
    assert math.isinf(recurrence_time(np.array([1.0, -1.0])))


def test_conserved_observable_has_no_dynamics(small_bath):
    h = build_cl_hamiltonian(1.0, OMEGA, small_bath, 0.0)
    observable = 0.5 * system_block(1.0, OMEGA, h.n_modes)
    signal = equilibration_time(h, _initial(small_bath), observable)
    assert signal.tau_estimate == 0.0
    assert signal.weights.size == 0
    assert signal.equilibrium_value == pytest.approx(quadratic_expectation(_initial(small_bath), observable))


def test_equilibration_time_rejects_wrong_observable(small_bath):
    h = build_cl_hamiltonian(1.0, OMEGA, small_bath, 0.2)
    with pytest.raises(DimensionMismatchError):
        equilibration_time(h, _initial(small_bath), np.eye(2))


def test_band_entry_time_cases():
    times = np.arange(8.0)
    assert band_entry_time(times, np.array([5.0, 5.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0])) == 2.0
    assert band_entry_time(times, np.ones(8)) == 0.0
    assert math.isinf(band_entry_time(times, np.array([1.0] * 7 + [2.0])))
    drifting = np.array([5.0, 3.0, 1.5, 1.03, 1.008, 1.005, 1.0, 1.0])
    assert band_entry_time(times, drifting, reference=1.0) == 4.0
    assert math.isinf(band_entry_time(times, drifting, reference=2.0))
    with pytest.raises(DimensionMismatchError):
        band_entry_time(times[:3], np.ones(3))


def test_weak_coupling_schedule_shape():
    schedule = weak_coupling_schedule(1.0, 2.0, 2.0, 1.0, 10)
    assert len(schedule) == 12
    assert schedule[0] == pytest.approx((1.0, 2.0))
    assert schedule[-1] == pytest.approx((1.0, 2.0))
    # beta_S / beta = 1/2
    assert schedule[1] == pytest.approx((2.0, 1.0))
    with pytest.raises(ScheduleError):
        weak_coupling_schedule(1.0, 2.0, 2.0, 1.0, 0)


def test_protocol_rejects_bad_schedules(small_bath, ctx):
    mode = EquilibrationMode.GIBBS_REPLACEMENT
    with pytest.raises(ScheduleError):
        cl_work_protocol(small_bath, 0.2, [(1.0, 1.0), (1.0, 2.0)], mode, ctx, 0.5)
    with pytest.raises(ScheduleError):
        cl_work_protocol(small_bath, 0.2, [(1.0, 1.0), (1.0, 2.0), (1.0, 1.5)], mode, ctx, 0.5)
    with pytest.raises(ScheduleError):
        cl_work_protocol(small_bath, 0.2, [(1.0, 1.0), (-1.0, 2.0), (1.0, 1.0)], mode, ctx, 0.5)


def test_exact_unitary_needs_wait_time(small_bath, ctx):
    schedule = weak_coupling_schedule(1.0, OMEGA, 1.0, 0.5, 3)
    with pytest.raises(ValueError):
        cl_work_protocol(small_bath, 0.2, schedule, EquilibrationMode.EXACT_UNITARY, ctx, 0.5)


def test_weak_work_vanishes_at_bath_temperature():
    assert oscillator_weak_work(1.0, OMEGA, 1.0, 1.0) == pytest.approx(0.0, abs=1e-12)
    assert oscillator_weak_work(1.0, OMEGA, 1.0, 0.5) > 0.0


def test_uncoupled_gibbs_protocol_reaches_weak_work(small_bath, ctx):
    schedule = weak_coupling_schedule(1.0, OMEGA, 1.0, 0.5, 400)
    ledger = cl_work_protocol(small_bath, 0.0, schedule, EquilibrationMode.GIBBS_REPLACEMENT, ctx, 0.5)
    w_weak = oscillator_weak_work(1.0, OMEGA, 1.0, 0.5)
    assert ledger.total <= w_weak + 1e-12
    assert ledger.total == pytest.approx(w_weak, abs=5e-3)
    assert ledger.entries[1].work == 0.0


def test_coupled_gibbs_protocol_loses_work(small_bath, ctx):
    schedule = weak_coupling_schedule(1.0, OMEGA, 1.0, 0.5, 50)
    mode = EquilibrationMode.GIBBS_REPLACEMENT
    weak = cl_work_protocol(small_bath, 0.0, schedule, mode, ctx, 0.5).total
    strong = cl_work_protocol(small_bath, 0.8, schedule, mode, ctx, 0.5).total
    assert strong < weak


def test_exact_unitary_conserves_energy_while_waiting(small_bath, ctx):
    schedule = weak_coupling_schedule(1.0, OMEGA, 1.0, 0.5, 5)
    ledger = cl_work_protocol(small_bath, 0.3, schedule, EquilibrationMode.EXACT_UNITARY, ctx, 0.5, t_wait=7.0)
    assert ledger.total_heat == pytest.approx(0.0, abs=1e-9)
    assert len(ledger.entries) == 2 * len(schedule)


@pytest.mark.slow
def test_gibbs_work_decreases_with_coupling():
    bath = OhmicBathSpec(n_osc=40, omega_max=1.2)
    ctx = ThermalContext(beta=3.5)
    schedule = weak_coupling_schedule(1.0, 1.0, 3.5, 1.0, 100)
    w_weak = oscillator_weak_work(1.0, 1.0, 3.5, 1.0)
    works = [
        cl_work_protocol(bath, g, schedule, EquilibrationMode.GIBBS_REPLACEMENT, ctx, 1.0).total
        for g in (0.2, 0.6, 1.0)
    ]
    assert all(w <= w_weak for w in works)
    assert works[0] > works[1] > works[2]
