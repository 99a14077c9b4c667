import math

import numpy as np
import pytest

from src.models.errors import DimensionMismatchError
from src.models.errors import RankDeficientStateError
from src.models.operators import HermitianOperator
from src.models.operators import Side
from src.models.thermal import ThermalContext
from src.operators.operator_core import partial_trace
from src.operators.operator_core import random_density
from src.operators.operator_core import total_hamiltonian
from src.optimization.coupling_optimizer import bound_check
from src.optimization.coupling_optimizer import delta_f_irr
from src.optimization.coupling_optimizer import delta_f_irr_gradient
from src.optimization.coupling_optimizer import delta_f_res
from src.optimization.coupling_optimizer import delta_f_res_gradient
from src.optimization.coupling_optimizer import gradient_descent
from src.optimization.coupling_optimizer import grid_search_qubit
from src.optimization.coupling_optimizer import perturbative_endpoints
from src.optimization.coupling_optimizer import solve_irr
from src.optimization.coupling_optimizer import solve_marginal
from src.optimization.coupling_optimizer import solve_res
from src.optimization.coupling_optimizer import strong_coupling_limit_gap
from src.optimization.coupling_optimizer import traceless
from src.thermo.gibbs_thermo import gibbs_state


def _directional(objective, x: HermitianOperator, direction: HermitianOperator, step: float = 1e-6) -> float:
    return (objective(x + step * direction) - objective(x - step * direction)) / (2.0 * step)


def test_traceless_removes_identity_part():
    op = HermitianOperator.diag([3.0, 1.0])
    assert traceless(op).trace() == pytest.approx(0.0)
    assert np.allclose(traceless(op).entries, np.diag([1.0, -1.0]))


def test_irr_gradient_matches_finite_differences(qubit_system, hot_rho_s, ctx, rng):
    x = HermitianOperator.diag([0.3, -0.3])
    direction = traceless(HermitianOperator(entries=[[0.2, 0.5 - 0.1j], [0.5 + 0.1j, -0.4]]))
    gradient = delta_f_irr_gradient(qubit_system, hot_rho_s, x, ctx)
    numeric = _directional(lambda h: delta_f_irr(qubit_system, hot_rho_s, h, ctx), x, direction)
    assert np.sum(gradient.entries * direction.entries.T).real == pytest.approx(numeric, abs=1e-7)


def test_res_gradient_matches_finite_differences(qubit_system, ctx):
    z = HermitianOperator.diag([-0.4, 0.4])
    direction = traceless(HermitianOperator(entries=[[0.1, 0.3j], [-0.3j, 0.6]]))
    gradient = delta_f_res_gradient(qubit_system, z, ctx)
    numeric = _directional(lambda h: delta_f_res(qubit_system, h, ctx), z, direction)
    assert np.sum(gradient.entries * direction.entries.T).real == pytest.approx(numeric, abs=1e-7)


def test_gradient_descent_minimizes_quadratic():
    target = HermitianOperator.diag([0.5, -0.5])

    def objective(x: HermitianOperator) -> float:
        return float(np.sum(np.abs(x.entries - target.entries) ** 2))

    def gradient(x: HermitianOperator) -> HermitianOperator:
        return 2.0 * (x - target)

    x, value, grad_norm, _, converged = gradient_descent(objective, gradient, HermitianOperator.zeros(2), 1e-10)
    assert converged
    assert value == pytest.approx(0.0, abs=1e-18)
    assert np.allclose(x.entries, target.entries, atol=1e-9)


def test_uncoupled_optimum_is_minus_t_log_rho(qubit_system, hot_rho_s, ctx):
    solution = solve_irr(qubit_system.with_g(0.0), hot_rho_s, ctx, n_starts=1)
    expected = traceless(HermitianOperator.trusted(-np.diag(np.log(np.diag(hot_rho_s.entries).real)) / ctx.beta))
    assert solution.converged
    assert solution.objective == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(solution.h_s_opt.entries, expected.entries, atol=1e-7)


def test_marginal_solution_reproduces_target(qubit_system, ctx, rng):
    target = 0.5 * random_density(2, rng) + HermitianOperator.identity(2) * 0.25
    solution = solve_marginal(qubit_system, target, ctx, n_starts=2, rng=rng)
    marginal = partial_trace(gibbs_state(total_hamiltonian(qubit_system, h_s=solution.h_s_opt), ctx), Side.S, qubit_system)
    assert np.allclose(marginal.entries, target.entries, atol=1e-6)


def test_solve_marginal_rejects_pure_target(qubit_system, ctx):
    with pytest.raises(RankDeficientStateError):
        solve_marginal(qubit_system, HermitianOperator.diag([1.0, 0.0]), ctx)


def test_solve_marginal_rejects_wrong_dimension(qubit_system, ctx, rng):
    with pytest.raises(DimensionMismatchError):
        solve_marginal(qubit_system, random_density(3, rng), ctx)


def test_optimized_free_energies_beat_naive_choices(qubit_system, hot_rho_s, ctx, rng):
    irr = solve_irr(qubit_system, hot_rho_s, ctx, n_starts=2, rng=rng)
    res = solve_res(qubit_system, ctx, n_starts=2, rng=rng)
    naive_irr = delta_f_irr(qubit_system, hot_rho_s, traceless(0.5 * qubit_system.h_s), ctx)
    naive_res = delta_f_res(qubit_system, qubit_system.h_s, ctx)
    assert 0.0 <= irr.objective <= naive_irr + 1e-12
    assert 0.0 <= res.objective <= naive_res + 1e-12


def test_free_energy_penalties_respect_coupling_bound(qubit_system, hot_rho_s, ctx, rng):
    irr = solve_irr(qubit_system, hot_rho_s, ctx, n_starts=1, rng=rng)
    res = solve_res(qubit_system, ctx, n_starts=1, rng=rng)
    report = bound_check(qubit_system, (irr, res), ctx)
    assert report.bound == pytest.approx(0.4)
    assert report.violations == []
    assert all(margin >= 0.0 for margin in report.margins.values())


def test_penalties_scale_quadratically(qubit_system, hot_rho_s, ctx):
    prediction = perturbative_endpoints(qubit_system, hot_rho_s, ctx)
    g = 0.02
    sys = qubit_system.with_g(g)
    irr = solve_irr(sys, hot_rho_s, ctx, n_starts=1)
    res = solve_res(sys, ctx, n_starts=1)
    assert irr.objective == pytest.approx(prediction.coefficient_irr * g**2, rel=0.1)
    assert res.objective == pytest.approx(prediction.coefficient_res * g**2, rel=0.1)


@pytest.mark.slow
def test_coupling_bound_holds_from_weak_to_strong_coupling(qubit_system, hot_rho_s, ctx, rng):
    for g in (0.0, 0.25, 0.5, 1.0, 1.5, 2.0):
        sys = qubit_system.with_g(g)
        irr = solve_irr(sys, hot_rho_s, ctx, n_starts=2, rng=rng)
        res = solve_res(sys, ctx, n_starts=2, rng=rng)
        report = bound_check(sys, (irr, res), ctx)
        assert report.violations == [], f"g={g}: {report.margins}"


def test_first_order_endpoints_match_quadratic_penalties(qubit_system, hot_rho_s, ctx):
    couplings = np.array([0.01, 0.02, 0.04, 0.08])
    errors = []
    for g in couplings:
        sys = qubit_system.with_g(float(g))
        prediction = perturbative_endpoints(sys, hot_rho_s, ctx)
        irr_error = delta_f_irr(sys, hot_rho_s, prediction.h1_s, ctx) - prediction.coefficient_irr * g**2
        res_error = delta_f_res(sys, prediction.hN_s, ctx) - prediction.coefficient_res * g**2
        errors.append(abs(irr_error) + abs(res_error))
    slope = np.polyfit(np.log(couplings), np.log(errors), 1)[0]
    assert slope >= 2.8


def test_perturbative_coefficients_ignore_identity_gauge(qubit_system, hot_rho_s, ctx):
    plain = perturbative_endpoints(qubit_system, hot_rho_s, ctx)
    shifted = perturbative_endpoints(qubit_system, hot_rho_s, ctx, gauge=HermitianOperator.identity(2) * 0.7)
    assert shifted.coefficient_irr == pytest.approx(plain.coefficient_irr)
    assert shifted.coefficient_res == pytest.approx(plain.coefficient_res)


def test_grid_search_agrees_with_descent(qubit_system, ctx):
    solution = solve_res(qubit_system, ctx, n_starts=1)
    _, value = grid_search_qubit(
        lambda z: delta_f_res(qubit_system, z, ctx), qubit_system.h_s, span=0.3, points=11, levels=3
    )
    assert value >= solution.objective - 1e-9
    assert value == pytest.approx(solution.objective, abs=1e-5)


def test_grid_search_is_qubit_only(ctx):
    with pytest.raises(DimensionMismatchError):
        grid_search_qubit(lambda z: 0.0, HermitianOperator.identity(3), span=1.0)


@pytest.mark.slow
def test_irr_gap_grows_with_strong_coupling(qubit_system, hot_rho_s):
    ctx = ThermalContext(beta=1.0)
    gaps = strong_coupling_limit_gap(qubit_system, hot_rho_s, [0.5, 1.0, 2.0, 3.0, 4.0, 5.0], ctx)
    assert all(math.isfinite(gap) for gap in gaps)
    assert gaps[0] > 0.0
    assert all(later > earlier for earlier, later in zip(gaps, gaps[1:]))
