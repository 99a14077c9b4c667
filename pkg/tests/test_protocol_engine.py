import numpy as np
import pytest

from src.models.errors import ProtocolOrderError
from src.models.errors import RankDeficientStateError
from src.models.operators import HermitianOperator
from src.models.protocol import CorrectionReport
from src.models.protocol import Phase
from src.models.protocol import ProtocolStep
from src.models.protocol import StepKind
from src.models.protocol import WorkLedger
from src.optimization.coupling_optimizer import solve_irr
from src.optimization.coupling_optimizer import solve_res
from src.protocol.protocol_engine import apply_step
from src.protocol.protocol_engine import first_law_gap
from src.protocol.protocol_engine import heat_report
from src.protocol.protocol_engine import initial_state
from src.protocol.protocol_engine import isothermal_process
from src.protocol.protocol_engine import optimal_work_protocol
from src.protocol.protocol_engine import refresh_bath
from src.protocol.protocol_engine import run_protocol
from src.protocol.protocol_engine import weak_work
from src.thermo.gibbs_thermo import gibbs_state


def test_quench_step_needs_target():
    with pytest.raises(ValueError):
        ProtocolStep(kind=StepKind.QUENCH)
    with pytest.raises(ValueError):
        ProtocolStep(kind=StepKind.EQUILIBRATE, new_h_s=HermitianOperator.identity(2))


def test_coupling_steps_enforce_order(qubit_system, hot_rho_s, ctx):
    state = initial_state(qubit_system, hot_rho_s, ctx)
    with pytest.raises(ProtocolOrderError):
        apply_step(state, ProtocolStep.couple_off(), ctx)
    with pytest.raises(ProtocolOrderError):
        apply_step(state, ProtocolStep.equilibrate(), ctx)
    coupled, _ = apply_step(state, ProtocolStep.couple_on(), ctx)
    with pytest.raises(ProtocolOrderError):
        apply_step(coupled, ProtocolStep.couple_on(), ctx)
    with pytest.raises(ProtocolOrderError):
        refresh_bath(coupled, ctx)


def test_couple_on_work_is_minus_interaction_energy(qubit_system, hot_rho_s, ctx):
    state = initial_state(qubit_system, hot_rho_s, ctx)
    # sx has zero mean in both diagonal marginals
    _, work = apply_step(state, ProtocolStep.couple_on(), ctx)
    assert work == pytest.approx(0.0, abs=1e-14)


def test_quench_work_is_energy_drop(qubit_system, hot_rho_s, ctx):
    state = initial_state(qubit_system, hot_rho_s, ctx)
    target = 2.0 * qubit_system.h_s
    new_state, work = apply_step(state, ProtocolStep.quench(target), ctx)
    assert work == pytest.approx(-qubit_system.h_s.expectation(hot_rho_s))
    assert np.allclose(new_state.sys.h_s.entries, target.entries)
    assert new_state.step_index == 1


def test_run_protocol_closes_first_law(qubit_system, hot_rho_s, ctx):
    start = initial_state(qubit_system, hot_rho_s, ctx)
    steps = [
        ProtocolStep.quench(0.5 * qubit_system.h_s),
        ProtocolStep.couple_on(),
        ProtocolStep.equilibrate(),
        ProtocolStep.quench(qubit_system.h_s),
        ProtocolStep.equilibrate(),
        ProtocolStep.couple_off(),
    ]
    end, ledger = run_protocol(start, steps, ctx)
    assert len(ledger.entries) == len(steps)
    assert first_law_gap(ledger, start, end) == pytest.approx(0.0, abs=1e-12)


def test_isothermal_process_rejects_zero_steps(qubit_system, hot_rho_s, ctx):
    coupled, _ = apply_step(initial_state(qubit_system, hot_rho_s, ctx), ProtocolStep.couple_on(), ctx)
    with pytest.raises(ValueError):
        isothermal_process(coupled, qubit_system.h_s, 0, ctx)


def test_isothermal_work_approaches_free_energy_change(qubit_system, hot_rho_s, ctx):
    coupled, _ = apply_step(initial_state(qubit_system, hot_rho_s, ctx), ProtocolStep.couple_on(), ctx)
    _, work_coarse, dissipation_coarse = isothermal_process(coupled, 2.0 * qubit_system.h_s, 10, ctx)
    _, work_fine, dissipation_fine = isothermal_process(coupled, 2.0 * qubit_system.h_s, 100, ctx)
    assert dissipation_fine < dissipation_coarse
    assert dissipation_fine * 100 == pytest.approx(dissipation_coarse * 10, rel=0.2)
    assert work_fine > work_coarse
    assert work_fine + dissipation_fine == pytest.approx(work_coarse + dissipation_coarse, abs=1e-10)


def test_rank_deficient_initial_state_is_rejected(qubit_system, ctx):
    pure = HermitianOperator.diag([1.0, 0.0])
    with pytest.raises(RankDeficientStateError):
        optimal_work_protocol(qubit_system, pure, qubit_system.h_s, qubit_system.h_s, 5, ctx)


def test_weak_work_at_bath_temperature_vanishes(qubit_system, ctx):
    assert weak_work(qubit_system, gibbs_state(qubit_system.h_s, ctx), ctx) == pytest.approx(0.0, abs=1e-12)


def test_uncoupled_protocol_reaches_weak_coupling_work(qubit_system, hot_rho_s, ctx):
    sys = qubit_system.with_g(0.0)
    h1 = -(1.0 / ctx.beta) * HermitianOperator.trusted(np.diag(np.log(np.diag(hot_rho_s.entries).real)))
    ledger, report = optimal_work_protocol(sys, hot_rho_s, h1, sys.h_s, 400, ctx)
    assert report.delta_f_irr == pytest.approx(0.0, abs=1e-12)
    assert report.delta_f_res == pytest.approx(0.0, abs=1e-12)
    assert ledger.total == pytest.approx(report.w_finite, abs=1e-10)
    assert ledger.total == pytest.approx(report.w_weak, abs=1e-3)


def test_work_decomposition_identity_at_finite_coupling(qubit_system, hot_rho_s, ctx, rng):
    irr = solve_irr(qubit_system, hot_rho_s, ctx, n_starts=1, rng=rng)
    res = solve_res(qubit_system, ctx, n_starts=1, rng=rng)
    ledger, report = optimal_work_protocol(qubit_system, hot_rho_s, irr.h_s_opt, res.h_s_opt, 50, ctx)
    assert ledger.total == pytest.approx(report.w_finite, abs=1e-9)
    assert ledger.total <= report.w_weak + 1e-9
    assert ledger.w1 + ledger.w2 + ledger.w3 == pytest.approx(ledger.total)
    assert {entry.phase for entry in ledger.entries} == {Phase.W1, Phase.W2, Phase.W3}


def test_heat_identity(qubit_system, hot_rho_s, ctx, rng):
    irr = solve_irr(qubit_system, hot_rho_s, ctx, n_starts=1, rng=rng)
    res = solve_res(qubit_system, ctx, n_starts=1, rng=rng)
    report = heat_report(qubit_system, hot_rho_s, irr.h_s_opt, res.h_s_opt, 50, ctx)
    assert report.q_system == pytest.approx(report.predicted_q_system, abs=1e-9)
    assert report.q_system <= report.temperature * report.entropy_change + 1e-9


def test_correction_report_enforces_decomposition():
    with pytest.raises(ValueError):
        CorrectionReport(w_weak=1.0, delta_f_irr=0.1, delta_f_res=0.1, w_total=0.5)


def test_ledger_totals_by_phase():
    ledger = WorkLedger()
    ledger.record(1, StepKind.QUENCH, 0.5, phase=Phase.W1)
    ledger.record(2, StepKind.EQUILIBRATE, 0.0, heat=0.2, phase=Phase.W2)
    ledger.record(3, StepKind.QUENCH, -0.1, phase=Phase.W3)
    assert ledger.total == pytest.approx(0.4)
    assert ledger.total_heat == pytest.approx(0.2)
    assert (ledger.w1, ledger.w2, ledger.w3) == pytest.approx((0.5, 0.0, -0.1))

