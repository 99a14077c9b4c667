import logging
from collections.abc import Callable
from collections.abc import Iterable

import numpy as np

from src.models.errors import DimensionMismatchError
from src.models.errors import ProtocolOrderError
from src.models.errors import RankDeficientStateError
from src.models.operators import CompositeSystem
from src.models.operators import HermitianOperator
from src.models.operators import Side
from src.models.protocol import CorrectionReport
from src.models.protocol import HeatReport
from src.models.protocol import Phase
from src.models.protocol import ProtocolState
from src.models.protocol import ProtocolStep
from src.models.protocol import StepKind
from src.models.protocol import WorkLedger
from src.models.thermal import ThermalContext
from src.operators.operator_core import partial_trace
from src.operators.operator_core import tensor
from src.operators.operator_core import total_hamiltonian
from src.optimization.coupling_optimizer import delta_f_irr
from src.optimization.coupling_optimizer import delta_f_res
from src.thermo.gibbs_thermo import free_energy
from src.thermo.gibbs_thermo import gibbs_state
from src.thermo.gibbs_thermo import mutual_information
from src.thermo.gibbs_thermo import relative_entropy
from src.thermo.gibbs_thermo import von_neumann_entropy

logger = logging.getLogger(__name__)

RANK_TOL = 1e-12

HamiltonianPath = Callable[[HermitianOperator, HermitianOperator, int, int], HermitianOperator]


def linear_path(
    h_start: HermitianOperator, h_target: HermitianOperator, i: int, n: int
) -> HermitianOperator:
    return h_start + (i / n) * (h_target - h_start)


def energy(state: ProtocolState) -> float:
    """tr(rho H) of the current Hamiltonian, including gV when coupled."""
    return total_hamiltonian(state.sys, coupled=state.coupled).expectation(state.rho)


def interaction_energy(state: ProtocolState) -> float:
    return state.sys.g * state.sys.v.expectation(state.rho)


def _check_full_rank(rho_s: HermitianOperator) -> None:
    lowest = float(np.linalg.eigvalsh(rho_s.entries)[0])
    if lowest <= RANK_TOL:
        raise RankDeficientStateError(f"rho_S must be full rank, smallest eigenvalue {lowest:.3e}.")


def initial_state(sys: CompositeSystem, rho_s: HermitianOperator, ctx: ThermalContext) -> ProtocolState:
    """Uncorrelated start rho_S (x) omega_beta(H_B) with the coupling off."""
    if rho_s.dim != sys.dim_s:
        raise DimensionMismatchError(f"rho_S has dimension {rho_s.dim}, expected {sys.dim_s}.")
    rho = tensor(rho_s, gibbs_state(sys.h_b, ctx))
    return ProtocolState(sys=sys, rho=rho, coupled=False)


def refresh_bath(state: ProtocolState, ctx: ThermalContext) -> ProtocolState:
    """Discard the bath and its correlations with S; attach a fresh thermal bath."""
    if state.coupled:
        raise ProtocolOrderError("The bath can only be replaced while decoupled.")
    rho_s = partial_trace(state.rho, Side.S, state.sys)
    rho = tensor(rho_s, gibbs_state(state.sys.h_b, ctx))
    return state.model_copy(update={"rho": rho, "step_index": state.step_index + 1})


def apply_step(
    state: ProtocolState, step: ProtocolStep, ctx: ThermalContext
) -> tuple[ProtocolState, float]:
    """Apply one elementary operation; returns the new state and the extracted work."""
    next_index = state.step_index + 1

    if step.kind == StepKind.COUPLE_ON:
        if state.coupled:
            raise ProtocolOrderError(f"Step {next_index}: coupling is already on.")
        work = -interaction_energy(state)
        return state.model_copy(update={"coupled": True, "step_index": next_index}), work

    if step.kind == StepKind.COUPLE_OFF:
        if not state.coupled:
            raise ProtocolOrderError(f"Step {next_index}: coupling is already off.")
        work = interaction_energy(state)
        return state.model_copy(update={"coupled": False, "step_index": next_index}), work

    if step.kind == StepKind.QUENCH:
        new_h_s = step.new_h_s
        if new_h_s.dim != state.sys.dim_s:
            raise DimensionMismatchError(f"Quench target has dimension {new_h_s.dim}, expected {state.sys.dim_s}.")
        rho_s = partial_trace(state.rho, Side.S, state.sys)
        work = (state.sys.h_s - new_h_s).expectation(rho_s)
        return state.model_copy(update={"sys": state.sys.with_h_s(new_h_s), "step_index": next_index}), work

    if step.kind == StepKind.EQUILIBRATE:
        if not state.coupled:
            raise ProtocolOrderError(f"Step {next_index}: equilibration needs the bath coupled.")
        rho = gibbs_state(total_hamiltonian(state.sys), ctx)
        return state.model_copy(update={"rho": rho, "step_index": next_index}), 0.0

    return refresh_bath(state, ctx), 0.0


def record_step(
    state: ProtocolState,
    step: ProtocolStep,
    ctx: ThermalContext,
    ledger: WorkLedger,
    phase: Phase | None = None,
) -> ProtocolState:
    """apply_step plus a ledger entry; reservoir heat is the energy change of the replaced state."""
    new_state, work = apply_step(state, step, ctx)
    heat = 0.0
    if step.kind in (StepKind.EQUILIBRATE, StepKind.REFRESH_BATH):
        heat = energy(new_state) - energy(state)
    ledger.record(new_state.step_index, step.kind, work, heat=heat, phase=phase)
    return new_state


def run_protocol(
    state: ProtocolState,
    steps: Iterable[ProtocolStep],
    ctx: ThermalContext,
    ledger: WorkLedger | None = None,
) -> tuple[ProtocolState, WorkLedger]:
    ledger = WorkLedger() if ledger is None else ledger
    for step in steps:
        state = record_step(state, step, ctx, ledger)
    return state, ledger


def first_law_gap(ledger: WorkLedger, start: ProtocolState, end: ProtocolState) -> float:
    """W + Delta E_SB - sum of reservoir heat; zero when the bookkeeping closes."""
    return ledger.total + energy(end) - energy(start) - ledger.total_heat


def isothermal_process(
    state: ProtocolState,
    target_h_s: HermitianOperator,
    n_steps: int,
    ctx: ThermalContext,
    path: HamiltonianPath = linear_path,
    ledger: WorkLedger | None = None,
) -> tuple[ProtocolState, float, float]:
    """Equilibrate, then n_steps (quench, equilibrate) pairs along ``path``.

    Returns the final state, the work W_2 and the dissipation
    T sum_i S(omega^(i) || omega^(i+1)) in energy units.
    """
    if not state.coupled:
        raise ProtocolOrderError("The isothermal process needs the bath coupled.")
    if n_steps < 1:
        raise ValueError(f"n_steps must be at least 1, got {n_steps}.")
    if target_h_s.dim != state.sys.dim_s:
        raise DimensionMismatchError(f"Target has dimension {target_h_s.dim}, expected {state.sys.dim_s}.")

    ledger = WorkLedger() if ledger is None else ledger
    h_start = state.sys.h_s
    state = record_step(state, ProtocolStep.equilibrate(), ctx, ledger, Phase.W2)

    work = 0.0
    relative = 0.0
    for i in range(1, n_steps + 1):
        previous = state.rho
        state, quench_work = apply_step(state, ProtocolStep.quench(path(h_start, target_h_s, i, n_steps)), ctx)
        ledger.record(state.step_index, StepKind.QUENCH, quench_work, phase=Phase.W2)
        state = record_step(state, ProtocolStep.equilibrate(), ctx, ledger, Phase.W2)
        work += quench_work
        relative += relative_entropy(previous, state.rho)

    return state, work, relative / ctx.beta


def _run_contact(
    sys: CompositeSystem,
    rho_s: HermitianOperator,
    h1_s: HermitianOperator,
    hN_s: HermitianOperator,
    n_steps: int,
    ctx: ThermalContext,
    ledger: WorkLedger,
) -> tuple[ProtocolState, ProtocolState, float]:
    """Steps (i) to the decoupling of (iv); returns start and end states and the dissipation."""
    _check_full_rank(rho_s)
    start = initial_state(sys, rho_s, ctx)
    state = record_step(start, ProtocolStep.quench(h1_s), ctx, ledger, Phase.W1)
    state = record_step(state, ProtocolStep.couple_on(), ctx, ledger, Phase.W1)
    state, _, dissipation = isothermal_process(state, hN_s, n_steps, ctx, ledger=ledger)
    state = record_step(state, ProtocolStep.couple_off(), ctx, ledger, Phase.W3)
    return start, state, dissipation


def weak_work(sys: CompositeSystem, rho_s: HermitianOperator, ctx: ThermalContext) -> float:
    """F(rho_S, H_S) - F(omega_beta(H_S), H_S)."""
    return free_energy(rho_s, sys.h_s, ctx).free_energy - free_energy(gibbs_state(sys.h_s, ctx), sys.h_s, ctx).free_energy


def optimal_work_protocol(
    sys: CompositeSystem,
    rho_s: HermitianOperator,
    h1_s: HermitianOperator,
    hN_s: HermitianOperator,
    n_steps: int,
    ctx: ThermalContext,
) -> tuple[WorkLedger, CorrectionReport]:
    """Quench to h1_s, couple, isothermal to hN_s, decouple, quench back to H_S."""
    ledger = WorkLedger()
    start, state, dissipation = _run_contact(sys, rho_s, h1_s, hN_s, n_steps, ctx, ledger)
    state = record_step(state, ProtocolStep.quench(sys.h_s), ctx, ledger, Phase.W3)

    w_weak = weak_work(sys, rho_s, ctx)
    irr = delta_f_irr(sys, rho_s, h1_s, ctx)
    res = delta_f_res(sys, hN_s, ctx)
    report = CorrectionReport(
        w_weak=w_weak,
        delta_f_irr=irr,
        delta_f_res=res,
        w_total=w_weak - irr - res,
        dissipation=dissipation,
    )

    gap = first_law_gap(ledger, start, state)
    if abs(gap) > 1e-9:
        logger.warning(f"First-law gap {gap:.3e} in optimal_work_protocol at g={sys.g}")
    return ledger, report


def heat_report(
    sys: CompositeSystem,
    rho_s: HermitianOperator,
    h1_s: HermitianOperator,
    hN_s: HermitianOperator,
    n_steps: int,
    ctx: ThermalContext,
) -> HeatReport:
    """Heat of the contact protocol without the final cyclic quench."""
    ledger = WorkLedger()
    _, state, dissipation = _run_contact(sys, rho_s, h1_s, hN_s, n_steps, ctx, ledger)

    rho_s_final = partial_trace(state.rho, Side.S, sys)
    rho_b_final = partial_trace(state.rho, Side.B, sys)
    delta_e_s = hN_s.expectation(rho_s_final) - sys.h_s.expectation(rho_s)
    q_bath = -delta_e_s - ledger.total

    return HeatReport(
        q_bath=q_bath,
        q_system=-q_bath,
        entropy_change=von_neumann_entropy(rho_s_final) - von_neumann_entropy(rho_s),
        temperature=ctx.temperature,
        res_b=relative_entropy(rho_b_final, gibbs_state(sys.h_b, ctx)) / ctx.beta,
        mutual=mutual_information(state.rho, (sys.dim_s, sys.dim_b)) / ctx.beta,
        irr=delta_f_irr(sys, rho_s, h1_s, ctx),
        dissipation=dissipation,
        delta_e_s=delta_e_s,
        work=ledger.total,
    )
