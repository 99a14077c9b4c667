import logging
import math

import numpy as np

from src.models.engine import ContactPenalties
from src.models.engine import CycleReport
from src.models.engine import PowerBoundReport
from src.models.engine import TwoBathSetup
from src.models.operators import CompositeSystem
from src.models.operators import HermitianOperator
from src.models.operators import Side
from src.models.protocol import Phase
from src.models.protocol import ProtocolStep
from src.models.protocol import StepKind
from src.models.protocol import WorkLedger
from src.models.thermal import ThermalContext
from src.operators.operator_core import commutator_norm
from src.operators.operator_core import embed
from src.operators.operator_core import partial_trace
from src.operators.operator_core import total_hamiltonian
from src.optimization.coupling_optimizer import delta_f_irr
from src.optimization.coupling_optimizer import solve_marginal
from src.protocol.protocol_engine import initial_state
from src.protocol.protocol_engine import isothermal_process
from src.protocol.protocol_engine import record_step
from src.thermo.gibbs_thermo import gibbs_state
from src.thermo.gibbs_thermo import mutual_information
from src.thermo.gibbs_thermo import relative_entropy
from src.thermo.gibbs_thermo import von_neumann_entropy

logger = logging.getLogger(__name__)

MARGINAL_TOL = 1e-7


def coupled_marginal(sys: CompositeSystem, h_s: HermitianOperator, ctx: ThermalContext) -> HermitianOperator:
    """tr_B omega_beta(h_s + H_B + gV)."""
    return partial_trace(gibbs_state(total_hamiltonian(sys, h_s=h_s), ctx), Side.S, sys)


def initial_setup(
    sys_hot: CompositeSystem,
    sys_cold: CompositeSystem,
    ctx_hot: ThermalContext,
    ctx_cold: ThermalContext,
    h_b: HermitianOperator,
    h_d: HermitianOperator,
) -> TwoBathSetup:
    """Setup with h_A, h_C at their weak-coupling values (beta ratios times h_D, h_B)."""
    return TwoBathSetup(
        sys_hot=sys_hot,
        sys_cold=sys_cold,
        ctx_hot=ctx_hot,
        ctx_cold=ctx_cold,
        h_a=(ctx_cold.beta / ctx_hot.beta) * h_d,
        h_b=h_b,
        h_c=(ctx_hot.beta / ctx_cold.beta) * h_b,
        h_d=h_d,
    )


def build_optimal_cycle(setup: TwoBathSetup, rng: np.random.Generator | None = None) -> TwoBathSetup:
    """Solve for h_A and h_C so that no free energy is lost when switching baths.

    h_B and h_D stay fixed; the hot contact must end where the cold one starts
    and vice versa, in terms of the S marginal.
    """
    target_c = coupled_marginal(setup.sys_hot, setup.h_b, setup.ctx_hot)
    target_a = coupled_marginal(setup.sys_cold, setup.h_d, setup.ctx_cold)

    solution_c = solve_marginal(setup.sys_cold, target_c, setup.ctx_cold, initial=setup.h_c, n_starts=1, rng=rng)
    solution_a = solve_marginal(setup.sys_hot, target_a, setup.ctx_hot, initial=setup.h_a, n_starts=1, rng=rng)
    for name, solution in (("h_A", solution_a), ("h_C", solution_c)):
        if not solution.converged or solution.residual_norm > MARGINAL_TOL:
            logger.warning(f"Endpoint {name} not converged: marginal mismatch {solution.residual_norm:.3e}")

    return setup.model_copy(update={"h_a": solution_a.h_s_opt, "h_c": solution_c.h_s_opt})


def _contact(
    sys: CompositeSystem,
    rho_s: HermitianOperator,
    h_start: HermitianOperator,
    h_end: HermitianOperator,
    n_steps: int,
    ctx: ThermalContext,
    ledger: WorkLedger,
) -> tuple[HermitianOperator, float, ContactPenalties]:
    """One isothermal contact with a fresh bath; returns final rho_S, bath-absorbed heat and penalties."""
    contact_ledger = WorkLedger()
    state = initial_state(sys.with_h_s(h_start), rho_s, ctx)
    state = record_step(state, ProtocolStep.couple_on(), ctx, contact_ledger, Phase.W1)
    state, _, dissipation = isothermal_process(state, h_end, n_steps, ctx, ledger=contact_ledger)
    state = record_step(state, ProtocolStep.couple_off(), ctx, contact_ledger, Phase.W3)
    ledger.extend(contact_ledger)

    rho_s_final = partial_trace(state.rho, Side.S, sys)
    rho_b_final = partial_trace(state.rho, Side.B, sys)
    delta_e_s = h_end.expectation(rho_s_final) - h_start.expectation(rho_s)
    q_bath = -delta_e_s - contact_ledger.total

    penalties = ContactPenalties(
        res_b=relative_entropy(rho_b_final, gibbs_state(sys.h_b, ctx)) / ctx.beta,
        mutual=mutual_information(state.rho, (sys.dim_s, sys.dim_b)) / ctx.beta,
        irr=delta_f_irr(sys, rho_s, h_start, ctx),
        dissipation=dissipation,
    )
    return rho_s_final, q_bath, penalties


def weak_entropy_change(setup: TwoBathSetup) -> float:
    """S(omega_{beta_h}(h_B)) - S(omega_{beta_c}(h_D))."""
    return von_neumann_entropy(gibbs_state(setup.h_b, setup.ctx_hot)) - von_neumann_entropy(
        gibbs_state(setup.h_d, setup.ctx_cold)
    )


def run_cycle(setup: TwoBathSetup, n_steps: int) -> CycleReport:
    """Hot isothermal A -> B, quench to C, cold isothermal C -> D, quench back to A.

    Heats are absorbed-by-bath positive, so a working engine has q_hot < 0.
    """
    ledger = WorkLedger()
    rho_2 = coupled_marginal(setup.sys_cold, setup.h_d, setup.ctx_cold)

    rho_1, q_hot, penalties_hot = _contact(
        setup.sys_hot, rho_2, setup.h_a, setup.h_b, n_steps, setup.ctx_hot, ledger
    )
    ledger.record(len(ledger.entries), StepKind.QUENCH, (setup.h_b - setup.h_c).expectation(rho_1))
    rho_2_end, q_cold, penalties_cold = _contact(
        setup.sys_cold, rho_1, setup.h_c, setup.h_d, n_steps, setup.ctx_cold, ledger
    )
    ledger.record(len(ledger.entries), StepKind.QUENCH, (setup.h_d - setup.h_a).expectation(rho_2_end))

    w_net = ledger.total
    delta_s = von_neumann_entropy(rho_1) - von_neumann_entropy(rho_2)
    t_hot, t_cold = setup.ctx_hot.temperature, setup.ctx_cold.temperature
    is_engine = w_net > 0.0 and q_hot < 0.0 and delta_s > 0.0

    if is_engine:
        eta = 1.0 + q_cold / q_hot
        x_hot = penalties_hot.total / (t_hot * delta_s)
        x_cold = penalties_cold.total / (t_cold * delta_s)
        reversible_hot = (penalties_hot.total - penalties_hot.dissipation) / (t_hot * delta_s)
        reversible_cold = (penalties_cold.total - penalties_cold.dissipation) / (t_cold * delta_s)
        eta_reversible = 1.0 - t_cold * (1.0 + reversible_cold) / (t_hot * (1.0 - reversible_hot))
    else:
        logger.warning(f"Cycle at g={setup.sys_hot.g} is not an engine (w_net={w_net:.3e})")
        eta = eta_reversible = x_hot = x_cold = math.nan

    g = setup.sys_hot.g
    k_s = 0.0 if g == 0.0 else t_hot * (delta_s - weak_entropy_change(setup)) / g
    return CycleReport(
        q_hot=q_hot,
        q_cold=q_cold,
        w_net=w_net,
        eta=eta,
        eta_reversible=eta_reversible,
        eta_carnot=setup.eta_carnot,
        x_hot=x_hot,
        x_cold=x_cold,
        k_s_first_order=k_s,
        delta_s=delta_s,
        is_engine=is_engine,
        penalties_hot=penalties_hot,
        penalties_cold=penalties_cold,
        first_law_gap=w_net + q_hot + q_cold,
        g=g,
    )


def _tight(g: float, eta: float, r_hot: float, r_cold: float) -> float:
    if r_hot == 0.0 or r_cold == 0.0:
        return 0.0
    return g * r_cold * eta / (1.0 - eta + r_cold / r_hot)


def _time_bound(heat: float, g: float, rate: float) -> float:
    if g * rate == 0.0:
        return math.inf
    return abs(heat) / (g * rate)


def power_bound(setup: TwoBathSetup, report: CycleReport, contact_time: float) -> PowerBoundReport:
    """Bounds on the power from the contact-time lower bounds tau >= |Q| / (g ||[H_B, V]||).

    The measured power divides w_net by the executed duration, two contacts of
    contact_time each; quenches are instantaneous.
    """
    r_hot = commutator_norm(embed(setup.sys_hot.h_b, Side.B, setup.sys_hot), setup.sys_hot.v)
    r_cold = commutator_norm(embed(setup.sys_cold.h_b, Side.B, setup.sys_cold), setup.sys_cold.v)
    g = setup.sys_hot.g
    tau_hot = _time_bound(report.q_hot, g, r_hot)
    tau_cold = _time_bound(report.q_cold, g, r_cold)
    return PowerBoundReport(
        r_hot=r_hot,
        r_cold=r_cold,
        bound_tight=_tight(g, report.eta, r_hot, r_cold),
        bound_loose=g * r_hot * report.eta,
        bound_expanded=_tight(g, report.eta_carnot, r_hot, r_cold),
        tau_hot=tau_hot,
        tau_cold=tau_cold,
        contact_time=contact_time,
        power_measured=report.w_net / (2.0 * contact_time) if contact_time > 0.0 else 0.0,
    )


def fit_heat_correction(g_grid: list[float], heat_deficit: list[float]) -> float:
    """Least-squares K_q in heat_deficit ~ K_q g^2, heat_deficit = T Delta S - Q - dissipation."""
    g = np.asarray(g_grid, dtype=float)
    deficit = np.asarray(heat_deficit, dtype=float)
    return float(np.sum(g**2 * deficit) / np.sum(g**4))


def fit_entropy_shift(g_grid: list[float], t_delta_s: list[float]) -> float:
    """Slope K_S of a linear fit of T Delta S(g)."""
    return float(np.polyfit(np.asarray(g_grid, dtype=float), np.asarray(t_delta_s, dtype=float), 1)[0])


def efficiency_correction(
    setup: TwoBathSetup, k_q_hot: float, k_q_cold: float, g: float
) -> float:
    """eta^C - g^2 (T_c/T_h)(K_q^h / Q_h^weak + K_q^c / Q_c^weak)."""
    delta_s = weak_entropy_change(setup)
    t_hot, t_cold = setup.ctx_hot.temperature, setup.ctx_cold.temperature
    return setup.eta_carnot - g**2 * (t_cold / t_hot) * (
        k_q_hot / (t_hot * delta_s) + k_q_cold / (t_cold * delta_s)
    )
