import itertools
import logging
from collections.abc import Callable

import numpy as np

from src.models.errors import DimensionMismatchError
from src.models.errors import RankDeficientStateError
from src.models.operators import CompositeSystem
from src.models.operators import HermitianOperator
from src.models.operators import Side
from src.models.optimization import BoundReport
from src.models.optimization import OptimumSolution
from src.models.optimization import PerturbativeReport
from src.models.thermal import ThermalContext
from src.operators.operator_core import MatrixFunction
from src.operators.operator_core import embed
from src.operators.operator_core import matrix_function
from src.operators.operator_core import operator_norm
from src.operators.operator_core import partial_trace
from src.operators.operator_core import partial_trace_matrix
from src.operators.operator_core import random_hermitian
from src.operators.operator_core import tensor
from src.operators.operator_core import total_hamiltonian
from src.thermo.gibbs_thermo import equilibrium_free_energy
from src.thermo.gibbs_thermo import free_energy
from src.thermo.gibbs_thermo import generalized_covariance
from src.thermo.gibbs_thermo import gibbs_state
from src.thermo.gibbs_thermo import kubo_mori_product
from src.thermo.gibbs_thermo import mutual_information

logger = logging.getLogger(__name__)

RANK_TOL = 1e-12
MAX_ITERATIONS = 10_000
N_STARTS = 5
STEP_MIN = 1e-14
# objective changes below this are roundoff; steps within it are accepted if the gradient shrinks
NOISE_FLOOR = 1e-13

Objective = Callable[[HermitianOperator], float]
Gradient = Callable[[HermitianOperator], HermitianOperator]


def traceless(op: HermitianOperator) -> HermitianOperator:
    return op - (op.trace() / op.dim) * HermitianOperator.identity(op.dim)


def _traceless_basis(dim: int) -> np.ndarray:
    """Hilbert-Schmidt orthonormal basis of traceless Hermitian dim x dim matrices."""
    basis = []
    for j, k in itertools.combinations(range(dim), 2):
        sym = np.zeros((dim, dim), dtype=complex)
        sym[j, k] = sym[k, j] = 1.0 / np.sqrt(2.0)
        anti = np.zeros((dim, dim), dtype=complex)
        anti[j, k] = -1j / np.sqrt(2.0)
        anti[k, j] = 1j / np.sqrt(2.0)
        basis.extend([sym, anti])
    for level in range(1, dim):
        diag = np.zeros(dim)
        diag[:level] = 1.0
        diag[level] = -level
        basis.append(np.diag(diag / np.sqrt(level * (level + 1))).astype(complex))
    return np.array(basis).reshape(-1, dim, dim)


def _to_params(op: HermitianOperator, basis: np.ndarray) -> np.ndarray:
    return np.einsum("aji,ij->a", basis, op.entries).real


def _from_params(params: np.ndarray, basis: np.ndarray) -> HermitianOperator:
    return HermitianOperator.trusted(np.einsum("a,aij->ij", params, basis))


def _check_full_rank(rho_s: HermitianOperator) -> None:
    lowest = float(np.linalg.eigvalsh(rho_s.entries)[0])
    if lowest <= RANK_TOL:
        raise RankDeficientStateError(f"rho_S must be full rank, smallest eigenvalue {lowest:.3e}.")


def delta_f_irr(
    sys: CompositeSystem, rho_s: HermitianOperator, h1_s: HermitianOperator, ctx: ThermalContext
) -> float:
    """F(rho_S (x) omega_beta(H_B), H^(1)) - F(omega_beta(H^(1)), H^(1))."""
    rho0 = tensor(rho_s, gibbs_state(sys.h_b, ctx))
    h1 = total_hamiltonian(sys, h_s=h1_s)
    return free_energy(rho0, h1, ctx).free_energy - equilibrium_free_energy(h1, ctx)


def delta_f_irr_gradient(
    sys: CompositeSystem, rho_s: HermitianOperator, h1_s: HermitianOperator, ctx: ThermalContext
) -> HermitianOperator:
    omega = gibbs_state(total_hamiltonian(sys, h_s=h1_s), ctx)
    return rho_s - partial_trace(omega, Side.S, sys)


def delta_f_res(sys: CompositeSystem, hN_s: HermitianOperator, ctx: ThermalContext) -> float:
    """F(omega^(N), H^(0)) - F(omega_beta(H^(0)), H^(0)) = T S(omega^(N) || omega_beta(H^(0)))."""
    h0 = total_hamiltonian(sys, coupled=False)
    omega_n = gibbs_state(total_hamiltonian(sys, h_s=hN_s), ctx)
    return free_energy(omega_n, h0, ctx).free_energy - equilibrium_free_energy(h0, ctx)


def delta_f_res_residual(sys: CompositeSystem, hN_s: HermitianOperator, ctx: ThermalContext) -> HermitianOperator:
    """tr_B(omega) tr(A_{Z,beta} omega) - tr_B(omega A_{Z,beta}) with A = H^(0) - Z."""
    h_z = total_hamiltonian(sys, h_s=hN_s)
    omega = gibbs_state(h_z, ctx)
    shifted = total_hamiltonian(sys, coupled=False) - h_z
    weighted = kubo_mori_product(shifted, h_z, ctx)
    return HermitianOperator.trusted(
        shifted.expectation(omega) * partial_trace_matrix(omega.entries, Side.S, (sys.dim_s, sys.dim_b))
        - partial_trace_matrix(weighted.entries, Side.S, (sys.dim_s, sys.dim_b))
    )


def delta_f_res_gradient(sys: CompositeSystem, hN_s: HermitianOperator, ctx: ThermalContext) -> HermitianOperator:
    return ctx.beta * delta_f_res_residual(sys, hN_s, ctx)


def gradient_descent(
    objective: Objective,
    gradient: Gradient,
    start: HermitianOperator,
    tol: float,
    max_iter: int = MAX_ITERATIONS,
) -> tuple[HermitianOperator, float, float, int, bool]:
    """Backtracking descent over traceless Hermitian matrices.

    The step doubles after every accepted move and halves until the
    objective decreases. Returns (x, f(x), gradient norm, iterations, converged).
    """
    basis = _traceless_basis(start.dim)
    x = _to_params(traceless(start), basis)
    f = objective(_from_params(x, basis))
    grad = _to_params(gradient(_from_params(x, basis)), basis)
    grad_norm = float(np.linalg.norm(grad))
    mu = 1.0
    iteration = 0

    while grad_norm > tol and iteration < max_iter:
        mu *= 2.0
        while True:
            candidate = x - mu * grad
            f_new = objective(_from_params(candidate, basis))
            if f_new < f:
                grad_new = _to_params(gradient(_from_params(candidate, basis)), basis)
                break
            if f_new <= f + NOISE_FLOOR:
                grad_new = _to_params(gradient(_from_params(candidate, basis)), basis)
                if np.linalg.norm(grad_new) < grad_norm:
                    break
            mu /= 2.0
            if mu <= STEP_MIN:
                logger.debug(f"Step size underflow at iteration {iteration}, |grad|={grad_norm:.3e}")
                return _from_params(x, basis), f, grad_norm, iteration, False
        x, f, grad = candidate, f_new, grad_new
        grad_norm = float(np.linalg.norm(grad))
        iteration += 1
        if iteration % 1000 == 0:
            logger.debug(f"iteration {iteration}: f={f:.6e} |grad|={grad_norm:.3e}")

    return _from_params(x, basis), f, grad_norm, iteration, grad_norm <= tol


def _multi_start(
    objective: Objective,
    gradient: Gradient,
    residual: Gradient,
    anchor: HermitianOperator,
    n_starts: int,
    rng: np.random.Generator | None,
) -> OptimumSolution:
    rng = np.random.default_rng(0) if rng is None else rng
    tol = 1e-8 * anchor.dim
    scale = 0.1 * max(1.0, operator_norm(traceless(anchor)))
    starts = [anchor] + [
        anchor + random_hermitian(anchor.dim, rng, scale) for _ in range(max(n_starts, 1) - 1)
    ]

    best: OptimumSolution | None = None
    for start in starts:
        x, f, _, iterations, converged = gradient_descent(objective, gradient, start, tol)
        candidate = OptimumSolution(
            h_s_opt=x,
            residual_norm=float(np.linalg.norm(residual(x).entries)),
            objective=f,
            iterations=iterations,
            converged=converged,
        )
        if best is None or candidate.objective < best.objective:
            best = candidate

    if not best.converged:
        logger.warning(
            f"Optimizer did not converge after {best.iterations} iterations "
            f"(residual {best.residual_norm:.3e}); returning best iterate"
        )
    return best


def solve_marginal(
    sys: CompositeSystem,
    target_rho_s: HermitianOperator,
    ctx: ThermalContext,
    initial: HermitianOperator | None = None,
    n_starts: int = N_STARTS,
    rng: np.random.Generator | None = None,
) -> OptimumSolution:
    """Find X_S with tr_B omega_beta(X_S + H_B + gV) = target_rho_s.

    The objective is Delta F^(irr) for the initial state target (x) omega_beta(H_B),
    whose stationary points are exactly the solutions.
    """
    if target_rho_s.dim != sys.dim_s:
        raise DimensionMismatchError(f"Target has dimension {target_rho_s.dim}, expected {sys.dim_s}.")
    _check_full_rank(target_rho_s)
    anchor = initial
    if anchor is None:
        anchor = -(1.0 / ctx.beta) * matrix_function(target_rho_s, MatrixFunction.LOG)

    def gradient(x: HermitianOperator) -> HermitianOperator:
        return delta_f_irr_gradient(sys, target_rho_s, x, ctx)

    return _multi_start(
        lambda x: delta_f_irr(sys, target_rho_s, x, ctx),
        gradient,
        gradient,
        traceless(anchor),
        n_starts,
        rng,
    )


def solve_irr(
    sys: CompositeSystem,
    rho_s: HermitianOperator,
    ctx: ThermalContext,
    n_starts: int = N_STARTS,
    rng: np.random.Generator | None = None,
) -> OptimumSolution:
    """Optimal coupling Hamiltonian H_S^(1), anchored at H~_S = -T log rho_S."""
    return solve_marginal(sys, rho_s, ctx, n_starts=n_starts, rng=rng)


def solve_res(
    sys: CompositeSystem,
    ctx: ThermalContext,
    n_starts: int = N_STARTS,
    rng: np.random.Generator | None = None,
    initial: HermitianOperator | None = None,
) -> OptimumSolution:
    """Optimal decoupling Hamiltonian H_S^(N), anchored at H_S."""
    anchor = sys.h_s if initial is None else initial
    return _multi_start(
        lambda z: delta_f_res(sys, z, ctx),
        lambda z: delta_f_res_gradient(sys, z, ctx),
        lambda z: delta_f_res_residual(sys, z, ctx),
        traceless(anchor),
        n_starts,
        rng,
    )


def shifted_interaction(sys: CompositeSystem, ctx: ThermalContext) -> tuple[HermitianOperator, HermitianOperator]:
    """tr_B(V omega_beta(H_B)) on S and V~ = V - tr_B(V omega_beta(H_B)) (x) 1."""
    bath_weight = embed(gibbs_state(sys.h_b, ctx), Side.B, sys)
    mean_field = HermitianOperator.trusted(
        partial_trace_matrix(sys.v.entries @ bath_weight.entries, Side.S, (sys.dim_s, sys.dim_b))
    )
    return mean_field, sys.v - embed(mean_field, Side.S, sys)


def perturbative_endpoints(
    sys: CompositeSystem,
    rho_s: HermitianOperator,
    ctx: ThermalContext,
    gauge: HermitianOperator | None = None,
) -> PerturbativeReport:
    """First-order endpoints and the g^2 coefficients (beta/2) cov(V~, V~).

    ``gauge`` adds an operator M on S to V~; the coefficients do not depend
    on it when M is proportional to the identity.
    """
    _check_full_rank(rho_s)
    mean_field, v_tilde = shifted_interaction(sys, ctx)
    if gauge is not None:
        v_tilde = v_tilde + embed(gauge, Side.S, sys)
    h_tilde_s = -(1.0 / ctx.beta) * matrix_function(rho_s, MatrixFunction.LOG)
    shift = -sys.g * mean_field

    h_tilde0 = total_hamiltonian(sys, h_s=h_tilde_s, coupled=False)
    h0 = total_hamiltonian(sys, coupled=False)
    return PerturbativeReport(
        first_order_shift=shift,
        h1_s=traceless(h_tilde_s + shift),
        hN_s=traceless(sys.h_s + shift),
        coefficient_irr=0.5 * ctx.beta * generalized_covariance(v_tilde, v_tilde, h_tilde0, ctx),
        coefficient_res=0.5 * ctx.beta * generalized_covariance(v_tilde, v_tilde, h0, ctx),
    )


def bound_check(
    sys: CompositeSystem,
    solutions: tuple[OptimumSolution, OptimumSolution],
    ctx: ThermalContext,
) -> BoundReport:
    """Compare the minimized Delta F^(irr), Delta F^(res) and T I(S:B) with 2||gV||."""
    irr, res = solutions
    omega_n = gibbs_state(total_hamiltonian(sys, h_s=res.h_s_opt), ctx)
    report = BoundReport(
        bound=2.0 * sys.g * operator_norm(sys.v),
        delta_f_irr=irr.objective,
        delta_f_res=res.objective,
        mutual_energy=mutual_information(omega_n, (sys.dim_s, sys.dim_b)) / ctx.beta,
    )
    if report.violations:
        logger.warning(f"Bound 2||gV|| violated at g={sys.g}: {report.violations}")
    return report


def grid_search_qubit(
    objective: Objective,
    center: HermitianOperator,
    span: float,
    points: int = 61,
    levels: int = 1,
) -> tuple[HermitianOperator, float]:
    """Dense search over h = a sx + b sy + c sz around ``center``.

    Each further level zooms onto the best point with a span of two grid spacings.
    """
    if center.dim != 2:
        raise DimensionMismatchError("grid_search_qubit works on qubit Hamiltonians only.")
    pauli = np.array([[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]], dtype=complex)
    best_params = np.einsum("aji,ij->a", pauli, traceless(center).entries).real / 2.0
    best_value = np.inf

    for _ in range(levels):
        axis = np.linspace(-span, span, points)
        origin = best_params.copy()
        for offsets in itertools.product(axis, repeat=3):
            params = origin + np.asarray(offsets)
            value = objective(HermitianOperator.trusted(np.einsum("a,aij->ij", params, pauli)))
            if value < best_value:
                best_value, best_params = value, params
        span = 2.0 * span / (points - 1)

    return HermitianOperator.trusted(np.einsum("a,aij->ij", best_params, pauli)), float(best_value)


def strong_coupling_limit_gap(
    sys: CompositeSystem,
    rho_s: HermitianOperator,
    g_grid: list[float],
    ctx: ThermalContext,
) -> list[float]:
    """Minimized Delta F^(irr) along a g grid, each solve warm-started from the previous."""
    values = []
    previous: HermitianOperator | None = None
    for g in g_grid:
        solution = solve_marginal(sys.with_g(g), rho_s, ctx, initial=previous, n_starts=1)
        previous = solution.h_s_opt
        values.append(solution.objective)
    return values
