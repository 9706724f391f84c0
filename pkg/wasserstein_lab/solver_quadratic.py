"""
Quadratically regularized optimal transport solved in the dual with FISTA, and the
proximal variant FISTA-Center that re-solves around the previous plan.

For a center t (zero for the plain problem) the primal is

    min_{T >= 0, T 1 = mu, T^T 1 = nu}  <C, T> + (eps / 2) ||T - t||^2

and the dual maximized here is

    D(alpha, beta) = alpha^T mu + beta^T nu - sum_ij phi(alpha_i + beta_j - C_ij)
    phi(x) = (eps / 2) [x / eps + t]_+^2 - (eps / 2) t^2

with plan recovery T = [t + (alpha_i + beta_j - C_ij) / eps]_+.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from aixtools.logging.logging_config import get_logger

from wasserstein_lab.constants import SolverName
from wasserstein_lab.core import (
    InvalidArgumentError,
    as_cost,
    check_problem,
    marginal_residual,
    transport_cost,
)
from wasserstein_lab.models import (
    CostMatrix,
    DiscreteMeasure,
    DualPotentials,
    HistoryEntry,
    SolveReport,
    SolverConfig,
    TransportPlan,
)

logger = get_logger(__name__)

HISTORY_EVERY = 100


@dataclass
class FistaState:
    """Iterates and momentum index of the dual ascent."""
    alpha: np.ndarray
    beta: np.ndarray
    step_bound: float
    k: int = 1
    alpha_prev: np.ndarray = field(default=None)  # type: ignore[assignment]
    beta_prev: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.alpha_prev is None:
            self.alpha_prev = self.alpha.copy()
        if self.beta_prev is None:
            self.beta_prev = self.beta.copy()

    @property
    def extrapolation(self) -> float:
        return (self.k - 1) / (self.k + 2)

    def restart(self) -> None:
        self.k = 1


def _check_epsilon(cfg: SolverConfig) -> float:
    if cfg.epsilon <= 0:
        raise InvalidArgumentError(f"quadratic solvers need epsilon > 0 (L = (n+m)/eps), got {cfg.epsilon}")
    return cfg.epsilon


def _slack(alpha: np.ndarray, beta: np.ndarray, C: np.ndarray) -> np.ndarray:
    return alpha[:, None] + beta[None, :] - C


def quadratic_plan(alpha: np.ndarray, beta: np.ndarray, C: np.ndarray, eps: float,
                   center: np.ndarray | None = None) -> np.ndarray:
    """T = [center + (alpha_i + beta_j - C_ij) / eps]_+."""
    x = _slack(alpha, beta, C) / eps
    if center is not None:
        x = x + center
    return np.maximum(x, 0.0)


def quadratic_dual_objective(alpha: np.ndarray, beta: np.ndarray, C: np.ndarray, mu: np.ndarray,
                             nu: np.ndarray, eps: float, center: np.ndarray | None = None) -> float:
    T = quadratic_plan(alpha, beta, C, eps, center)
    value = float(alpha @ mu + beta @ nu) - 0.5 * eps * float(np.sum(T * T))
    if center is not None:
        value += 0.5 * eps * float(np.sum(center * center))
    return value


def quadratic_dual_gradient(alpha: np.ndarray, beta: np.ndarray, C: np.ndarray, mu: np.ndarray,
                            nu: np.ndarray, eps: float,
                            center: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """(mu - T 1, nu - T^T 1) for the recovered plan T."""
    T = quadratic_plan(alpha, beta, C, eps, center)
    return mu - T.sum(axis=1), nu - T.sum(axis=0)


def quadratic_primal_objective(T: np.ndarray, C: np.ndarray, eps: float,
                               center: np.ndarray | None = None) -> float:
    diff = T if center is None else T - center
    return transport_cost(T, C) + 0.5 * eps * float(np.sum(diff * diff))


def _fista_dual(
    C: np.ndarray,
    mu: np.ndarray,
    nu: np.ndarray,
    eps: float,
    center: np.ndarray,
    state: FistaState,
    iters: int,
    tol: float,
    restart: bool,
    history: list[HistoryEntry] | None = None,
) -> tuple[int, float]:
    """
    Run up to `iters` FISTA ascent steps on the centered dual, updating `state` in place.

    Returns:
        (iterations performed, marginal residual of the plan at the last iterate)
    """
    step = 1.0 / state.step_bound
    residual = math.inf
    it = 0
    for it in range(1, iters + 1):
        w = state.extrapolation
        y_alpha = state.alpha + w * (state.alpha - state.alpha_prev)
        y_beta = state.beta + w * (state.beta - state.beta_prev)
        g_alpha, g_beta = quadratic_dual_gradient(y_alpha, y_beta, C, mu, nu, eps, center)

        new_alpha = y_alpha + step * g_alpha
        new_beta = y_beta + step * g_beta
        if restart:
            # ascent direction opposing the move: drop the momentum
            if g_alpha @ (new_alpha - state.alpha) + g_beta @ (new_beta - state.beta) < 0:
                state.restart()
            else:
                state.k += 1
        else:
            state.k += 1
        state.alpha_prev, state.beta_prev = state.alpha, state.beta
        state.alpha, state.beta = new_alpha, new_beta

        T = quadratic_plan(state.alpha, state.beta, C, eps, center)
        residual = marginal_residual(T, mu, nu)
        if history is not None and (it % HISTORY_EVERY == 0 or it == 1):
            history.append(HistoryEntry(iteration=it, residual=residual, objective=transport_cost(T, C)))
        if residual <= tol:
            break
    return it, residual


def solve_fista(
    C: CostMatrix | np.ndarray,
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    cfg: SolverConfig,
) -> tuple[TransportPlan, DualPotentials, SolveReport]:
    """
    Maximize the quadratic-regularized dual with FISTA, step 1 / L and L = (n + m) / eps.

    Starts from alpha = beta = 0 and stops once the recovered plan's marginal residual
    is at most cfg.tol or after cfg.max_iter steps.

    Raises:
        InvalidArgumentError: epsilon <= 0
    """
    C = as_cost(C)
    check_problem(C, mu, nu)
    eps = _check_epsilon(cfg)
    n, m = C.shape
    logger.debug("FISTA start: shape=%s eps=%g restart=%s", C.shape, eps, cfg.fista_restart)

    state = FistaState(alpha=np.zeros(n), beta=np.zeros(m), step_bound=(n + m) / eps)
    center = np.zeros((n, m))
    history: list[HistoryEntry] = []
    it, residual = _fista_dual(C.values, mu.weights, nu.weights, eps, center, state,
                               cfg.max_iter, cfg.tol, cfg.fista_restart, history)
    T = quadratic_plan(state.alpha, state.beta, C.values, eps, center)
    if history[-1].iteration != it:
        history.append(HistoryEntry(iteration=it, residual=residual, objective=transport_cost(T, C)))

    converged = residual <= cfg.tol
    _log_outcome("FISTA", converged, it, residual)
    report = SolveReport(
        solver=SolverName.FISTA,
        epsilon=eps,
        distance=transport_cost(T, C),
        regularized_objective=quadratic_primal_objective(T, C.values, eps),
        iterations=it,
        marginal_residual=residual,
        converged=converged,
        dual_objective=quadratic_dual_objective(state.alpha, state.beta, C.values,
                                                mu.weights, nu.weights, eps, center),
        history=history,
        notes=[f"L={state.step_bound}", f"restart={cfg.fista_restart}"],
    )
    return TransportPlan(values=T), DualPotentials(alpha=state.alpha, beta=state.beta), report


def solve_fista_center(
    C: CostMatrix | np.ndarray,
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    cfg: SolverConfig,
    outer_iter: int,
) -> tuple[TransportPlan, DualPotentials, SolveReport]:
    """
    Proximal quadratic OT: each outer step solves the dual centered at the previous plan
    (T^0 = 0) with at most cfg.inner_iter FISTA steps, warm-starting the potentials.

    The center update is T^k = [T^{k-1} + (alpha_i + beta_j - C_ij) / eps]_+, or the same
    without the T^{k-1} term when cfg.literal_center_update is set.
    """
    C = as_cost(C)
    check_problem(C, mu, nu)
    eps = _check_epsilon(cfg)
    if outer_iter < 1:
        raise InvalidArgumentError(f"outer_iter must be >= 1, got {outer_iter}")
    n, m = C.shape
    logger.debug("FISTA-Center start: shape=%s eps=%g outer=%d inner=%d",
                 C.shape, eps, outer_iter, cfg.inner_iter)

    state = FistaState(alpha=np.zeros(n), beta=np.zeros(m), step_bound=(n + m) / eps)
    center = np.zeros((n, m))
    history: list[HistoryEntry] = []
    inner_total = 0
    residual = math.inf
    dual = primal = 0.0
    for k in range(1, outer_iter + 1):
        state.k = 1
        state.alpha_prev, state.beta_prev = state.alpha.copy(), state.beta.copy()
        inner, residual = _fista_dual(C.values, mu.weights, nu.weights, eps, center, state,
                                      cfg.inner_iter, cfg.tol, cfg.fista_restart)
        inner_total += inner
        dual = quadratic_dual_objective(state.alpha, state.beta, C.values, mu.weights, nu.weights,
                                        eps, center)
        T = quadratic_plan(state.alpha, state.beta, C.values, eps,
                           None if cfg.literal_center_update else center)
        primal = quadratic_primal_objective(T, C.values, eps, center)
        center = T
        history.append(HistoryEntry(iteration=k, residual=residual, objective=transport_cost(T, C)))
        logger.debug("FISTA-Center outer %d: inner=%d residual=%.3e cost=%.6g",
                     k, inner, residual, history[-1].objective)

    converged = residual <= cfg.tol
    _log_outcome("FISTA-Center", converged, outer_iter, residual)
    report = SolveReport(
        solver=SolverName.FISTA_CENTER,
        epsilon=eps,
        distance=transport_cost(center, C),
        regularized_objective=primal,
        iterations=outer_iter,
        marginal_residual=marginal_residual(center, mu.weights, nu.weights),
        converged=converged,
        dual_objective=dual,
        history=history,
        notes=["T0 = 0", f"inner_iter={cfg.inner_iter}", f"inner_total={inner_total}",
               f"literal_center_update={cfg.literal_center_update}", f"restart={cfg.fista_restart}"],
    )
    return TransportPlan(values=center), DualPotentials(alpha=state.alpha, beta=state.beta), report


def _log_outcome(name: str, converged: bool, iterations: int, residual: float) -> None:
    if converged:
        logger.info("%s converged in %d iterations (residual=%.3e)", name, iterations, residual)
    else:
        logger.warning("%s stopped after %d iterations (residual=%.3e)", name, iterations, residual)
