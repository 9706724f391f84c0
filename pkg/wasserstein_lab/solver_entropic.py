"""
Entropy-regularized optimal transport: Sinkhorn scaling and its Bregman-proximal
variant Sinkhorn-Center.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, xlogy

from aixtools.logging.logging_config import get_logger

from wasserstein_lab.constants import UNDERFLOW_FLOOR, SolverName
from wasserstein_lab.core import (
    InvalidArgumentError,
    NumericalUnderflowError,
    as_cost,
    check_problem,
    marginal_residual,
    transport_cost,
)
from wasserstein_lab.models import (
    CostMatrix,
    DiscreteMeasure,
    HistoryEntry,
    SolveReport,
    SolverConfig,
    TransportPlan,
)

logger = get_logger(__name__)

HISTORY_EVERY = 50
CENTER_PRODUCT_NOTE = "Q = T_k * gibbs read as the entrywise product"


@dataclass
class ScalingState:
    """
    Scalings of a Sinkhorn solve: plan = diag(a) gibbs diag(b).

    In the log domain `a` and `b` hold log-scalings and `gibbs` holds -C / eps.
    """
    a: np.ndarray
    b: np.ndarray
    gibbs: np.ndarray
    log_domain: bool = False

    def plan(self) -> np.ndarray:
        if self.log_domain:
            return np.exp(self.a[:, None] + self.gibbs + self.b[None, :])
        return self.a[:, None] * self.gibbs * self.b[None, :]


def _check_epsilon(cfg: SolverConfig) -> float:
    if cfg.epsilon <= 0:
        raise InvalidArgumentError(f"entropic solvers need epsilon > 0, got {cfg.epsilon}")
    return cfg.epsilon


def _safe_divide(num: np.ndarray, den: np.ndarray, what: str) -> np.ndarray:
    if np.min(den) < UNDERFLOW_FLOOR:
        raise NumericalUnderflowError(
            f"{what} fell below {UNDERFLOW_FLOOR:g}; epsilon is too small for this cost "
            "(use log_domain=True)"
        )
    return num / den


def _scale(state: ScalingState, mu: np.ndarray, nu: np.ndarray, iters: int, tol: float,
           history: list[HistoryEntry] | None = None, C: np.ndarray | None = None) -> tuple[int, float]:
    """Run up to `iters` (a, b) update pairs in place; returns (iterations, mu-residual)."""
    residual = math.inf
    it = 0
    if state.log_domain:
        with np.errstate(divide="ignore"):
            log_mu, log_nu = np.log(mu), np.log(nu)
    for it in range(1, iters + 1):
        if state.log_domain:
            state.a = log_mu - logsumexp(state.gibbs + state.b[None, :], axis=1)
            state.b = log_nu - logsumexp(state.gibbs + state.a[:, None], axis=0)
            rows = np.exp(state.a + logsumexp(state.gibbs + state.b[None, :], axis=1))
        else:
            state.a = _safe_divide(mu, state.gibbs @ state.b, "gibbs @ b")
            state.b = _safe_divide(nu, state.gibbs.T @ state.a, "gibbs^T @ a")
            rows = state.a * (state.gibbs @ state.b)
        residual = float(np.max(np.abs(rows - mu)))
        if history is not None and (it % HISTORY_EVERY == 0 or it == 1):
            history.append(HistoryEntry(iteration=it, residual=residual,
                                        objective=float(np.sum(state.plan() * C))))
        if residual <= tol:
            break
    return it, residual


def entropic_objective(T: np.ndarray, C: CostMatrix, eps: float) -> float:
    """<T, C> + eps * sum T log T, with 0 log 0 = 0."""
    return transport_cost(T, C) + eps * float(np.sum(xlogy(T, T)))


def solve_sinkhorn(
    C: CostMatrix | np.ndarray,
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    cfg: SolverConfig,
) -> tuple[TransportPlan, SolveReport]:
    """
    Sinkhorn scaling from b = 1 until the mu-residual reaches cfg.tol or cfg.max_iter.

    Raises:
        InvalidArgumentError: epsilon <= 0
        NumericalUnderflowError: a scaling denominator vanished (standard domain only)
    """
    C = as_cost(C)
    check_problem(C, mu, nu)
    eps = _check_epsilon(cfg)
    logger.debug("Sinkhorn start: shape=%s eps=%g log_domain=%s", C.shape, eps, cfg.log_domain)

    kernel = -C.values / eps if cfg.log_domain else np.exp(-C.values / eps)
    init_b = np.zeros(C.shape[1]) if cfg.log_domain else np.ones(C.shape[1])
    state = ScalingState(a=np.zeros(C.shape[0]), b=init_b, gibbs=kernel, log_domain=cfg.log_domain)

    history: list[HistoryEntry] = []
    it, residual = _scale(state, mu.weights, nu.weights, cfg.max_iter, cfg.tol, history, C.values)
    T = state.plan()
    if not history or history[-1].iteration != it:
        history.append(HistoryEntry(iteration=it, residual=residual, objective=transport_cost(T, C)))

    converged = residual <= cfg.tol
    _log_outcome("Sinkhorn", converged, it, residual)
    plan = TransportPlan(values=T)
    report = SolveReport(
        solver=SolverName.SINKHORN,
        epsilon=eps,
        distance=transport_cost(plan, C),
        regularized_objective=entropic_objective(T, C, eps),
        iterations=it,
        marginal_residual=marginal_residual(T, mu.weights, nu.weights),
        converged=converged,
        history=history,
        notes=["b0 = 1", f"log_domain={cfg.log_domain}"],
    )
    return plan, report


def solve_sinkhorn_center(
    C: CostMatrix | np.ndarray,
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    cfg: SolverConfig,
    outer_iter: int,
) -> tuple[TransportPlan, SolveReport]:
    """
    Proximal Sinkhorn: T_{k+1} = argmin <C, T> + eps KL(T | T_k), starting from mu nu^T.

    Each outer step rescales Q = T_k * exp(-C / eps) with cfg.inner_iter Sinkhorn pairs.
    With exact inner solves T_k is the entropic plan at eps / k, which is the epsilon used
    for the reported regularized objective.
    """
    C = as_cost(C)
    check_problem(C, mu, nu)
    eps = _check_epsilon(cfg)
    if outer_iter < 0:
        raise InvalidArgumentError(f"outer_iter must be >= 0, got {outer_iter}")
    logger.debug("Sinkhorn-Center start: shape=%s eps=%g outer=%d inner=%d",
                 C.shape, eps, outer_iter, cfg.inner_iter)

    n, m = C.shape
    T = np.outer(mu.weights, nu.weights)
    if cfg.log_domain:
        with np.errstate(divide="ignore"):
            log_T = np.log(T)
        step = -C.values / eps
    else:
        gibbs = np.exp(-C.values / eps)

    history = [HistoryEntry(iteration=0, residual=marginal_residual(T, mu.weights, nu.weights),
                            objective=transport_cost(T, C))]
    residual = history[0].residual
    for k in range(1, outer_iter + 1):
        if cfg.log_domain:
            state = ScalingState(a=np.zeros(n), b=np.zeros(m), gibbs=log_T + step, log_domain=True)
        else:
            state = ScalingState(a=np.zeros(n), b=np.ones(m), gibbs=T * gibbs)
        _, residual = _scale(state, mu.weights, nu.weights, cfg.inner_iter, cfg.tol)
        if cfg.log_domain:
            log_T = state.a[:, None] + state.gibbs + state.b[None, :]
            T = np.exp(log_T)
        else:
            T = state.plan()
        history.append(HistoryEntry(iteration=k, residual=residual, objective=transport_cost(T, C)))

    converged = residual <= cfg.tol
    _log_outcome("Sinkhorn-Center", converged, outer_iter, residual)
    plan = TransportPlan(values=T)
    distance = transport_cost(plan, C)
    effective_eps = eps / outer_iter if outer_iter else 0.0
    report = SolveReport(
        solver=SolverName.SINKHORN_CENTER,
        epsilon=eps,
        distance=distance,
        regularized_objective=entropic_objective(T, C, effective_eps) if outer_iter else distance,
        iterations=outer_iter,
        marginal_residual=marginal_residual(T, mu.weights, nu.weights),
        converged=converged,
        history=history,
        notes=[CENTER_PRODUCT_NOTE, "T0 = mu nu^T", f"inner_iter={cfg.inner_iter}",
               f"effective_epsilon={effective_eps}", f"log_domain={cfg.log_domain}"],
    )
    return plan, report


def _log_outcome(name: str, converged: bool, iterations: int, residual: float) -> None:
    if converged:
        logger.info("%s converged in %d iterations (residual=%.3e)", name, iterations, residual)
    else:
        logger.warning("%s stopped after %d iterations (residual=%.3e)", name, iterations, residual)
