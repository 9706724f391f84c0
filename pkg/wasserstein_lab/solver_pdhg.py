"""
Unregularized optimal transport as a saddle-point problem solved with the
Primal-Dual Hybrid Gradient method.

    min_{t >= 0} max_{l1, l2}  c^T t + <(l1, l2), K t - (mu, nu)>

K maps the vectorized plan to its (row sums, column sums) and is never materialized.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from aixtools.logging.logging_config import get_logger

from wasserstein_lab.constants import SolverName
from wasserstein_lab.core import as_cost, check_problem, transport_cost
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


@dataclass(frozen=True)
class MarginalOperator:
    """Matrix-free K: R^{n*m} -> R^n x R^m, t -> (T 1_m, T^T 1_n) for T = reshape(t, n x m)."""
    n: int
    m: int

    def apply(self, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        T = np.reshape(t, (self.n, self.m))
        return T.sum(axis=1), T.sum(axis=0)

    def adjoint(self, lam1: np.ndarray, lam2: np.ndarray) -> np.ndarray:
        """K^T (l1, l2): entry (i, j) is l1_i + l2_j, vectorized row-major."""
        return np.add.outer(lam1, lam2).ravel()

    def materialize(self) -> np.ndarray:
        K = np.zeros((self.n + self.m, self.n * self.m))
        for i in range(self.n):
            for j in range(self.m):
                K[i, i * self.m + j] = 1.0
                K[self.n + j, i * self.m + j] = 1.0
        return K


def operator_norm_bound(op: MarginalOperator) -> float:
    """L = sqrt(n + m); the all-ones vector attains eigenvalue n + m of K^T K."""
    return math.sqrt(op.n + op.m)


def solve_pdhg(
    C: CostMatrix | np.ndarray,
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    cfg: SolverConfig,
) -> tuple[TransportPlan, DualPotentials, SolveReport]:
    """
    Solve the transport LP with PDHG.

    Iterates t <- max(t - tau (K^T lam + c), 0), t_hat = 2 t_new - t,
    lam <- lam + sigma (K t_hat - (mu, nu)) with sigma = 1 / (tau L^2), all starting at 0.
    Stops once the marginal residual, the duality gap and the dual violation are all
    at most cfg.tol.

    Returns:
        plan, potentials (alpha = -l1, beta = -l2 so that alpha_i + beta_j <= C_ij), report
    """
    C = as_cost(C)
    check_problem(C, mu, nu)
    n, m = C.shape
    op = MarginalOperator(n, m)
    tau = cfg.tau
    sigma = 1.0 / (tau * operator_norm_bound(op) ** 2)
    c = C.values
    a, b = mu.weights, nu.weights

    logger.debug("PDHG start: shape=%s tau=%g sigma=%g", C.shape, tau, sigma)

    T = np.zeros((n, m))
    lam1 = np.zeros(n)
    lam2 = np.zeros(m)
    history: list[HistoryEntry] = []
    converged = False
    residual = gap = violation = math.inf
    it = 0

    for it in range(1, cfg.max_iter + 1):
        T_new = np.maximum(T - tau * (np.add.outer(lam1, lam2) + c), 0.0)
        T_hat = 2.0 * T_new - T
        T = T_new
        lam1 = lam1 + sigma * (T_hat.sum(axis=1) - a)
        lam2 = lam2 + sigma * (T_hat.sum(axis=0) - b)

        residual = max(float(np.max(np.abs(T.sum(axis=1) - a))),
                       float(np.max(np.abs(T.sum(axis=0) - b))))
        primal = float(np.sum(T * c))
        dual = -float(lam1 @ a + lam2 @ b)
        gap = abs(primal - dual)
        violation = float(np.max(-(np.add.outer(lam1, lam2) + c)))

        if it % HISTORY_EVERY == 0 or it == 1:
            history.append(HistoryEntry(iteration=it, residual=residual, objective=primal))
        if residual <= cfg.tol and gap <= cfg.tol and violation <= cfg.tol:
            converged = True
            break

    if history and history[-1].iteration != it:
        history.append(HistoryEntry(iteration=it, residual=residual, objective=float(np.sum(T * c))))

    if converged:
        logger.info("PDHG converged in %d iterations (residual=%.3e gap=%.3e)", it, residual, gap)
    else:
        logger.warning("PDHG hit max_iter=%d (residual=%.3e gap=%.3e violation=%.3e)",
                       cfg.max_iter, residual, gap, violation)

    plan = TransportPlan(values=T)
    distance = transport_cost(plan, C)
    report = SolveReport(
        solver=SolverName.PDHG,
        epsilon=0.0,
        distance=distance,
        regularized_objective=distance,
        iterations=it,
        marginal_residual=residual,
        converged=converged,
        dual_objective=-float(lam1 @ a + lam2 @ b),
        history=history,
        notes=[f"tau={tau}", f"sigma={sigma}", "stop: residual, gap and dual violation <= tol"],
    )
    return plan, DualPotentials(alpha=-lam1, beta=-lam2), report
