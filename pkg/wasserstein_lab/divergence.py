"""
Debiased Sinkhorn divergence and the fixed-plan gradient of the transport cost with
respect to the target samples.
"""
from __future__ import annotations

import numpy as np

from aixtools.logging.logging_config import get_logger

from wasserstein_lab.constants import DISTANCE_FLOOR, CostKind, SolverName
from wasserstein_lab.core import DegenerateInputError, InvalidArgumentError, UnsupportedError, uniform_measure
from wasserstein_lab.costs import pairwise_cost
from wasserstein_lab.models import DivergenceReport, SampleBatch, SolveReport, SolverConfig, TransportPlan
from wasserstein_lab.solvers import run_solver

logger = get_logger(__name__)

DIVERGENCE_SOLVERS = (
    SolverName.SINKHORN,
    SolverName.SINKHORN_CENTER,
    SolverName.FISTA,
    SolverName.FISTA_CENTER,
)


def _component(X: SampleBatch, Y: SampleBatch, kind: CostKind, cfg: SolverConfig,
               solver: SolverName, outer_iter: int | None) -> SolveReport:
    C = pairwise_cost(X, Y, kind)
    return run_solver(solver, C, uniform_measure(X.size), uniform_measure(Y.size), cfg, outer_iter).report


def sinkhorn_divergence(
    X: SampleBatch,
    Y: SampleBatch,
    kind: CostKind | str,
    cfg: SolverConfig,
    solver: SolverName | str = SolverName.SINKHORN,
    use_regularized: bool = True,
    outer_iter: int | None = None,
) -> DivergenceReport:
    """
    2 W(X, Y) - W(X, X) - W(Y, Y) under uniform weights, all three solves sharing `cfg`.

    Components are the regularized objectives unless `use_regularized` is False, in which
    case the sharp costs <T, C> are combined.
    """
    kind = CostKind(kind)
    solver = SolverName(solver)
    if solver not in DIVERGENCE_SOLVERS:
        raise InvalidArgumentError(f"divergence needs a regularized solver, got {solver.value}")

    reports = [
        _component(X, Y, kind, cfg, solver, outer_iter),
        _component(X, X, kind, cfg, solver, outer_iter),
        _component(Y, Y, kind, cfg, solver, outer_iter),
    ]
    w_xy, w_xx, w_yy = (r.regularized_objective if use_regularized else r.distance for r in reports)
    value = 2.0 * w_xy - w_xx - w_yy
    logger.debug("Divergence %s/%s: w_xy=%.6g w_xx=%.6g w_yy=%.6g value=%.6g",
                 solver.value, kind.value, w_xy, w_xx, w_yy, value)
    return DivergenceReport(value=value, w_xy=w_xy, w_xx=w_xx, w_yy=w_yy,
                            use_regularized=use_regularized, solver_reports=reports)


def plan_gradient(T: TransportPlan | np.ndarray, X: SampleBatch, Y: SampleBatch,
                  kind: CostKind | str) -> np.ndarray:
    """
    Gradient of sum_ij T_ij c(x_i, y_j) with respect to the rows of Y, holding T fixed.

    Returns:
        np.ndarray: m x d matrix, row j the gradient for y_j

    Raises:
        UnsupportedError: SSIM cost
        InvalidArgumentError: shapes disagree
        DegenerateInputError: cosine cost with a zero-norm row
    """
    kind = CostKind(kind)
    t = T.values if isinstance(T, TransportPlan) else np.asarray(T, dtype=float)
    x, y = X.data, Y.data
    if t.shape != (X.size, Y.size) or X.dim != Y.dim:
        raise InvalidArgumentError(f"plan {t.shape} does not match batches ({X.size}, {Y.size})")

    match kind:
        case CostKind.SQUARED_L2:
            return 2.0 * (t.sum(axis=0)[:, None] * y - t.T @ x)
        case CostKind.L2:
            grad = np.zeros_like(y)
            for i in range(X.size):
                diff = y - x[i]
                norms = np.maximum(np.linalg.norm(diff, axis=1), DISTANCE_FLOOR)
                grad += (t[i] / norms)[:, None] * diff
            return grad
        case CostKind.L1:
            grad = np.zeros_like(y)
            for i in range(X.size):
                grad += t[i][:, None] * np.sign(y - x[i])
            return grad
        case CostKind.COSINE:
            x_norm = np.linalg.norm(x, axis=1)
            y_norm = np.linalg.norm(y, axis=1)
            if np.any(x_norm == 0.0) or np.any(y_norm == 0.0):
                raise DegenerateInputError("cosine gradient undefined for a zero-norm row")
            x_unit = x / x_norm[:, None]
            pulled = t.T @ x_unit
            projections = np.sum(t * (x_unit @ y.T), axis=0)
            return -(pulled / y_norm[:, None] - (projections / y_norm**3)[:, None] * y)
        case _:
            raise UnsupportedError(f"no analytic gradient for the {kind.value} cost")
