"""
Independent oracles for checking the solvers: exact transport on small uniform problems by
permutation enumeration, primal-dual certificates and central finite differences.

Nothing here calls a solver.
"""
from __future__ import annotations

import itertools
from typing import Callable

import numpy as np

from aixtools.logging.logging_config import get_logger

from wasserstein_lab.constants import ORACLE_MAX_ATOMS
from wasserstein_lab.core import (
    InvalidArgumentError,
    UnsupportedError,
    as_cost,
    check_problem,
    marginal_residual,
    transport_cost,
)
from wasserstein_lab.models import Certificate, CostMatrix, DiscreteMeasure, DualPotentials, TransportPlan

logger = get_logger(__name__)


def exact_uniform_wasserstein(C: CostMatrix | np.ndarray) -> tuple[float, TransportPlan]:
    """
    Optimal transport between two uniform measures on n <= 8 atoms.

    The optimum over the Birkhoff polytope is attained at a permutation matrix, so all n!
    permutations are scored; ties go to the lexicographically smallest permutation.

    Raises:
        UnsupportedError: C is not square or has more than 8 rows
    """
    C = as_cost(C)
    n, m = C.shape
    if n != m or n > ORACLE_MAX_ATOMS:
        raise UnsupportedError(f"permutation oracle needs square n <= {ORACLE_MAX_ATOMS}, got {C.shape}")
    perms = np.array(list(itertools.permutations(range(n))))
    totals = C.values[np.arange(n), perms].sum(axis=1)
    best = int(np.argmin(totals))
    plan = np.zeros((n, n))
    plan[np.arange(n), perms[best]] = 1.0 / n
    value = float(totals[best]) / n
    logger.debug("Oracle over %d permutations: value=%.12g", len(perms), value)
    return value, TransportPlan(values=plan)


def certify(
    T: TransportPlan,
    potentials: DualPotentials,
    C: CostMatrix | np.ndarray,
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
) -> Certificate:
    """Primal value <T, C>, dual value alpha^T mu + beta^T nu, their gap and the feasibility errors."""
    C = as_cost(C)
    check_problem(C, mu, nu)
    if T.shape != C.shape or potentials.alpha.shape != (mu.size,) or potentials.beta.shape != (nu.size,):
        raise InvalidArgumentError("plan or potentials do not match the problem shape")
    primal = transport_cost(T, C)
    dual = float(potentials.alpha @ mu.weights + potentials.beta @ nu.weights)
    violation = float(np.max(potentials.alpha[:, None] + potentials.beta[None, :] - C.values))
    return Certificate(
        primal_value=primal,
        dual_value=dual,
        gap=abs(primal - dual),
        max_dual_violation=violation,
        max_marginal_residual=marginal_residual(T.values, mu.weights, nu.weights),
    )


def finite_difference_gradient(f: Callable[[np.ndarray], float], point: np.ndarray,
                               step: float = 1e-6) -> np.ndarray:
    """Central differences (f(x + h e_k) - f(x - h e_k)) / 2h for every coordinate of `point`."""
    if step <= 0:
        raise InvalidArgumentError(f"step must be positive, got {step}")
    x0 = np.asarray(point, dtype=float)
    grad = np.zeros_like(x0)
    x = x0.copy()
    for k in np.ndindex(x0.shape):
        x[k] = x0[k] + step
        f_plus = f(x)
        x[k] = x0[k] - step
        f_minus = f(x)
        x[k] = x0[k]
        grad[k] = (f_plus - f_minus) / (2.0 * step)
    return grad
