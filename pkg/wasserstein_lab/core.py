"""
Errors and basic operations on measures, costs and plans shared by every solver.
"""
from __future__ import annotations

import numpy as np

from wasserstein_lab.models import CostMatrix, DiscreteMeasure, TransportPlan


class WassersteinLabError(Exception):
    """Base exception of the package."""
    pass


class InvalidArgumentError(WassersteinLabError, ValueError):
    """Exception raised when an argument violates an operation precondition."""
    pass


class DegenerateInputError(WassersteinLabError, ValueError):
    """Exception raised when inputs make the quantity undefined (zero norms, zero operators)."""
    pass


class NumericalUnderflowError(WassersteinLabError, ArithmeticError):
    """Exception raised when a scaling update divides by a vanishing value."""
    pass


class UnsupportedError(WassersteinLabError, NotImplementedError):
    """Exception raised for valid but unsupported requests."""
    pass


class FormatError(WassersteinLabError, ValueError):
    """Exception raised when a dataset file does not match its format."""
    pass


class TrainingError(WassersteinLabError):
    """Exception raised when a training epoch fails; carries the epoch index."""

    def __init__(self, epoch: int, cause: Exception):
        super().__init__(f"epoch {epoch}: {cause}")
        self.epoch = epoch
        self.cause = cause


def uniform_measure(n: int) -> DiscreteMeasure:
    """Uniform probability vector with n atoms of mass 1/n."""
    if n < 1:
        raise InvalidArgumentError(f"uniform measure needs n >= 1, got {n}")
    return DiscreteMeasure(weights=np.full(n, 1.0 / n))


def as_cost(C: CostMatrix | np.ndarray) -> CostMatrix:
    """Coerce a raw matrix into a CostMatrix, mapping invalid entries to InvalidArgumentError."""
    if isinstance(C, CostMatrix):
        return C
    arr = np.asarray(C, dtype=float)
    if arr.ndim != 2 or arr.size == 0:
        raise InvalidArgumentError(f"cost must be a non-empty matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError("cost matrix has non-finite entries")
    if np.any(arr < 0):
        raise InvalidArgumentError("cost matrix has negative entries")
    return CostMatrix(values=arr)


def check_problem(C: CostMatrix, mu: DiscreteMeasure, nu: DiscreteMeasure) -> None:
    n, m = C.shape
    if mu.size != n or nu.size != m:
        raise InvalidArgumentError(
            f"cost shape {C.shape} does not match measures ({mu.size}, {nu.size})"
        )


def transport_cost(T: TransportPlan | np.ndarray, C: CostMatrix | np.ndarray) -> float:
    """
    Frobenius inner product <T, C>.

    Rows are reduced left to right and the row totals summed in order, so the value does
    not depend on memory layout or threading.
    """
    t = T.values if isinstance(T, TransportPlan) else np.asarray(T, dtype=float)
    c = C.values if isinstance(C, CostMatrix) else np.asarray(C, dtype=float)
    if t.shape != c.shape:
        raise InvalidArgumentError(f"plan shape {t.shape} does not match cost shape {c.shape}")
    total = 0.0
    for row in np.multiply(t, c):
        total += float(np.add.reduce(row))
    return total


def marginal_residuals(T: np.ndarray, mu: np.ndarray, nu: np.ndarray) -> tuple[float, float]:
    """Max-norm violations of the row (mu) and column (nu) constraints."""
    return (float(np.max(np.abs(T.sum(axis=1) - mu))),
            float(np.max(np.abs(T.sum(axis=0) - nu))))


def marginal_residual(T: np.ndarray, mu: np.ndarray, nu: np.ndarray) -> float:
    return max(marginal_residuals(T, mu, nu))
