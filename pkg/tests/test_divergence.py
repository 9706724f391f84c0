import numpy as np
import pytest

from wasserstein_lab.constants import CostKind, SolverName
from wasserstein_lab.core import DegenerateInputError, InvalidArgumentError, UnsupportedError
from wasserstein_lab.costs import pairwise_cost
from wasserstein_lab.divergence import plan_gradient, sinkhorn_divergence
from wasserstein_lab.models import SampleBatch, SolverConfig
from wasserstein_lab.rng import make_rng
from wasserstein_lab.verification import finite_difference_gradient

DIV_CFG = SolverConfig(epsilon=0.5, max_iter=100000, tol=1e-11)


@pytest.mark.parametrize("solver", [SolverName.SINKHORN, SolverName.FISTA])
def test_identical_batches_give_zero(small_batches, solver):
    X, _ = small_batches
    report = sinkhorn_divergence(X, X, CostKind.SQUARED_L2, DIV_CFG, solver=solver)
    assert report.value == 0.0
    assert len(report.solver_reports) == 3


def test_symmetry(small_batches):
    X, Y = small_batches
    forward = sinkhorn_divergence(X, Y, "sql2", DIV_CFG)
    backward = sinkhorn_divergence(Y, X, "sql2", DIV_CFG)
    assert forward.value == pytest.approx(backward.value, abs=1e-8)


@pytest.mark.parametrize("seed", range(3))
def test_positive_for_squared_euclidean(seed):
    rng = make_rng(seed)
    X = SampleBatch(data=rng.random((5, 2)))
    Y = SampleBatch(data=rng.random((7, 2)))
    assert sinkhorn_divergence(X, Y, "sql2", DIV_CFG).value >= -1e-9


@pytest.mark.parametrize("use_regularized", [True, False])
def test_disjoint_point_masses(use_regularized):
    p, q = [0.0, 0.0], [1.0, 2.0]
    X = SampleBatch(data=[p, p])
    Y = SampleBatch(data=[q, q])
    report = sinkhorn_divergence(X, Y, "sql2", DIV_CFG, use_regularized=use_regularized)
    assert report.value == pytest.approx(2 * 5.0)
    assert report.use_regularized is use_regularized


def test_centered_solver_divergence(small_batches):
    X, Y = small_batches
    report = sinkhorn_divergence(X, Y, "sql2", SolverConfig(epsilon=1.0, inner_iter=500, tol=1e-10),
                                 solver="sinkhorn-center", outer_iter=5)
    assert all(r.solver is SolverName.SINKHORN_CENTER for r in report.solver_reports)
    assert report.value > 0


def test_lp_solver_rejected(small_batches):
    X, Y = small_batches
    with pytest.raises(InvalidArgumentError):
        sinkhorn_divergence(X, Y, "sql2", DIV_CFG, solver="pdhg")


@pytest.mark.parametrize("kind", [CostKind.SQUARED_L2, CostKind.L2, CostKind.L1, CostKind.COSINE])
def test_plan_gradient_matches_finite_differences(kind):
    rng = make_rng(12)
    X = SampleBatch(data=rng.random((4, 3)) + 0.1)
    y0 = rng.random((3, 3)) + 0.1
    T = rng.random((4, 3))
    T /= T.sum()

    def fixed_plan_cost(flat):
        Y = SampleBatch(data=flat.reshape(y0.shape))
        return float(np.sum(T * pairwise_cost(X, Y, kind).values))

    numeric = finite_difference_gradient(fixed_plan_cost, y0.ravel()).reshape(y0.shape)
    analytic = plan_gradient(T, X, SampleBatch(data=y0), kind)
    assert analytic.shape == y0.shape
    assert np.allclose(analytic, numeric, atol=1e-6)


def test_plan_gradient_errors():
    X = SampleBatch(data=np.ones((2, 4)), image_shape=(2, 2, 1))
    with pytest.raises(UnsupportedError):
        plan_gradient(np.ones((2, 2)) / 4, X, X, "ssim")
    with pytest.raises(InvalidArgumentError):
        plan_gradient(np.ones((3, 2)) / 6, X, X, "sql2")


@pytest.mark.parametrize("zero_in", ["source", "target"])
def test_cosine_plan_gradient_rejects_zero_rows(zero_in):
    x = np.array([[1.0, 0.0], [0.5, 0.5]])
    y = np.array([[0.0, 1.0], [1.0, 1.0]])
    if zero_in == "source":
        x[1] = 0.0
    else:
        y[0] = 0.0
    with pytest.raises(DegenerateInputError):
        plan_gradient(np.full((2, 2), 0.25), SampleBatch(data=x), SampleBatch(data=y), CostKind.COSINE)
