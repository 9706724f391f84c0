import numpy as np
import pytest

from wasserstein_lab.core import InvalidArgumentError, uniform_measure
from wasserstein_lab.models import DiscreteMeasure, SolverConfig
from wasserstein_lab.solver_pdhg import MarginalOperator, operator_norm_bound, solve_pdhg
from wasserstein_lab.verification import certify, exact_uniform_wasserstein

PDHG_CFG = SolverConfig(epsilon=0.0, max_iter=200000, tol=1e-7)


def test_marginal_operator_matches_dense():
    op = MarginalOperator(3, 2)
    K = op.materialize()
    t = np.arange(6, dtype=float)
    rows, cols = op.apply(t)
    assert np.allclose(K @ t, np.concatenate([rows, cols]))
    lam1, lam2 = np.array([1.0, -2.0, 0.5]), np.array([3.0, 4.0])
    assert np.allclose(K.T @ np.concatenate([lam1, lam2]), op.adjoint(lam1, lam2))


def test_operator_norm_bound_is_tight():
    op = MarginalOperator(4, 3)
    assert operator_norm_bound(op) == pytest.approx(np.linalg.norm(op.materialize(), 2))


@pytest.mark.parametrize("n,seed", [(2, 0), (3, 1), (4, 2), (5, 3)])
def test_pdhg_matches_oracle(random_problem, n, seed):
    C, mu, nu = random_problem(n, seed)
    exact, _ = exact_uniform_wasserstein(C)
    plan, potentials, report = solve_pdhg(C, mu, nu, PDHG_CFG)
    assert report.converged
    assert report.distance == pytest.approx(exact, abs=1e-5)
    assert report.marginal_residual <= PDHG_CFG.tol


def test_pdhg_certificate(random_problem):
    C, mu, nu = random_problem(4, 11)
    plan, potentials, report = solve_pdhg(C, mu, nu, PDHG_CFG)
    assert report.converged
    cert = certify(plan, potentials, C, mu, nu)
    assert cert.gap <= PDHG_CFG.tol + 1e-12
    assert cert.dual_feasible(PDHG_CFG.tol + 1e-12)
    assert report.dual_objective == pytest.approx(cert.dual_value)


def test_pdhg_nonuniform_marginals():
    C = np.array([[0.0, 1.0], [1.0, 0.0]])
    mu = DiscreteMeasure(weights=[0.7, 0.3])
    nu = DiscreteMeasure(weights=[0.4, 0.6])
    _, _, report = solve_pdhg(C, mu, nu, PDHG_CFG)
    # 0.4 and 0.3 stay put, 0.3 moves at unit cost
    assert report.distance == pytest.approx(0.3, abs=1e-5)


def test_pdhg_single_atom():
    plan, _, report = solve_pdhg(np.array([[2.5]]), uniform_measure(1), uniform_measure(1), PDHG_CFG)
    assert plan.values[0, 0] == pytest.approx(1.0, abs=1e-7)
    assert report.distance == pytest.approx(2.5, abs=1e-6)


def test_pdhg_iteration_cap_reported(random_problem):
    C, mu, nu = random_problem(5, 4)
    _, _, report = solve_pdhg(C, mu, nu, SolverConfig(max_iter=3, tol=1e-12))
    assert not report.converged
    assert report.iterations == 3
    assert report.history[0].iteration == 1
    assert report.history[-1].iteration == 3


def test_pdhg_shape_mismatch():
    with pytest.raises(InvalidArgumentError):
        solve_pdhg(np.zeros((2, 3)), uniform_measure(2), uniform_measure(2), PDHG_CFG)
