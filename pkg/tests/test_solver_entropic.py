import numpy as np
import pytest

from wasserstein_lab.core import (
    InvalidArgumentError,
    NumericalUnderflowError,
    uniform_measure,
)
from wasserstein_lab.models import SolverConfig
from wasserstein_lab.solver_entropic import (
    CENTER_PRODUCT_NOTE,
    entropic_objective,
    solve_sinkhorn,
    solve_sinkhorn_center,
)
from wasserstein_lab.verification import exact_uniform_wasserstein


def test_sinkhorn_marginals(random_problem):
    C, mu, nu = random_problem(6, 0)
    plan, report = solve_sinkhorn(C, mu, nu, SolverConfig(epsilon=0.1, max_iter=100000, tol=1e-9))
    assert report.converged
    assert report.marginal_residual <= 1e-9
    assert np.allclose(plan.col_sums(), nu.weights, atol=1e-12)
    assert report.regularized_objective == pytest.approx(entropic_objective(plan.values, C, 0.1))
    assert report.history[0].iteration == 1
    assert report.history[-1].iteration == report.iterations


@pytest.mark.parametrize("seed", range(5))
def test_sharp_error_shrinks_with_epsilon(random_problem, seed):
    C, mu, nu = random_problem(5, seed)
    exact, _ = exact_uniform_wasserstein(C)
    errors = []
    for eps in (0.2, 0.1, 0.05):
        _, report = solve_sinkhorn(C, mu, nu, SolverConfig(epsilon=eps, max_iter=200000, tol=1e-10))
        assert report.converged
        errors.append(report.distance - exact)
    assert errors[0] >= -1e-8
    assert errors[0] >= errors[1] - 1e-6
    assert errors[1] >= errors[2] - 1e-6


def test_log_domain_agrees(random_problem):
    C, mu, nu = random_problem(7, 3, m=5)
    cfg = SolverConfig(epsilon=0.1, max_iter=100000, tol=1e-11)
    plain, r1 = solve_sinkhorn(C, mu, nu, cfg)
    logged, r2 = solve_sinkhorn(C, mu, nu, cfg.model_copy(update={"log_domain": True}))
    assert r1.distance == pytest.approx(r2.distance, abs=1e-8)
    assert np.allclose(plain.values, logged.values, atol=1e-8)
    assert "log_domain=True" in r2.notes


def test_underflow_detected_and_log_domain_recovers():
    C = np.array([[800.0, 900.0]])
    mu, nu = uniform_measure(1), uniform_measure(2)
    cfg = SolverConfig(epsilon=1.0, max_iter=100, tol=1e-12)
    with pytest.raises(NumericalUnderflowError):
        solve_sinkhorn(C, mu, nu, cfg)
    plan, report = solve_sinkhorn(C, mu, nu, cfg.model_copy(update={"log_domain": True}))
    assert np.allclose(plan.values, [[0.5, 0.5]])
    assert report.distance == pytest.approx(850.0)


def test_single_atom():
    plan, report = solve_sinkhorn(np.array([[3.0]]), uniform_measure(1), uniform_measure(1),
                                  SolverConfig(epsilon=0.5))
    assert plan.values[0, 0] == pytest.approx(1.0)
    assert report.distance == pytest.approx(3.0)


@pytest.mark.parametrize("solve", [solve_sinkhorn, lambda *a: solve_sinkhorn_center(*a, 3)])
def test_epsilon_must_be_positive(random_problem, solve):
    C, mu, nu = random_problem(3)
    with pytest.raises(InvalidArgumentError):
        solve(C, mu, nu, SolverConfig(epsilon=0.0))


def test_center_zero_outer_is_independent_coupling(random_problem):
    C, mu, nu = random_problem(4, 2)
    plan, report = solve_sinkhorn_center(C, mu, nu, SolverConfig(epsilon=1.0), 0)
    assert np.allclose(plan.values, np.outer(mu.weights, nu.weights))
    assert report.distance == pytest.approx(mu.weights @ C.values @ nu.weights)
    assert report.regularized_objective == report.distance
    assert len(report.history) == 1


def test_center_rejects_negative_outer(random_problem):
    C, mu, nu = random_problem(3)
    with pytest.raises(InvalidArgumentError):
        solve_sinkhorn_center(C, mu, nu, SolverConfig(epsilon=1.0), -1)


def test_center_matches_sinkhorn_at_reduced_epsilon(random_problem):
    C, mu, nu = random_problem(4, 5)
    exact_inner = SolverConfig(epsilon=0.4, inner_iter=5000, tol=1e-12)
    _, centered = solve_sinkhorn_center(C, mu, nu, exact_inner, 4)
    _, plain = solve_sinkhorn(C, mu, nu, SolverConfig(epsilon=0.1, max_iter=100000, tol=1e-12))
    assert centered.distance == pytest.approx(plain.distance, abs=1e-6)
    assert CENTER_PRODUCT_NOTE in centered.notes
    assert "effective_epsilon=0.1" in centered.notes


@pytest.mark.parametrize("log_domain", [False, True])
def test_center_cost_is_monotone(random_problem, log_domain):
    C, mu, nu = random_problem(5, 8)
    cfg = SolverConfig(epsilon=1.0, inner_iter=2000, tol=1e-10, log_domain=log_domain)
    _, report = solve_sinkhorn_center(C, mu, nu, cfg, 10)
    costs = [h.objective for h in report.history]
    assert len(costs) == 11
    assert all(b <= a + 1e-7 for a, b in zip(costs, costs[1:]))


def test_center_beats_plain_at_large_epsilon(random_problem):
    wins = 0
    for seed in range(10):
        C, mu, nu = random_problem(5, seed)
        _, plain = solve_sinkhorn(C, mu, nu, SolverConfig(epsilon=1.0, max_iter=10000, tol=1e-10))
        _, centered = solve_sinkhorn_center(
            C, mu, nu, SolverConfig(epsilon=1.0, inner_iter=200, tol=1e-9), 100)
        assert centered.distance <= plain.distance + 1e-9
        wins += centered.distance < plain.distance
    assert wins >= 9


def test_center_with_default_single_inner_pair(random_problem):
    cfg = SolverConfig(epsilon=1.0, tol=1e-12)
    assert cfg.inner_iter == 1
    C, mu, nu = random_problem(5, 3)
    exact, _ = exact_uniform_wasserstein(C)
    _, short = solve_sinkhorn_center(C, mu, nu, cfg, 20)
    plan, long = solve_sinkhorn_center(C, mu, nu, cfg, 200)
    assert abs(long.distance - exact) < abs(short.distance - exact)
    # diagonal rescalings of exp(-200 C / eps): the log remainder splits into row and column terms
    remainder = np.log(plan.values) + 200 * C.values / cfg.epsilon
    mixed = remainder - remainder[:, :1] - remainder[:1, :] + remainder[0, 0]
    assert np.allclose(mixed, 0.0, atol=1e-7)
    row_error = np.max(np.abs(plan.values.sum(axis=1) - mu.weights))
    col_error = np.max(np.abs(plan.values.sum(axis=0) - nu.weights))
    assert min(row_error, col_error) <= 1e-12
