import numpy as np
import pytest

from wasserstein_lab.config import config
from wasserstein_lab.constants import SolverName
from wasserstein_lab.models import SolverConfig
from wasserstein_lab.solvers import run_solver


@pytest.mark.parametrize("solver", list(SolverName))
def test_every_solver_returns_a_feasible_plan(random_problem, solver):
    C, mu, nu = random_problem(4, 1)
    cfg = SolverConfig(epsilon=0.5, max_iter=100000, inner_iter=2000, tol=1e-7)
    result = run_solver(solver.value, C, mu, nu, cfg, outer_iter=5)
    assert result.report.solver is solver
    assert result.plan.shape == (4, 4)
    assert result.report.marginal_residual <= 1e-6
    has_potentials = solver in (SolverName.PDHG, SolverName.FISTA, SolverName.FISTA_CENTER)
    assert (result.potentials is not None) == has_potentials


def test_outer_iter_defaults_from_config(random_problem, monkeypatch):
    monkeypatch.setattr(config, "default_outer_iter", 3)
    C, mu, nu = random_problem(3)
    result = run_solver(SolverName.SINKHORN_CENTER, C, mu, nu, SolverConfig(epsilon=1.0))
    assert result.report.iterations == 3
    assert len(result.report.history) == 4


def test_unknown_solver(random_problem):
    C, mu, nu = random_problem(2)
    with pytest.raises(ValueError):
        run_solver("simplex", C, mu, nu, SolverConfig())


def test_plans_agree_across_entropic_and_lp(random_problem):
    C, mu, nu = random_problem(3, 4)
    lp = run_solver("pdhg", C, mu, nu, SolverConfig(max_iter=200000, tol=1e-8))
    sk = run_solver("sinkhorn", C, mu, nu, SolverConfig(epsilon=0.01, max_iter=200000, tol=1e-10,
                                                         log_domain=True))
    assert sk.report.distance >= lp.report.distance - 1e-6
    assert np.isclose(sk.report.distance, lp.report.distance, atol=0.05)
