import numpy as np
import pytest

from wasserstein_lab.core import InvalidArgumentError, UnsupportedError, uniform_measure
from wasserstein_lab.models import DualPotentials, TransportPlan
from wasserstein_lab.verification import certify, exact_uniform_wasserstein, finite_difference_gradient


def test_oracle_identity_cost():
    C = 1.0 - np.eye(3)
    value, plan = exact_uniform_wasserstein(C)
    assert value == 0.0
    assert np.allclose(plan.values, np.eye(3) / 3)


def test_oracle_prefers_lexicographic_ties():
    value, plan = exact_uniform_wasserstein(np.ones((3, 3)))
    assert value == pytest.approx(1.0)
    assert np.allclose(plan.values, np.eye(3) / 3)


def test_oracle_known_assignment():
    C = np.array([[4.0, 1.0, 3.0], [2.0, 0.0, 5.0], [3.0, 2.0, 2.0]])
    value, plan = exact_uniform_wasserstein(C)
    # rows -> columns (1, 0, 2): 1 + 2 + 2
    assert value == pytest.approx(5.0 / 3)
    assert plan.values[0, 1] == pytest.approx(1 / 3)


@pytest.mark.parametrize("shape", [(2, 3), (9, 9)])
def test_oracle_limits(shape):
    with pytest.raises(UnsupportedError):
        exact_uniform_wasserstein(np.zeros(shape))


def test_certificate_of_optimal_pair():
    C = np.array([[0.0, 1.0], [1.0, 0.0]])
    mu = nu = uniform_measure(2)
    plan = TransportPlan(values=np.eye(2) / 2)
    cert = certify(plan, DualPotentials(alpha=[0.0, 0.0], beta=[0.0, 0.0]), C, mu, nu)
    assert cert.gap == 0.0
    assert cert.dual_feasible()
    assert cert.max_marginal_residual == 0.0


def test_certificate_flags_infeasible_potentials():
    C = np.array([[0.0, 1.0], [1.0, 0.0]])
    mu = nu = uniform_measure(2)
    plan = TransportPlan(values=np.eye(2) / 2)
    cert = certify(plan, DualPotentials(alpha=[1.0, 0.0], beta=[0.0, 0.0]), C, mu, nu)
    assert cert.max_dual_violation == pytest.approx(1.0)
    assert not cert.dual_feasible(1e-9)
    with pytest.raises(InvalidArgumentError):
        certify(plan, DualPotentials(alpha=[0.0], beta=[0.0, 0.0]), C, mu, nu)


def test_finite_differences():
    grad = finite_difference_gradient(lambda x: float(np.sum(x ** 3)), np.array([1.0, -2.0]))
    assert np.allclose(grad, [3.0, 12.0], atol=1e-6)
    with pytest.raises(InvalidArgumentError):
        finite_difference_gradient(lambda x: 0.0, np.zeros(2), step=0.0)
