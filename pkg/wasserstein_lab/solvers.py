"""
Single entry point over the five solvers, used by divergence, training and the CLI.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from wasserstein_lab.config import config
from wasserstein_lab.constants import SolverName
from wasserstein_lab.models import (
    CostMatrix,
    DiscreteMeasure,
    DualPotentials,
    SolveReport,
    SolverConfig,
    TransportPlan,
)
from wasserstein_lab.solver_entropic import solve_sinkhorn, solve_sinkhorn_center
from wasserstein_lab.solver_pdhg import solve_pdhg
from wasserstein_lab.solver_quadratic import solve_fista, solve_fista_center


@dataclass(frozen=True)
class SolveResult:
    plan: TransportPlan
    report: SolveReport
    potentials: DualPotentials | None = None


def run_solver(
    solver: SolverName | str,
    C: CostMatrix | np.ndarray,
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    cfg: SolverConfig,
    outer_iter: int | None = None,
) -> SolveResult:
    """
    Dispatch to the named solver; `outer_iter` defaults to config.default_outer_iter for
    the centered variants and is ignored otherwise.
    """
    solver = SolverName(solver)
    if outer_iter is None:
        outer_iter = config.default_outer_iter
    match solver:
        case SolverName.PDHG:
            plan, potentials, report = solve_pdhg(C, mu, nu, cfg)
        case SolverName.SINKHORN:
            plan, report = solve_sinkhorn(C, mu, nu, cfg)
            potentials = None
        case SolverName.SINKHORN_CENTER:
            plan, report = solve_sinkhorn_center(C, mu, nu, cfg, outer_iter)
            potentials = None
        case SolverName.FISTA:
            plan, potentials, report = solve_fista(C, mu, nu, cfg)
        case SolverName.FISTA_CENTER:
            plan, potentials, report = solve_fista_center(C, mu, nu, cfg, outer_iter)
    return SolveResult(plan=plan, report=report, potentials=potentials)
