# wasserstein_lab/bench.py
from __future__ import annotations

import asyncio
from dataclasses import dataclass
from typing import Awaitable, Callable, Sequence

import numpy as np

from aixtools.logging.logging_config import get_logger

from wasserstein_lab.config import config
from wasserstein_lab.constants import CostKind, SolverName
from wasserstein_lab.core import InvalidArgumentError, uniform_measure
from wasserstein_lab.costs import normalize_cost, pairwise_cost
from wasserstein_lab.ingest import sample_rows
from wasserstein_lab.models import CostMatrix, SampleBatch, SolveReport, SolverConfig
from wasserstein_lab.solvers import run_solver

logger = get_logger(__name__)


ProgressCb = Callable[[str], Awaitable[None]]  # receives a line per finished unit of work
PoolFactory = Callable[[int, int], SampleBatch]  # (size, trial) -> rows to draw both batches from


async def _silent(_: str) -> None:
    return None


@dataclass(frozen=True)
class BatchTrial:
    size: int
    trial: int
    distance: float
    iterations: int
    converged: bool

    def row(self) -> list:
        return [self.size, self.trial, self.distance, self.iterations]


@dataclass(frozen=True)
class EpsPoint:
    solver: SolverName
    epsilon: float
    report: SolveReport

    def row(self) -> list:
        return [self.solver.value, self.epsilon, self.report.distance, self.report.iterations,
                self.report.converged]


def fit_log_slope(sizes: Sequence[int], values: Sequence[float]) -> float:
    """Least-squares slope of log(value) against log(size)."""
    if len(sizes) < 2:
        raise InvalidArgumentError("slope fit needs at least two sizes")
    slope, _ = np.polyfit(np.log(sizes), np.log(values), 1)
    return float(slope)


class BenchOrchestrator:
    """
    Runs independent solves concurrently in worker threads with at most `workers` in flight.

    Each trial gets its own PRNG stream (seed, size, trial), so results do not depend on
    scheduling order.
    """

    def __init__(self, cost: CostKind, cfg: SolverConfig, outer_iter: int | None = None,
                 workers: int | None = None, seed: int | None = None, cost_normalize: bool = False):
        self.cost = CostKind(cost)
        self.cfg = cfg
        self.outer_iter = outer_iter
        self.workers = workers or config.bench_workers
        self.seed = config.seed if seed is None else seed
        self.cost_normalize = cost_normalize

    def _cost(self, X: SampleBatch, Y: SampleBatch) -> CostMatrix:
        C = pairwise_cost(X, Y, self.cost)
        return normalize_cost(C) if self.cost_normalize else C

    async def _bounded(self, semaphore: asyncio.Semaphore, fn, *args):
        async with semaphore:
            return await asyncio.to_thread(fn, *args)

    def _batch_trial(self, pool_factory: PoolFactory, solver: SolverName, size: int, trial: int) -> BatchTrial:
        pool = pool_factory(size, trial)
        X, Y = sample_rows(pool, size, 2, self.seed, size, trial)
        result = run_solver(solver, self._cost(X, Y), uniform_measure(size), uniform_measure(size),
                            self.cfg, self.outer_iter)
        return BatchTrial(size=size, trial=trial, distance=result.report.distance,
                          iterations=result.report.iterations, converged=result.report.converged)

    async def run_batch_scaling(
        self,
        pool_factory: PoolFactory,
        solver: SolverName,
        sizes: Sequence[int],
        trials: int,
        progress: ProgressCb = _silent,
    ) -> list[BatchTrial]:
        """Two disjoint batches per (size, trial), solved concurrently; rows ordered by (size, trial)."""
        if not sizes or trials < 1:
            raise InvalidArgumentError("batch scaling needs at least one size and one trial")
        semaphore = asyncio.Semaphore(self.workers)
        jobs = [(size, trial) for size in sizes for trial in range(trials)]

        async def run(size: int, trial: int) -> BatchTrial:
            result = await self._bounded(semaphore, self._batch_trial, pool_factory, SolverName(solver), size, trial)
            await progress(f"size={size} trial={trial} distance={result.distance:.6g}")
            return result

        results = await asyncio.gather(*(run(size, trial) for size, trial in jobs))
        logger.info("Batch scaling finished: %d trials over sizes %s", len(results), list(sizes))
        return list(results)

    async def run_eps_sweep(
        self,
        C: CostMatrix,
        solvers: Sequence[SolverName],
        eps_grid: Sequence[float],
        progress: ProgressCb = _silent,
    ) -> list[EpsPoint]:
        """Solve the same problem for every (solver, epsilon); rows ordered by solver then epsilon."""
        if not eps_grid:
            raise InvalidArgumentError("epsilon grid is empty")
        if self.cost_normalize:
            C = normalize_cost(C)
        n, m = C.shape
        mu, nu = uniform_measure(n), uniform_measure(m)
        semaphore = asyncio.Semaphore(self.workers)

        def solve(solver: SolverName, eps: float) -> EpsPoint:
            cfg = self.cfg.model_copy(update={"epsilon": eps})
            return EpsPoint(solver=solver, epsilon=eps,
                            report=run_solver(solver, C, mu, nu, cfg, self.outer_iter).report)

        async def run(solver: SolverName, eps: float) -> EpsPoint:
            point = await self._bounded(semaphore, solve, SolverName(solver), eps)
            await progress(f"{point.solver.value} eps={eps:g} distance={point.report.distance:.6g}")
            return point

        return list(await asyncio.gather(*(run(s, e) for s in solvers for e in eps_grid)))


def summarize_batch_trials(trials: Sequence[BatchTrial]) -> dict:
    """Mean distance per size and the log-log slope of the means."""
    sizes = sorted({t.size for t in trials})
    means = [float(np.mean([t.distance for t in trials if t.size == s])) for s in sizes]
    summary = {"sizes": sizes, "mean_distance": means}
    if len(sizes) >= 2 and all(m > 0 for m in means):
        summary["log_log_slope"] = fit_log_slope(sizes, means)
    return summary
