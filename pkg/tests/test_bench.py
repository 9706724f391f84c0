import pytest

from wasserstein_lab.bench import BatchTrial, BenchOrchestrator, fit_log_slope, summarize_batch_trials
from wasserstein_lab.constants import CostKind, SolverName
from wasserstein_lab.core import InvalidArgumentError
from wasserstein_lab.ingest import synth_blobs
from wasserstein_lab.models import SolverConfig

BLOB_CFG = SolverConfig(epsilon=0.01, max_iter=20000, tol=1e-4, log_domain=True)


def _blob_pool(size, trial):
    return synth_blobs([[0.0, 0.0]], 1.0, 2 * size, 0, size, trial)


@pytest.mark.asyncio
async def test_batch_scaling_decreases_with_size():
    lines = []

    async def progress(line):
        lines.append(line)

    orchestrator = BenchOrchestrator(CostKind.L2, BLOB_CFG, workers=3, seed=0)
    trials = await orchestrator.run_batch_scaling(_blob_pool, SolverName.SINKHORN, [8, 32, 128], 3, progress)
    assert [(t.size, t.trial) for t in trials] == [(s, k) for s in (8, 32, 128) for k in range(3)]
    assert len(lines) == 9

    summary = summarize_batch_trials(trials)
    means = summary["mean_distance"]
    assert means[0] > means[1] > means[2] > 0
    assert -1.0 < summary["log_log_slope"] < -0.2


@pytest.mark.asyncio
async def test_batch_scaling_is_order_independent():
    cfg = SolverConfig(epsilon=0.1, max_iter=5000, tol=1e-6, log_domain=True)
    serial = await BenchOrchestrator(CostKind.SQUARED_L2, cfg, workers=1, seed=4).run_batch_scaling(
        _blob_pool, SolverName.SINKHORN, [6, 12], 2)
    parallel = await BenchOrchestrator(CostKind.SQUARED_L2, cfg, workers=4, seed=4).run_batch_scaling(
        _blob_pool, SolverName.SINKHORN, [6, 12], 2)
    assert [t.distance for t in serial] == [t.distance for t in parallel]


@pytest.mark.asyncio
async def test_eps_sweep(random_problem):
    C, _, _ = random_problem(4, 2)
    cfg = SolverConfig(max_iter=50000, tol=1e-8)
    orchestrator = BenchOrchestrator(CostKind.SQUARED_L2, cfg, workers=2)
    points = await orchestrator.run_eps_sweep(C, [SolverName.SINKHORN, SolverName.FISTA], [0.5, 0.1])
    assert [(p.solver, p.epsilon) for p in points] == [
        (SolverName.SINKHORN, 0.5), (SolverName.SINKHORN, 0.1),
        (SolverName.FISTA, 0.5), (SolverName.FISTA, 0.1),
    ]
    assert all(p.report.epsilon == p.epsilon for p in points)
    assert points[0].row()[:2] == ["sinkhorn", 0.5]


@pytest.mark.asyncio
async def test_argument_errors(random_problem):
    C, _, _ = random_problem(3)
    orchestrator = BenchOrchestrator(CostKind.L2, SolverConfig())
    with pytest.raises(InvalidArgumentError):
        await orchestrator.run_eps_sweep(C, [SolverName.SINKHORN], [])
    with pytest.raises(InvalidArgumentError):
        await orchestrator.run_batch_scaling(_blob_pool, SolverName.SINKHORN, [], 2)


def test_summary_slope():
    trials = [BatchTrial(size=10, trial=0, distance=1.0, iterations=1, converged=True),
              BatchTrial(size=100, trial=0, distance=0.1, iterations=1, converged=True)]
    summary = summarize_batch_trials(trials)
    assert summary["sizes"] == [10, 100]
    assert summary["log_log_slope"] == pytest.approx(-1.0)
    with pytest.raises(InvalidArgumentError):
        fit_log_slope([10], [1.0])
