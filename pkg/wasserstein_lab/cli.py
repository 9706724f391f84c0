"""
Command-line front end.

Every subcommand writes a JSON report embedding its RunManifest, plus CSV files for
histories and sweeps. Exit codes: 0 converged, 2 not converged, 1 error.
"""
from __future__ import annotations

import argparse
import asyncio
import itertools
import math
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from aixtools.logging.logging_config import get_logger

from wasserstein_lab.bench import BenchOrchestrator, summarize_batch_trials
from wasserstein_lab.config import config
from wasserstein_lab.constants import (
    BENCH_BATCH_HEADER,
    BENCH_EPS_HEADER,
    CRITIC_GRID_HEADER,
    CRITIC_SWEEP_HEADER,
    HISTORY_HEADER,
    LOSS_HEADER,
    SPECNORM_HEADER,
    Activation,
    CostKind,
    CriticMode,
    DatasetKind,
    SolverName,
)
from wasserstein_lab.core import InvalidArgumentError, WassersteinLabError, uniform_measure
from wasserstein_lab.costs import normalize_cost, pairwise_cost
from wasserstein_lab.critic import MlpCritic, critic_grid, fit_critic, toy_problem
from wasserstein_lab.generative import manifold_grid, train_toy_generator
from wasserstein_lab.ingest import load_cifar10, load_csv, load_idx, sniff_format, synth_blobs
from wasserstein_lab.lipschitz import ConvNet, ConvOperator, reshaped_kernel_norm
from wasserstein_lab.models import CostMatrix, SampleBatch, SolverConfig, TrainConfig
from wasserstein_lab.optim import AdamState
from wasserstein_lab.rng import box_muller, make_rng
from wasserstein_lab.run_manager import RunStatus, run_manager
from wasserstein_lab.solvers import run_solver
from wasserstein_lab.utils import tile_images, write_csv, write_json, write_pgm
from wasserstein_lab.verification import certify, exact_uniform_wasserstein

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 2

ORACLE_NOTES = {
    "sinkhorn_b0": "all ones",
    "sinkhorn_center_product": "entrywise",
    "sinkhorn_center_t0": "mu nu^T",
    "fista_center_t0": "zero",
}


class _Parser(argparse.ArgumentParser):
    """Argument errors raise instead of exiting with status 2, which means 'not converged' here."""

    def error(self, message: str):
        raise InvalidArgumentError(message)


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _centers(text: str) -> list[list[float]]:
    return [_float_list(c) for c in text.split(";") if c.strip()]


def load_batch(path: str, fmt: str = "auto") -> SampleBatch:
    """Load a file as csv, idx or cifar10; `auto` detects the format from the file content."""
    kind = sniff_format(path) if fmt == "auto" else DatasetKind(fmt)
    match kind:
        case DatasetKind.CSV:
            return load_csv(path)
        case DatasetKind.CIFAR10:
            return load_cifar10(path)
        case _:
            return load_idx(path)


def _solver_config(args: argparse.Namespace) -> SolverConfig:
    return SolverConfig.from_settings(
        epsilon=args.eps,
        max_iter=args.max_iter,
        tol=args.tol,
        inner_iter=args.inner,
        tau=args.tau,
        log_domain=args.log_domain,
        fista_restart=False if args.no_restart else None,
        literal_center_update=args.literal_center,
    )


def _flags(args: argparse.Namespace, cfg: SolverConfig | None = None) -> dict[str, Any]:
    flags: dict[str, Any] = dict(ORACLE_NOTES)
    if cfg is not None:
        flags.update(log_domain=cfg.log_domain, fista_restart=cfg.fista_restart,
                     literal_center_update=cfg.literal_center_update)
    flags["cost_normalize"] = bool(getattr(args, "cost_normalize", False))
    flags["pixel_scale"] = config.pixel_scale
    return flags


def _configuration(args: argparse.Namespace) -> dict[str, Any]:
    return {k: v for k, v in vars(args).items() if k != "handler"}


def _start(args: argparse.Namespace) -> tuple[str, Path]:
    """Create the run; the report path is --out or report.json in the run directory."""
    out = Path(args.out) if args.out else None
    run_id = run_manager.create_run(args.command, out.parent if out else None)
    report_path = out or run_manager.get_run_outputs_path(run_id) / "report.json"
    logger.info("Run %s (%s) writing to %s", run_id, args.command, report_path)
    return run_id, report_path


def _sibling(report_path: Path, suffix: str) -> Path:
    return report_path.with_name(f"{report_path.stem}_{suffix}")


def _finish(run_id: str, report_path: Path, payload: dict[str, Any], args: argparse.Namespace,
            seed: int, flags: dict[str, Any], converged: bool = True) -> int:
    payload["manifest"] = run_manager.build_manifest(run_id, _configuration(args), seed, flags)
    write_json(report_path, payload)
    run_manager.add_output(run_id, report_path)
    run_manager.finish_run(run_id)
    return EXIT_OK if converged else EXIT_NOT_CONVERGED


def _maybe_normalize(C: CostMatrix, args: argparse.Namespace) -> CostMatrix:
    return normalize_cost(C) if args.cost_normalize else C


def cmd_solve(args: argparse.Namespace) -> int:
    cfg = _solver_config(args)
    X, Y = load_batch(args.x, args.format), load_batch(args.y, args.format)
    C = _maybe_normalize(pairwise_cost(X, Y, args.cost), args)
    mu, nu = uniform_measure(X.size), uniform_measure(Y.size)
    run_id, report_path = _start(args)

    result = run_solver(args.solver, C, mu, nu, cfg, args.outer)
    payload: dict[str, Any] = {"report": result.report}
    if result.potentials is not None:
        payload["certificate"] = certify(result.plan, result.potentials, C, mu, nu)
    history_path = write_csv(_sibling(report_path, "history.csv"), HISTORY_HEADER,
                             ([h.iteration, h.residual, h.objective] for h in result.report.history))
    run_manager.add_output(run_id, history_path)
    return _finish(run_id, report_path, payload, args, args.seed, _flags(args, cfg), result.report.converged)


def cmd_bench_eps(args: argparse.Namespace) -> int:
    cfg = _solver_config(args)
    eps_grid = _float_list(args.eps_grid)
    if not eps_grid:
        raise InvalidArgumentError("--eps-grid is empty")
    if args.random_size:
        C = CostMatrix(values=make_rng(args.seed).random((args.random_size, args.random_size)))
    elif args.x and args.y:
        C = pairwise_cost(load_batch(args.x, args.format), load_batch(args.y, args.format), args.cost)
    else:
        raise InvalidArgumentError("bench-eps needs --x and --y or --random-size")
    C = _maybe_normalize(C, args)
    solvers = [SolverName(s) for s in args.solvers.split(",")]
    run_id, report_path = _start(args)

    orchestrator = BenchOrchestrator(args.cost, cfg, args.outer, args.workers, args.seed)
    points = asyncio.run(orchestrator.run_eps_sweep(C, solvers, eps_grid, progress=_log_progress))
    csv_path = write_csv(_sibling(report_path, "eps.csv"), BENCH_EPS_HEADER, (p.row() for p in points))
    run_manager.add_output(run_id, csv_path)

    payload: dict[str, Any] = {"points": [p.row() for p in points]}
    if C.shape[0] == C.shape[1] and C.shape[0] <= 8:
        oracle, _ = exact_uniform_wasserstein(C)
        payload["oracle"] = oracle
        payload["errors"] = [[p.solver.value, p.epsilon, abs(p.report.distance - oracle)] for p in points]
    converged = all(p.report.converged for p in points)
    return _finish(run_id, report_path, payload, args, args.seed, _flags(args, cfg), converged)


def _pool_factory(args: argparse.Namespace):
    if args.source == "cifar10":
        if not args.data:
            raise InvalidArgumentError("--source cifar10 needs --data")
        pool = load_cifar10(args.data)
        return lambda size, trial: pool
    centers = _centers(args.blob_centers)

    def blobs(size: int, trial: int) -> SampleBatch:
        n_per = math.ceil(2 * size / len(centers))
        return synth_blobs(centers, args.blob_scale, n_per, args.seed, size, trial)

    return blobs


def cmd_bench_batch(args: argparse.Namespace) -> int:
    cfg = _solver_config(args)
    sizes = _int_list(args.sizes)
    if not sizes:
        raise InvalidArgumentError("--sizes is empty")
    factory = _pool_factory(args)
    run_id, report_path = _start(args)

    orchestrator = BenchOrchestrator(args.cost, cfg, args.outer, args.workers, args.seed, args.cost_normalize)
    trials = asyncio.run(orchestrator.run_batch_scaling(factory, SolverName(args.solver), sizes,
                                                        args.trials, progress=_log_progress))
    csv_path = write_csv(_sibling(report_path, "batch.csv"), BENCH_BATCH_HEADER, (t.row() for t in trials))
    run_manager.add_output(run_id, csv_path)
    payload = {"summary": summarize_batch_trials(trials), "trials": [t.row() for t in trials]}
    converged = all(t.converged for t in trials)
    return _finish(run_id, report_path, payload, args, args.seed, _flags(args, cfg), converged)


def _specnorm_kernel(kind: str, channels: int, size: int, seed: int, layer: int) -> np.ndarray:
    if kind == "average":
        return np.full((channels, channels, size, size), 1.0 / (channels * size * size))
    return box_muller(make_rng(seed, layer), (channels, channels, size, size))


def cmd_specnorm(args: argparse.Namespace) -> int:
    if min(args.channels, args.kernel, args.input_size, args.layers, args.stride) < 1 or args.padding < 0:
        raise InvalidArgumentError("channels, kernel, input size, layers and stride must be positive")
    run_id, report_path = _start(args)

    layers: list[ConvOperator] = []
    shape = (args.channels, args.input_size, args.input_size)
    for k in range(args.layers):
        op = ConvOperator(_specnorm_kernel(args.kernel_type, args.channels, args.kernel, args.seed, k),
                          shape, args.stride, args.padding)
        layers.append(op)
        shape = op.output_shape
    net = ConvNet(layers)
    true_norms = net.layer_norms()
    reshaped = [reshaped_kernel_norm(op, args.iters) for op in layers]

    rows = []
    for depth in range(1, args.layers + 1):
        true_bound = math.prod(true_norms[:depth])
        reshaped_bound = math.prod(reshaped[:depth])
        rows.append([depth, args.channels, args.kernel, args.input_size, args.stride, args.padding,
                     true_bound, reshaped_bound, true_bound / reshaped_bound])
    csv_path = write_csv(_sibling(report_path, "specnorm.csv"), SPECNORM_HEADER, rows)
    run_manager.add_output(run_id, csv_path)
    payload = {"layer_true_norms": true_norms, "layer_reshaped_norms": reshaped,
               "rows": [dict(zip(SPECNORM_HEADER, r)) for r in rows]}
    return _finish(run_id, report_path, payload, args, args.seed, _flags(args))


def cmd_critic_toy(args: argparse.Namespace) -> int:
    """
    Fit one critic per (lam, lr) pair of the comma-separated --lam and --lr lists. The
    report's estimate, history, layer norms and grid belong to the first pair; every pair
    gets a row in the sweep CSV.
    """
    X, Y, oracle = toy_problem()
    settings = list(itertools.product(_float_list(args.lam), _float_list(args.lr)))
    if not settings:
        raise InvalidArgumentError("--lam and --lr need at least one value each")
    mode = CriticMode(args.mode).value
    run_id, report_path = _start(args)
    fits = []
    for lam, lr in settings:
        net = MlpCritic.random(2, args.hidden, args.depth, Activation(args.activation), args.seed)
        adam = AdamState(lr=lr, beta1=args.beta1, beta2=args.beta2)
        estimate, history = fit_critic(net, X, Y, args.mode, adam, args.steps, lam=lam,
                                       seed=args.seed, log_every=max(1, args.steps // 20))
        logger.info("Critic %s lam=%g lr=%g: ratio %.4f", mode, lam, lr, estimate / oracle)
        fits.append((net, estimate, history))
    rows = [[mode, lam, lr, estimate, estimate / oracle]
            for (lam, lr), (_, estimate, _) in zip(settings, fits)]
    sweep_path = write_csv(_sibling(report_path, "sweep.csv"), CRITIC_SWEEP_HEADER, rows)
    run_manager.add_output(run_id, sweep_path)

    net, estimate, history = fits[0]
    grid_path = write_csv(_sibling(report_path, "grid.csv"), CRITIC_GRID_HEADER,
                          critic_grid(net, args.grid_steps).tolist())
    run_manager.add_output(run_id, grid_path)
    payload = {
        "mode": mode,
        "estimate": estimate,
        "oracle": oracle,
        "ratio": estimate / oracle,
        "layer_norms": net.layer_norms(),
        "history": history,
        "sweep": [dict(zip(CRITIC_SWEEP_HEADER, r)) for r in rows],
    }
    return _finish(run_id, report_path, payload, args, args.seed, _flags(args))

def cmd_manifold(args: argparse.Namespace) -> int:
    data = load_batch(args.data, args.format)
    cfg = _solver_config(args)
    train_cfg = TrainConfig(
        epochs=args.epochs,
        batch=args.batch or min(config.train_batch, data.size),
        solver=args.solver,
        solver_config=cfg,
        outer_iter=args.outer if args.outer is not None else 20,
        cost=args.cost,
        hidden=args.hidden,
        z_dim=config.generator_z_dim,
        lr=args.lr,
        fixed_z=args.fixed_z,
        seed=args.seed,
        log_every=max(1, args.epochs // 20),
    )
    run_id, report_path = _start(args)
    g, losses = train_toy_generator(data, train_cfg)

    manifold = manifold_grid(g, args.grid, data.image_shape)
    if manifold.image_shape is not None:
        out_path = write_pgm(_sibling(report_path, "manifold.pgm"), tile_images(manifold, args.grid))
    else:
        out_path = write_csv(_sibling(report_path, "manifold.csv"),
                             [f"x{k}" for k in range(manifold.dim)], manifold.data.tolist())
    loss_path = write_csv(_sibling(report_path, "loss.csv"), LOSS_HEADER, enumerate(losses))
    run_manager.add_output(run_id, out_path)
    run_manager.add_output(run_id, loss_path)
    payload = {"initial_loss": losses[0], "final_loss": losses[-1], "epochs": len(losses),
               "train_config": train_cfg}
    return _finish(run_id, report_path, payload, args, args.seed, _flags(args, cfg))


async def _log_progress(line: str) -> None:
    logger.info(line)


def _add_solver_flags(p: argparse.ArgumentParser, default_solver: str = "pdhg") -> None:
    p.add_argument("--cost", choices=[c.value for c in CostKind], default=CostKind.SQUARED_L2.value)
    p.add_argument("--solver", choices=[s.value for s in SolverName], default=default_solver)
    p.add_argument("--eps", type=float, default=None, help="Regularization weight")
    p.add_argument("--tol", type=float, default=None, help="Marginal-residual threshold")
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--inner", type=int, default=None, help="Inner iterations of centered solvers")
    p.add_argument("--outer", type=int, default=None, help="Outer iterations of centered solvers")
    p.add_argument("--tau", type=float, default=None, help="PDHG primal step")
    p.add_argument("--log-domain", action="store_true")
    p.add_argument("--no-restart", action="store_true", help="Literal FISTA momentum without restart")
    p.add_argument("--literal-center", action="store_true", help="FISTA-Center update without the center term")
    p.add_argument("--cost-normalize", action="store_true", help="Divide C by max(C) before solving")
    p.add_argument("--format", choices=["auto", "csv", "idx", "cifar10"], default="auto")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=config.seed)
    common.add_argument("--out", default=None, help="Report path (default: run directory)")
    common.add_argument("--workers", type=int, default=config.bench_workers)

    parser = _Parser(prog="wasserstein-lab", description="Discrete optimal transport lab")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", parents=[common], help="Solve one transport problem between two files")
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    _add_solver_flags(p)
    p.set_defaults(handler=cmd_solve)

    p = sub.add_parser("bench-eps", parents=[common], help="Sweep epsilon for several solvers on one problem")
    p.add_argument("--x")
    p.add_argument("--y")
    p.add_argument("--random-size", type=int, default=0, help="Random n x n cost uniform in [0, 1]")
    p.add_argument("--eps-grid", required=True)
    p.add_argument("--solvers", default="sinkhorn,sinkhorn-center,fista,fista-center")
    _add_solver_flags(p)
    p.set_defaults(handler=cmd_bench_eps)

    p = sub.add_parser("bench-batch", parents=[common], help="Distance between disjoint batches against batch size")
    p.add_argument("--sizes", required=True)
    p.add_argument("--source", choices=["cifar10", "blobs"], default="blobs")
    p.add_argument("--data", help="CIFAR-10 binary batch file")
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--blob-centers", default="0,0")
    p.add_argument("--blob-scale", type=float, default=1.0)
    _add_solver_flags(p, default_solver=SolverName.SINKHORN_CENTER.value)
    p.set_defaults(handler=cmd_bench_batch)

    p = sub.add_parser("specnorm", parents=[common], help="True convolution norms against reshaped-kernel norms")
    p.add_argument("--channels", type=int, default=1)
    p.add_argument("--kernel", type=int, default=3)
    p.add_argument("--input-size", type=int, default=8)
    p.add_argument("--layers", type=int, default=1)
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--padding", type=int, default=1)
    p.add_argument("--kernel-type", choices=["average", "random"], default="average")
    p.add_argument("--iters", type=int, default=500)
    p.set_defaults(handler=cmd_specnorm)

    p = sub.add_parser("critic-toy", parents=[common], help="Fit a critic on the four-point planar toy")
    p.add_argument("--mode", choices=[m.value for m in CriticMode], default=CriticMode.SN_LAYER.value)
    p.add_argument("--steps", type=int, default=5000)
    p.add_argument("--lr", default="1e-3", help="Adam learning rates, comma-separated")
    p.add_argument("--beta1", type=float, default=config.adam_beta1)
    p.add_argument("--beta2", type=float, default=config.adam_beta2)
    p.add_argument("--lam", default=str(config.gp_lambda), help="Gradient penalty weights, comma-separated")
    p.add_argument("--activation", choices=[a.value for a in Activation], default=Activation.RELU.value)
    p.add_argument("--hidden", type=int, default=config.critic_hidden)
    p.add_argument("--depth", type=int, default=config.critic_depth)
    p.add_argument("--grid-steps", type=int, default=21)
    p.set_defaults(handler=cmd_critic_toy)

    p = sub.add_parser("manifold", parents=[common], help="Train the toy generator and tile its latent manifold")
    p.add_argument("--data", required=True)
    p.add_argument("--epochs", type=int, default=config.train_epochs)
    p.add_argument("--grid", type=int, default=10)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--hidden", type=int, default=config.generator_hidden)
    p.add_argument("--lr", type=float, default=config.adam_lr)
    p.add_argument("--fixed-z", action="store_true")
    _add_solver_flags(p, default_solver=SolverName.SINKHORN.value)
    p.set_defaults(handler=cmd_manifold)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except InvalidArgumentError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    try:
        return args.handler(args)
    except (WassersteinLabError, OSError, ValueError) as e:
        logger.error("%s failed: %s", args.command, e)
        for run in run_manager.runs.values():
            if run.status is RunStatus.ACTIVE:
                run_manager.finish_run(run.run_id, RunStatus.FAILED)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
