"""Scenario runner for the YAML evaluation cases."""

import asyncio
import inspect
from typing import Any, Awaitable, Callable

import numpy as np
from pydantic import BaseModel, Field

from aixtools.logging.logging_config import get_logger

from wasserstein_lab.bench import BenchOrchestrator, summarize_batch_trials
from wasserstein_lab.constants import Activation, CostKind, CriticMode, SolverName
from wasserstein_lab.core import NumericalUnderflowError, uniform_measure
from wasserstein_lab.critic import MlpCritic, critic_gradients, fit_critic, toy_problem
from wasserstein_lab.divergence import sinkhorn_divergence
from wasserstein_lab.generative import GeneratorMlp, train_toy_generator
from wasserstein_lab.ingest import synth_blobs
from wasserstein_lab.lipschitz import (
    ConvOperator,
    PowerState,
    lipschitz_upper_bound,
    reshaped_kernel_norm,
    spectral_norm_conv,
    true_conv_norm,
)
from wasserstein_lab.models import CostMatrix, SampleBatch, SolverConfig, TrainConfig
from wasserstein_lab.optim import AdamState
from wasserstein_lab.rng import box_muller, make_rng
from wasserstein_lab.solvers import run_solver
from wasserstein_lab.verification import certify, exact_uniform_wasserstein

logger = get_logger(__name__)

_HELD_OUT_LATENTS = 7

Scenario = Callable[[dict[str, Any]], dict[str, float] | Awaitable[dict[str, float]]]
SCENARIOS: dict[str, Scenario] = {}


def scenario(name: str):
    def register(fn: Scenario) -> Scenario:
        SCENARIOS[name] = fn
        return fn
    return register


class CaseResult(BaseModel):
    id: str
    passed: bool
    metrics: dict[str, float]
    failures: list[str] = Field(default_factory=list)


def _problem(n: int, seed: int):
    C = CostMatrix(values=make_rng(seed, n, n).random((n, n)))
    return C, uniform_measure(n), uniform_measure(n)


def _instances(params: dict[str, Any]):
    for n in params.get("sizes", [5]):
        for seed in params.get("seeds", [0]):
            yield _problem(int(n), int(seed))


def _solver_config(params: dict[str, Any], **overrides) -> SolverConfig:
    values = dict(params.get("solver_config", {}))
    values.update(overrides)
    return SolverConfig(**values)


@scenario("oracle_agreement")
def oracle_agreement(params: dict[str, Any]) -> dict[str, float]:
    cfg = _solver_config(params)
    errors, converged = [], []
    for C, mu, nu in _instances(params):
        exact, _ = exact_uniform_wasserstein(C)
        result = run_solver(params.get("solver", "pdhg"), C, mu, nu, cfg)
        errors.append(abs(result.report.distance - exact))
        converged.append(result.report.converged)
    return {"max_abs_error": max(errors), "converged_fraction": float(np.mean(converged))}


@scenario("pdhg_certificates")
def pdhg_certificates(params: dict[str, Any]) -> dict[str, float]:
    cfg = _solver_config(params)
    gaps, violations, residuals = [], [], []
    for C, mu, nu in _instances(params):
        result = run_solver(SolverName.PDHG, C, mu, nu, cfg)
        cert = certify(result.plan, result.potentials, C, mu, nu)
        gaps.append(cert.gap)
        violations.append(cert.max_dual_violation)
        residuals.append(cert.max_marginal_residual)
    return {"max_gap": max(gaps), "max_dual_violation": max(violations),
            "max_marginal_residual": max(residuals)}


@scenario("entropic_bias")
def entropic_bias(params: dict[str, Any]) -> dict[str, float]:
    """
    Sharp error along a decreasing epsilon grid; `max_increase` > 0 means the error grew.
    With `compare_domains`, Sinkhorn also runs in the standard domain and `max_domain_gap`
    is the largest distance difference where that run does not underflow.
    """
    max_increase, min_error, domain_gap = -np.inf, np.inf, 0.0
    for C, mu, nu in _instances(params):
        exact, _ = exact_uniform_wasserstein(C)
        for solver in params["solvers"]:
            errors = []
            for eps in params["eps_grid"]:
                cfg = _solver_config(params, epsilon=eps)
                report = run_solver(solver, C, mu, nu, cfg).report
                errors.append(report.distance - exact)
                if params.get("compare_domains") and SolverName(solver) is SolverName.SINKHORN:
                    try:
                        standard = run_solver(solver, C, mu, nu, cfg.model_copy(update={"log_domain": False}))
                    except NumericalUnderflowError:
                        continue
                    domain_gap = max(domain_gap, abs(standard.report.distance - report.distance))
            min_error = min(min_error, min(errors))
            max_increase = max(max_increase, max(b - a for a, b in zip(errors, errors[1:])))
    return {"max_increase": float(max_increase), "min_error": float(min_error),
            "max_domain_gap": float(domain_gap)}


@scenario("centered_advantage")
def centered_advantage(params: dict[str, Any]) -> dict[str, float]:
    """
    Oracle errors of a centered solver against its plain counterpart at the same epsilon:
    the fraction of instances the centered one solves within `accurate` and the fraction
    the plain one misses by more than `inaccurate`.
    """
    plain_solver = SolverName(params["plain"])
    centered_solver = SolverName(params["centered"])
    accurate, inaccurate = params.get("accurate", 1e-3), params.get("inaccurate", 1e-2)
    cfg = _solver_config(params)
    wins, centered_ok, plain_off, worst_excess = [], [], [], -np.inf
    for C, mu, nu in _instances(params):
        exact, _ = exact_uniform_wasserstein(C)
        plain = run_solver(plain_solver, C, mu, nu, cfg).report.distance
        centered = run_solver(centered_solver, C, mu, nu, cfg, params["outer_iter"]).report.distance
        wins.append(centered < plain)
        centered_ok.append(abs(centered - exact) <= accurate)
        plain_off.append(abs(plain - exact) > inaccurate)
        worst_excess = max(worst_excess, centered - plain)
    return {"win_fraction": float(np.mean(wins)), "worst_excess": float(worst_excess),
            "centered_accurate_fraction": float(np.mean(centered_ok)),
            "plain_inaccurate_fraction": float(np.mean(plain_off))}


@scenario("quadratic_duality")
def quadratic_duality(params: dict[str, Any]) -> dict[str, float]:
    cfg = _solver_config(params)
    gaps, residuals = [], []
    for C, mu, nu in _instances(params):
        report = run_solver(SolverName.FISTA, C, mu, nu, cfg).report
        gaps.append(abs(report.dual_objective - report.regularized_objective))
        residuals.append(report.marginal_residual)
    return {"max_duality_gap": max(gaps), "max_marginal_residual": max(residuals)}


@scenario("conv_norm_suite")
def conv_norm_suite(params: dict[str, Any]) -> dict[str, float]:
    rel_errors, ratios = [], []
    for k, layer in enumerate(params["layers"]):
        c, size = int(layer["channels"]), int(layer["kernel"])
        if layer.get("kernel_type", "average") == "average":
            kernel = np.full((c, c, size, size), 1.0 / (c * size * size))
        else:
            kernel = box_muller(make_rng(int(layer.get("seed", 0)), k), (c, c, size, size))
        op = ConvOperator(kernel, (c, layer["input_size"], layer["input_size"]),
                          layer.get("stride", 1), layer.get("padding", 0))
        exact = true_conv_norm(op)
        estimate = spectral_norm_conv(op, params["iters"], PowerState.random(op.in_dim, k))
        rel_errors.append(abs(estimate - exact) / exact)
        ratios.append(exact / reshaped_kernel_norm(op, params["iters"]))
    return {"max_rel_error": max(rel_errors), "min_true_to_reshaped": min(ratios)}


@scenario("lipschitz_bound")
def lipschitz_bound(params: dict[str, Any]) -> dict[str, float]:
    """Largest sampled gradient norm divided by the layer-norm product, over random critics."""
    worst = 0.0
    for seed in params["seeds"]:
        net = MlpCritic.random(params["in_dim"], params["hidden"], params["depth"],
                               Activation(params.get("activation", "leaky_relu")), seed)
        points = make_rng(seed, 1).random((params["points"], params["in_dim"])) * 2 - 1
        _, grads = critic_gradients(net, points)
        worst = max(worst, float(np.max(np.linalg.norm(grads, axis=1))) / lipschitz_upper_bound(net))
    return {"max_gain_over_bound": worst}


@scenario("toy_critic")
def toy_critic(params: dict[str, Any]) -> dict[str, float]:
    X, Y, exact = toy_problem()
    metrics: dict[str, float] = {}
    for mode in params["modes"]:
        net = MlpCritic.random(2, params["hidden"], params["depth"], Activation(params["activation"]),
                               params.get("seed", 0))
        estimate, _ = fit_critic(net, X, Y, mode, AdamState(lr=params["lr"]), params["steps"],
                                 lam=params.get("lam"), seed=params.get("seed", 0))
        key = CriticMode(mode).value.replace("-", "_")
        metrics[f"{key}_ratio"] = estimate / exact
        metrics[f"{key}_bound_excess"] = estimate - lipschitz_upper_bound(net) * exact
    return metrics


@scenario("batch_scaling")
async def batch_scaling(params: dict[str, Any]) -> dict[str, float]:
    centers = params.get("centers", [[0.0, 0.0]])
    seed = params.get("seed", 0)

    def pool(size: int, trial: int) -> SampleBatch:
        return synth_blobs(centers, params.get("scale", 1.0), -(-2 * size // len(centers)), seed, size, trial)

    orchestrator = BenchOrchestrator(CostKind(params["cost"]), _solver_config(params),
                                     params.get("outer_iter"), seed=seed)
    trials = await orchestrator.run_batch_scaling(pool, SolverName(params["solver"]), params["sizes"],
                                                  params["trials"])
    summary = summarize_batch_trials(trials)
    means = summary["mean_distance"]
    decreasing = all(b < a for a, b in zip(means, means[1:]))
    return {"log_log_slope": summary["log_log_slope"], "strictly_decreasing": float(decreasing)}


@scenario("divergence_properties")
def divergence_properties(params: dict[str, Any]) -> dict[str, float]:
    """Worst self value, asymmetry and most negative value over `pairs` random batch pairs."""
    cfg = _solver_config(params)
    self_value = asymmetry = 0.0
    lowest = np.inf
    for k in range(params.get("pairs", 1)):
        rng = make_rng(params.get("seed", 0), k)
        X = SampleBatch(data=rng.random((params["n"], 2)))
        Y = SampleBatch(data=rng.random((params["m"], 2)) + params.get("shift", 0.0))
        forward = sinkhorn_divergence(X, Y, "sql2", cfg).value
        self_value = max(self_value, abs(sinkhorn_divergence(X, X, "sql2", cfg).value))
        asymmetry = max(asymmetry, abs(forward - sinkhorn_divergence(Y, X, "sql2", cfg).value))
        lowest = min(lowest, forward)
    p, q = np.zeros(2), np.array(params["separation"], dtype=float)
    point_mass = sinkhorn_divergence(SampleBatch(data=[p, p]), SampleBatch(data=[q, q]), "sql2", cfg).value
    return {
        "self_value": self_value,
        "asymmetry": asymmetry,
        "min_value": float(lowest),
        "point_mass_error": abs(point_mass - 2 * float(q @ q)),
    }


@scenario("generator_training")
def generator_training(params: dict[str, Any]) -> dict[str, float]:
    """
    Sinkhorn divergence between the data and a fixed latent batch pushed through the
    generator before and after training, plus whether a second run repeats the loss
    history bit for bit.
    """
    seed = params.get("seed", 0)
    rng = make_rng(seed)
    centers = np.repeat(params["centers"], params["n_per"], axis=0)
    noise = params["spread"] * (rng.random(centers.shape) - 0.5)
    data = SampleBatch(data=np.clip(centers + noise, 0.0, 1.0))
    cfg = TrainConfig(epochs=params["epochs"], batch=data.size, hidden=params["hidden"], lr=params["lr"],
                      solver=params["solver"], solver_config=_solver_config(params), seed=seed)
    measure = _solver_config(params, max_iter=params.get("divergence_max_iter", 5000))
    Z = make_rng(seed, _HELD_OUT_LATENTS).random((data.size, cfg.z_dim))

    def divergence(g: GeneratorMlp) -> float:
        return sinkhorn_divergence(data, SampleBatch(data=g(Z)), cfg.cost, measure).value

    initial = divergence(GeneratorMlp.random(cfg.z_dim, cfg.hidden, data.dim, seed))
    g, losses = train_toy_generator(data, cfg)
    final = divergence(g)
    deterministic = True
    if params.get("check_determinism", False):
        _, repeat = train_toy_generator(data, cfg)
        deterministic = repeat == losses
    return {"divergence_ratio": final / initial, "deterministic": float(deterministic),
            "final_to_initial_loss": float(np.mean(losses[-10:])) / losses[0]}



def check_expectations(metrics: dict[str, float], expect: dict[str, Any]) -> list[str]:
    failures = []
    for name, limit in (expect.get("at_most") or {}).items():
        if name not in metrics:
            failures.append(f"missing metric {name}")
        elif not metrics[name] <= float(limit):
            failures.append(f"{name}={metrics[name]:.6g} > {limit}")
    for name, limit in (expect.get("at_least") or {}).items():
        if name not in metrics:
            failures.append(f"missing metric {name}")
        elif not metrics[name] >= float(limit):
            failures.append(f"{name}={metrics[name]:.6g} < {limit}")
    return failures


async def evaluate_case_async(case: dict[str, Any]) -> CaseResult:
    """Run one YAML case and check its expectations."""
    scenario_def = case["scenario"]
    fn = SCENARIOS[scenario_def["kind"]]
    params = scenario_def.get("params", {})

    if inspect.iscoroutinefunction(fn):
        pending = fn(params)
    else:
        pending = asyncio.to_thread(fn, params)
    metrics = await asyncio.wait_for(pending, timeout=case.get("timeout_s", 600))

    failures = check_expectations(metrics, case.get("expect", {}))
    result = CaseResult(id=case["id"], passed=not failures, metrics=metrics, failures=failures)
    _log_result(result)
    return result


def _log_result(result: CaseResult) -> None:
    bar = "═" * 60
    lines = [f"╔{bar}╗", f"║ Case: {result.id}", f"║ Status: {'PASS' if result.passed else 'FAIL'}", f"╠{bar}╣"]
    lines += [f"║   • {k:<24}: {v:.6g}" for k, v in sorted(result.metrics.items())]
    if result.failures:
        lines.append("╠════════ Failures " + "─" * 42 + "╣")
        lines += [f"║   • {f}" for f in result.failures]
    lines.append(f"╚{bar}╝")
    logger.info("\n" + "\n".join(lines))
