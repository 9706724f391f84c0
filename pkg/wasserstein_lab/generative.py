"""
Full-batch training of a one-hidden-layer generator against a transport loss.

Each epoch solves the transport problem between a data batch and the generated batch,
then moves the generated points along the fixed-plan cost gradient (the plan itself is
not differentiated).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from aixtools.logging.logging_config import get_logger

from wasserstein_lab.constants import LEAKY_SLOPE, CostKind
from wasserstein_lab.core import (
    InvalidArgumentError,
    TrainingError,
    UnsupportedError,
    WassersteinLabError,
    uniform_measure,
)
from wasserstein_lab.costs import pairwise_cost
from wasserstein_lab.divergence import plan_gradient
from wasserstein_lab.models import SampleBatch, TrainConfig
from wasserstein_lab.optim import AdamState
from wasserstein_lab.rng import box_muller, make_rng
from wasserstein_lab.solvers import run_solver

logger = get_logger(__name__)

# PRNG stream keys
_INIT_STREAM = 0
_BATCH_STREAM = 1
_LATENT_STREAM = 2


@dataclass
class GeneratorMlp:
    """g(z) = logistic(W2 leaky(W1 z + b1) + b2)."""
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray

    @classmethod
    def random(cls, z_dim: int, hidden: int, out_dim: int, seed: int = 0) -> GeneratorMlp:
        return cls(
            W1=box_muller(make_rng(seed, _INIT_STREAM, 0), (hidden, z_dim)) * np.sqrt(2.0 / z_dim),
            b1=np.zeros(hidden),
            W2=box_muller(make_rng(seed, _INIT_STREAM, 1), (out_dim, hidden)) * np.sqrt(1.0 / hidden),
            b2=np.zeros(out_dim),
        )

    @property
    def z_dim(self) -> int:
        return self.W1.shape[1]

    @property
    def out_dim(self) -> int:
        return self.W2.shape[0]

    def parameters(self) -> list[np.ndarray]:
        return [self.W1, self.b1, self.W2, self.b2]

    def _forward(self, Z: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        pre = Z @ self.W1.T + self.b1
        hidden = np.where(pre > 0, pre, LEAKY_SLOPE * pre)
        return pre, hidden, expit(hidden @ self.W2.T + self.b2)

    def __call__(self, Z: np.ndarray) -> np.ndarray:
        return self._forward(np.atleast_2d(np.asarray(Z, dtype=float)))[2]

    def backward(self, Z: np.ndarray, grad_out: np.ndarray) -> list[np.ndarray]:
        """Parameter gradients of sum(grad_out * g(Z))."""
        pre, hidden, out = self._forward(Z)
        d_logit = grad_out * out * (1.0 - out)
        d_hidden = (d_logit @ self.W2) * np.where(pre > 0, 1.0, LEAKY_SLOPE)
        return [d_hidden.T @ Z, d_hidden.sum(axis=0), d_logit.T @ hidden, d_logit.sum(axis=0)]


def train_toy_generator(data: SampleBatch, cfg: TrainConfig) -> tuple[GeneratorMlp, list[float]]:
    """
    Train a generator on `data` (values in [0, 1]) for cfg.epochs full-batch epochs.

    Returns:
        (generator, per-epoch transport cost <T, C>)

    Raises:
        InvalidArgumentError: batch larger than the data or values outside [0, 1]
        UnsupportedError: cost without an analytic gradient
        TrainingError: a solve or gradient failed, with the epoch attached
    """
    cost = CostKind(cfg.cost)
    if cost is CostKind.SSIM:
        raise UnsupportedError("generator training needs a cost with an analytic gradient")
    if cfg.batch > data.size:
        raise InvalidArgumentError(f"batch {cfg.batch} exceeds dataset size {data.size}")
    if data.data.min() < 0.0 or data.data.max() > 1.0:
        raise InvalidArgumentError("training data must lie in [0, 1]")

    g = GeneratorMlp.random(cfg.z_dim, cfg.hidden, data.dim, cfg.seed)
    adam = AdamState(lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2, eps_hat=cfg.eps_hat)
    mu, nu = uniform_measure(cfg.batch), uniform_measure(cfg.batch)
    logger.info("Generator training: n=%d d=%d epochs=%d solver=%s cost=%s",
                cfg.batch, data.dim, cfg.epochs, cfg.solver.value, cost.value)

    losses: list[float] = []
    for epoch in range(cfg.epochs):
        if cfg.batch == data.size:
            X = data
        else:
            X = data.take(make_rng(cfg.seed, _BATCH_STREAM, epoch).choice(data.size, cfg.batch, replace=False))
        Z = make_rng(cfg.seed, _LATENT_STREAM, 0 if cfg.fixed_z else epoch).random((cfg.batch, cfg.z_dim))
        Y = SampleBatch(data=g(Z), image_shape=data.image_shape, channels_first=data.channels_first)
        try:
            C = pairwise_cost(X, Y, cost)
            result = run_solver(cfg.solver, C, mu, nu, cfg.solver_config, cfg.outer_iter)
            grad_y = plan_gradient(result.plan, X, Y, cost)
        except WassersteinLabError as e:
            logger.error("Generator training failed at epoch %d: %s", epoch, e)
            raise TrainingError(epoch, e) from e
        adam.step(g.parameters(), g.backward(Z, grad_y))
        losses.append(result.report.distance)
        if epoch % cfg.log_every == 0:
            logger.info("Epoch %d: loss=%.6g", epoch, losses[-1])

    logger.info("Generator training done: loss %.6g -> %.6g", losses[0], losses[-1])
    return g, losses


def manifold_grid(g: GeneratorMlp, steps: int, image_shape: tuple[int, int, int] | None = None) -> SampleBatch:
    """g on the grid {0, 1/(steps-1), ..., 1}^2, first latent coordinate varying slowest."""
    if g.z_dim != 2:
        raise InvalidArgumentError(f"manifold grid needs z_dim = 2, got {g.z_dim}")
    if steps < 1:
        raise InvalidArgumentError(f"steps must be >= 1, got {steps}")
    axis = np.linspace(0.0, 1.0, steps)
    z1, z2 = np.meshgrid(axis, axis, indexing="ij")
    return SampleBatch(data=g(np.column_stack([z1.ravel(), z2.ravel()])), image_shape=image_shape)
