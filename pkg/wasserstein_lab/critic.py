"""
A small fully connected critic with analytic gradients and three ways of keeping it
1-Lipschitz while maximizing mean f(X) - mean f(Y):

- gp: subtract the two-sided gradient penalty at random interpolates
- sn-layer: divide every weight by its power-method norm inside the forward pass
- sn-project: rescale every weight to spectral norm <= 1 after each optimizer step
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from aixtools.logging.logging_config import get_logger

from wasserstein_lab.config import config
from wasserstein_lab.constants import LEAKY_SLOPE, Activation, CostKind, CriticMode
from wasserstein_lab.core import InvalidArgumentError
from wasserstein_lab.costs import pairwise_cost
from wasserstein_lab.lipschitz import PowerState, spectral_norm_matrix
from wasserstein_lab.models import CriticStep, SampleBatch
from wasserstein_lab.optim import AdamState
from wasserstein_lab.rng import box_muller, make_rng
from wasserstein_lab.verification import exact_uniform_wasserstein

logger = get_logger(__name__)


def activate(z: np.ndarray, activation: Activation) -> np.ndarray:
    match activation:
        case Activation.LEAKY_RELU:
            return np.where(z > 0, z, LEAKY_SLOPE * z)
        case Activation.RELU:
            return np.maximum(z, 0.0)
        case _:
            return z


def activation_slope(z: np.ndarray, activation: Activation) -> np.ndarray:
    """Derivative of the activation, 0 (relu) or 0.2 (leaky) at the kink."""
    match activation:
        case Activation.LEAKY_RELU:
            return np.where(z > 0, 1.0, LEAKY_SLOPE)
        case Activation.RELU:
            return (z > 0).astype(float)
        case _:
            return np.ones_like(z)


@dataclass
class DenseLayer:
    weight: np.ndarray
    bias: np.ndarray
    activation: Activation = Activation.LEAKY_RELU

    def __post_init__(self):
        self.weight = np.array(self.weight, dtype=float)
        self.bias = np.array(self.bias, dtype=float)
        self.activation = Activation(self.activation)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise InvalidArgumentError(
                f"layer weight {self.weight.shape} and bias {self.bias.shape} do not match"
            )


@dataclass
class ForwardPass:
    values: np.ndarray
    pre_activations: list[np.ndarray]
    inputs: list[np.ndarray]


@dataclass
class MlpCritic:
    """
    f(x) = W_L s(... s(W_1 x + b_1) ...) + b_L with a scalar output layer.

    With `spectral_layer` set, the forward pass uses W_i / sigma_i where sigma_i comes from
    a power iteration whose vector persists in `power_states`.
    """
    layers: list[DenseLayer]
    spectral_layer: bool = False
    power_states: list[PowerState] = field(default_factory=list)
    sigmas: list[float] = field(default_factory=list)

    def __post_init__(self):
        if not self.layers:
            raise InvalidArgumentError("critic needs at least one layer")
        for i, (a, b) in enumerate(zip(self.layers, self.layers[1:])):
            if a.weight.shape[0] != b.weight.shape[1]:
                raise InvalidArgumentError(
                    f"layer {i} outputs {a.weight.shape[0]} values, layer {i + 1} expects {b.weight.shape[1]}"
                )
        if self.layers[-1].weight.shape[0] != 1:
            raise InvalidArgumentError("the last critic layer must have a scalar output")

    @classmethod
    def random(cls, in_dim: int, hidden: int | None = None, depth: int | None = None,
               activation: Activation = Activation.LEAKY_RELU, seed: int = 0) -> MlpCritic:
        """He-initialized critic with `depth` hidden layers of `hidden` units and zero biases."""
        hidden = hidden or config.critic_hidden
        depth = config.critic_depth if depth is None else depth
        sizes = [in_dim] + [hidden] * depth + [1]
        layers = []
        for i, (fan_in, fan_out) in enumerate(zip(sizes, sizes[1:])):
            weight = box_muller(make_rng(seed, i), (fan_out, fan_in)) * np.sqrt(2.0 / fan_in)
            act = activation if i < depth else Activation.IDENTITY
            layers.append(DenseLayer(weight=weight, bias=np.zeros(fan_out), activation=act))
        return cls(layers=layers)

    @property
    def in_dim(self) -> int:
        return self.layers[0].weight.shape[1]

    def parameters(self) -> list[np.ndarray]:
        params = []
        for layer in self.layers:
            params.extend([layer.weight, layer.bias])
        return params

    def refresh_sigmas(self, iters: int = 1, seed: int = 0) -> list[float]:
        """One warm-started power step per layer; sigma is held fixed until the next refresh."""
        if not self.power_states:
            self.power_states = [PowerState.random(layer.weight.shape[1], seed, i)
                                 for i, layer in enumerate(self.layers)]
        self.sigmas = [spectral_norm_matrix(layer.weight, iters, state)[0]
                       for layer, state in zip(self.layers, self.power_states)]
        return self.sigmas

    def weights(self) -> list[np.ndarray]:
        """Weights as used in the forward pass."""
        if not self.spectral_layer:
            return [layer.weight for layer in self.layers]
        if not self.sigmas:
            self.refresh_sigmas(config.power_iterations)
        return [layer.weight / s for layer, s in zip(self.layers, self.sigmas)]

    def forward(self, X: np.ndarray) -> ForwardPass:
        a = np.atleast_2d(np.asarray(X, dtype=float))
        if a.shape[1] != self.in_dim:
            raise InvalidArgumentError(f"input dimension {a.shape[1]} != critic input {self.in_dim}")
        pre, inputs = [], []
        for layer, W in zip(self.layers, self.weights()):
            inputs.append(a)
            z = a @ W.T + layer.bias
            pre.append(z)
            a = activate(z, layer.activation)
        return ForwardPass(values=a[:, 0], pre_activations=pre, inputs=inputs)

    def __call__(self, X: np.ndarray) -> np.ndarray:
        return self.forward(X).values

    def layer_norms(self) -> list[float]:
        return [float(np.linalg.norm(W, 2)) for W in self.weights()]


def _input_backward(net: MlpCritic, fp: ForwardPass) -> tuple[np.ndarray, list[np.ndarray]]:
    """
    Input gradients of f at every row, plus per layer the derivative of f with respect
    to that layer's pre-activation.
    """
    weights = net.weights()
    p = np.ones((fp.values.shape[0], 1))
    slopes: list[np.ndarray] = []
    for layer, W, z in zip(reversed(net.layers), reversed(weights), reversed(fp.pre_activations)):
        p = p * activation_slope(z, layer.activation)
        slopes.append(p)
        p = p @ W
    return p, slopes[::-1]


def critic_gradients(net: MlpCritic, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Values and input gradients of the critic at every row of X."""
    fp = net.forward(X)
    grads, _ = _input_backward(net, fp)
    return fp.values, grads


def critic_value_and_gradient(net: MlpCritic, x: np.ndarray) -> tuple[float, np.ndarray]:
    """f(x) and its exact gradient by reverse accumulation."""
    values, grads = critic_gradients(net, np.asarray(x, dtype=float)[None, :])
    return float(values[0]), grads[0]


def _objective_grads(net: MlpCritic, X: np.ndarray, Y: np.ndarray) -> tuple[float, list[np.ndarray]]:
    """mean f(X) - mean f(Y) and its gradient with respect to the forward-pass weights and biases."""
    data = np.vstack([X, Y])
    coef = np.concatenate([np.full(len(X), 1.0 / len(X)), np.full(len(Y), -1.0 / len(Y))])
    fp = net.forward(data)
    weights = net.weights()
    delta = coef[:, None]
    grads: list[np.ndarray] = []
    for i in reversed(range(len(net.layers))):
        delta = delta * activation_slope(fp.pre_activations[i], net.layers[i].activation)
        grads[:0] = [delta.T @ fp.inputs[i], delta.sum(axis=0)]
        delta = delta @ weights[i]
    return float(coef @ fp.values), grads


def _interpolates(X: SampleBatch, Y: SampleBatch, n_points: int, seed: int, *stream: int) -> np.ndarray:
    rng = make_rng(seed, *stream)
    i = rng.integers(X.size, size=n_points)
    j = rng.integers(Y.size, size=n_points)
    t = rng.random(n_points)[:, None]
    return t * X.data[i] + (1.0 - t) * Y.data[j]


def _penalty_grads(net: MlpCritic, points: np.ndarray, lam: float) -> tuple[float, list[np.ndarray]]:
    """
    Mean of lam (||grad f(x)|| - 1)^2 and its gradient with respect to the forward-pass
    weights (biases get zero).

    Between kinks grad f(x) = (W_L D ... D W_1)^T with the activation slopes D fixed, so the
    derivative for W_k is the outer product of the slopes above layer k with the penalty
    direction pushed forward through the layers below it.
    """
    fp = net.forward(points)
    grads_x, above = _input_backward(net, fp)
    norms = np.linalg.norm(grads_x, axis=1)
    penalty = float(lam * np.mean((norms - 1.0) ** 2))

    scale = np.divide(2.0 * lam * (norms - 1.0), norms, out=np.zeros_like(norms), where=norms > 0)
    below = scale[:, None] * grads_x / len(points)
    weights = net.weights()
    param_grads: list[np.ndarray] = []
    for i, layer in enumerate(net.layers):
        param_grads.extend([above[i].T @ below, np.zeros_like(layer.bias)])
        below = (below @ weights[i].T) * activation_slope(fp.pre_activations[i], layer.activation)
    return penalty, param_grads


def gradient_penalty(net: MlpCritic, X: SampleBatch, Y: SampleBatch, lam: float,
                     n_points: int, seed: int) -> float:
    """
    lam * mean (||grad f(x)|| - 1)^2 over `n_points` seeded interpolates of X and Y rows.

    Against a transport term of size W the fitted slope settles near 1 + W / (2 lam), so
    unit slopes need lam well above W.
    """
    if lam == 0:
        return 0.0
    penalty, _ = _penalty_grads(net, _interpolates(X, Y, n_points, seed), lam)
    return penalty


def fit_critic(
    net: MlpCritic,
    X: SampleBatch,
    Y: SampleBatch,
    mode: CriticMode | str,
    adam: AdamState,
    steps: int,
    lam: float | None = None,
    gp_points: int | None = None,
    power_iterations: int | None = None,
    seed: int | None = None,
    log_every: int = 500,
) -> tuple[float, list[CriticStep]]:
    """
    Maximize mean f(X) - mean f(Y) with Adam under the given Lipschitz mode.

    Returns:
        (final unpenalized mean f(X) - mean f(Y), sampled progress)
    """
    mode = CriticMode(mode)
    if steps < 1:
        raise InvalidArgumentError(f"steps must be >= 1, got {steps}")
    if X.dim != net.in_dim or Y.dim != net.in_dim:
        raise InvalidArgumentError("batch dimension does not match the critic input")
    lam = config.gp_lambda if lam is None else lam
    gp_points = gp_points or config.gp_points
    power_iterations = power_iterations or config.power_iterations
    seed = config.seed if seed is None else seed
    net.spectral_layer = mode is CriticMode.SN_LAYER
    logger.info("Critic fit: mode=%s steps=%d lr=%g", mode.value, steps, adam.lr)

    params = net.parameters()
    history: list[CriticStep] = []
    estimate = penalty = 0.0
    for step in range(1, steps + 1):
        if mode is CriticMode.SN_LAYER:
            net.refresh_sigmas(power_iterations, seed)
        estimate, grads = _objective_grads(net, X.data, Y.data)
        grads = [-g for g in grads]
        if mode is CriticMode.GP and lam > 0:
            penalty, gp_grads = _penalty_grads(net, _interpolates(X, Y, gp_points, seed, step), lam)
            grads = [g + h for g, h in zip(grads, gp_grads)]
        if mode is CriticMode.SN_LAYER:
            # sigma is a constant of the backward pass
            for k, sigma in enumerate(net.sigmas):
                grads[2 * k] = grads[2 * k] / sigma
        adam.step(params, grads)
        if mode is CriticMode.SN_PROJECT:
            for layer in net.layers:
                sigma = np.linalg.norm(layer.weight, 2)
                if sigma > 1.0:
                    layer.weight /= sigma
        if step % log_every == 0 or step == 1:
            history.append(CriticStep(step=step, estimate=estimate, penalty=penalty))
            logger.debug("Critic step %d: estimate=%.6g penalty=%.3g", step, estimate, penalty)

    if mode is CriticMode.SN_LAYER:
        net.refresh_sigmas(power_iterations, seed)
    estimate = float(np.mean(net(X.data)) - np.mean(net(Y.data)))
    history.append(CriticStep(step=steps, estimate=estimate, penalty=penalty))
    logger.info("Critic fit done: mode=%s estimate=%.6g", mode.value, estimate)
    return estimate, history


def toy_problem() -> tuple[SampleBatch, SampleBatch, float]:
    """
    Two data points on the x axis against two generated points on the y axis, with their
    exact W1 (L2 cost), sqrt(0.5). Both batches have mean zero, so every linear critic
    scores 0; the optimal critic (|x| - |y|) / sqrt(2) bends along both diagonals.
    """
    X = SampleBatch(data=[[0.5, 0.0], [-0.5, 0.0]])
    Y = SampleBatch(data=[[0.0, 0.5], [0.0, -0.5]])
    exact, _ = exact_uniform_wasserstein(pairwise_cost(X, Y, CostKind.L2))
    return X, Y, exact


def critic_grid(net: MlpCritic, steps: int = 21, low: float = -1.0, high: float = 1.0) -> np.ndarray:
    """Rows (x, y, f(x, y)) over a steps x steps grid of the square [low, high]^2."""
    if net.in_dim != 2:
        raise InvalidArgumentError("critic grid needs a 2-dimensional critic")
    axis = np.linspace(low, high, steps)
    gx, gy = np.meshgrid(axis, axis, indexing="ij")
    points = np.column_stack([gx.ravel(), gy.ravel()])
    return np.column_stack([points, net(points)])
