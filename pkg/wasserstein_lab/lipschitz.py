"""
Spectral norms of dense and convolutional layers and Lipschitz bounds of layered networks.

Convolutions are zero-padded cross-correlations applied matrix-free; `materialize_conv`
builds the induced dense matrix for small inputs so the power method can be checked
against an exact decomposition.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from aixtools.logging.logging_config import get_logger

from wasserstein_lab.constants import MATERIALIZE_LIMIT
from wasserstein_lab.core import DegenerateInputError, InvalidArgumentError
from wasserstein_lab.rng import box_muller, make_rng

logger = get_logger(__name__)


@dataclass(frozen=True)
class ConvOperator:
    """
    Linear map of one convolution layer.

    Attributes:
    - kernel: (out_channels, in_channels, kh, kw)
    - input_shape: (in_channels, h, w)
    - stride: positive step between windows
    - padding: symmetric zero padding
    """
    kernel: np.ndarray
    input_shape: tuple[int, int, int]
    stride: int = 1
    padding: int = 0

    def __post_init__(self):
        kernel = np.asarray(self.kernel, dtype=float)
        if kernel.ndim != 4:
            raise InvalidArgumentError(f"kernel must be 4-dimensional, got shape {kernel.shape}")
        object.__setattr__(self, "kernel", kernel)
        object.__setattr__(self, "input_shape", tuple(int(s) for s in self.input_shape))
        if self.stride < 1 or self.padding < 0:
            raise InvalidArgumentError(f"invalid stride {self.stride} / padding {self.padding}")
        if kernel.shape[1] != self.input_shape[0]:
            raise InvalidArgumentError(
                f"kernel expects {kernel.shape[1]} input channels, input has {self.input_shape[0]}"
            )
        if min(self.output_shape) < 1:
            raise InvalidArgumentError(f"kernel {kernel.shape[2:]} does not fit input {self.input_shape}")

    @property
    def output_shape(self) -> tuple[int, int, int]:
        _, h, w = self.input_shape
        kh, kw = self.kernel.shape[2:]
        p, s = self.padding, self.stride
        return (self.kernel.shape[0], (h + 2 * p - kh) // s + 1, (w + 2 * p - kw) // s + 1)

    @property
    def in_dim(self) -> int:
        return math.prod(self.input_shape)

    @property
    def out_dim(self) -> int:
        return math.prod(self.output_shape)


def conv_apply(op: ConvOperator, x: np.ndarray) -> np.ndarray:
    """Forward convolution; accepts `x` flat or shaped as op.input_shape."""
    x = np.asarray(x, dtype=float).reshape(op.input_shape)
    p, s = op.padding, op.stride
    _, oh, ow = op.output_shape
    kh, kw = op.kernel.shape[2:]
    padded = np.pad(x, ((0, 0), (p, p), (p, p)))
    windows = sliding_window_view(padded, (kh, kw), axis=(1, 2))[:, ::s, ::s][:, :oh, :ow]
    return np.einsum("oikl,ixykl->oxy", op.kernel, windows)


def conv_adjoint(op: ConvOperator, y: np.ndarray) -> np.ndarray:
    """Transpose of conv_apply; accepts `y` flat or shaped as op.output_shape."""
    y = np.asarray(y, dtype=float).reshape(op.output_shape)
    c, h, w = op.input_shape
    p, s = op.padding, op.stride
    _, oh, ow = op.output_shape
    kh, kw = op.kernel.shape[2:]
    padded = np.zeros((c, h + 2 * p, w + 2 * p))
    for u in range(kh):
        for v in range(kw):
            padded[:, u:u + s * oh:s, v:v + s * ow:s] += np.einsum("oi,oxy->ixy", op.kernel[:, :, u, v], y)
    return padded[:, p:p + h, p:p + w]


def materialize_conv(op: ConvOperator) -> np.ndarray:
    """Dense (out_dim x in_dim) matrix whose columns are conv_apply of the basis vectors."""
    if op.in_dim > MATERIALIZE_LIMIT:
        raise InvalidArgumentError(f"input dimension {op.in_dim} exceeds {MATERIALIZE_LIMIT}")
    M = np.zeros((op.out_dim, op.in_dim))
    basis = np.zeros(op.in_dim)
    for k in range(op.in_dim):
        basis[k] = 1.0
        M[:, k] = conv_apply(op, basis).ravel()
        basis[k] = 0.0
    return M


@dataclass
class PowerState:
    """Unit vector persisted between power-method calls."""
    u: np.ndarray

    @classmethod
    def random(cls, dim: int, seed: int = 0, *stream: int) -> PowerState:
        u = box_muller(make_rng(seed, *stream), dim)
        return cls(u=u / np.linalg.norm(u))


def _power_method(forward, adjoint, dim: int, iters: int, state: PowerState) -> float:
    if iters < 1:
        raise InvalidArgumentError(f"iters must be >= 1, got {iters}")
    if state.u.shape != (dim,):
        raise InvalidArgumentError(f"power state has shape {state.u.shape}, operator input is {dim}")
    u = state.u
    for _ in range(iters):
        u = adjoint(forward(u))
        norm = np.linalg.norm(u)
        if norm == 0.0:
            raise DegenerateInputError("power iterate vanished; the operator is zero on the current vector")
        u = u / norm
    state.u = u
    return float(np.linalg.norm(forward(u)))


def spectral_norm_matrix(W: np.ndarray, iters: int, state: PowerState) -> tuple[float, np.ndarray]:
    """
    Power method on W^T W: u <- W^T W u / ||W^T W u||, sigma = ||W u||.

    Returns:
        (sigma, W / sigma); state.u holds the last iterate for warm starts

    Raises:
        DegenerateInputError: W is zero
    """
    W = np.asarray(W, dtype=float)
    if not np.any(W):
        raise DegenerateInputError("spectral norm of a zero matrix")
    sigma = _power_method(lambda u: W @ u, lambda v: W.T @ v, W.shape[1], iters, state)
    return sigma, W / sigma


def spectral_norm_conv(op: ConvOperator, iters: int, state: PowerState) -> float:
    """Power method on conv_adjoint(conv_apply(.)) over the flattened input space."""
    if not np.any(op.kernel):
        raise DegenerateInputError("spectral norm of a zero kernel")
    return _power_method(
        lambda u: conv_apply(op, u).ravel(),
        lambda v: conv_adjoint(op, v).ravel(),
        op.in_dim, iters, state,
    )


def reshaped_kernel_norm(op: ConvOperator, iters: int, state: PowerState | None = None) -> float:
    """Spectral norm of the kernel reshaped to out_channels x (in_channels * kh * kw)."""
    W = op.kernel.reshape(op.kernel.shape[0], -1)
    if state is None:
        state = PowerState.random(W.shape[1])
    sigma, _ = spectral_norm_matrix(W, iters, state)
    return sigma


def true_conv_norm(op: ConvOperator, iters: int = 500, seed: int = 0) -> float:
    """Exact norm from the materialized matrix when small enough, the conv power method otherwise."""
    if op.in_dim <= MATERIALIZE_LIMIT:
        return float(np.linalg.norm(materialize_conv(op), 2))
    return spectral_norm_conv(op, iters, PowerState.random(op.in_dim, seed))


class LayeredNetwork(Protocol):
    def layer_norms(self) -> list[float]:
        ...


@dataclass(frozen=True)
class ConvNet:
    """Stack of convolution layers, each output feeding the next input."""
    layers: Sequence[ConvOperator]

    def __post_init__(self):
        if not self.layers:
            raise InvalidArgumentError("ConvNet needs at least one layer")
        for i, (a, b) in enumerate(zip(self.layers, self.layers[1:])):
            if a.output_shape != b.input_shape:
                raise InvalidArgumentError(
                    f"layer {i} output {a.output_shape} does not match layer {i + 1} input {b.input_shape}"
                )

    def apply(self, x: np.ndarray) -> np.ndarray:
        for op in self.layers:
            x = conv_apply(op, x)
        return x

    def layer_norms(self) -> list[float]:
        return [true_conv_norm(op) for op in self.layers]


def lipschitz_upper_bound(net: LayeredNetwork) -> float:
    """Product of per-layer spectral norms; activations are assumed 1-Lipschitz."""
    norms = net.layer_norms()
    bound = math.prod(norms)
    logger.debug("Lipschitz bound %.6g from layer norms %s", bound, norms)
    return bound
