"""
Ground costs between two sample batches.
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.spatial.distance import cdist

from aixtools.logging.logging_config import get_logger

from wasserstein_lab.constants import (
    SSIM_DYNAMIC_RANGE,
    SSIM_K1,
    SSIM_K2,
    SSIM_SIGMA,
    SSIM_WINDOW,
    CostKind,
)
from wasserstein_lab.core import DegenerateInputError, InvalidArgumentError
from wasserstein_lab.models import CostMatrix, SampleBatch

logger = get_logger(__name__)

_CDIST_METRICS = {
    CostKind.L1: "cityblock",
    CostKind.L2: "euclidean",
    CostKind.SQUARED_L2: "sqeuclidean",
    CostKind.COSINE: "cosine",
}


def pairwise_cost(X: SampleBatch, Y: SampleBatch, kind: CostKind | str) -> CostMatrix:
    """
    Build C_ij = c(x_i, y_j) for one of the closed set of ground costs.

    Args:
        X: source batch (rows of C)
        Y: target batch (columns of C)
        kind: cost kind

    Returns:
        CostMatrix: nonnegative cost, negative round-off clamped to 0

    Raises:
        InvalidArgumentError: feature dimensions (or image shapes for SSIM) differ
        DegenerateInputError: cosine cost with a zero-norm row
    """
    kind = CostKind(kind)
    if X.dim != Y.dim:
        raise InvalidArgumentError(f"feature dimensions differ: {X.dim} vs {Y.dim}")

    if kind is CostKind.SSIM:
        values = 1.0 - pairwise_mssim(X, Y)
    else:
        if kind is CostKind.COSINE:
            _check_nonzero_rows(X, "X")
            _check_nonzero_rows(Y, "Y")
        values = cdist(X.data, Y.data, metric=_CDIST_METRICS[kind])

    values = np.maximum(values, 0.0)
    logger.debug("Built %s cost %s", kind.value, values.shape)
    return CostMatrix(values=values, kind=kind)


def normalize_cost(C: CostMatrix) -> CostMatrix:
    """C / max(C); an all-zero cost is returned unchanged."""
    top = float(C.values.max())
    if top == 0.0:
        return C
    return CostMatrix(values=C.values / top, kind=C.kind)


def _check_nonzero_rows(batch: SampleBatch, name: str) -> None:
    norms = np.linalg.norm(batch.data, axis=1)
    if np.any(norms == 0.0):
        raise DegenerateInputError(f"cosine cost undefined: {name} has a zero-norm row")


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    """Normalized 1-d Gaussian; the 2-d window is its outer product."""
    ax = np.arange(size, dtype=float) - (size - 1) / 2.0
    g = np.exp(-(ax ** 2) / (2.0 * sigma ** 2))
    return g / g.sum()


def _local_mean(stack: np.ndarray) -> np.ndarray:
    """Gaussian-weighted means over all valid windows of the last two axes.

    Images smaller than the window in either direction use one global window with
    uniform weights.
    """
    h, w = stack.shape[-2:]
    if h < SSIM_WINDOW or w < SSIM_WINDOW:
        return stack.mean(axis=(-2, -1), keepdims=True)
    g = gaussian_window()
    rows = sliding_window_view(stack, SSIM_WINDOW, axis=-1) @ g
    return sliding_window_view(rows, SSIM_WINDOW, axis=-2) @ g


def pairwise_mssim(X: SampleBatch, Y: SampleBatch) -> np.ndarray:
    """Mean SSIM for every pair (x_i, y_j), averaged over channels."""
    if X.image_shape is None or Y.image_shape is None:
        raise InvalidArgumentError("SSIM cost requires image_shape on both batches")
    if X.image_shape != Y.image_shape:
        raise InvalidArgumentError(f"image shapes differ: {X.image_shape} vs {Y.image_shape}")

    c1 = (SSIM_K1 * SSIM_DYNAMIC_RANGE) ** 2
    c2 = (SSIM_K2 * SSIM_DYNAMIC_RANGE) ** 2

    xs, ys = X.images(), Y.images()
    mu_x, mu_y = _local_mean(xs), _local_mean(ys)
    var_x = _local_mean(xs * xs) - mu_x ** 2
    var_y = _local_mean(ys * ys) - mu_y ** 2

    out = np.empty((X.size, Y.size))
    for i in range(X.size):
        cov = _local_mean(xs[i][None] * ys) - mu_x[i][None] * mu_y
        num = (2.0 * mu_x[i][None] * mu_y + c1) * (2.0 * cov + c2)
        den = (mu_x[i][None] ** 2 + mu_y ** 2 + c1) * (var_x[i][None] + var_y + c2)
        out[i] = (num / den).mean(axis=(-2, -1)).mean(axis=-1)
    return out
