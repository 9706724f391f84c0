"""
Seeded random streams.

Every random draw in the package goes through a Philox generator: a 64-bit counter-based
bit generator whose output depends only on the (seed, stream) key, not on the platform.
Gaussian samples use the Box-Muller transform on Philox uniforms so the bytes are
reproducible everywhere.
"""
from __future__ import annotations

import numpy as np


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Independent generator for `seed` and an optional stream key (trial, layer, ...)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, stream)])))


def box_muller(rng: np.random.Generator, shape: tuple[int, ...] | int) -> np.ndarray:
    """Standard normal samples from pairs of uniforms."""
    size = int(np.prod(shape))
    half = (size + 1) // 2
    u1 = 1.0 - rng.random(half)  # (0, 1]
    u2 = rng.random(half)
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * np.pi * u2
    z = np.concatenate([radius * np.cos(angle), radius * np.sin(angle)])[:size]
    return z.reshape(shape)

