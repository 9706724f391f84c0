"""Wasserstein Lab - discrete optimal transport solvers, Lipschitz critics and desk-scale benchmarks."""

__version__ = "0.1.0"
