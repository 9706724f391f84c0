import pathlib
import sys

import numpy as np
import pytest
import yaml

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1]))

from wasserstein_lab.config import config
from wasserstein_lab.core import uniform_measure
from wasserstein_lab.models import CostMatrix, SampleBatch, SolverConfig
from wasserstein_lab.rng import make_rng

ROOT = pathlib.Path(__file__).resolve().parents[1]
CASES_DIR = ROOT / "eval" / "cases"


def _load_cases():
    cases = []
    for yf in sorted(CASES_DIR.glob("*.yaml")):
        with open(yf, "r") as fh:
            cases.append(yaml.safe_load(fh))
    return cases


@pytest.fixture(scope="session")
def cases():
    loaded = _load_cases()
    assert loaded, f"No YAML cases found in {CASES_DIR}"
    return loaded


@pytest.fixture(autouse=True)
def isolated_runs(tmp_path, monkeypatch):
    """Keep run directories of every test under its tmp_path."""
    monkeypatch.setattr(config, "run_data_path", str(tmp_path / "runs"))


@pytest.fixture
def random_problem():
    """Factory for seeded n x n costs uniform in [0, 1] with uniform marginals."""
    def _make(n: int, seed: int = 0, m: int | None = None):
        m = m or n
        C = CostMatrix(values=make_rng(seed, n, m).random((n, m)))
        return C, uniform_measure(n), uniform_measure(m)
    return _make


@pytest.fixture
def small_batches():
    """Two seeded 2-d batches of 6 points."""
    rng = make_rng(7)
    X = SampleBatch(data=rng.random((6, 2)))
    Y = SampleBatch(data=rng.random((6, 2)) + 0.5)
    return X, Y


@pytest.fixture
def tight() -> SolverConfig:
    return SolverConfig(epsilon=0.05, max_iter=50000, tol=1e-10)
