"""Runs every YAML case under eval/cases as its own test."""

import os
import pathlib

import pytest
import yaml

from eval.runner import SCENARIOS, check_expectations, evaluate_case_async

ROOT = pathlib.Path(__file__).resolve().parents[1]
CASES_DIR = ROOT / "eval" / "cases"


def _load_cases():
    cases = []
    for yf in sorted(CASES_DIR.glob("*.yaml")):
        case = yaml.safe_load(yf.read_text())
        if "id" not in case:
            case["id"] = yf.stem
        case["path"] = str(yf)
        cases.append(case)

    # Optional filter: EVAL_CASE="id1,id2" or any substring match
    flt = os.getenv("EVAL_CASE")
    if flt:
        needles = [s.strip() for s in flt.split(",") if s.strip()]
        cases = [c for c in cases if any(n in c["id"] for n in needles)]
    return cases


CASES = _load_cases()
if not CASES:
    raise RuntimeError(f"No YAML cases found in {CASES_DIR}")


def test_every_case_names_a_known_scenario(cases):
    assert {c["scenario"]["kind"] for c in cases} <= set(SCENARIOS)


def test_expectation_checks():
    metrics = {"error": 0.5, "ratio": 0.9}
    assert check_expectations(metrics, {"at_most": {"error": 1.0}, "at_least": {"ratio": 0.8}}) == []
    failures = check_expectations(metrics, {"at_most": {"error": 0.1, "missing": 1}})
    assert len(failures) == 2


@pytest.mark.asyncio
@pytest.mark.parametrize("case", CASES, ids=[c["id"] for c in CASES])
async def test_yaml_case(case):
    res = await evaluate_case_async(case)
    assert res.passed, f"Case {case['id']} failed: {res.failures}"


def test_scenarios_report_oracle_fractions_and_pair_extremes():
    centered = SCENARIOS["centered_advantage"]({
        "plain": "sinkhorn", "centered": "sinkhorn-center", "outer_iter": 20, "sizes": [3], "seeds": [0, 1],
        "solver_config": {"epsilon": 1.0, "max_iter": 2000, "inner_iter": 50, "tol": 1e-9},
    })
    assert 0.0 <= centered["centered_accurate_fraction"] <= 1.0
    assert 0.0 <= centered["plain_inaccurate_fraction"] <= 1.0
    divergence = SCENARIOS["divergence_properties"]({
        "pairs": 3, "n": 3, "m": 4, "separation": [1.0, 0.0],
        "solver_config": {"epsilon": 0.5, "max_iter": 5000, "tol": 1e-10},
    })
    assert divergence["self_value"] == 0.0
    assert divergence["min_value"] > -1e-6
