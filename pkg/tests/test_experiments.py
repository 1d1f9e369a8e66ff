import json
from dataclasses import replace
from fractions import Fraction
from pathlib import Path

import pytest

from spcradar.errors import InvalidScenario
from spcradar.experiments import ExperimentConfig, experiment_a, experiment_c, run_experiment
from spcradar.model import load_preset

GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture(scope="module")
def reports():
    return {n: run_experiment(n, ExperimentConfig(seed=1)) for n in "abc"}


@pytest.mark.parametrize("name", "abc")
def test_desk_experiment_passes(reports, name):
    r = reports[name]
    assert r.passed, r.to_text()
    d = json.loads(r.to_json())
    assert d["seed"] == 1 and d["scenario_hashes"] and d["claims"]
    assert all(isinstance(c["passed"], bool) for c in d["claims"])


@pytest.mark.parametrize("name", "abc")
def test_matches_golden(reports, name):
    got = reports[name].to_dict()
    want = json.loads((GOLDEN / f"experiment_{name}.json").read_text())
    assert got["scenario_hashes"] == want["scenario_hashes"]
    assert [(c["name"], c["passed"]) for c in got["claims"]] == \
        [(c["name"], c["passed"]) for c in want["claims"]]
    assert got["metrics"].keys() == want["metrics"].keys()
    for k, v in want["metrics"].items():
        if isinstance(v, str):
            assert got["metrics"][k] == v
        else:
            assert got["metrics"][k] == pytest.approx(v, rel=1e-4, abs=1e-3), k


def test_report_is_reproducible(reports):
    again = run_experiment("a", ExperimentConfig(seed=1))
    assert again.to_json() == reports["a"].to_json()
    assert again.to_text() == reports["a"].to_text()


def test_no_phase_noise_means_no_improvement():
    r = experiment_a(ExperimentConfig(seed=1, phase_noise=False))
    c = r.claim("no_skirt_no_improvement")
    assert c.passed and c.value < 0.5


def test_zero_defect_homodyne_keeps_peak_bins():
    t3 = load_preset("table3")
    s = replace(t3, leakage=replace(t3.leakage, beat_frequency=0.0))
    m = experiment_c(ExperimentConfig(seed=1, scenario=s)).metrics
    assert m["none_range_err_bins"] == m["aspc_range_err_bins"]


def test_off_quarter_plan_is_rejected():
    t1 = load_preset("table1")
    bad = replace(t1, sampling=replace(t1.sampling, oversampling=Fraction(3)))
    with pytest.raises(InvalidScenario):
        experiment_a(ExperimentConfig(scenario=bad))
