"""End-to-end tests of the fractal_lab command line."""

import json
import math

import pandas as pd
import pytest

from fractal_lab import ENV_KEYS, main, parse_levels
from measure_core import DyadicMeasure1D, load_measure, save_measure

CANTOR_IFS = "1/3,0;1/3,2/3"
GOLDEN_MAPS = "a=(1+sqrt5)/2,b=0;a=(1+sqrt5)/2,b=1"


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    for key in list(ENV_KEYS.values()) + ["FRACTAL_LAB_OUT", "FRACTAL_LAB_LOG_LEVEL"]:
        monkeypatch.delenv(key, raising=False)


def run_cli(tmp_path, *args):
    return main([*args, "--out", str(tmp_path)])


def read_json(path):
    return json.loads(path.read_text(encoding="utf-8"))


def test_parse_levels():
    assert parse_levels("8..18") == (8, 18)
    assert parse_levels("5") == (5, 5)


def test_simdim(tmp_path):
    assert run_cli(tmp_path, "simdim", "--ratios", "1/2,1/4") == 0
    value = read_json(tmp_path / "simdim.json")["similarity_dimension"]
    assert value == pytest.approx(math.log2((1 + math.sqrt(5)) / 2), abs=1e-9)

    manifest = read_json(tmp_path / "simdim.manifest.json")
    assert manifest["command"] == "simdim"
    assert manifest["outputs"] == ["simdim.json"]
    assert {"python", "numpy", "pandas", "pydantic"} <= set(manifest["versions"])


def test_free_check_reports_golden_relation(tmp_path):
    assert run_cli(tmp_path, "free-check", "--maps", GOLDEN_MAPS, "--L", "3") == 0
    certificate = read_json(tmp_path / "free-check.json")
    assert certificate["w"] == [1, 2, 2]
    assert certificate["w_prime"] == [2, 1, 1]


def test_free_check_certifies_free_set(tmp_path):
    assert run_cli(tmp_path, "free-check", "--maps", "a=2,b=0;a=2,b=1", "--L", "8") == 0
    assert read_json(tmp_path / "free-check.json")["free_up_to"] == 8


def test_state_cap_is_a_precondition_failure(tmp_path):
    maps = "a=4,b=0;a=4,b=1;a=4,b=2"
    assert run_cli(tmp_path, "free-check", "--maps", maps, "--L", "20") == 2


def test_configuration_errors(tmp_path, monkeypatch):
    assert run_cli(tmp_path, "simdim") == 1
    assert run_cli(tmp_path, "edim", "--n", "40", "--ifs", CANTOR_IFS) == 1
    assert run_cli(tmp_path, "edim", "--config", str(tmp_path / "missing.json")) == 1

    monkeypatch.setenv("FRACTAL_LAB_SEED", "not-a-number")
    assert run_cli(tmp_path, "simdim", "--ratios", "1/2,1/2") == 1


def test_usage_errors_are_configuration_errors(tmp_path, capsys):
    assert main(["no-such-command"]) == 1
    assert main([]) == 1
    assert run_cli(tmp_path, "edim", "--n", "twenty") == 1
    assert "usage" in capsys.readouterr().err
    assert main(["--help"]) == 0


def test_edim_of_cantor_measure(tmp_path):
    assert run_cli(tmp_path, "edim", "--ifs", CANTOR_IFS, "--n", "12") == 0
    table = pd.read_csv(tmp_path / "edim.csv")
    assert list(table.columns) == ["n", "H_bits", "H_over_n"]
    assert len(table) == 12
    assert 0.5 < table["H_over_n"].iloc[-1] < 0.75


def test_entropy_sweep(tmp_path):
    assert run_cli(tmp_path, "entropy", "--ifs", "1/2,0;1/2,1/2", "--p", "1/4,3/4", "--n", "8") == 0
    table = pd.read_csv(tmp_path / "entropy.csv")
    assert table["n"].tolist() == list(range(1, 9))
    assert table["H_over_n"].tolist() == pytest.approx([0.8112781244591328] * 8, abs=1e-9)


def test_config_precedence(tmp_path, monkeypatch):
    monkeypatch.setenv("FRACTAL_LAB_SEED", "3")
    assert run_cli(tmp_path, "simdim", "--ratios", "1/2,1/2") == 0
    assert read_json(tmp_path / "simdim.manifest.json")["seed"] == 3

    config = tmp_path / "config.json"
    config.write_text(json.dumps({"seed": 7, "n": 5, "ratios": "1/3,1/3"}), encoding="utf-8")
    assert run_cli(tmp_path, "simdim", "--config", str(config), "--n", "6") == 0
    manifest = read_json(tmp_path / "simdim.manifest.json")
    assert manifest["seed"] == 7
    assert manifest["parameters"]["n"] == 6
    assert manifest["summary"]["similarity_dimension"] == pytest.approx(math.log(2) / math.log(3))


def test_stationary_output_is_worker_independent(tmp_path):
    args = ["stationary", "--ifs", "1/2,0;1/2,1/2", "--n", "6", "--samples", "140000", "--seed", "5"]
    assert run_cli(tmp_path / "single", *args, "--workers", "1") == 0
    assert run_cli(tmp_path / "threaded", *args, "--workers", "2") == 0
    single = (tmp_path / "single" / "stationary.csv").read_text(encoding="utf-8")
    threaded = (tmp_path / "threaded" / "stationary.csv").read_text(encoding="utf-8")
    assert single == threaded

    measure = load_measure(tmp_path / "single" / "stationary_measure.json")
    assert measure.level == 6
    assert len(measure) == 64


def test_stationary_from_sampler_config(tmp_path):
    config = tmp_path / "sampler.json"
    sampler = {"kind": "box", "ratio_range": [0.3, 0.5], "t_range": [0.0, 1.0]}
    config.write_text(json.dumps({"sampler": sampler}), encoding="utf-8")
    assert run_cli(tmp_path, "stationary", "--config", str(config), "--n", "6", "--samples", "2000") == 0
    summary = read_json(tmp_path / "stationary.manifest.json")["summary"]
    assert summary["mean_tau"] > 0


def test_relation_solve_commutation_line(tmp_path):
    args = ["relation-solve", "--left", "a=1,b=0;gamma;a=2,b=0", "--right", "a=2,b=0;gamma;a=1,b=0"]
    assert run_cli(tmp_path, *args) == 0
    payload = read_json(tmp_path / "relation-solve.json")
    assert payload["kind"] == "Line"
    assert payload["samples"]
    assert all(sample["holds"] for sample in payload["samples"])


def test_relation_solve_rejects_non_alternating_input(tmp_path):
    args = ["relation-solve", "--left", "a=1,b=0;a=2,b=0;gamma", "--right", "a=2,b=0"]
    assert run_cli(tmp_path, *args) == 2


def test_free_extend(tmp_path):
    args = ["free-extend", "--maps", "a=4,b=0;a=4,b=1", "--pool", "a=4,b=2;a=4,b=1;a=16,b=5", "--L", "3"]
    assert run_cli(tmp_path, *args) == 0
    payload = read_json(tmp_path / "free-extend.json")
    assert payload["accepted"] == ["a=4,b=2"]
    assert [item["map"] for item in payload["rejected"]] == ["a=4,b=1", "a=16,b=5"]


def test_measure_commands(tmp_path):
    measure_path = save_measure(DyadicMeasure1D.uniform(8, 0, 64), tmp_path / "mu.json")
    assert run_cli(tmp_path, "convolve", "--measure", str(measure_path)) == 0
    table = pd.read_csv(tmp_path / "convolve.csv")
    assert list(table.columns) == ["n", "H_mu_bits", "H_mu_over_n", "H_conv_bits", "H_conv_over_n"]
    assert load_measure(tmp_path / "convolve_measure.json").total_mass == pytest.approx(1.0)

    assert run_cli(tmp_path, "porosity", "--ifs", CANTOR_IFS, "--n", "10", "--m", "3") == 0
    verdict = read_json(tmp_path / "porosity.json")
    assert verdict["passes"] == (verdict["probability"] > 1 - verdict["delta"])
    assert "max_component_entropy" in verdict

    assert run_cli(tmp_path, "selfsim", "--ifs", CANTOR_IFS, "--n", "10") == 0
    assert read_json(tmp_path / "selfsim.manifest.json")["summary"]["stationarity_residual"] < 0.05


def test_group_action_commands(tmp_path):
    assert run_cli(tmp_path, "act", "--ifs", CANTOR_IFS, "--n", "8", "--samples", "500") == 0
    assert load_measure(tmp_path / "act_measure.json").total_mass == pytest.approx(1.0)

    assert run_cli(tmp_path, "growth", "--ifs", CANTOR_IFS, "--n", "8", "--samples", "500") == 0
    table = pd.read_csv(tmp_path / "growth.csv")
    assert table["n"].tolist() == list(range(2, 9))


def test_attractor_commands(tmp_path):
    assert run_cli(tmp_path, "attractor", "--ifs", CANTOR_IFS, "--n", "10") == 0
    assert read_json(tmp_path / "attractor_cells.json")["level"] == 10

    assert run_cli(tmp_path, "boxdim", "--ifs", "1/4,0;1/4,1/2", "--levels", "6..12") == 0
    summary = read_json(tmp_path / "boxdim.manifest.json")["summary"]
    assert summary["box_dimension"] == pytest.approx(0.5, abs=0.05)
    assert summary["similarity_dimension"] == pytest.approx(0.5)

    assert run_cli(tmp_path, "porous-set", "--ifs", CANTOR_IFS, "--n", "12") == 0
    porous = read_json(tmp_path / "porous-set.json")
    assert porous["porosity_constant"] >= 0.025
    assert porous["m"] >= 1


def test_cantor_copies(tmp_path):
    args = ["cantor-copies", "--ifs", "1/2,0;1/2,1/2", "--levels", "8..11", "--ratio", "0.5"]
    assert run_cli(tmp_path, *args) == 0
    summary = read_json(tmp_path / "cantor-copies.manifest.json")["summary"]
    assert summary["box_dimension"] == pytest.approx(1.0, abs=0.1)
    assert summary["excess"] == pytest.approx(summary["box_dimension"] - math.log(2) / math.log(3))
