# tests/test_main.py
import json

import pytest

from app.goals import goal_from_config
from app.main import EXIT_CONFIG, EXIT_FAILED, EXIT_OK, SCRIPTED_EXPERIMENTS, run


@pytest.fixture
def write_config(tmp_path):
    def _write(text: str):
        path = tmp_path / "experiment.yaml"
        path.write_text(text, encoding='utf-8')
        return path
    return _write


def test_estimate_writes_report(write_config, tmp_path, capsys):
    path = write_config(
        "seed: 11\nfamily: tiny\ngoal: always-nonzero\n"
        "strategies: [smallest-action]\nhorizons: [1, 2]\nsamples: 200\n")
    assert run(["estimate", "--config", str(path), "--out", str(tmp_path / "out")]) == EXIT_OK
    report = json.loads((tmp_path / "out" / "estimate.json").read_text(encoding='utf-8'))
    assert report["seed"] == 11
    assert report["command"] == "estimate"
    assert json.loads(capsys.readouterr().out)["config_hash"] == report["config_hash"]


def test_seed_flag_overrides_config(write_config, tmp_path):
    path = write_config("seed: 11\nfamily: tiny\ngoal: always-nonzero\nstrategies: [smallest-action]\n"
                        "horizons: [1]\nsamples: 10\n")
    run(["estimate", "--config", str(path), "--seed", "99", "--out", str(tmp_path)])
    assert json.loads((tmp_path / "estimate.json").read_text(encoding='utf-8'))["seed"] == 99


def test_empty_roster_is_a_config_error(write_config, tmp_path):
    path = write_config("seed: 1\nfamily: tiny\ngoal: always-nonzero\nstrategies: []\n")
    assert run(["estimate", "--config", str(path), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_unknown_key_is_a_config_error(write_config, tmp_path):
    path = write_config("seed: 1\nfamily: tiny\nbogus: 3\n")
    assert run(["check", "--config", str(path), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_check_passes_when_expectation_met(write_config, tmp_path):
    path = write_config("seed: 1\nfamily: tiny\ngoal: eventually-nonzero\n"
                        "check: {which: [time-invariance], expect: {time-invariance: true}, t_max: 8}\n")
    assert run(["check", "--config", str(path), "--out", str(tmp_path)]) == EXIT_OK


def test_check_fails_when_expectation_missed(write_config, tmp_path):
    path = write_config("seed: 1\nfamily: tiny\ngoal: eventually-nonzero\n"
                        "check: {which: [time-invariance], expect: {time-invariance: false}, t_max: 8}\n")
    assert run(["check", "--config", str(path), "--out", str(tmp_path)]) == EXIT_FAILED


def test_csv_format(write_config, tmp_path):
    path = write_config("seed: 1\nfamily: tiny\ngoal: eventually-nonzero\ncheck: {which: shift-invariance}\n")
    assert run(["check", "--config", str(path), "--out", str(tmp_path), "--format", "csv"]) == EXIT_OK
    assert (tmp_path / "check.csv").read_text(encoding='utf-8').startswith("command")


def test_estimate_exports_traces(write_config, tmp_path):
    path = write_config("seed: 3\nfamily: tiny\ngoal: always-nonzero\nstrategies: [smallest-action]\n"
                        "horizons: [3]\nsamples: 20\noutput: {traces: 2}\n")
    assert run(["estimate", "--config", str(path), "--out", str(tmp_path)]) == EXIT_OK
    rows = (tmp_path / "traces-smallest-action.jsonl").read_text(encoding='utf-8').splitlines()
    assert len(rows) == 6
    assert json.loads(rows[0])["stage"] == 0


@pytest.mark.parametrize("block", [
    "shift: {end: 3}",
    "shift: [4, 8]",
    "power: {t: x, end: 3}",
    "power: {t: 1}",
])
def test_malformed_omniscient_options_are_config_errors(write_config, tmp_path, block):
    path = write_config("seed: 1\nfamily: tiny\ngoal: always-nonzero\nhorizons: [1]\nsamples: 10\n"
                        f"omniscient: {{{block}}}\n")
    assert run(["omniscient", "--config", str(path), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_scripted_shift_goal_starts_after_t_max():
    shift = SCRIPTED_EXPERIMENTS['omniscient']['omniscient']['shift']
    assert goal_from_config(shift['goal']).from_stage > shift['t_max']
