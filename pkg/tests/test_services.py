# tests/test_services.py
import json

import pytest

from app.exceptions import ConfigError
from app.models.dto import CheckResult, Estimate, ExperimentConfig
from app.services.config_service import config
from app.services.report_service import ReportService, canonical_json, config_hash
from app.services.worker_service import WorkerService


class TestAppConfig:
    def test_nested_get(self):
        assert config.get('defaults.seed') == 20240601
        assert config.get('tolerances.z') == 3.0

    def test_missing_key_returns_default(self):
        assert config.get('tolerances.nothing', 7) == 7
        assert config.get('defaults.seed.deeper', 'x') == 'x'

    def test_is_singleton(self):
        from app.services.config_service import AppConfig
        assert AppConfig() is config

    def test_load_experiment(self, tmp_path):
        path = tmp_path / "exp.yaml"
        path.write_text("seed: 7\nfamily: tiny\ngoal: always_nonzero\nhorizons: [2, 3]\n", encoding='utf-8')
        experiment = config.load_experiment(path)
        assert experiment.seed == 7
        assert experiment.horizons == [2, 3]

    def test_load_experiment_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            config.load_experiment(tmp_path / "absent.yaml")

    def test_load_experiment_bad_yaml(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("seed: [1, 2\n", encoding='utf-8')
        with pytest.raises(ConfigError):
            config.load_experiment(path)

    def test_load_experiment_needs_seed(self, tmp_path):
        path = tmp_path / "noseed.yaml"
        path.write_text("family: tiny\n", encoding='utf-8')
        with pytest.raises(ConfigError, match="seed"):
            config.load_experiment(path)


class TestReportService:
    @pytest.fixture
    def service(self, tmp_path):
        return ReportService(tmp_path)

    @pytest.fixture
    def results(self):
        est = Estimate.binomial(30, 100, 3.0, 1, "demo")
        return [CheckResult("first", True, {"estimate": est}),
                CheckResult("second", True, {"value": float("nan")}, inconclusive=True)]

    def test_config_hash_ignores_key_order(self):
        assert config_hash({"seed": 1, "samples": 5}) == config_hash({"samples": 5, "seed": 1})
        assert config_hash({"seed": 1}) != config_hash({"seed": 2})

    def test_canonical_json_is_compact_and_sorted(self):
        assert canonical_json({"b": 1, "a": [1.5, float("inf")]}) == '{"a":[1.5,"inf"],"b":1}'

    def test_build_envelope(self, service, results):
        report = service.build("check", ExperimentConfig(seed=3), results, workers=2)
        assert report["seed"] == 3
        assert report["workers"] == 2
        assert report["passed"]
        assert report["inconclusive"]
        assert report["results"][1]["details"]["value"] == "nan"
        assert report["config_hash"] == config_hash(ExperimentConfig(seed=3))

    def test_failed_result_fails_report(self, service):
        report = service.build("check", {"seed": 1}, [CheckResult("bad", False)], workers=1)
        assert not report["passed"]

    def test_write_json(self, service, results, tmp_path):
        report = service.build("check", {"seed": 1}, results, workers=1)
        path = service.write(report, "check")
        assert path == tmp_path / "check.json"
        assert json.loads(path.read_text(encoding='utf-8'))["command"] == "check"

    def test_csv_has_one_row_per_result(self, service, results):
        report = service.build("check", {"seed": 1}, results, workers=1)
        lines = service.to_csv(report).strip().split("\r\n")
        assert len(lines) == 3
        assert "config_hash" in lines[0]


class TestWorkerService:
    @pytest.mark.parametrize("workers", [1, 2, 8])
    def test_results_in_index_order(self, workers):
        assert WorkerService().run_indexed(lambda i: i * i, 50, workers) == [i * i for i in range(50)]

    def test_chunk_size_does_not_change_results(self):
        service = WorkerService(4)
        assert service.run_indexed(str, 17, chunk_size=3) == [str(i) for i in range(17)]

    def test_zero_trials(self):
        assert WorkerService(4).run_indexed(lambda i: i, 0) == []


@pytest.mark.parametrize("name", ["e45.yaml", "table-family.yaml"])
def test_shipped_experiments_load(name):
    from app.families import family_from_config
    from app.goals import goal_from_config
    from app.strategies import strategy_from_config

    experiment = config.load_experiment(config.project_root / "experiments" / name)
    family_from_config(experiment.family).at(3)
    goal_from_config(experiment.goal)
    assert all(strategy_from_config(s) for s in experiment.strategies)
