"""End-to-end tests of the harness, the experiments and the CLI exit codes"""

import csv
import json

import numpy as np
import pytest

from experiments.base import fresh_state, prepare_split, seeds_for
from experiments.ssl_train import SslExperiment, step_log_path
from harness import ExperimentHarness, create_harness, load_experiments
from main import EXIT_CONFIG, EXIT_FAILURE, EXIT_OK, main
from mixconf.errors import ConfigError
from mixconf.ssl_engine import evaluate_state
from utils.reports import pooled_standard_error, read_json, sidecar_path, validate_report
from utils.settings import ExperimentKind, load_experiment_config

TINY_SSL = {
    "N_SAMPLES": 200,
    "N_LABELED": 10,
    "N_TEST": 50,
    "HIDDEN": 8,
    "ITERATIONS": 20,
    "EVAL_EVERY": 10,
    "K_AUGMENT": 2,
    "REPEATS": 2,
}


def error_lines(err: str) -> list:
    return [json.loads(line) for line in err.splitlines() if line.startswith("{")]


@pytest.fixture
def harness():
    return create_harness()


class TestRegistry:
    def test_every_experiment_registered(self, harness):
        assert set(harness.experiments) == {"calibrate", "ssl", "sweep-threshold", "lambda-diag", "ablate"}
        assert set(harness.command_templates) == set(harness.experiments)

    def test_failed_module_is_skipped(self):
        harness = ExperimentHarness()
        assert load_experiments(harness, ["experiments.ssl_train", "experiments.missing"]) == 1
        assert list(harness.experiments) == ["ssl"]

    def test_missing_experiment(self, harness):
        with pytest.raises(ConfigError):
            harness.run([])

    def test_bad_flag_value(self, harness):
        with pytest.raises(ConfigError):
            harness.run(["ssl", "--seed", "seven"])


class TestExitCodes:
    def test_unknown_experiment(self, capsys):
        assert main(["bogus"]) == EXIT_CONFIG
        assert error_lines(capsys.readouterr().err)[-1]["error"] == "config_invalid"

    def test_invalid_config_file(self, write_config, capsys):
        path = write_config(C_THRESHOLD=0.9)
        assert main(["ssl", "--config", str(path)]) == EXIT_CONFIG
        line = error_lines(capsys.readouterr().err)[-1]
        assert "C_THRESHOLD" in line["message"]

    def test_run_time_failure(self, write_config, tmp_path, capsys):
        path = write_config(N_SAMPLES=100, N_LABELED=90, N_TEST=50, REPEATS=1)
        assert main(["ssl", "--config", str(path), "--out", str(tmp_path / "r.json")]) == EXIT_FAILURE
        assert error_lines(capsys.readouterr().err)[-1]["error"] == "split_size"

    def test_help(self):
        assert main(["--help"]) == EXIT_OK


class TestLambdaDiagnostics:
    def test_histogram_matches_density(self, tmp_path):
        out = tmp_path / "lambda.csv"
        assert main(["lambda-diag", "--out", str(out), "--seed", "3"]) == EXIT_OK

        with out.open() as handle:
            rows = list(csv.DictReader(handle))
        assert len(rows) == 50
        diagnostics = read_json(sidecar_path(out))["diagnostics"]
        assert diagnostics["n_draws"] == 10**6
        assert diagnostics["histogram_integral"] == pytest.approx(1.0, abs=1e-6)
        assert diagnostics["bin_prob_sup_deviation"] < 0.005
        assert diagnostics["cdf_sup_deviation"] < 0.005

        lambda_b = np.array([float(row["lambda_b"]) for row in rows])
        finite = np.isfinite(lambda_b) & np.isfinite(lambda_b[::-1])
        np.testing.assert_allclose((lambda_b + lambda_b[::-1])[finite], 1.0, atol=1e-9)

    def test_triangular_kernel(self, write_config, tmp_path):
        path = write_config(AUGMENTOR="mixconf-t:0.6", N_DRAWS=200000, N_BINS=20)
        out = tmp_path / "tri.csv"
        assert main(["lambda-diag", "--config", str(path), "--out", str(out)]) == EXIT_OK
        assert read_json(sidecar_path(out))["diagnostics"]["bin_prob_sup_deviation"] < 0.01

    def test_plain_training_is_rejected(self, write_config, tmp_path):
        path = write_config(AUGMENTOR="none")
        assert main(["lambda-diag", "--config", str(path), "--out", str(tmp_path / "x.csv")]) == EXIT_CONFIG


class TestSslExperiment:
    def test_report_and_step_logs(self, harness, write_config, tmp_path):
        out = tmp_path / "ssl.json"
        path = harness.run(["ssl", "--config", str(write_config(**TINY_SSL)), "--out", str(out)])
        report = read_json(path)

        assert set(report["arms"]) == {"ssl", "baseline"}
        assert validate_report(report) > 0
        assert len(report["arms"]["ssl"]["runs"]) == 2
        assert report["metadata"]["config"]["EXPERIMENT"] == "ssl"
        assert len(report["metadata"]["repeat_seeds"]) == 2
        improvement = report["arms"]["baseline"]["error"]["mean"] - report["arms"]["ssl"]["error"]["mean"]
        assert report["improvement"] == pytest.approx(improvement)
        assert report["improvement_se"] == pytest.approx(
            pooled_standard_error(report["arms"]["baseline"]["error"], report["arms"]["ssl"]["error"])
        )

        for arm in ("ssl", "baseline"):
            for repeat in range(2):
                log = step_log_path(out, arm, repeat)
                with log.open() as handle:
                    assert len(list(csv.DictReader(handle))) == 20
        baseline_log = step_log_path(out, "baseline", 0)
        with baseline_log.open() as handle:
            assert all(row["retained_count"] == "0" for row in csv.DictReader(handle))

    def test_zero_iterations_scores_the_initial_network(self, harness, write_config, tmp_path):
        config_path = write_config(**{**TINY_SSL, "ITERATIONS": 0, "REPEATS": 1})
        report = read_json(harness.run(["ssl", "--config", str(config_path), "--out", str(tmp_path / "r.json")]))

        config = load_experiment_config(ExperimentKind.SSL, config_path, defaults=SslExperiment.defaults)
        seed = seeds_for(config)[0]
        expected, _ = evaluate_state(fresh_state(config, seed), prepare_split(config, seed).test, config.ssl.ece_bins)
        for arm in ("ssl", "baseline"):
            run = report["arms"][arm]["runs"][0]
            assert run["error"] == expected
            assert run["final_loss"] is None

    def test_same_seed_same_report(self, harness, write_config, tmp_path):
        config_path = str(write_config(**{**TINY_SSL, "REPEATS": 1}))
        first = read_json(harness.run(["ssl", "--config", config_path, "--out", str(tmp_path / "a.json")]))
        second = read_json(create_harness().run(["ssl", "--config", config_path, "--out", str(tmp_path / "b.json")]))
        assert first["arms"]["ssl"]["error"] == second["arms"]["ssl"]["error"]
        assert first["arms"]["ssl"]["runs"][0]["calibration"] == second["arms"]["ssl"]["runs"][0]["calibration"]

    def test_worker_threads_match_sequential_run(self, harness, write_config, tmp_path):
        sequential = read_json(
            harness.run(["ssl", "--config", str(write_config("seq.env", **TINY_SSL)), "--out", str(tmp_path / "seq.json")])
        )
        threaded = read_json(
            create_harness().run(
                ["ssl", "--config", str(write_config("par.env", **TINY_SSL, WORKERS=2)), "--out", str(tmp_path / "par.json")]
            )
        )
        for arm in ("ssl", "baseline"):
            assert sequential["arms"][arm]["error"] == threaded["arms"][arm]["error"]
            assert sequential["arms"][arm]["ece"] == threaded["arms"][arm]["ece"]


class TestCalibrationExperiment:
    def test_single_cell(self, harness, write_config, tmp_path):
        config_path = write_config(
            N_SAMPLES=200,
            N_LABELED=60,
            N_VALIDATION=40,
            N_TEST=40,
            BATCH_LABELED=16,
            ITERATIONS=10,
            HIDDEN=8,
            PROPORTIONS=1.0,
            AUGMENTORS="mixconf-g:0.2|0.4",
            REPEATS=1,
        )
        report = read_json(harness.run(["calibrate", "--config", str(config_path), "--out", str(tmp_path / "c.json")]))

        assert len(report["cells"]) == 1
        cell = report["cells"][0]
        assert cell["train_size"] == 60
        assert cell["augmentor"] == "mixconf-g"
        assert cell["candidates"] == ["mixconf-g:0.2", "mixconf-g:0.4"]
        assert cell["runs"][0]["selected"] in cell["candidates"]
        assert cell["ece"]["values"] == [cell["runs"][0]["ece"]]
        assert validate_report(report) == 3

    def test_small_proportion_clamps_batch(self, harness, write_config, tmp_path):
        config_path = write_config(
            N_SAMPLES=200,
            N_LABELED=40,
            N_VALIDATION=20,
            N_TEST=40,
            ITERATIONS=5,
            HIDDEN=8,
            PROPORTIONS=0.25,
            AUGMENTORS="none",
            REPEATS=1,
        )
        report = read_json(harness.run(["calibrate", "--config", str(config_path), "--out", str(tmp_path / "c.json")]))
        assert report["cells"][0]["train_size"] == 10


class TestThresholdSweep:
    def test_rows_ascend(self, harness, write_config, tmp_path):
        config_path = write_config(**{**TINY_SSL, "REPEATS": 1, "ITERATIONS": 10, "THRESHOLDS": "0.9,0.6"})
        out = tmp_path / "sweep.json"
        report = read_json(harness.run(["sweep-threshold", "--config", str(config_path), "--out", str(out)]))

        assert [row["c_thr"] for row in report["rows"]] == [0.6, 0.9]
        validate_report(report)
        with out.with_suffix(".csv").open() as handle:
            rows = list(csv.DictReader(handle))
        assert [float(row["c_thr"]) for row in rows] == [0.6, 0.9]
        assert float(rows[0]["test_error"]) == report["rows"][0]["test_error"]["mean"]

    def test_single_threshold(self, harness, write_config, tmp_path):
        config_path = write_config(**{**TINY_SSL, "REPEATS": 1, "ITERATIONS": 5, "THRESHOLDS": "0.8"})
        report = read_json(harness.run(["sweep-threshold", "--config", str(config_path), "--out", str(tmp_path / "s.json")]))
        assert len(report["rows"]) == 1


class TestAblation:
    def test_every_variant_reported(self, harness, write_config, tmp_path):
        config_path = write_config(**{**TINY_SSL, "REPEATS": 1, "ITERATIONS": 5})
        report = read_json(harness.run(["ablate", "--config", str(config_path), "--out", str(tmp_path / "a.json")]))

        assert set(report["arms"]) == {"full", "k1", "lambda_u_half", "mixup", "no_selection", "random_selection"}
        assert report["arms"]["full"]["error_gap_to_full"] == 0.0
        assert report["arms"]["full"]["error_gap_se"] == 0.0
        assert report["variants"]["mixup"] == "mixup:0.2"
        assert report["selection"]["no_selection"] == "all"
        assert report["selection"]["full"] == "small_loss"
        assert report["variants"]["full"] == "mixconf-g:0.4"
        validate_report(report)
