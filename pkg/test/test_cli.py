import json
import logging
import os

import pytest
from click.testing import CliRunner

from cilfair import __version__
from cilfair.cli import EXIT_CONFIG, cli
from cilfair.experiments import runner as runner_module
from cilfair.utils import configure_logging


@pytest.fixture
def runner():
    return CliRunner()


def test_version(runner):
    result = runner.invoke(cli, ["--version"])
    assert result.exit_code == 0
    assert __version__ in result.output


def test_run_writes_results(runner, tmp_path, input_dir):
    out = tmp_path / "out"
    result = runner.invoke(cli, ["run", os.path.join(input_dir, "tiny_config.json"), "--out", str(out)])
    assert result.exit_code == 0, result.output
    csvs = sorted(f for f in os.listdir(out) if f.endswith(".csv"))
    assert csvs == ["ciliate_seed1.csv", "ciliate_seed2.csv", "traditional_seed1.csv", "traditional_seed2.csv"]
    with open(out / "summary.json") as f:
        summary = json.load(f)
    assert set(summary["methods"]) == {"traditional", "ciliate"}
    assert len(summary["methods"]["ciliate"]["steps"]) == 2


def test_invalid_schedule_exits_with_config_error(runner, tmp_path, input_dir):
    out = tmp_path / "out"
    result = runner.invoke(cli, ["run", os.path.join(input_dir, "invalid_schedule.json"), "--out", str(out)])
    assert result.exit_code == EXIT_CONFIG
    assert "schedule.steps" in result.output
    assert not out.exists()


def test_missing_config_exits_with_config_error(runner, tmp_path):
    result = runner.invoke(cli, ["run", str(tmp_path / "absent.json"), "--out", str(tmp_path / "out")])
    assert result.exit_code == EXIT_CONFIG


def test_non_empty_output_requires_force(runner, tmp_path, input_dir):
    out = tmp_path / "out"
    out.mkdir()
    (out / "keep.txt").write_text("x")
    config = os.path.join(input_dir, "tiny_config.json")
    result = runner.invoke(cli, ["run", config, "--out", str(out)])
    assert result.exit_code == EXIT_CONFIG
    assert "--force" in result.output
    assert os.listdir(out) == ["keep.txt"]


@pytest.mark.parametrize("command", ["probe", "sweep"])
def test_unknown_kind_is_a_usage_error(runner, input_dir, command):
    result = runner.invoke(cli, [command, "nonsense", os.path.join(input_dir, "synthetic_config.json")])
    assert result.exit_code == 2


def test_cause_analysis_rejects_single_step_schedule(runner, tmp_path, input_dir):
    with open(os.path.join(input_dir, "synthetic_config.json")) as f:
        document = json.load(f)
    document["schedule"]["steps"] = 1
    config = tmp_path / "single.json"
    config.write_text(json.dumps(document))
    result = runner.invoke(cli, ["probe", "memory", str(config), "--out", str(tmp_path / "out")])
    assert result.exit_code == EXIT_CONFIG


def console_handler():
    return next(h for h in logging.getLogger("cilfair").handlers if h.get_name() == "console")


def test_env_file_sets_console_log_level(runner, tmp_path, monkeypatch):
    monkeypatch.setenv("CILFAIR_LOG_LEVEL", "")
    monkeypatch.delenv("CILFAIR_LOG_LEVEL")
    env = tmp_path / "quiet.env"
    env.write_text("CILFAIR_LOG_LEVEL=WARNING\n")
    try:
        result = runner.invoke(cli, ["--env-file", str(env), "run", str(tmp_path / "absent.json")])
        assert result.exit_code == EXIT_CONFIG
        assert console_handler().level == logging.WARNING
    finally:
        configure_logging(None, "INFO")


def test_unknown_log_level_is_a_config_error(runner, tmp_path, monkeypatch):
    monkeypatch.setenv("CILFAIR_LOG_LEVEL", "CHATTY")
    result = runner.invoke(cli, ["run", str(tmp_path / "absent.json")])
    assert result.exit_code == EXIT_CONFIG
    assert "CILFAIR_LOG_LEVEL" in result.output


def test_module_loggers_share_the_package_handlers():
    assert runner_module.logger.name == "cilfair.experiments.runner"
    assert runner_module.logger.handlers == []
    assert runner_module.logger.propagate
    assert [h.get_name() for h in logging.getLogger("cilfair").handlers] == ["console"]
