"""Unit tests for CLI functionality."""

from pathlib import Path

import pytest

from src.cli.main import OpinionEvalCLI
from src.core.exceptions import ConfigurationError
from src.human.opinions import WeightingMode
from tests.conftest import write_run_config


@pytest.fixture
def cli(cli_state):
    return OpinionEvalCLI()


@pytest.fixture
def config_path(fixture_files, temp_dir):
    schema, microdata = fixture_files
    return write_run_config(temp_dir, schema, microdata)


@pytest.mark.unit
@pytest.mark.cli
class TestOpinionEvalCLI:
    """Test cases for OpinionEvalCLI."""

    def test_init(self, cli):
        """Test CLI initialization."""
        assert cli.pipeline is None
        assert cli.status_reporter is None

    def test_create_parser(self, cli):
        """Test argument parser creation."""
        args = cli.create_parser().parse_args(["run"])

        assert args.command == "run"
        assert args.config is None
        assert args.verbose is False
        assert args.permute is False
        assert args.steering_group is None

    def test_unknown_command(self, cli):
        with pytest.raises(SystemExit):
            cli.create_parser().parse_args(["summarize"])

    def test_repeatable_flags(self, cli):
        args = cli.create_parser().parse_args([
            "probe", "--survey", "s.yaml", "r.csv", "--survey", "t.yaml", "u.csv",
            "--context", "QA", "--context", "BIO", "--instruction-variant", "general",
        ])

        assert args.survey == [["s.yaml", "r.csv"], ["t.yaml", "u.csv"]]
        assert args.context == ["QA", "BIO"]
        assert args.instruction_variant == ["general"]

    def test_parse_config_file_success(self, cli, config_path):
        """Test successful config file parsing."""
        data = cli.parse_config_file(config_path)
        assert data["steering_groups"] == ["POLPARTY:Democrat", "POLPARTY:Republican"]

    def test_parse_config_file_invalid(self, cli, temp_dir):
        """Test config file parsing with invalid YAML."""
        path = temp_dir / "bad.yaml"
        path.write_text("models: [unclosed")
        with pytest.raises(ConfigurationError, match="Failed to parse"):
            cli.parse_config_file(path)

    def test_create_config_resolves_against_config_dir(self, cli, config_path, temp_dir):
        args = cli.create_parser().parse_args(["run", "--config", str(config_path)])
        config = cli.create_config(args)

        assert config.surveys[0].schema == temp_dir / "survey.yaml"
        assert config.output_dir == temp_dir / "reports"
        assert [m.name for m in config.models] == ["uniform", "dem-mimic"]

    def test_command_line_overrides(self, cli, config_path, temp_dir):
        args = cli.create_parser().parse_args([
            "run", "--config", str(config_path),
            "--weighting-mode", "uniform",
            "--steering-group", "SEX:Female",
            "--subset-size", "7",
            "--permute", "--seed", "11",
            "--output-dir", str(temp_dir / "elsewhere"),
            "--max-in-flight", "2",
            "--no-progress", "-v",
        ])
        config = cli.create_config(args)

        assert config.weighting_mode is WeightingMode.UNIFORM
        assert config.steering_groups == ["SEX:Female"]
        assert config.steering_subset_size == 7
        assert config.robustness.permute is True
        assert config.robustness.seed == 11
        assert config.output_dir == (temp_dir / "elsewhere").resolve()
        assert config.cache_path == temp_dir / "reports" / "cache" / "probes.jsonl"
        assert config.max_in_flight == 2
        assert config.show_progress is False
        assert config.verbose is True

    def test_survey_flag_replaces_configured_surveys(self, cli, fixture_files, temp_dir):
        schema, microdata = fixture_files
        args = cli.create_parser().parse_args(["ingest", "--survey", str(schema), str(microdata)])
        config = cli.create_config(args)

        assert config.surveys[0].schema == Path(schema).resolve()

    def test_configuration_error_exit_code(self, cli, temp_dir, capsys):
        exit_code = cli.run(["run", "--config", str(temp_dir / "absent.yaml")])

        assert exit_code == 1
        assert "Configuration error" in capsys.readouterr().out

    def test_ingest_prints_summary(self, cli, config_path, capsys):
        assert cli.run(["ingest", "--config", str(config_path)]) == 0
        out = capsys.readouterr().out

        assert "W92" in out
        assert "POLPARTY, SEX" in out

    def test_humans_writes_human_tables(self, cli, config_path, temp_dir):
        assert cli.run(["humans", "--config", str(config_path)]) == 0
        assert (temp_dir / "reports" / "human_distributions.csv").exists()
        assert not (temp_dir / "reports" / "manifest.json").exists()

    def test_probe_then_report(self, cli, config_path, temp_dir, capsys):
        """report rebuilds every table from the cache filled by probe."""
        assert cli.run(["probe", "--config", str(config_path), "--no-progress"]) == 0
        assert (temp_dir / "reports" / "cache" / "probes.jsonl").exists()
        assert not (temp_dir / "reports" / "representativeness.csv").exists()

        assert OpinionEvalCLI().run(["report", "--config", str(config_path), "--no-progress"]) == 0
        out = capsys.readouterr().out
        assert "dem-mimic" in out
        assert (temp_dir / "reports" / "representativeness.csv").exists()

    def test_report_into_another_directory_reads_configured_cache(self, cli, config_path, temp_dir):
        assert cli.run(["run", "--config", str(config_path), "--no-progress"]) == 0
        replay = temp_dir / "replay"

        assert OpinionEvalCLI().run(["report", "--config", str(config_path), "--output-dir", str(replay),
                                     "--no-progress"]) == 0
        assert (replay / "representativeness.csv").exists()
        assert not (replay / "cache").exists()
        original = (temp_dir / "reports" / "representativeness.csv").read_bytes()
        assert (replay / "representativeness.csv").read_bytes() == original

    def test_report_group_flag(self, cli, config_path):
        args = cli.create_parser().parse_args(["run", "--config", str(config_path), "--report-group", "SEX:Male"])
        assert cli.create_config(args).report_groups == ["SEX:Male"]

    def test_metrics_without_cache_reports_failures(self, cli, config_path, capsys):
        assert cli.run(["metrics", "--config", str(config_path), "--no-progress"]) == 0
        assert "probe failures" in capsys.readouterr().out
