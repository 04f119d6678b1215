"""Command-line interface for opinion alignment runs."""

import argparse
import logging
import signal
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import yaml

from src.core.config import CONTEXT_KINDS, RunConfig
from src.core.exceptions import ConfigurationError, OpinionEvalError
from src.core.pipeline import OpinionEvalPipeline, RunResult, setup_logging
from src.human.opinions import WeightingMode
from src.utils.ui_utils import ColorFormatter, StatusReporter, format_score, format_table

COMMANDS = ("ingest", "humans", "probe", "metrics", "report", "run")


class OpinionEvalCLI:
    """Command-line interface for the opinion alignment pipeline."""

    def __init__(self):
        self.pipeline: Optional[OpinionEvalPipeline] = None
        self.status_reporter: Optional[StatusReporter] = None
        self._setup_signal_handlers()

    def _setup_signal_handlers(self):
        """Setup signal handlers for graceful shutdown."""
        def signal_handler(signum, frame):
            signal.signal(signal.SIGINT, signal.SIG_IGN)
            print(ColorFormatter.error("\n\n[INFO] Interrupted by user. Cached probes are kept; rerun to resume."))
            sys.exit(130)

        signal.signal(signal.SIGINT, signal_handler)
        signal.signal(signal.SIGTERM, signal_handler)

    def create_parser(self) -> argparse.ArgumentParser:
        """Create command-line argument parser."""
        parser = argparse.ArgumentParser(
            description="Measure whose opinions language models reflect, against weighted survey data",
            formatter_class=argparse.RawDescriptionHelpFormatter,
            epilog="""
Commands:
  ingest    validate surveys and microdata
  humans    write human opinion distributions and baselines
  probe     query every model and fill the probe cache
  metrics   score cached probes and print a summary
  report    write all tables from cached probes only
  run       full pipeline (probe live, then write all tables)

Examples:
  %(prog)s run --config eval.yaml
  %(prog)s run --config eval.yaml --permute --seed 7
  %(prog)s humans --config eval.yaml --weighting-mode uniform
  %(prog)s report --config eval.yaml --output-dir reports/replay
            """
        )

        parser.add_argument("command", choices=COMMANDS, help="Pipeline stage to run")

        parser.add_argument(
            "--config",
            type=Path,
            help="Path to run configuration (YAML or JSON)"
        )
        parser.add_argument(
            "--survey",
            nargs=2,
            action="append",
            metavar=("SCHEMA", "MICRODATA"),
            help="Survey schema and microdata files (repeatable; replaces configured surveys)"
        )

        # Output options
        parser.add_argument("--output-dir", type=Path, help="Directory for report files")
        parser.add_argument("--cache-path", type=Path, help="Probe cache file (JSONL)")

        # Evaluation options
        parser.add_argument(
            "--weighting-mode",
            choices=[m.value for m in WeightingMode],
            help="Respondent weighting for human distributions"
        )
        parser.add_argument(
            "--steering-group",
            action="append",
            metavar="ATTRIBUTE:GROUP",
            help="Steering group (repeatable; replaces the configured list)"
        )
        parser.add_argument(
            "--context",
            action="append",
            choices=CONTEXT_KINDS,
            help="Steering context kind to run (repeatable)"
        )
        parser.add_argument(
            "--report-group",
            action="append",
            metavar="ATTRIBUTE:GROUP",
            help="Group to score representativeness for (repeatable; default every surveyed group)"
        )
        parser.add_argument("--subset-size", type=int, help="Size of the contentious steering subset")
        parser.add_argument("--modal-temperature", type=float, help="Temperature for modal representativeness")

        # Robustness options
        parser.add_argument("--permute", action="store_true", help="Also run with seeded option permutations")
        parser.add_argument("--seed", type=int, help="Permutation seed")
        parser.add_argument(
            "--instruction-variant",
            action="append",
            choices=["general", "example"],
            help="Also run with an instruction prefix (repeatable)"
        )

        # Concurrency and UI options
        parser.add_argument("--max-in-flight", type=int, help="Concurrent provider requests")
        parser.add_argument("--no-progress", action="store_true", help="Hide the progress bar")
        parser.add_argument(
            "--verbose", "-v",
            action="store_true",
            help="Show detailed progress information"
        )

        return parser

    def parse_config_file(self, config_path: Path) -> Dict[str, Any]:
        """Parse configuration file."""
        try:
            with open(config_path, "r", encoding="utf-8") as f:
                data = yaml.safe_load(f) or {}
        except (OSError, yaml.YAMLError) as e:
            raise ConfigurationError(f"Failed to parse config file {config_path}: {e}")
        if not isinstance(data, dict):
            raise ConfigurationError(f"Config file {config_path} does not hold a mapping")
        return data

    def create_config(self, args) -> RunConfig:
        """Create configuration from the config file and command-line overrides."""
        config_dict: Dict[str, Any] = {}
        base_dir: Optional[Path] = None
        if args.config:
            config_dict = self.parse_config_file(args.config)
            base_dir = args.config.parent

        robustness: Dict[str, Any] = {}
        if args.permute:
            robustness["permute"] = True
        if args.seed is not None:
            robustness["seed"] = args.seed
        if args.instruction_variant:
            robustness["instruction_variants"] = args.instruction_variant

        overrides = {
            "surveys": [
                {"schema": str(Path(schema).resolve()), "microdata": str(Path(data).resolve())}
                for schema, data in args.survey
            ] if args.survey else None,
            "output_dir": args.output_dir.resolve() if args.output_dir else None,
            "cache_path": args.cache_path.resolve() if args.cache_path else None,
            "weighting_mode": args.weighting_mode,
            "steering_groups": args.steering_group,
            "report_groups": args.report_group,
            "contexts": args.context,
            "steering_subset_size": args.subset_size,
            "modal_temperature": args.modal_temperature,
            "max_in_flight": args.max_in_flight,
            "robustness": robustness or None,
            "verbose": args.verbose,
            "show_progress": False if args.no_progress else None,
        }
        return RunConfig.from_dict(config_dict, base_dir=base_dir, overrides=overrides)

    def _print_files(self, files: List[Path]) -> None:
        for path in files:
            print(f"  {path}")

    def _summarize(self, result: RunResult) -> None:
        rows = [
            [r.model_id, format_score(r.overall_r), format_score(r.refusal_rate),
             format_score(r.mean_entropy)]
            for r in result.reports
        ]
        if rows:
            print(format_table(["model", "R overall", "refusal", "entropy"], rows))
        if result.errors:
            print(ColorFormatter.warning(f"{len(result.errors)} probe failures (listed in the manifest)"))

    def dispatch(self, command: str) -> int:
        """Run one subcommand; returns the process exit code."""
        pipeline = self.pipeline
        if command == "ingest":
            surveys = pipeline.ingest()
            rows = [
                [item.survey.survey_id, str(len(item.survey.questions)), str(len(item.panel)),
                 ", ".join(a.name for a in item.survey.demographics)]
                for item in surveys
            ]
            print(format_table(["survey", "questions", "respondents", "attributes"], rows))
            return 0

        prepared = pipeline.prepare()
        if command == "humans":
            files = pipeline.emit_humans(prepared)
            print(ColorFormatter.success(f"Wrote {len(files)} human tables:"))
            self._print_files(files)
            return 0

        if command == "probe":
            probed, calls = pipeline.probe(prepared)
            print(ColorFormatter.success(
                f"Probed {len(probed)} models ({calls} provider calls, cache at {pipeline.config.cache_path})"))
            if pipeline.errors:
                print(ColorFormatter.warning(f"{len(pipeline.errors)} probe failures"))
            return 0

        if command == "metrics":
            probed, _ = pipeline.probe(prepared, cache_only=True)
            self._summarize(RunResult(reports=pipeline.score(prepared, probed), errors=list(pipeline.errors)))
            return 0

        result = pipeline.run(cache_only=(command == "report"))
        self._summarize(result)
        print(ColorFormatter.success(f"Wrote {len(result.files)} files to {pipeline.config.output_dir}"))
        return 0

    def run(self, args=None) -> int:
        """Run the CLI application."""
        parser = self.create_parser()
        args = parser.parse_args(args)

        setup_logging(args.verbose)
        self.logger = logging.getLogger(__name__)

        try:
            config = self.create_config(args)
        except ConfigurationError as e:
            print(ColorFormatter.error(f"Configuration error: {e}"))
            return 1
        self.status_reporter = StatusReporter(config.verbose)

        try:
            self.pipeline = OpinionEvalPipeline(config)
            return self.dispatch(args.command)
        except KeyboardInterrupt:
            return 130
        except OpinionEvalError as e:
            print(ColorFormatter.error(f"{args.command} failed: {e}"))
            return 1
        except Exception as e:
            self.logger.exception("Unexpected error: %s", e)
            print(ColorFormatter.error(f"Unexpected error: {e}"))
            return 1


def main():
    """Main entry point for the CLI."""
    cli = OpinionEvalCLI()
    sys.exit(cli.run())


if __name__ == "__main__":
    main()
