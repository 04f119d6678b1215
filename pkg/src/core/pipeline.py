"""Main pipeline orchestrator: ingest, aggregate, probe, score, emit."""

import logging
import sys
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from src.core.config import RunConfig
from src.core.exceptions import (
    AuthError,
    ConfigurationError,
    EmptyCellError,
    MetricError,
    NoRefusalOptionError,
    OpinionEvalError,
    ProbeError,
    UnknownTopicError,
)
from src.human.distribution import OpinionDistribution
from src.human.opinions import (
    HumanOpinionTable,
    group_alignment_baseline,
    human_refusal_rate,
    overall_alignment_baseline,
)
from src.metrics.alignment import select_contentious
from src.metrics.metric_report import (
    EvaluationScope,
    MetricReport,
    ModelDistributions,
    build_metric_report,
)
from src.probe.cache import ProbeCache
from src.probe.client import query_logprobs
from src.probe.extraction import CompletedMap, bound_missing_options, extract_distribution, total_assigned_mass
from src.probe.prompts import NO_CONTEXT, PromptSpec, build_prompt, permutation_for, render_context
from src.probe.providers import BaseProvider, ProviderFactory
from src.report.emitter import BaselineRow, ProbeFailure, RunInfo, emit_human_tables, emit_tables
from src.survey.responses import ResponsePanel, load_responses_file
from src.survey.schema import DemographicAttribute, GroupRef, Question, Survey, load_survey_file, questions_for_topic
from src.utils.ui_utils import ProgressReporter, StatusReporter

DEFAULT_RUN = "default"
PERMUTED_RUN = "permuted"


def setup_logging(verbose: bool = False) -> None:
    """Configure application-wide logging.

    Args:
        verbose: If True, set log level to DEBUG; otherwise INFO
    """
    log_level = logging.DEBUG if verbose else logging.INFO

    formatter = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )

    root_logger = logging.getLogger()
    root_logger.setLevel(log_level)

    # Clear existing handlers to avoid duplicates
    root_logger.handlers.clear()

    console_handler = logging.StreamHandler(sys.stdout)
    console_handler.setLevel(log_level)
    console_handler.setFormatter(formatter)
    root_logger.addHandler(console_handler)

    # Suppress noisy third-party loggers
    logging.getLogger('urllib3').setLevel(logging.WARNING)
    logging.getLogger('langchain_core').setLevel(logging.WARNING)
    logging.getLogger('httpx').setLevel(logging.WARNING)
    logging.getLogger('httpcore').setLevel(logging.WARNING)


@dataclass
class LoadedSurvey:
    survey: Survey
    panel: ResponsePanel


@dataclass
class PreparedRun:
    """Everything known before any model is queried."""

    surveys: List[LoadedSurvey]
    questions: List[Question]
    attributes: List[DemographicAttribute]
    steering_groups: List[GroupRef]
    steering_questions: List[Question]
    human: HumanOpinionTable
    report_groups: List[GroupRef] = field(default_factory=list)
    baselines: List[BaselineRow] = field(default_factory=list)
    human_refusal: Dict[str, Optional[float]] = field(default_factory=dict)

    def attribute(self, name: str) -> DemographicAttribute:
        for attribute in self.attributes:
            if attribute.name == name:
                return attribute
        raise KeyError(name)


@dataclass(frozen=True)
class ProbeJob:
    """One prompt to send and where its distribution belongs."""

    run: str
    question: Question
    prompt: PromptSpec
    group: Optional[str] = None


@dataclass(frozen=True)
class _Outcome:
    dist: OpinionDistribution
    completed: CompletedMap
    mass: float


@dataclass
class RunResult:
    """Outcome of a pipeline run."""

    reports: List[MetricReport] = field(default_factory=list)
    errors: List[ProbeFailure] = field(default_factory=list)
    files: List[Path] = field(default_factory=list)
    provider_calls: int = 0

    @property
    def success(self) -> bool:
        return not self.errors


class OpinionEvalPipeline:
    """Main pipeline coordinator for an opinion alignment run."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.logger = logging.getLogger(__name__)
        self.status_reporter = StatusReporter(config.verbose)
        self.progress_reporter = ProgressReporter(config.show_progress and not config.verbose)
        self.errors: List[ProbeFailure] = []
        self._errors_lock = threading.Lock()

    # Stage 1: ingest

    def ingest(self) -> List[LoadedSurvey]:
        """Load every configured survey and its microdata."""
        if not self.config.surveys:
            raise ConfigurationError("No surveys configured")
        loaded = []
        seen_qids: Dict[str, str] = {}
        for source in self.config.surveys:
            survey = load_survey_file(source.schema)
            for question in survey.questions:
                if question.qid in seen_qids:
                    raise ConfigurationError(
                        f"Question {question.qid} appears in surveys {seen_qids[question.qid]} "
                        f"and {survey.survey_id}"
                    )
                seen_qids[question.qid] = survey.survey_id
            panel = load_responses_file(source.microdata, survey.questions, survey.demographics,
                                        survey_id=survey.survey_id)
            loaded.append(LoadedSurvey(survey, panel))
            self.status_reporter.info(
                f"Survey {survey.survey_id}: {len(survey.questions)} questions, {len(panel)} respondents"
            )
        return loaded

    # Stage 2: human distributions

    def build_human_table(self, surveys: Sequence[LoadedSurvey]) -> HumanOpinionTable:
        table = HumanOpinionTable()
        for item in surveys:
            table = table.merge(HumanOpinionTable.build(item.panel, item.survey, self.config.weighting_mode))
        return table

    @staticmethod
    def _attributes(surveys: Sequence[LoadedSurvey]) -> List[DemographicAttribute]:
        attributes: Dict[str, DemographicAttribute] = {}
        for item in surveys:
            for attribute in item.survey.demographics:
                attributes.setdefault(attribute.name, attribute)
        return list(attributes.values())

    @staticmethod
    def _check_groups(refs: Sequence[GroupRef], attributes: Sequence[DemographicAttribute], role: str) -> List[GroupRef]:
        by_name = {a.name: a for a in attributes}
        unresolved = [
            ref.key for ref in refs
            if ref.attribute not in by_name or ref.group not in by_name[ref.attribute].groups
        ]
        if unresolved:
            raise ConfigurationError(f"{role} groups not found in any survey: {unresolved}")
        return list(refs)

    def resolve_steering_groups(self, attributes: Sequence[DemographicAttribute]) -> List[GroupRef]:
        """Configured steering groups, each checked against the loaded demographics."""
        return self._check_groups(self.config.steering_refs(), attributes, "Steering")

    def resolve_report_groups(self, attributes: Sequence[DemographicAttribute]) -> List[GroupRef]:
        """Groups scored for representativeness: configured ones, else every surveyed group."""
        configured = self.config.report_refs()
        if configured is None:
            return [ref for attribute in attributes for ref in attribute.refs()]
        return self._check_groups(configured, attributes, "Report")

    def _human_refusal(self, surveys: Sequence[LoadedSurvey], refs: Sequence[GroupRef]) -> Dict[str, Optional[float]]:
        rates: Dict[str, Optional[float]] = {}
        for target in [None, *refs]:
            label = "human-overall" if target is None else f"human-group({target})"
            values = []
            for item in surveys:
                try:
                    values.append(human_refusal_rate(item.panel, item.survey.questions, target,
                                                     self.config.weighting_mode))
                except (NoRefusalOptionError, EmptyCellError):
                    continue
            rates[label] = sum(values) / len(values) if values else None
        return rates

    def _baselines(self, prepared: "PreparedRun") -> List[BaselineRow]:
        rows = []
        for ref in prepared.report_groups:
            try:
                value = overall_alignment_baseline(prepared.human, ref, prepared.questions)
            except (EmptyCellError, MetricError):
                value = None
            rows.append(BaselineRow("overall", ref.key, "overall", None, value))
        for pair in self.config.baseline_pairs:
            first, second = GroupRef.parse(pair.first), GroupRef.parse(pair.second)
            try:
                questions = (questions_for_topic(prepared.questions, pair.topic)
                             if pair.topic else prepared.questions)
            except UnknownTopicError as e:
                raise ConfigurationError(f"Baseline pair {pair.first} vs {pair.second}: {e}")
            values = []
            for item in prepared.surveys:
                subset = [q for q in questions if q.survey_id == item.survey.survey_id]
                if not subset:
                    continue
                try:
                    values.append((len(subset), group_alignment_baseline(
                        item.panel, subset, first, second, self.config.weighting_mode)))
                except (EmptyCellError, MetricError):
                    continue
            value = (sum(n * v for n, v in values) / sum(n for n, _ in values)) if values else None
            rows.append(BaselineRow("pair", first.key, second.key, pair.topic, value))
        return rows

    def select_steering_subset(
        self,
        questions: Sequence[Question],
        human: HumanOpinionTable,
        refs: Sequence[GroupRef],
    ) -> List[Question]:
        """The most contentious questions among the steering groups."""
        group_dists = {
            q.qid: [human.group(ref)[q.qid] for ref in refs if q.qid in human.group(ref)]
            for q in questions
        }
        subset = select_contentious(questions, group_dists, self.config.steering_subset_size)
        if not subset:
            self.logger.warning("No question is contentious across two or more steering groups")
        return subset

    def prepare(self) -> PreparedRun:
        """Stages 1-2: surveys, human distributions, steering groups and subset."""
        surveys = self.ingest()
        questions = [q for item in surveys for q in item.survey.questions]
        attributes = self._attributes(surveys)
        refs = self.resolve_steering_groups(attributes)
        human = self.build_human_table(surveys)
        prepared = PreparedRun(
            surveys=list(surveys),
            questions=questions,
            attributes=attributes,
            steering_groups=refs,
            steering_questions=self.select_steering_subset(questions, human, refs),
            human=human,
            report_groups=self.resolve_report_groups(attributes),
        )
        prepared.baselines = self._baselines(prepared)
        prepared.human_refusal = self._human_refusal(surveys, prepared.report_groups)
        return prepared

    # Stage 3: probing

    def steering_texts(self, prepared: PreparedRun, ref: GroupRef) -> List[str]:
        attribute = prepared.attribute(ref.attribute)
        return [render_context(kind, attribute, ref.group, self.config.templates).rendered_text
                for kind in self.config.contexts]

    def build_jobs(self, prepared: PreparedRun) -> List[ProbeJob]:
        """Default run on every question, steered and robustness runs on top."""
        templates = self.config.templates
        robustness = self.config.robustness
        jobs = [ProbeJob(DEFAULT_RUN, q, build_prompt(q, templates=templates)) for q in prepared.questions]

        for ref in prepared.steering_groups:
            attribute = prepared.attribute(ref.attribute)
            for kind in self.config.contexts:
                context = render_context(kind, attribute, ref.group, templates)
                jobs.extend(
                    ProbeJob(kind, q, build_prompt(q, context, templates=templates), group=ref.key)
                    for q in prepared.steering_questions
                )

        if robustness.permute:
            jobs.extend(
                ProbeJob(PERMUTED_RUN, q, build_prompt(
                    q, NO_CONTEXT, "none", permutation_for(q.qid, q.n_choices, robustness.seed), templates))
                for q in prepared.questions
            )
        for variant in robustness.instruction_variants:
            jobs.extend(
                ProbeJob(f"instruction-{variant}", q, build_prompt(q, NO_CONTEXT, variant, templates=templates))
                for q in prepared.steering_questions
            )
        return jobs

    def _record_failure(self, model: str, job: ProbeJob, error: Exception) -> None:
        run = job.run if job.group is None else f"{job.run}({job.group})"
        with self._errors_lock:
            self.errors.append(ProbeFailure(model, job.question.qid, run, type(error).__name__, str(error)))

    def probe_model(
        self,
        provider: BaseProvider,
        name: str,
        jobs: Sequence[ProbeJob],
        cache: ProbeCache,
    ) -> ModelDistributions:
        """Run every job for one model; failures go to the error ledger."""
        probed = ModelDistributions(model_id=name)
        results: List[Optional[_Outcome]] = [None] * len(jobs)
        # Once credentials are rejected the remaining jobs are skipped with the same error.
        auth_errors: List[AuthError] = []

        def run_job(index: int) -> None:
            job = jobs[index]
            if auth_errors:
                self._record_failure(name, job, auth_errors[0])
                self.progress_reporter.advance(False)
                return
            try:
                result = query_logprobs(provider, job.prompt, cache, self.config.retry)
                completed = bound_missing_options(result, job.prompt.presented_labels)
                dist = extract_distribution(
                    completed, job.question, job.prompt.permutation, job.prompt.presented_labels,
                    model_id=name, context=job.prompt.context.kind,
                )
                results[index] = _Outcome(dist, completed, total_assigned_mass(result, job.prompt.choice_labels))
                self.progress_reporter.advance(True)
            except AuthError as e:
                auth_errors.append(e)
                self._record_failure(name, job, e)
                self.progress_reporter.advance(False)
            except ProbeError as e:
                self._record_failure(name, job, e)
                self.progress_reporter.advance(False)

        self.progress_reporter.start(name, len(jobs))
        with ThreadPoolExecutor(max_workers=self.config.max_in_flight) as pool:
            list(pool.map(run_job, range(len(jobs))))
        self.progress_reporter.finish()

        diagnostics = probed.diagnostics
        for job, outcome in zip(jobs, results):
            if job.run == DEFAULT_RUN:
                diagnostics.n_prompts += 1
            if outcome is None:
                if job.run == DEFAULT_RUN:
                    diagnostics.n_failed += 1
                continue
            qid = job.question.qid
            if job.run == DEFAULT_RUN:
                probed.default[qid] = outcome.dist
                diagnostics.masses.append(outcome.mass)
                diagnostics.n_bounded += 1 if outcome.completed.bounded else 0
                diagnostics.n_double_counted += 1 if outcome.completed.double_counted else 0
            elif job.group is not None:
                probed.steered.setdefault(job.group, {}).setdefault(job.run, {})[qid] = outcome.dist
            else:
                probed.variants.setdefault(job.run, {})[qid] = outcome.dist
        return probed

    def probe(self, prepared: PreparedRun, cache_only: bool = False) -> Tuple[List[ModelDistributions], int]:
        """Stage 3 for every configured model. Returns distributions and provider call count."""
        cache = ProbeCache(self.config.cache_path)
        factory = ProviderFactory(
            questions=prepared.questions,
            group_distributions=lambda ref: prepared.human.overall if ref is None else prepared.human.group(ref),
            steering_triggers=lambda ref: self.steering_texts(prepared, ref),
            cache_only=cache_only,
        )
        jobs = self.build_jobs(prepared)
        probed = []
        calls = 0
        try:
            for spec in self.config.models:
                try:
                    provider = factory.get_provider(spec)
                except ConfigurationError as e:
                    self.status_reporter.error(f"Model {spec.name}: {e}")
                    with self._errors_lock:
                        self.errors.append(ProbeFailure(spec.name, "", "setup", type(e).__name__, str(e)))
                    continue
                model = self.probe_model(provider, spec.name, jobs, cache)
                calls += provider.calls
                if model.default:
                    probed.append(model)
                else:
                    self.status_reporter.error(f"Model {spec.name}: no question could be probed")
        finally:
            factory.close()
        self.logger.info("Probing done: %d provider calls, %d cache hits", calls, cache.hits)
        return probed, calls

    # Stage 4: metrics

    def scope(self, prepared: PreparedRun) -> EvaluationScope:
        variant_questions = {PERMUTED_RUN: prepared.questions}
        for variant in self.config.robustness.instruction_variants:
            variant_questions[f"instruction-{variant}"] = prepared.steering_questions
        scored_attributes = {ref.attribute for ref in prepared.report_groups}
        return EvaluationScope(
            questions=prepared.questions,
            steering_questions=prepared.steering_questions,
            steering_groups=prepared.steering_groups,
            report_groups=prepared.report_groups,
            attributes=[a for a in prepared.attributes if a.name in scored_attributes],
            variant_questions=variant_questions,
            modal_temperature=self.config.modal_temperature,
        )

    def score(self, prepared: PreparedRun, probed: Sequence[ModelDistributions]) -> List[MetricReport]:
        scope = self.scope(prepared)
        return [build_metric_report(model, prepared.human, scope) for model in probed]

    # Stage 5: emit

    def run_info(self, prepared: PreparedRun) -> RunInfo:
        warnings = [f"{len(prepared.human.skipped)} human (group, question) cells uncomputable"] \
            if prepared.human.skipped else []
        return RunInfo(
            config_hash=self.config.config_hash(),
            seed=self.config.robustness.seed,
            template_version=self.config.templates.version,
            steering_groups=[ref.key for ref in prepared.steering_groups],
            report_groups=[ref.key for ref in prepared.report_groups],
            contexts=list(self.config.contexts),
            human_refusal=prepared.human_refusal,
            baselines=prepared.baselines,
            human_distributions=list(prepared.human.distributions()),
            errors=sorted(self.errors, key=lambda e: (e.model, e.run, e.qid)),
            warnings=warnings,
        )

    def emit_humans(self, prepared: PreparedRun) -> List[Path]:
        return emit_human_tables(self.run_info(prepared), self.config.output_dir)

    def run(self, cache_only: bool = False) -> RunResult:
        """Full pipeline. Per-(model, question) failures are recorded, never fatal."""
        self.errors = []
        try:
            prepared = self.prepare()
            probed, calls = self.probe(prepared, cache_only=cache_only)
            reports = self.score(prepared, probed)
            files = emit_tables(reports, self.config.output_dir, self.run_info(prepared))
        except OpinionEvalError:
            raise
        except Exception as e:
            raise OpinionEvalError(f"Run failed: {e}") from e

        if self.errors:
            failed_models = sorted({e.model for e in self.errors})
            self.status_reporter.warning(
                f"{len(self.errors)} probe failures across models: {', '.join(failed_models)}"
            )
        return RunResult(reports=reports, errors=list(self.errors), files=files, provider_calls=calls)
