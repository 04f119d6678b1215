"""Per-model bundle of every alignment score the reports need."""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence, TypeVar

import numpy as np

from src.core.exceptions import DegenerateScoreError, IncompleteMatrixError, MetricError
from src.human.distribution import OpinionDistribution
from src.human.opinions import HumanOpinionTable, mean_refusal_rate
from src.metrics.alignment import (
    DEFAULT_MODAL_TEMPERATURE,
    DistributionMap,
    SteerabilityResult,
    modal_representativeness,
    representativeness,
    steerability,
)
from src.metrics.consistency import (
    ConsistencyResult,
    consistency,
    significance,
    topic_representativeness,
)
from src.metrics.distributions import entropy
from src.survey.schema import DemographicAttribute, GroupRef, Question

logger = logging.getLogger(__name__)

T = TypeVar("T")


@dataclass
class ProbeDiagnostics:
    """Probe-level health of one model's default run."""

    n_prompts: int = 0
    n_failed: int = 0
    n_bounded: int = 0
    n_double_counted: int = 0
    masses: List[float] = field(default_factory=list)

    def mass_stats(self) -> Dict[str, Optional[float]]:
        if not self.masses:
            return {"mean": None, "min": None, "median": None, "max": None}
        values = np.asarray(self.masses, dtype=float)
        return {
            "mean": float(values.mean()),
            "min": float(values.min()),
            "median": float(np.median(values)),
            "max": float(values.max()),
        }


@dataclass
class ModelDistributions:
    """Everything probed for one model, keyed by question id."""

    model_id: str
    default: Dict[str, OpinionDistribution] = field(default_factory=dict)
    # group key -> context kind -> qid -> distribution
    steered: Dict[str, Dict[str, Dict[str, OpinionDistribution]]] = field(default_factory=dict)
    # robustness variant -> qid -> distribution
    variants: Dict[str, Dict[str, OpinionDistribution]] = field(default_factory=dict)
    diagnostics: ProbeDiagnostics = field(default_factory=ProbeDiagnostics)


@dataclass
class EvaluationScope:
    """Question sets and groups a report is computed over."""

    questions: Sequence[Question]
    steering_questions: Sequence[Question]
    steering_groups: Sequence[GroupRef]
    attributes: Sequence[DemographicAttribute]
    variant_questions: Mapping[str, Sequence[Question]] = field(default_factory=dict)
    modal_temperature: float = DEFAULT_MODAL_TEMPERATURE
    # Groups scored for R and modal R; empty means the steering groups.
    report_groups: Sequence[GroupRef] = ()

    def scored_groups(self) -> Sequence[GroupRef]:
        return self.report_groups or self.steering_groups

    def questions_by_topic(self) -> Dict[str, List[Question]]:
        topics: Dict[str, List[Question]] = {}
        for question in self.questions:
            for topic in question.topics:
                topics.setdefault(topic, []).append(question)
        return topics


@dataclass
class SteeringScores:
    """Default and steered alignment to one group on the steering subset."""

    default_r: Optional[float]
    result: Optional[SteerabilityResult]


@dataclass
class TopicBest:
    attribute: str
    topic: str
    group: str
    alpha: Optional[float]


@dataclass
class VariantScores:
    """Robustness re-run scores beside the standard run on the same questions."""

    overall: Optional[float]
    groups: Dict[str, Optional[float]]
    standard_overall: Optional[float]

    @property
    def delta(self) -> Optional[float]:
        if self.overall is None or self.standard_overall is None:
            return None
        return self.overall - self.standard_overall


@dataclass
class MetricReport:
    """All scores for one model."""

    model_id: str
    overall_r: Optional[float] = None
    group_r: Dict[str, Optional[float]] = field(default_factory=dict)
    steering: Dict[str, SteeringScores] = field(default_factory=dict)
    consistency: Dict[str, ConsistencyResult] = field(default_factory=dict)
    topic_best: List[TopicBest] = field(default_factory=list)
    modal_r: Dict[str, Optional[float]] = field(default_factory=dict)
    mean_entropy: Optional[float] = None
    refusal_rate: Optional[float] = None
    variants: Dict[str, VariantScores] = field(default_factory=dict)
    diagnostics: ProbeDiagnostics = field(default_factory=ProbeDiagnostics)

    def __post_init__(self):
        scores = [self.overall_r, *self.group_r.values(), *self.modal_r.values()]
        for value in scores:
            if value is not None and not (0.0 <= value <= 1.0):
                raise MetricError(f"{self.model_id}: alignment score {value!r} outside [0, 1]")


def _scored(description: str, compute: Callable[[], T]) -> Optional[T]:
    try:
        return compute()
    except MetricError as e:
        logger.warning("Cannot score %s: %s", description, e)
        return None


def _consistency_rows(
    model: ModelDistributions,
    human: HumanOpinionTable,
    scope: EvaluationScope,
    report: MetricReport,
) -> None:
    by_topic = scope.questions_by_topic()
    for attribute in scope.attributes:
        group_dists = {ref.key: human.group(ref) for ref in attribute.refs()}
        matrix = topic_representativeness(model.default, group_dists, by_topic)
        try:
            result = consistency(matrix)
        except IncompleteMatrixError as e:
            logger.warning("%s: no consistency for %s: %s", model.model_id, attribute.name, e)
            continue
        report.consistency[attribute.name] = result
        for topic, best in result.topic_best.items():
            try:
                alpha = significance({group: row[topic] for group, row in matrix.items()})
            except DegenerateScoreError:
                alpha = None
            report.topic_best.append(TopicBest(attribute.name, topic, best, alpha))


def build_metric_report(
    model: ModelDistributions,
    human: HumanOpinionTable,
    scope: EvaluationScope,
) -> MetricReport:
    """Score one model's probed distributions against the human table."""
    name = model.model_id
    report = MetricReport(model_id=name, diagnostics=model.diagnostics)
    default = model.default

    report.overall_r = _scored(f"{name} overall", lambda: representativeness(default, human.overall, scope.questions))
    for ref in scope.scored_groups():
        group = human.group(ref)
        report.group_r[ref.key] = _scored(
            f"{name} vs {ref}", lambda: representativeness(default, group, scope.questions))
        report.modal_r[ref.key] = _scored(
            f"{name} modal vs {ref}",
            lambda: modal_representativeness(default, group, scope.questions, scope.modal_temperature),
        )
    for ref in scope.steering_groups:
        group = human.group(ref)
        if ref.key in model.steered:
            report.steering[ref.key] = SteeringScores(
                default_r=_scored(f"{name} default vs {ref} on steering subset",
                                  lambda: representativeness(default, group, scope.steering_questions)),
                result=_scored(f"{name} steered to {ref}",
                               lambda: steerability(model.steered[ref.key], group, scope.steering_questions)),
            )

    _consistency_rows(model, human, scope, report)

    dists = [default[q.qid] for q in scope.questions if q.qid in default]
    report.mean_entropy = float(np.mean([entropy(d) for d in dists])) if dists else None
    report.refusal_rate = mean_refusal_rate(dists)

    for variant, variant_dists in model.variants.items():
        questions = scope.variant_questions.get(variant, scope.questions)
        report.variants[variant] = VariantScores(
            overall=_scored(f"{name} [{variant}] overall",
                            lambda: representativeness(variant_dists, human.overall, questions)),
            groups={
                ref.key: _scored(f"{name} [{variant}] vs {ref}",
                                 lambda: representativeness(variant_dists, human.group(ref), questions))
                for ref in scope.scored_groups()
            },
            standard_overall=_scored(f"{name} overall on {variant} questions",
                                     lambda: representativeness(default, human.overall, questions)),
        )
    return report


def heatmap_matrix(reports: Sequence[MetricReport], groups: Sequence[GroupRef]) -> np.ndarray:
    """models x groups array of R^G (NaN where unscorable)."""
    matrix = np.full((len(reports), len(groups)), np.nan)
    for i, report in enumerate(reports):
        for j, ref in enumerate(groups):
            value = report.group_r.get(ref.key)
            if value is not None:
                matrix[i, j] = value
    return matrix
