"""Weighted human opinion distributions, refusal rates and human baselines."""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.core.exceptions import (
    AllRefusedError,
    EmptyCellError,
    EmptySetError,
    NoRefusalOptionError,
)
from src.human.distribution import OpinionDistribution, Provenance
from src.metrics.alignment import DistributionMap, representativeness
from src.survey.responses import ResponsePanel
from src.survey.schema import GroupRef, Question, Survey

logger = logging.getLogger(__name__)


class WeightingMode(str, Enum):
    """How respondents are weighted when aggregating."""

    SURVEY_WEIGHTS = "survey_weights"
    UNIFORM = "uniform"


@dataclass(frozen=True)
class _Tally:
    choice_mass: np.ndarray
    refusal_mass: float
    answered: int

    @property
    def total(self) -> float:
        return float(self.choice_mass.sum()) + self.refusal_mass


def _tally(
    panel: ResponsePanel,
    question: Question,
    group: Optional[GroupRef],
    weighting_mode: WeightingMode,
) -> _Tally:
    answers = panel.answers(question.qid)
    mask = panel.group_mask(group) & answers.notna().to_numpy()
    if WeightingMode(weighting_mode) is WeightingMode.UNIFORM:
        weights = np.ones(len(panel))
    else:
        weights = panel.weights

    sums = pd.Series(weights[mask]).groupby(answers[mask].to_numpy()).sum()
    choice_mass = np.array([sums.get(o.label, 0.0) for o in question.choices], dtype=float)
    refusal = question.refusal
    refusal_mass = float(sums.get(refusal.label, 0.0)) if refusal is not None else 0.0
    return _Tally(choice_mass, refusal_mass, int(mask.sum()))


def _describe(group: Optional[GroupRef]) -> str:
    return "all respondents" if group is None else str(group)


def aggregate_distribution(
    panel: ResponsePanel,
    question: Question,
    group_filter: Optional[GroupRef] = None,
    weighting_mode: WeightingMode = WeightingMode.SURVEY_WEIGHTS,
) -> OpinionDistribution:
    """D_H(q) = sum_h w_h F(h, q) over the respondents in ``group_filter``.

    ``group_filter=None`` means everyone. MISSING answers drop out entirely;
    refusals only feed ``refusal_rate``; choices are renormalized over the
    non-refusal mass.
    """
    tally = _tally(panel, question, group_filter, weighting_mode)
    who = _describe(group_filter)
    if tally.answered == 0 or not tally.total > 0:
        raise EmptyCellError(
            f"No respondent among {who} answered {question.qid}",
            qid=question.qid, group=str(group_filter) if group_filter else None,
        )
    choice_total = float(tally.choice_mass.sum())
    if not choice_total > 0:
        raise AllRefusedError(
            f"Every respondent among {who} refused {question.qid}",
            qid=question.qid, group=str(group_filter) if group_filter else None,
        )

    refusal_rate = tally.refusal_mass / tally.total if question.has_refusal else None
    provenance = Provenance.overall() if group_filter is None else Provenance.for_group(group_filter)
    return OpinionDistribution.from_masses(question.qid, tally.choice_mass, refusal_rate, provenance)


def human_refusal_rate(
    panel: ResponsePanel,
    questions: Sequence[Question],
    group_filter: Optional[GroupRef] = None,
    weighting_mode: WeightingMode = WeightingMode.SURVEY_WEIGHTS,
) -> float:
    """Unweighted mean over questions of the per-question refusal rate."""
    eligible = [q for q in questions if q.has_refusal]
    if not eligible:
        raise NoRefusalOptionError("No question offers a refusal option")
    rates = []
    for question in eligible:
        tally = _tally(panel, question, group_filter, weighting_mode)
        if tally.answered and tally.total > 0:
            rates.append(tally.refusal_mass / tally.total)
    if not rates:
        raise EmptyCellError(f"No refusal-bearing question was answered by {_describe(group_filter)}")
    return float(np.mean(rates))


def mean_refusal_rate(distributions: Iterable[OpinionDistribution]) -> Optional[float]:
    """Mean refusal rate over distributions where refusal is defined."""
    rates = [d.refusal_rate for d in distributions if d.refusal_rate is not None]
    return float(np.mean(rates)) if rates else None


def _group_distributions(
    panel: ResponsePanel,
    questions: Sequence[Question],
    group: Optional[GroupRef],
    weighting_mode: WeightingMode,
) -> Tuple[Dict[str, OpinionDistribution], int]:
    dists: Dict[str, OpinionDistribution] = {}
    skipped = 0
    for question in questions:
        try:
            dists[question.qid] = aggregate_distribution(panel, question, group, weighting_mode)
        except (EmptyCellError, AllRefusedError):
            skipped += 1
    return dists, skipped


def baseline_alignment(
    first: DistributionMap,
    second: DistributionMap,
    questions: Sequence[Question],
) -> float:
    """Alignment between two human distribution sets over the questions both cover."""
    try:
        return representativeness(first, second, questions)
    except EmptySetError as e:
        raise EmptyCellError("No question is computable for both sides of the baseline") from e


def group_alignment_baseline(
    panel: ResponsePanel,
    questions: Sequence[Question],
    first: GroupRef,
    second: GroupRef,
    weighting_mode: WeightingMode = WeightingMode.SURVEY_WEIGHTS,
) -> float:
    """R^{G1}_{G2}(Q): how much two human groups agree.

    Questions either group never answered are skipped and counted.
    """
    first_dists, first_skipped = _group_distributions(panel, questions, first, weighting_mode)
    second_dists, second_skipped = _group_distributions(panel, questions, second, weighting_mode)
    if first_skipped or second_skipped:
        logger.warning(
            "Baseline %s vs %s: %d and %d questions uncomputable",
            first, second, first_skipped, second_skipped,
        )
    return baseline_alignment(first_dists, second_dists, questions)


@dataclass
class HumanOpinionTable:
    """Overall and per-group human distributions for a set of questions."""

    overall: Dict[str, OpinionDistribution] = field(default_factory=dict)
    groups: Dict[str, Dict[str, OpinionDistribution]] = field(default_factory=dict)
    skipped: List[Tuple[str, str, str]] = field(default_factory=list)

    @classmethod
    def build(
        cls,
        panel: ResponsePanel,
        survey: Survey,
        weighting_mode: WeightingMode = WeightingMode.SURVEY_WEIGHTS,
    ) -> "HumanOpinionTable":
        table = cls()
        targets: List[Optional[GroupRef]] = [None]
        for attribute in survey.demographics:
            targets.extend(attribute.refs())
        for group in targets:
            key = "overall" if group is None else group.key
            cell: Dict[str, OpinionDistribution] = {}
            for question in survey.questions:
                try:
                    cell[question.qid] = aggregate_distribution(panel, question, group, weighting_mode)
                except (EmptyCellError, AllRefusedError) as e:
                    table.skipped.append((key, question.qid, type(e).__name__))
            if group is None:
                table.overall = cell
            else:
                table.groups[key] = cell
        if table.skipped:
            logger.warning("Survey %s: %d (group, question) cells uncomputable",
                           survey.survey_id, len(table.skipped))
        return table

    def merge(self, other: "HumanOpinionTable") -> "HumanOpinionTable":
        """Union of two tables over disjoint question sets."""
        merged = HumanOpinionTable(
            overall={**self.overall, **other.overall},
            groups={k: dict(v) for k, v in self.groups.items()},
            skipped=self.skipped + other.skipped,
        )
        for key, dists in other.groups.items():
            merged.groups.setdefault(key, {}).update(dists)
        return merged

    def group(self, ref: GroupRef) -> Dict[str, OpinionDistribution]:
        return self.groups.get(ref.key, {})

    def distributions(self) -> Iterator[OpinionDistribution]:
        yield from self.overall.values()
        for dists in self.groups.values():
            yield from dists.values()


def overall_alignment_baseline(
    table: HumanOpinionTable,
    group: GroupRef,
    questions: Sequence[Question],
) -> float:
    """R^O_G: how representative a human group is of the whole population."""
    return baseline_alignment(table.group(group), table.overall, questions)
