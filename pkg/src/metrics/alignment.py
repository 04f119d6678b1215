"""Alignment between opinion distributions and the scores built on it."""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, NamedTuple, Optional, Sequence

import numpy as np

from src.core.exceptions import EmptyCellError, EmptySetError
from src.human.distribution import OpinionDistribution
from src.metrics.distributions import temperature_scale
from src.metrics.ordinal import DistributionLike, achievable_max_wd, ordinal_support, wasserstein_1d
from src.survey.schema import Question

logger = logging.getLogger(__name__)

DEFAULT_MODAL_TEMPERATURE = 1e-3
DistributionMap = Mapping[str, OpinionDistribution]


class AlignmentPair(NamedTuple):
    """Two distributions over the same question."""

    question: Question
    first: DistributionLike
    second: DistributionLike


def question_alignment(first: DistributionLike, second: DistributionLike, question: Question) -> float:
    """Per-question similarity 1 - WD / (N - 1)."""
    n = question.n_choices
    distance = wasserstein_1d(first, second, ordinal_support(question))
    if question.hedge is not None:
        logger.debug(
            "Question %s: normalizing WD by N-1=%d (achievable max %.1f)",
            question.qid, n - 1, achievable_max_wd(question),
        )
    return float(np.clip(1.0 - distance / (n - 1), 0.0, 1.0))


def alignment(pairs: Iterable[AlignmentPair]) -> float:
    """Mean per-question alignment over a question set."""
    scores = [question_alignment(first, second, question) for question, first, second in pairs]
    if not scores:
        raise EmptySetError("Alignment requested over an empty question set")
    return float(np.mean(scores))


def _paired(
    first: DistributionMap,
    second: DistributionMap,
    questions: Sequence[Question],
) -> List[AlignmentPair]:
    pairs = [
        AlignmentPair(q, first[q.qid], second[q.qid])
        for q in questions
        if q.qid in first and q.qid in second
    ]
    skipped = len(questions) - len(pairs)
    if skipped:
        logger.warning("Skipped %d of %d questions lacking a distribution on either side",
                       skipped, len(questions))
    return pairs


def representativeness(
    model_dists: DistributionMap,
    reference_dists: DistributionMap,
    questions: Sequence[Question],
) -> float:
    """Average alignment between model distributions and a human reference.

    Questions missing from either side are skipped and counted in the log.
    """
    return alignment(_paired(model_dists, reference_dists, questions))


def modal_representativeness(
    model_dists: DistributionMap,
    group_dists: DistributionMap,
    questions: Sequence[Question],
    temperature: float = DEFAULT_MODAL_TEMPERATURE,
) -> float:
    """Representativeness against temperature-sharpened group distributions."""
    sharpened = {qid: temperature_scale(dist, temperature) for qid, dist in group_dists.items()}
    return representativeness(model_dists, sharpened, questions)


@dataclass
class SteerabilityResult:
    """Best-of-contexts alignment to a group plus per-context breakdown."""

    score: float
    context_means: Dict[str, float] = field(default_factory=dict)
    best_context_counts: Dict[str, int] = field(default_factory=dict)
    n_questions: int = 0
    skipped_contexts: int = 0


def steerability(
    model_dists_by_context: Mapping[str, DistributionMap],
    group_dists: DistributionMap,
    questions: Sequence[Question],
) -> SteerabilityResult:
    """Per question, take the best steering context; average over questions.

    A context missing for a question is skipped for that question, never
    scored as zero. Ties go to the context declared first.
    """
    contexts = list(model_dists_by_context)
    per_context: Dict[str, List[float]] = {c: [] for c in contexts}
    best_counts: Dict[str, int] = {c: 0 for c in contexts}
    best_scores: List[float] = []
    skipped_contexts = 0

    for question in questions:
        if question.qid not in group_dists:
            continue
        target = group_dists[question.qid]
        best_context: Optional[str] = None
        best_score = -1.0
        for context in contexts:
            dist = model_dists_by_context[context].get(question.qid)
            if dist is None:
                skipped_contexts += 1
                continue
            score = question_alignment(dist, target, question)
            per_context[context].append(score)
            if score > best_score:
                best_context, best_score = context, score
        if best_context is None:
            continue
        best_counts[best_context] += 1
        best_scores.append(best_score)

    if skipped_contexts:
        logger.warning("Steerability skipped %d missing (question, context) cells", skipped_contexts)
    if not best_scores:
        raise EmptySetError("Steerability requested over an empty question set")

    return SteerabilityResult(
        score=float(np.mean(best_scores)),
        context_means={c: float(np.mean(v)) for c, v in per_context.items() if v},
        best_context_counts=best_counts,
        n_questions=len(best_scores),
        skipped_contexts=skipped_contexts,
    )


def contentiousness(question: Question, group_dists: Sequence[DistributionLike]) -> float:
    """Mean pairwise normalized WD between groups on one question."""
    if len(group_dists) < 2:
        raise EmptyCellError(
            f"Question {question.qid}: contentiousness needs at least two groups",
            qid=question.qid,
        )
    support = ordinal_support(question)
    scale = question.n_choices - 1
    distances = [
        wasserstein_1d(a, b, support) / scale
        for a, b in itertools.combinations(group_dists, 2)
    ]
    return float(np.mean(distances))


def select_contentious(
    questions: Sequence[Question],
    group_dists: Mapping[str, Sequence[DistributionLike]],
    k: int,
) -> List[Question]:
    """The ``k`` most contentious questions; ties keep question order."""
    scored = []
    for position, question in enumerate(questions):
        dists = group_dists.get(question.qid, ())
        if len(dists) < 2:
            continue
        scored.append((-contentiousness(question, dists), position, question))
    scored.sort(key=lambda item: (item[0], item[1]))
    chosen = sorted(scored[:k], key=lambda item: item[1])
    logger.info("Selected %d contentious questions out of %d scored", len(chosen), len(scored))
    return [question for _, _, question in chosen]
