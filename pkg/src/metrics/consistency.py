"""Which group a model leans toward, topic by topic."""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Sequence, Union

import numpy as np

from src.core.exceptions import DegenerateScoreError, EmptySetError, IncompleteMatrixError
from src.metrics.alignment import DistributionMap, representativeness
from src.survey.schema import Question

logger = logging.getLogger(__name__)

ScoreMatrix = Mapping[str, Mapping[str, float]]


@dataclass
class ConsistencyResult:
    """C, the overall best group and each topic's best group."""

    score: float
    best_group: str
    topic_best: Dict[str, str] = field(default_factory=dict)


def _as_matrix(per_topic_r: ScoreMatrix):
    groups = list(per_topic_r)
    if not groups:
        raise IncompleteMatrixError("Score matrix has no groups")
    topics = list(per_topic_r[groups[0]])
    if not topics:
        raise IncompleteMatrixError("Score matrix has no topics")
    matrix = np.empty((len(groups), len(topics)))
    for i, group in enumerate(groups):
        row = per_topic_r[group]
        if set(row) != set(topics):
            raise IncompleteMatrixError(f"Group {group} is not scored on every topic")
        for j, topic in enumerate(topics):
            value = row[topic]
            if value is None or not np.isfinite(value):
                raise IncompleteMatrixError(f"Group {group} has no score on topic {topic}")
            matrix[i, j] = value
    return groups, topics, matrix


def consistency(per_topic_r: ScoreMatrix) -> ConsistencyResult:
    """Fraction of topics whose best group is the model's overall best group.

    ``per_topic_r`` maps group -> topic -> R, groups in declaration order.
    Topics weigh equally; argmax ties go to the group declared first.
    """
    groups, topics, matrix = _as_matrix(per_topic_r)
    overall = matrix.mean(axis=1)
    best = groups[int(np.argmax(overall))]
    topic_best = {topic: groups[int(np.argmax(matrix[:, j]))] for j, topic in enumerate(topics)}
    hits = sum(1 for group in topic_best.values() if group == best)
    return ConsistencyResult(score=hits / len(topics), best_group=best, topic_best=topic_best)


def significance(per_group_r: Union[Mapping[str, float], Sequence[float]]) -> float:
    """Ratio of best to worst group representativeness on one topic."""
    values = np.asarray(list(per_group_r.values()) if isinstance(per_group_r, Mapping) else per_group_r,
                        dtype=float)
    if values.size == 0:
        raise EmptySetError("Significance needs at least one group score")
    if np.any(values <= 0) or not np.all(np.isfinite(values)):
        raise DegenerateScoreError(f"Significance needs positive scores, got {values.tolist()}")
    return float(values.max() / values.min())


def topic_representativeness(
    model_dists: DistributionMap,
    group_dists: Mapping[str, DistributionMap],
    questions_by_topic: Mapping[str, Sequence[Question]],
) -> Dict[str, Dict[str, float]]:
    """groups x topics matrix of R^G(Q_T).

    Topics where some group cannot be scored are dropped (with a warning) so
    the result is always complete.
    """
    matrix: Dict[str, Dict[str, float]] = {group: {} for group in group_dists}
    dropped: List[str] = []
    for topic, questions in questions_by_topic.items():
        row: Dict[str, float] = {}
        for group, dists in group_dists.items():
            try:
                row[group] = representativeness(model_dists, dists, questions)
            except EmptySetError:
                break
        if len(row) != len(group_dists):
            dropped.append(topic)
            continue
        for group, value in row.items():
            matrix[group][topic] = value
    if dropped:
        logger.warning("Dropped %d topics not scorable for every group: %s", len(dropped), dropped[:10])
    return matrix
