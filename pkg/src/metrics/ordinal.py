"""Ordinal supports and the closed-form 1-D Wasserstein distance."""

from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np

from src.core.exceptions import SupportMismatchError
from src.human.distribution import OpinionDistribution
from src.survey.schema import OptionKind, Question

DistributionLike = Union[OpinionDistribution, Sequence[float], np.ndarray]


@dataclass(frozen=True)
class OrdinalSupport:
    """Real positions of a question's non-refusal options, in survey order."""

    qid: str
    values: Tuple[float, ...]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


def ordinal_support(question: Question) -> OrdinalSupport:
    """Map ordinal options to 1..K and a hedge option to the mean of 1..K."""
    k = question.n_ordinal
    hedge_value = (k + 1) / 2.0
    values = []
    rank = 0
    for option in question.choices:
        if option.kind is OptionKind.HEDGE:
            values.append(hedge_value)
        else:
            rank += 1
            values.append(float(rank))
    return OrdinalSupport(qid=question.qid, values=tuple(values))


def achievable_max_wd(question: Question) -> float:
    """Largest WD two distributions can reach on this question's support."""
    return float(question.n_ordinal - 1)


def as_probs(dist: DistributionLike) -> np.ndarray:
    if isinstance(dist, OpinionDistribution):
        return dist.as_array()
    return np.asarray(dist, dtype=float)


def wasserstein_1d(
    first: DistributionLike,
    second: DistributionLike,
    support: Union[OrdinalSupport, Sequence[float], np.ndarray],
) -> float:
    """1-Wasserstein distance between two distributions on a shared 1-D support.

    Uses the CDF form: sum over sorted support of |F1 - F2| times the gap to
    the next support value. Repeated support values contribute zero-width gaps.
    """
    p = as_probs(first)
    q = as_probs(second)
    values = support.as_array() if isinstance(support, OrdinalSupport) else np.asarray(support, dtype=float)

    if p.ndim != 1 or q.ndim != 1 or values.ndim != 1:
        raise SupportMismatchError("Distributions and support must be one-dimensional")
    if not (len(p) == len(q) == len(values)):
        raise SupportMismatchError(
            f"Length mismatch: {len(p)} and {len(q)} probabilities on {len(values)} support values"
        )
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(q)) and np.all(np.isfinite(values))):
        raise SupportMismatchError("Distributions and support must be finite")

    order = np.argsort(values, kind="stable")
    values = values[order]
    cdf_gap = np.cumsum(p[order]) - np.cumsum(q[order])
    deltas = np.diff(values)
    return float(np.sum(np.abs(cdf_gap[:-1]) * deltas))
