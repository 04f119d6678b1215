"""Turning top-k log-probs into opinion distributions."""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import logsumexp

from src.core.exceptions import AllMissingError
from src.human.distribution import OpinionDistribution, Provenance
from src.probe.client import ProbeResult
from src.probe.prompts import LABELS
from src.survey.schema import Question

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CompletedMap:
    """Label log-probs with absent labels filled in by an upper bound."""

    logprobs: Dict[str, float]
    bounded: Tuple[str, ...] = ()
    p_assigned: float = 1.0
    p_missing: float = 0.0
    double_counted: bool = False
    prompt_hash: Optional[str] = field(default=None, compare=False)


def bound_missing_options(probe_result: ProbeResult, expected_labels: Sequence[str]) -> CompletedMap:
    """Give each expected label the provider left out an upper-bound probability.

    The mass the provider did not hand out is ``p_missing = 1 - p_assigned``;
    an absent label cannot hold more than that, nor more than the least likely
    returned entry. If several labels are absent and their bounds together
    would exceed ``p_missing``, they split ``p_missing`` evenly instead and
    the map is flagged ``double_counted``.
    """
    present = {label: probe_result.logprobs[label] for label in expected_labels if label in probe_result.logprobs}
    if not present:
        raise AllMissingError(
            f"None of the labels {list(expected_labels)} were returned",
            prompt_hash=probe_result.prompt_hash,
        )

    raw = probe_result.token_logprobs or present
    returned = [math.exp(lp) for lp in raw.values()]
    p_assigned = math.fsum(returned)
    p_missing = max(0.0, 1.0 - p_assigned)
    p_min = min(returned)

    missing = [label for label in expected_labels if label not in present]
    completed = dict(present)
    double_counted = False
    if missing:
        bound = min(p_missing, p_min)
        if len(missing) > 1 and bound * len(missing) > p_missing:
            bound = p_missing / len(missing)
            double_counted = True
            logger.warning(
                "Prompt %s: %d labels missing, splitting %.4g of unassigned mass",
                probe_result.prompt_hash, len(missing), p_missing,
            )
        for label in missing:
            completed[label] = math.log(bound) if bound > 0 else -math.inf

    return CompletedMap(
        logprobs=completed,
        bounded=tuple(missing),
        p_assigned=p_assigned,
        p_missing=p_missing,
        double_counted=double_counted,
        prompt_hash=probe_result.prompt_hash,
    )


def extract_distribution(
    completed_map: Union[CompletedMap, Mapping[str, float]],
    question: Question,
    permutation: Optional[Sequence[int]] = None,
    presented_labels: Optional[Sequence[str]] = None,
    model_id: str = "",
    context: str = "NONE",
) -> OpinionDistribution:
    """Normalize option log-probs and undo the presentation order.

    ``presented_labels`` defaults to A, B, C, ... with the refusal label (if
    any) last, matching ``build_prompt``.
    """
    logprobs = completed_map.logprobs if isinstance(completed_map, CompletedMap) else completed_map
    n = question.n_choices
    perm = list(range(n)) if permutation is None else [int(i) for i in permutation]
    total_options = n + (1 if question.has_refusal else 0)
    labels = list(presented_labels) if presented_labels is not None else list(LABELS[:total_options])

    presented = np.array([logprobs.get(label, -math.inf) for label in labels[:n]], dtype=float)
    if not np.any(np.isfinite(presented)):
        raise AllMissingError(f"Question {question.qid}: no probability on any answer choice")

    choice_lse = logsumexp(presented)
    probs = np.zeros(n)
    probs[perm] = np.exp(presented - choice_lse)

    refusal_rate = None
    if question.has_refusal:
        refusal_lp = logprobs.get(labels[n], -math.inf)
        refusal_rate = float(np.exp(refusal_lp - logsumexp([choice_lse, refusal_lp])))

    return OpinionDistribution.from_masses(
        question.qid, probs, refusal_rate, Provenance.for_model(model_id, context)
    )


def total_assigned_mass(probe_result: ProbeResult, expected_labels: Sequence[str]) -> float:
    """Probability the provider put on the expected answer labels.

    Pass only the answer-choice labels; the refusal label is not counted.
    """
    mass = math.fsum(math.exp(probe_result.logprobs[label]) for label in expected_labels
                     if label in probe_result.logprobs)
    return min(mass, 1.0)
