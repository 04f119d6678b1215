"""Prompt construction: steering contexts, instruction prefixes and option order."""

import re
import string
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import xxhash
from langchain_core.prompts import PromptTemplate

from src.core.config import SteeringTemplates
from src.core.exceptions import BadPermutationError, ProbeError
from src.survey.schema import DemographicAttribute, Question

LABELS = string.ascii_uppercase

QUESTION_TEMPLATE = PromptTemplate.from_template(
    "{context_block}{instruction_block}Question: {question}\n{options}\nAnswer:"
)

_OPTION_LINE = re.compile(r"^([A-Z])\. (.*)$")


@dataclass(frozen=True)
class SteeringContext:
    """Text prepended to a prompt to make the model emulate a group."""

    kind: str = "NONE"
    attribute: Optional[str] = None
    group: Optional[str] = None
    rendered_text: str = ""

    def __post_init__(self):
        if self.kind == "NONE" and self.rendered_text:
            raise ValueError("An empty steering context cannot carry text")
        if self.kind != "NONE" and not self.rendered_text:
            raise ValueError(f"{self.kind} steering context has no text")


NO_CONTEXT = SteeringContext()


@dataclass(frozen=True)
class PromptSpec:
    """A fully rendered prompt plus the bookkeeping needed to undo its layout."""

    qid: str
    context: SteeringContext
    instruction_variant: str
    permutation: Tuple[int, ...]
    text: str
    presented_labels: Tuple[str, ...]
    label_pairs: Tuple[Tuple[str, str], ...] = field(default=())
    refusal_label: Optional[str] = None

    @property
    def option_label_map(self) -> Dict[str, str]:
        """Presented label -> the option's survey label."""
        return dict(self.label_pairs)

    @property
    def choice_labels(self) -> Tuple[str, ...]:
        """Presented labels of the non-refusal options."""
        return tuple(label for label in self.presented_labels if label != self.refusal_label)

    @property
    def prompt_hash(self) -> str:
        return xxhash.xxh3_128_hexdigest(self.text.encode("utf-8"))


def _render(template: str, **values: str) -> str:
    return PromptTemplate.from_template(template).format(**values)


def render_context(
    kind: str,
    attribute: DemographicAttribute,
    group: str,
    templates: SteeringTemplates = SteeringTemplates(),
) -> SteeringContext:
    """Render a QA, BIO or PORTRAY steering context for one group."""
    if group not in attribute.groups:
        raise ProbeError(f"Group {group!r} is not part of attribute {attribute.name}")
    if kind == "QA":
        options = "\n".join(f"{LABELS[i]}. {g}" for i, g in enumerate(attribute.groups))
        text = _render(
            templates.qa,
            attribute_question=attribute.question or f"What is your {attribute.noun}?",
            options=options,
            answer=LABELS[attribute.groups.index(group)],
        )
    elif kind == "BIO":
        text = _render(templates.bio, attribute=attribute.noun, group=attribute.phrase(group))
    elif kind == "PORTRAY":
        text = _render(templates.portray, group=attribute.phrase(group))
    else:
        raise ProbeError(f"Unknown steering context kind: {kind!r}")
    return SteeringContext(kind=kind, attribute=attribute.name, group=group, rendered_text=text)


def _instruction(variant: str, templates: SteeringTemplates) -> str:
    if variant == "none":
        return ""
    if variant == "general":
        return templates.instruction_general
    if variant == "example":
        return templates.instruction_example
    raise ProbeError(f"Unknown instruction variant: {variant!r}")


def _check_permutation(permutation: Sequence[int], n: int) -> Tuple[int, ...]:
    perm = tuple(int(i) for i in permutation)
    if len(perm) != n or sorted(perm) != list(range(n)):
        raise BadPermutationError(f"{list(permutation)} is not a permutation of {n} options")
    return perm


def build_prompt(
    question: Question,
    context: SteeringContext = NO_CONTEXT,
    instruction_variant: str = "none",
    permutation: Optional[Sequence[int]] = None,
    templates: SteeringTemplates = SteeringTemplates(),
) -> PromptSpec:
    """Render a question into the canonical multiple-choice layout.

    ``permutation[i]`` is the survey position of the option shown i-th; the
    refusal option, if any, always comes last. Presented options are labeled
    A, B, C, ... in display order.
    """
    choices = question.choices
    perm = _check_permutation(range(len(choices)) if permutation is None else permutation, len(choices))

    presented = [choices[i] for i in perm]
    if question.refusal is not None:
        presented.append(question.refusal)
    if len(presented) > len(LABELS):
        raise ProbeError(f"Question {question.qid} has more options than available labels")
    labels = tuple(LABELS[: len(presented)])

    context_block = f"{context.rendered_text}\n\n" if context.rendered_text else ""
    instruction = _instruction(instruction_variant, templates)
    instruction_block = f"{instruction}\n\n" if instruction else ""
    text = QUESTION_TEMPLATE.format(
        context_block=context_block,
        instruction_block=instruction_block,
        question=question.text,
        options="\n".join(f"{label}. {option.text}" for label, option in zip(labels, presented)),
    )

    return PromptSpec(
        qid=question.qid,
        context=context,
        instruction_variant=instruction_variant,
        permutation=perm,
        text=text,
        presented_labels=labels,
        label_pairs=tuple((label, option.label) for label, option in zip(labels, presented)),
        refusal_label=labels[-1] if question.refusal is not None else None,
    )


def permutation_for(qid: str, n: int, seed: int) -> Tuple[int, ...]:
    """Seeded option order for one question, identical for every model and context."""
    rng = np.random.default_rng(xxhash.xxh64_intdigest(f"{seed}:{qid}"))
    return tuple(int(i) for i in rng.permutation(n))


def parse_prompt(text: str) -> Tuple[str, List[Tuple[str, str]]]:
    """Recover (question text, [(label, option text)]) from a rendered prompt.

    The last ``Question:`` line is the asked question; earlier ones belong to
    steering or instruction blocks.
    """
    lines = text.split("\n")
    starts = [i for i, line in enumerate(lines) if line.startswith("Question: ")]
    if not starts:
        raise ProbeError("Prompt has no question line")
    start = starts[-1]
    options = []
    for line in lines[start + 1:]:
        match = _OPTION_LINE.match(line)
        if not match:
            break
        options.append((match.group(1), match.group(2)))
    return lines[start][len("Question: "):], options
