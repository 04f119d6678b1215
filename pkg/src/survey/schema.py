"""Canonical survey schema: questions, ordered options, topics and demographics."""

import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from src.core.exceptions import InvariantError, SchemaError, UnknownTopicError

logger = logging.getLogger(__name__)


class OptionKind(str, Enum):
    """Role an answer option plays in distance computations."""

    ORDINAL = "ordinal"
    HEDGE = "hedge"
    REFUSAL = "refusal"


@dataclass(frozen=True)
class OptionSpec:
    """One answer choice of a question."""

    label: str
    text: str
    kind: OptionKind = OptionKind.ORDINAL


@dataclass(frozen=True)
class Question:
    """A multiple-choice survey item with options in presentation order."""

    qid: str
    text: str
    options: Tuple[OptionSpec, ...]
    topics: Tuple[str, ...]
    survey_id: str = ""

    @property
    def labels(self) -> Tuple[str, ...]:
        return tuple(option.label for option in self.options)

    @property
    def choices(self) -> Tuple[OptionSpec, ...]:
        """Non-refusal options in presentation order."""
        return tuple(o for o in self.options if o.kind is not OptionKind.REFUSAL)

    @property
    def refusal(self) -> Optional[OptionSpec]:
        for option in self.options:
            if option.kind is OptionKind.REFUSAL:
                return option
        return None

    @property
    def hedge(self) -> Optional[OptionSpec]:
        for option in self.options:
            if option.kind is OptionKind.HEDGE:
                return option
        return None

    @property
    def has_refusal(self) -> bool:
        return self.refusal is not None

    @property
    def n_choices(self) -> int:
        """N: number of answer choices excluding refusal."""
        return len(self.choices)

    @property
    def n_ordinal(self) -> int:
        """K: number of ordinal options."""
        return sum(1 for o in self.options if o.kind is OptionKind.ORDINAL)

    def choice_index(self, label: str) -> int:
        """Position of a non-refusal label among the choices."""
        for index, option in enumerate(self.choices):
            if option.label == label:
                return index
        raise KeyError(label)


@dataclass(frozen=True)
class GroupRef:
    """A demographic group within an attribute, e.g. POLPARTY:Democrat."""

    attribute: str
    group: str

    @property
    def key(self) -> str:
        return f"{self.attribute}:{self.group}"

    @classmethod
    def parse(cls, key: str) -> "GroupRef":
        attribute, sep, group = key.partition(":")
        if not sep or not attribute or not group:
            raise ValueError(f"Group reference must look like ATTRIBUTE:group, got {key!r}")
        return cls(attribute=attribute, group=group)

    def __str__(self) -> str:
        return self.key


@dataclass(frozen=True, eq=False)
class DemographicAttribute:
    """A demographic trait and its ordered groups."""

    name: str
    groups: Tuple[str, ...]
    question: Optional[str] = None
    description: Optional[str] = None
    phrasings: Mapping[str, str] = field(default_factory=dict)

    @property
    def noun(self) -> str:
        """Noun phrase used when the trait is described in free text."""
        return self.description or self.name.lower()

    def phrase(self, group: str) -> str:
        return self.phrasings.get(group, group)

    def refs(self) -> List[GroupRef]:
        return [GroupRef(self.name, group) for group in self.groups]


@dataclass(frozen=True, eq=False)
class Survey:
    """A loaded survey definition."""

    survey_id: str
    questions: Tuple[Question, ...]
    demographics: Tuple[DemographicAttribute, ...]
    taxonomy: Optional[Tuple[str, ...]] = None

    def question(self, qid: str) -> Question:
        for question in self.questions:
            if question.qid == qid:
                return question
        raise KeyError(qid)

    def attribute(self, name: str) -> DemographicAttribute:
        for attribute in self.demographics:
            if attribute.name == name:
                return attribute
        raise KeyError(name)

    def topics(self) -> Tuple[str, ...]:
        """Topic taxonomy: declared one, else every topic in use, first-seen order."""
        if self.taxonomy is not None:
            return self.taxonomy
        return _topics_in_use(self.questions)


# Document models (validation only; converted to the frozen types above)

class _OptionDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")

    label: str = Field(min_length=1)
    text: str
    kind: OptionKind = OptionKind.ORDINAL


class _QuestionDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")

    qid: str = Field(min_length=1)
    text: str = Field(min_length=1)
    topics: List[str]
    options: List[_OptionDoc]


class _AttributeDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = Field(min_length=1)
    groups: List[str]
    question: Optional[str] = None
    description: Optional[str] = None
    phrasings: Dict[str, str] = Field(default_factory=dict)


class _SurveyDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")

    survey_id: str = Field(min_length=1)
    questions: List[_QuestionDoc]
    demographics: List[_AttributeDoc] = Field(default_factory=list)
    taxonomy: Optional[List[str]] = None


def _topics_in_use(questions: Iterable[Question]) -> Tuple[str, ...]:
    seen: Dict[str, None] = {}
    for question in questions:
        for topic in question.topics:
            seen.setdefault(topic, None)
    return tuple(seen)


def _check_question(question: Question) -> None:
    """Enforce the option-structure invariants of one question."""
    qid = question.qid

    def fail(reason: str) -> None:
        raise InvariantError(f"Question {qid}: {reason}", qid=qid, reason=reason)

    labels = question.labels
    if len(set(labels)) != len(labels):
        fail("option labels are not unique")
    if not question.topics:
        fail("question has no topics")

    kinds = [option.kind for option in question.options]
    refusals = [i for i, kind in enumerate(kinds) if kind is OptionKind.REFUSAL]
    hedges = [i for i, kind in enumerate(kinds) if kind is OptionKind.HEDGE]
    if len(refusals) > 1:
        fail("more than one refusal option")
    if refusals and refusals[0] != len(kinds) - 1:
        fail("refusal option is not last")
    if len(hedges) > 1:
        fail("more than one hedge option")
    last_choice = len(kinds) - 1 - len(refusals)
    if hedges and hedges[0] != last_choice:
        fail("hedge option is not the last non-refusal option")
    if question.n_ordinal < 2:
        fail("fewer than two ordinal options")


def load_survey(document: Mapping[str, Any]) -> Survey:
    """Validate a survey schema document and build the immutable survey."""
    try:
        doc = _SurveyDoc.model_validate(document)
    except ValidationError as e:
        raise SchemaError(f"Malformed survey document: {e}") from e

    questions: List[Question] = []
    seen_qids = set()
    for qdoc in doc.questions:
        if qdoc.qid in seen_qids:
            raise InvariantError(f"Duplicate qid: {qdoc.qid}", qid=qdoc.qid, reason="duplicate qid")
        seen_qids.add(qdoc.qid)

        question = Question(
            qid=qdoc.qid,
            text=qdoc.text,
            options=tuple(OptionSpec(o.label, o.text, o.kind) for o in qdoc.options),
            topics=tuple(qdoc.topics),
            survey_id=doc.survey_id,
        )
        _check_question(question)
        questions.append(question)

    demographics: List[DemographicAttribute] = []
    seen_names = set()
    for adoc in doc.demographics:
        if adoc.name in seen_names:
            raise InvariantError(f"Duplicate demographic attribute: {adoc.name}", reason="duplicate attribute")
        seen_names.add(adoc.name)
        if len(set(adoc.groups)) != len(adoc.groups):
            raise InvariantError(
                f"Attribute {adoc.name}: group identifiers are not unique",
                reason="duplicate group",
            )
        unknown = set(adoc.phrasings) - set(adoc.groups)
        if unknown:
            raise InvariantError(
                f"Attribute {adoc.name}: phrasings for unknown groups {sorted(unknown)}",
                reason="unknown phrasing group",
            )
        demographics.append(DemographicAttribute(
            name=adoc.name,
            groups=tuple(adoc.groups),
            question=adoc.question,
            description=adoc.description,
            phrasings=dict(adoc.phrasings),
        ))

    taxonomy = tuple(doc.taxonomy) if doc.taxonomy is not None else None
    if taxonomy is not None:
        for question in questions:
            stray = [t for t in question.topics if t not in taxonomy]
            if stray:
                raise InvariantError(
                    f"Question {question.qid}: topics {stray} not in taxonomy",
                    qid=question.qid,
                    reason="topic outside taxonomy",
                )

    survey = Survey(
        survey_id=doc.survey_id,
        questions=tuple(questions),
        demographics=tuple(demographics),
        taxonomy=taxonomy,
    )
    logger.info(
        "Loaded survey %s: %d questions, %d demographic attributes",
        survey.survey_id, len(survey.questions), len(survey.demographics),
    )
    return survey


def load_survey_file(path: Path) -> Survey:
    """Load a survey document from a JSON or YAML file."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            document = yaml.safe_load(f)
    except OSError as e:
        raise SchemaError(f"Cannot read survey file {path}: {e}") from e
    except yaml.YAMLError as e:
        raise SchemaError(f"Survey file {path} is not valid JSON/YAML: {e}") from e
    if not isinstance(document, dict):
        raise SchemaError(f"Survey file {path} does not hold an object")
    return load_survey(document)


def dump_survey(survey: Survey) -> Dict[str, Any]:
    """Serialize a survey back into its schema document."""
    document: Dict[str, Any] = {
        "survey_id": survey.survey_id,
        "questions": [
            {
                "qid": q.qid,
                "text": q.text,
                "topics": list(q.topics),
                "options": [
                    {"label": o.label, "text": o.text, "kind": o.kind.value}
                    for o in q.options
                ],
            }
            for q in survey.questions
        ],
        "demographics": [],
    }
    for attribute in survey.demographics:
        entry: Dict[str, Any] = {"name": attribute.name, "groups": list(attribute.groups)}
        if attribute.question is not None:
            entry["question"] = attribute.question
        if attribute.description is not None:
            entry["description"] = attribute.description
        if attribute.phrasings:
            entry["phrasings"] = dict(attribute.phrasings)
        document["demographics"].append(entry)
    if survey.taxonomy is not None:
        document["taxonomy"] = list(survey.taxonomy)
    return document


def questions_for_topic(
    questions: Sequence[Question],
    topic: str,
    taxonomy: Optional[Iterable[str]] = None,
) -> List[Question]:
    """Q_T: the questions tagged with ``topic``, in input order.

    ``taxonomy`` defaults to the topics in use across ``questions``.
    """
    known = set(taxonomy) if taxonomy is not None else set(_topics_in_use(questions))
    if topic not in known:
        raise UnknownTopicError(topic)
    return [q for q in questions if topic in q.topics]
