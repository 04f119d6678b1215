"""Respondent microdata: weights, demographics and per-question answers."""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from src.core.exceptions import NegativeWeightError, SchemaError, UnknownLabelError
from src.survey.schema import DemographicAttribute, GroupRef, Question

logger = logging.getLogger(__name__)

RESPONDENT_COLUMN = "respondent_id"
WEIGHT_COLUMN = "weight"


class _MissingType:
    """Sentinel for a question the respondent was not asked or skipped."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "MISSING"

    def __bool__(self) -> bool:
        return False


MISSING = _MissingType()


@dataclass(frozen=True, eq=False)
class Respondent:
    """One row of the microdata table."""

    respondent_id: str
    weight: float
    demographics: Mapping[str, Optional[str]]
    answers: Mapping[str, Union[str, _MissingType]]


class ResponsePanel:
    """Respondents of one survey, held column-wise.

    The underlying frame has one row per respondent: ``respondent_id``,
    ``weight`` (float), one column per demographic attribute and one per qid.
    Missing answers are stored as ``None`` and surface as ``MISSING``.
    """

    def __init__(
        self,
        frame: pd.DataFrame,
        survey_id: str,
        attributes: Sequence[str],
        qids: Sequence[str],
    ):
        self._frame = frame.reset_index(drop=True)
        self.survey_id = survey_id
        self.attributes: Tuple[str, ...] = tuple(attributes)
        self.qids: Tuple[str, ...] = tuple(qids)

    def __len__(self) -> int:
        return len(self._frame)

    @property
    def frame(self) -> pd.DataFrame:
        """A copy of the underlying table."""
        return self._frame.copy()

    @property
    def weights(self) -> np.ndarray:
        return self._frame[WEIGHT_COLUMN].to_numpy(dtype=float)

    def answers(self, qid: str) -> pd.Series:
        if qid not in self.qids:
            raise KeyError(qid)
        return self._frame[qid]

    def group_mask(self, group: Optional[GroupRef]) -> np.ndarray:
        """Boolean mask selecting a group's respondents; ``None`` selects all."""
        if group is None:
            return np.ones(len(self._frame), dtype=bool)
        if group.attribute not in self.attributes:
            return np.zeros(len(self._frame), dtype=bool)
        return (self._frame[group.attribute] == group.group).to_numpy()

    @property
    def respondents(self) -> List[Respondent]:
        rows = []
        for record in self._frame.to_dict(orient="records"):
            rows.append(Respondent(
                respondent_id=record[RESPONDENT_COLUMN],
                weight=float(record[WEIGHT_COLUMN]),
                demographics={a: record[a] for a in self.attributes},
                answers={
                    q: (MISSING if record[q] is None else record[q])
                    for q in self.qids
                },
            ))
        return rows


def _parse_weight(respondent_id: str, raw: str) -> float:
    try:
        weight = float(raw)
    except (TypeError, ValueError):
        raise SchemaError(f"Weight {raw!r} of respondent {respondent_id} is not a number")
    if not math.isfinite(weight) or weight < 0:
        raise NegativeWeightError(respondent_id, weight)
    return weight


def load_responses(
    table: pd.DataFrame,
    questions: Sequence[Question],
    attributes: Sequence[DemographicAttribute] = (),
    survey_id: Optional[str] = None,
) -> ResponsePanel:
    """Validate a microdata table against its questions and build a panel."""
    table = table.astype(object).where(table.notna(), "")
    table = table.apply(lambda column: column.map(lambda v: str(v).strip()))

    required = [RESPONDENT_COLUMN, WEIGHT_COLUMN]
    required += [a.name for a in attributes]
    required += [q.qid for q in questions]
    absent = [c for c in required if c not in table.columns]
    if absent:
        raise SchemaError(f"Microdata table lacks columns: {absent}")

    ids = table[RESPONDENT_COLUMN]
    if (ids == "").any():
        raise SchemaError("Microdata table has rows without a respondent_id")
    duplicated = ids[ids.duplicated()].unique().tolist()
    if duplicated:
        raise SchemaError(f"Duplicate respondent ids: {duplicated[:5]}")

    frame = pd.DataFrame({RESPONDENT_COLUMN: ids.to_list()})
    frame[WEIGHT_COLUMN] = [
        _parse_weight(rid, raw) for rid, raw in zip(ids, table[WEIGHT_COLUMN])
    ]

    for attribute in attributes:
        values = table[attribute.name].map(lambda v: v or None)
        stray = sorted(set(values.dropna()) - set(attribute.groups))
        if stray:
            logger.warning(
                "Attribute %s has values outside its groups %s; those respondents join no group",
                attribute.name, stray[:5],
            )
        frame[attribute.name] = values.to_list()

    for question in questions:
        labels = set(question.labels)
        column: List[Optional[str]] = []
        for label in table[question.qid]:
            if label == "":
                column.append(None)
            elif label not in labels:
                raise UnknownLabelError(question.qid, label)
            else:
                column.append(label)
        frame[question.qid] = pd.Series(column, dtype=object)

    panel = ResponsePanel(
        frame,
        survey_id=survey_id or (questions[0].survey_id if questions else ""),
        attributes=[a.name for a in attributes],
        qids=[q.qid for q in questions],
    )
    logger.info("Loaded %d respondents for survey %s", len(panel), panel.survey_id)
    return panel


def load_responses_file(
    path: Path,
    questions: Sequence[Question],
    attributes: Sequence[DemographicAttribute] = (),
    survey_id: Optional[str] = None,
) -> ResponsePanel:
    """Read a CSV (or TSV, by extension) microdata file and build a panel."""
    sep = "\t" if Path(path).suffix.lower() in (".tsv", ".tab") else ","
    try:
        table = pd.read_csv(path, sep=sep, dtype=str, keep_default_na=False, encoding="utf-8")
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise SchemaError(f"Cannot read microdata file {path}: {e}") from e
    return load_responses(table, questions, attributes, survey_id=survey_id)
