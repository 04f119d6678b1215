"""Opinion distributions shared by human aggregation, probing and metrics."""

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

from src.survey.schema import GroupRef

SUM_TOLERANCE = 1e-9

HUMAN_OVERALL = "human-overall"
HUMAN_GROUP = "human-group"
MODEL = "model"


@dataclass(frozen=True)
class Provenance:
    """Where a distribution came from."""

    kind: str
    group: Optional[GroupRef] = None
    model_id: Optional[str] = None
    context: Optional[str] = None

    @classmethod
    def overall(cls) -> "Provenance":
        return cls(HUMAN_OVERALL)

    @classmethod
    def for_group(cls, group: GroupRef) -> "Provenance":
        return cls(HUMAN_GROUP, group=group)

    @classmethod
    def for_model(cls, model_id: str, context: str = "NONE") -> "Provenance":
        return cls(MODEL, model_id=model_id, context=context)

    def __str__(self) -> str:
        if self.kind == HUMAN_GROUP:
            return f"{HUMAN_GROUP}({self.group})"
        if self.kind == MODEL:
            return f"{MODEL}({self.model_id}, {self.context})"
        return self.kind


@dataclass(frozen=True)
class OpinionDistribution:
    """Probabilities over a question's non-refusal options, plus refusal mass.

    ``refusal_rate`` is ``None`` (undefined) when the question offers no
    refusal option.
    """

    qid: str
    probs: Tuple[float, ...]
    refusal_rate: Optional[float]
    provenance: Provenance

    def __post_init__(self):
        probs = tuple(float(p) for p in self.probs)
        object.__setattr__(self, "probs", probs)
        if len(probs) < 2:
            raise ValueError(f"{self.qid}: a distribution needs at least two options")
        if any(not (0.0 <= p <= 1.0 + SUM_TOLERANCE) for p in probs):
            raise ValueError(f"{self.qid}: probabilities outside [0, 1]: {probs}")
        if abs(math.fsum(probs) - 1.0) > SUM_TOLERANCE:
            raise ValueError(f"{self.qid}: probabilities sum to {math.fsum(probs)!r}")
        if self.refusal_rate is not None and not (0.0 <= self.refusal_rate <= 1.0):
            raise ValueError(f"{self.qid}: refusal rate {self.refusal_rate!r} outside [0, 1]")

    @classmethod
    def from_masses(
        cls,
        qid: str,
        masses: Sequence[float],
        refusal_rate: Optional[float],
        provenance: Provenance,
    ) -> "OpinionDistribution":
        """Normalize non-negative masses into a distribution."""
        values = np.asarray(masses, dtype=float)
        total = values.sum()
        if not total > 0:
            raise ValueError(f"{qid}: cannot normalize zero mass")
        return cls(qid, tuple((values / total).tolist()), refusal_rate, provenance)

    @property
    def n_choices(self) -> int:
        return len(self.probs)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.probs, dtype=float)


def export_distributions(distributions: Iterable[OpinionDistribution], path: Path) -> Path:
    """Write distributions as ``qid, provenance, refusal_rate, p_1..p_N`` rows.

    Rows are padded to the widest question; undefined refusal is left empty.
    """
    rows = list(distributions)
    width = max((d.n_choices for d in rows), default=0)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["qid", "provenance", "refusal_rate"] + [f"p_{i + 1}" for i in range(width)])
        for dist in rows:
            refusal = "" if dist.refusal_rate is None else f"{dist.refusal_rate:.6f}"
            probs = [f"{p:.6f}" for p in dist.probs]
            writer.writerow([dist.qid, str(dist.provenance), refusal] + probs + [""] * (width - len(probs)))
    return path
