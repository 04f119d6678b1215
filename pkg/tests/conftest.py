"""Test configuration and fixtures for pytest."""

import logging
import shutil
import signal
import tempfile
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
import pytest
import yaml

from src.human.distribution import OpinionDistribution, Provenance
from src.survey.schema import OptionKind, OptionSpec, Question


def make_question(
    qid: str = "Q1",
    n_ordinal: int = 3,
    hedge: bool = False,
    refusal: bool = False,
    topics: Sequence[str] = ("guns",),
    text: Optional[str] = None,
) -> Question:
    """Question with ``n_ordinal`` ordinal options and optional hedge/refusal."""
    options = [OptionSpec(chr(ord("A") + i), f"{qid} option {i + 1}") for i in range(n_ordinal)]
    if hedge:
        options.append(OptionSpec(chr(ord("A") + len(options)), f"{qid} neither", OptionKind.HEDGE))
    if refusal:
        options.append(OptionSpec(chr(ord("A") + len(options)), "Refused", OptionKind.REFUSAL))
    return Question(qid=qid, text=text or f"Question {qid}?", options=tuple(options), topics=tuple(topics))


def make_dist(qid: str, probs: Sequence[float], refusal_rate: Optional[float] = None,
              provenance: Optional[Provenance] = None) -> OpinionDistribution:
    return OpinionDistribution(qid, tuple(probs), refusal_rate, provenance or Provenance.overall())


def survey_document(n_questions: int = 20) -> Dict[str, Any]:
    """Schema document with mixed option structures and two demographic attributes."""
    topics = ["guns", "economy", "science", "family"]
    questions = []
    for i in range(n_questions):
        options: List[Dict[str, str]] = [
            {"label": "1", "text": f"Strongly agree with item {i}"},
            {"label": "2", "text": f"Somewhat agree with item {i}"},
            {"label": "3", "text": f"Disagree with item {i}"},
        ]
        if i % 3 == 1:
            options.append({"label": "4", "text": f"Neither for item {i}", "kind": "hedge"})
        if i % 2 == 0:
            options.append({"label": "99", "text": "Refused", "kind": "refusal"})
        questions.append({
            "qid": f"Q{i:02d}",
            "text": f"How do you feel about policy number {i}?",
            "topics": [topics[i % len(topics)]],
            "options": options,
        })
    return {
        "survey_id": "W92",
        "questions": questions,
        "demographics": [
            {
                "name": "POLPARTY",
                "groups": ["Democrat", "Republican"],
                "question": "In politics today, do you consider yourself a",
                "description": "political affiliation",
                "phrasings": {"Democrat": "a Democrat", "Republican": "a Republican"},
            },
            {
                "name": "SEX",
                "groups": ["Male", "Female"],
                "question": "What is your sex?",
            },
        ],
        "taxonomy": topics,
    }


def microdata_frame(document: Dict[str, Any], n_respondents: int = 80, seed: int = 0) -> pd.DataFrame:
    """Weighted answers where Democrats lean to the first option and Republicans to the last."""
    rng = np.random.default_rng(seed)
    rows = []
    for r in range(n_respondents):
        party = "Democrat" if r % 2 == 0 else "Republican"
        row = {
            "respondent_id": f"R{r:03d}",
            "weight": f"{rng.uniform(0.5, 2.0):.4f}",
            "POLPARTY": party,
            "SEX": "Male" if (r // 2) % 2 == 0 else "Female",
        }
        for q in document["questions"]:
            choices = [o["label"] for o in q["options"] if o.get("kind") != "refusal"]
            refusal = [o["label"] for o in q["options"] if o.get("kind") == "refusal"]
            lean = np.linspace(3.0, 1.0, len(choices)) if party == "Democrat" else np.linspace(1.0, 3.0, len(choices))
            if r < 4:
                # First respondents of every party and sex answer, so no group cell is empty.
                row[q["qid"]] = choices[0] if party == "Democrat" else choices[-1]
            elif refusal and rng.uniform() < 0.05:
                row[q["qid"]] = refusal[0]
            elif rng.uniform() < 0.03:
                row[q["qid"]] = ""
            else:
                row[q["qid"]] = str(rng.choice(choices, p=lean / lean.sum()))
        rows.append(row)
    return pd.DataFrame(rows)


def write_fixture_survey(directory: Path, n_questions: int = 20, n_respondents: int = 80, seed: int = 0):
    """Write schema (YAML) and microdata (CSV); returns both paths."""
    document = survey_document(n_questions)
    schema_path = directory / "survey.yaml"
    schema_path.write_text(yaml.safe_dump(document, sort_keys=False), encoding="utf-8")
    microdata_path = directory / "responses.csv"
    microdata_frame(document, n_respondents, seed).to_csv(microdata_path, index=False)
    return schema_path, microdata_path


@pytest.fixture
def temp_dir():
    """Create a temporary directory for tests."""
    temp_path = Path(tempfile.mkdtemp())
    yield temp_path
    shutil.rmtree(temp_path, ignore_errors=True)


@pytest.fixture
def question():
    return make_question()


@pytest.fixture
def survey_doc():
    return survey_document()


@pytest.fixture
def fixture_files(temp_dir):
    return write_fixture_survey(temp_dir)


@pytest.fixture
def cli_state():
    """Restore the logging and signal setup the CLI replaces."""
    root = logging.getLogger()
    handlers, level = list(root.handlers), root.level
    sigint, sigterm = signal.getsignal(signal.SIGINT), signal.getsignal(signal.SIGTERM)
    yield
    root.handlers[:] = handlers
    root.setLevel(level)
    signal.signal(signal.SIGINT, sigint)
    signal.signal(signal.SIGTERM, sigterm)


def write_run_config(directory: Path, schema: Path, microdata: Path, **overrides) -> Path:
    """YAML run config over the fixture survey with the offline providers."""
    document: Dict[str, Any] = {
        "surveys": [{"schema": schema.name, "microdata": microdata.name}],
        "models": [
            {"name": "uniform", "provider": "uniform"},
            {"name": "dem-mimic", "provider": "group_mimic", "params": {"group": "POLPARTY:Democrat"}},
        ],
        "steering_groups": ["POLPARTY:Democrat", "POLPARTY:Republican"],
        "output_dir": "reports",
    }
    document.update(overrides)
    path = directory / "eval.yaml"
    path.write_text(yaml.safe_dump(document, sort_keys=False), encoding="utf-8")
    return path
