"""Unit tests for the survey schema."""

import copy

import pytest
import yaml
from hypothesis import given, settings
from hypothesis import strategies as st

from src.core.exceptions import InvariantError, SchemaError, UnknownTopicError
from src.survey.schema import (
    GroupRef,
    OptionKind,
    dump_survey,
    load_survey,
    load_survey_file,
    questions_for_topic,
)
from tests.conftest import make_question, survey_document


def _single_question(options, topics=("guns",)):
    return {
        "survey_id": "W26",
        "questions": [{"qid": "GUN1", "text": "Gun laws?", "topics": list(topics), "options": options}],
    }


@pytest.mark.unit
@pytest.mark.survey
class TestLoadSurvey:
    """Test cases for load_survey."""

    def test_ordinal_question_with_refusal(self):
        doc = _single_question([
            {"label": "A", "text": "More strict"},
            {"label": "B", "text": "About right"},
            {"label": "C", "text": "Less strict"},
            {"label": "D", "text": "Refused", "kind": "refusal"},
        ])
        survey = load_survey(doc)
        question = survey.question("GUN1")

        assert question.n_choices == 3
        assert question.has_refusal
        assert question.refusal.label == "D"
        assert question.labels == ("A", "B", "C", "D")
        assert question.survey_id == "W26"

    def test_hedge_option_is_kept_as_choice(self):
        doc = _single_question([
            {"label": "VG", "text": "Very good"},
            {"label": "VB", "text": "Very bad"},
            {"label": "N", "text": "Neither", "kind": "hedge"},
        ])
        question = load_survey(doc).question("GUN1")

        assert question.hedge.label == "N"
        assert question.n_choices == 3
        assert question.n_ordinal == 2

    def test_duplicate_labels_rejected(self):
        doc = _single_question([
            {"label": "A", "text": "Yes"},
            {"label": "A", "text": "No"},
        ])
        with pytest.raises(InvariantError) as info:
            load_survey(doc)
        assert info.value.qid == "GUN1"

    def test_refusal_must_be_last(self):
        doc = _single_question([
            {"label": "A", "text": "Yes"},
            {"label": "R", "text": "Refused", "kind": "refusal"},
            {"label": "B", "text": "No"},
        ])
        with pytest.raises(InvariantError, match="refusal option is not last"):
            load_survey(doc)

    def test_hedge_must_follow_ordinals(self):
        doc = _single_question([
            {"label": "N", "text": "Neither", "kind": "hedge"},
            {"label": "A", "text": "Yes"},
            {"label": "B", "text": "No"},
        ])
        with pytest.raises(InvariantError, match="hedge"):
            load_survey(doc)

    def test_needs_two_ordinal_options(self):
        doc = _single_question([
            {"label": "A", "text": "Yes"},
            {"label": "N", "text": "Neither", "kind": "hedge"},
        ])
        with pytest.raises(InvariantError, match="fewer than two ordinal"):
            load_survey(doc)

    def test_question_needs_topics(self):
        doc = _single_question([{"label": "A", "text": "Yes"}, {"label": "B", "text": "No"}], topics=())
        with pytest.raises(InvariantError, match="no topics"):
            load_survey(doc)

    def test_duplicate_qid_rejected(self, survey_doc):
        doc = copy.deepcopy(survey_doc)
        doc["questions"].append(copy.deepcopy(doc["questions"][0]))
        with pytest.raises(InvariantError, match="Duplicate qid"):
            load_survey(doc)

    def test_unknown_field_is_schema_error(self, survey_doc):
        doc = copy.deepcopy(survey_doc)
        doc["questions"][0]["wording"] = "extra"
        with pytest.raises(SchemaError):
            load_survey(doc)

    def test_unknown_option_kind_is_schema_error(self):
        doc = _single_question([{"label": "A", "text": "Yes", "kind": "nominal"}, {"label": "B", "text": "No"}])
        with pytest.raises(SchemaError):
            load_survey(doc)

    def test_topic_outside_taxonomy(self, survey_doc):
        doc = copy.deepcopy(survey_doc)
        doc["taxonomy"] = ["guns"]
        with pytest.raises(InvariantError, match="not in taxonomy"):
            load_survey(doc)

    def test_duplicate_group_rejected(self, survey_doc):
        doc = copy.deepcopy(survey_doc)
        doc["demographics"][0]["groups"] = ["Democrat", "Democrat"]
        with pytest.raises(InvariantError, match="not unique"):
            load_survey(doc)

    def test_phrasing_for_unknown_group_rejected(self, survey_doc):
        doc = copy.deepcopy(survey_doc)
        doc["demographics"][0]["phrasings"]["Independent"] = "an Independent"
        with pytest.raises(InvariantError, match="unknown groups"):
            load_survey(doc)

    def test_demographics_and_phrasing(self, survey_doc):
        survey = load_survey(survey_doc)
        party = survey.attribute("POLPARTY")

        assert party.groups == ("Democrat", "Republican")
        assert party.phrase("Democrat") == "a Democrat"
        assert party.noun == "political affiliation"
        assert survey.attribute("SEX").noun == "sex"
        assert survey.attribute("SEX").phrase("Male") == "Male"
        assert [r.key for r in party.refs()] == ["POLPARTY:Democrat", "POLPARTY:Republican"]

    def test_round_trip_through_document(self, survey_doc):
        survey = load_survey(survey_doc)
        again = load_survey(dump_survey(survey))

        assert [q.qid for q in again.questions] == [q.qid for q in survey.questions]
        assert again.questions[1].hedge.kind is OptionKind.HEDGE
        assert again.taxonomy == survey.taxonomy

    def test_load_survey_file(self, temp_dir, survey_doc):
        path = temp_dir / "survey.yaml"
        path.write_text(yaml.safe_dump(survey_doc))
        survey = load_survey_file(path)
        assert len(survey.questions) == 20

    def test_load_survey_file_missing(self, temp_dir):
        with pytest.raises(SchemaError, match="Cannot read"):
            load_survey_file(temp_dir / "absent.yaml")


@pytest.mark.unit
@pytest.mark.survey
class TestTopicsAndGroups:
    """Test cases for topic lookup and group references."""

    def test_questions_for_topic_keeps_order(self):
        questions = [make_question("Q1", topics=("guns",)), make_question("Q2", topics=("economy",)),
                     make_question("Q3", topics=("guns", "economy"))]
        assert [q.qid for q in questions_for_topic(questions, "guns")] == ["Q1", "Q3"]

    @settings(max_examples=100, deadline=None)
    @given(tags=st.lists(
        st.sets(st.sampled_from(["guns", "economy", "science", "family"]), min_size=1),
        min_size=1, max_size=30,
    ))
    def test_topic_subsets_cover_every_question(self, tags):
        questions = [make_question(f"Q{i}", topics=sorted(topics)) for i, topics in enumerate(tags)]
        in_use = {topic for topics in tags for topic in topics}
        subsets = {topic: questions_for_topic(questions, topic) for topic in in_use}

        covered = {q.qid for subset in subsets.values() for q in subset}
        assert covered == {q.qid for q in questions}
        for question in questions:
            assert {t for t, subset in subsets.items() if question in subset} == set(question.topics)

    def test_unknown_topic(self):
        with pytest.raises(UnknownTopicError):
            questions_for_topic([make_question()], "weather")

    def test_declared_but_unused_topic_is_empty(self):
        assert questions_for_topic([make_question()], "weather", taxonomy=["guns", "weather"]) == []

    def test_survey_topics_default_to_usage(self, survey_doc):
        doc = copy.deepcopy(survey_doc)
        del doc["taxonomy"]
        assert load_survey(doc).topics() == ("guns", "economy", "science", "family")

    def test_group_ref_parse(self):
        ref = GroupRef.parse("INCOME:$100,000 or more")
        assert ref.attribute == "INCOME"
        assert ref.group == "$100,000 or more"
        assert str(ref) == "INCOME:$100,000 or more"

    @pytest.mark.parametrize("key", ["Democrat", ":Democrat", "POLPARTY:"])
    def test_group_ref_parse_rejects(self, key):
        with pytest.raises(ValueError):
            GroupRef.parse(key)
