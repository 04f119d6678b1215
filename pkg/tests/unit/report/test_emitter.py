"""Unit tests for report tables and the manifest."""

import csv

import orjson
import pytest

from src.metrics.alignment import SteerabilityResult
from src.metrics.consistency import ConsistencyResult
from src.metrics.metric_report import MetricReport, ProbeDiagnostics, SteeringScores, TopicBest, VariantScores
from src.report.emitter import (
    BaselineRow,
    ProbeFailure,
    RunInfo,
    emit_human_tables,
    emit_tables,
    fmt,
)
from tests.conftest import make_dist

DEM = "POLPARTY:Democrat"
REP = "POLPARTY:Republican"


def _rows(path):
    with open(path, newline="") as f:
        return list(csv.reader(f))


def _report(model_id, overall=0.8, **kwargs):
    return MetricReport(
        model_id=model_id,
        overall_r=overall,
        group_r={DEM: 0.9, REP: None},
        modal_r={DEM: 0.7, REP: 0.6},
        mean_entropy=0.5,
        refusal_rate=0.02,
        diagnostics=ProbeDiagnostics(n_prompts=3, n_bounded=1, masses=[0.5, 0.9, 1.0]),
        **kwargs,
    )


def _info(**overrides):
    values = dict(config_hash="abc", seed=7, template_version="1", steering_groups=[DEM, REP],
                  human_refusal={"human-overall": 0.03})
    values.update(overrides)
    return RunInfo(**values)


@pytest.mark.unit
@pytest.mark.report
class TestEmitTables:
    """Test cases for emit_tables."""

    def test_fixed_formatting(self):
        assert fmt(None) == ""
        assert fmt(1 / 3) == "0.333333"

    def test_two_models_two_rows(self, temp_dir):
        emit_tables([_report("a"), _report("b", overall=None)], temp_dir, _info())
        rows = _rows(temp_dir / "representativeness.csv")

        assert rows == [
            ["model", "overall", DEM, REP],
            ["a", "0.800000", "0.900000", ""],
            ["b", "", "0.900000", ""],
        ]

    def test_all_core_tables_written(self, temp_dir):
        files = emit_tables([_report("a")], temp_dir, _info())
        names = {path.name for path in files}

        assert {
            "representativeness.csv", "steerability.csv", "consistency.csv", "topic_best_group.csv",
            "refusal.csv", "entropy.csv", "diagnostics.csv", "modal_representativeness.csv", "manifest.json",
        } <= names
        assert _rows(temp_dir / "refusal.csv") == [
            ["source", "refusal_rate"], ["a", "0.020000"], ["human-overall", "0.030000"],
        ]
        assert _rows(temp_dir / "diagnostics.csv")[1] == [
            "a", "3", "0", "1", "0", "0.800000", "0.500000", "0.900000", "1.000000",
        ]

    def test_steering_and_consistency_rows(self, temp_dir):
        report = _report(
            "a",
            steering={REP: SteeringScores(0.4, SteerabilityResult(
                score=0.85, context_means={"QA": 0.8, "BIO": 0.7}, best_context_counts={"QA": 2, "BIO": 1}))},
            consistency={"POLPARTY": ConsistencyResult(0.5, DEM, {"guns": DEM, "economy": REP})},
            topic_best=[TopicBest("POLPARTY", "guns", DEM, 1.25), TopicBest("POLPARTY", "economy", REP, None)],
        )
        emit_tables([report], temp_dir, _info())

        assert _rows(temp_dir / "steerability.csv") == [
            ["model", "group", "default_R", "S", "QA", "BIO", "PORTRAY", "best_QA", "best_BIO", "best_PORTRAY"],
            ["a", REP, "0.400000", "0.850000", "0.800000", "0.700000", "", "2", "1", "0"],
        ]
        assert _rows(temp_dir / "consistency.csv")[1] == ["a", "POLPARTY", "0.500000", DEM]
        assert _rows(temp_dir / "topic_best_group.csv")[2] == ["a", "POLPARTY", "economy", REP, ""]

    def test_robustness_written_beside_standard_run(self, temp_dir):
        report = _report("a", variants={"permuted": VariantScores(0.75, {DEM: 0.8}, 0.8)})
        emit_tables([report], temp_dir, _info())

        assert _rows(temp_dir / "robustness" / "permuted" / "representativeness.csv")[1] == [
            "a", "0.750000", "0.800000", "",
        ]
        assert _rows(temp_dir / "robustness" / "robustness_delta.csv")[1] == [
            "a", "permuted", "0.800000", "0.750000", "-0.050000",
        ]
        assert _rows(temp_dir / "representativeness.csv")[1][1] == "0.800000"

    def test_human_tables(self, temp_dir):
        info = _info(baselines=[BaselineRow("group-vs-overall", DEM, "overall", None, 0.9)],
                     human_distributions=[make_dist("Q1", [0.5, 0.5])])
        emit_tables([_report("a")], temp_dir, info)

        assert _rows(temp_dir / "human_baselines.csv")[1] == ["group-vs-overall", DEM, "overall", "", "0.900000"]
        assert (temp_dir / "human_distributions.csv").exists()

    def test_emit_human_tables_only(self, temp_dir):
        files = emit_human_tables(_info(baselines=[BaselineRow("pair", DEM, REP, "guns", 0.4)]), temp_dir)
        assert [f.name for f in files] == ["human_baselines.csv"]

    def test_manifest(self, temp_dir):
        failure = ProbeFailure("m", "Q1", "default", "ProviderError", "boom")
        emit_tables([_report("a")], temp_dir, _info(errors=[failure]))
        manifest = orjson.loads((temp_dir / "manifest.json").read_bytes())

        assert manifest["config_hash"] == "abc"
        assert manifest["seed"] == 7
        assert manifest["models"] == 1
        assert "representativeness.csv" in manifest["files"]
        assert manifest["errors"] == [
            {"model": "m", "qid": "Q1", "run": "default", "error": "ProviderError", "message": "boom"}
        ]
        assert "numpy" in manifest["versions"]
        assert "timestamp" not in manifest

    def test_empty_model_list(self, temp_dir, caplog):
        files = emit_tables([], temp_dir, _info())
        manifest = orjson.loads((temp_dir / "manifest.json").read_bytes())

        assert [f.name for f in files] == ["manifest.json"]
        assert manifest["warnings"] == ["no model reports"]
        assert "manifest only" in caplog.text

    def test_rerun_is_byte_identical(self, temp_dir):
        first, second = temp_dir / "first", temp_dir / "second"
        emit_tables([_report("a"), _report("b")], first, _info())
        emit_tables([_report("a"), _report("b")], second, _info())

        for name in ("representativeness.csv", "diagnostics.csv", "manifest.json"):
            assert (first / name).read_bytes() == (second / name).read_bytes()

    def test_report_groups_widen_score_columns(self, temp_dir):
        report = _report(
            "a",
            steering={REP: SteeringScores(0.4, None)},
        )
        report.group_r["SEX:Female"] = 0.75
        emit_tables([report], temp_dir, _info(report_groups=[DEM, REP, "SEX:Female"], steering_groups=[REP]))

        assert _rows(temp_dir / "representativeness.csv")[0] == ["model", "overall", DEM, REP, "SEX:Female"]
        assert _rows(temp_dir / "representativeness.csv")[1][-1] == "0.750000"
        assert [row[1] for row in _rows(temp_dir / "steerability.csv")[1:]] == [REP]
