"""Unit tests for UI utilities."""

import threading

import pytest

from src.utils.ui_utils import ColorFormatter, ProgressReporter, StatusReporter, format_score, format_table


@pytest.mark.unit
@pytest.mark.utils
class TestProgressReporter:
    """Test cases for ProgressReporter."""

    def test_init(self):
        """Test ProgressReporter initialization."""
        reporter = ProgressReporter()

        assert reporter.enabled is True
        assert reporter.processing is False
        assert reporter.get_progress_string() == "0/0"

    def test_progress_line(self, capsys):
        reporter = ProgressReporter()
        reporter.start("m1 default", 4)
        reporter.advance()
        reporter.advance(success=False)
        reporter.finish()
        out = capsys.readouterr().out

        assert "m1 default 2/4" in out
        assert "(1 failed)" in out
        assert reporter.processing is False

    def test_progress_bar_width(self):
        reporter = ProgressReporter(enabled=False)
        reporter.start("batch", 4)
        reporter.advance()
        assert reporter._get_progress_bar() == "#" * 7 + "-" * 21

    def test_disabled_reporter_is_silent(self, capsys):
        reporter = ProgressReporter(enabled=False)
        reporter.start("batch", 2)
        reporter.advance()
        reporter.finish()
        assert capsys.readouterr().out == ""

    def test_failures_are_logged(self, caplog):
        reporter = ProgressReporter(enabled=False)
        reporter.start("batch", 2)
        reporter.advance(success=False)
        reporter.finish()
        assert "1 of 2 probes failed" in caplog.text

    def test_advance_from_threads(self):
        reporter = ProgressReporter(enabled=False)
        reporter.start("batch", 400)
        threads = [threading.Thread(target=lambda: [reporter.advance() for _ in range(100)]) for _ in range(4)]
        for thread in threads:
            thread.start()
        for thread in threads:
            thread.join()
        assert reporter.done == 400

    def test_advance_before_start_is_ignored(self):
        reporter = ProgressReporter(enabled=False)
        reporter.advance()
        assert reporter.done == 0


@pytest.mark.unit
@pytest.mark.utils
class TestStatusReporter:
    """Test cases for StatusReporter."""

    def test_info_only_when_verbose(self, capsys):
        StatusReporter(verbose=False).info("quiet")
        StatusReporter(verbose=True).info("loud")
        out = capsys.readouterr().out

        assert "quiet" not in out
        assert "[INFO] loud" in out

    def test_warnings_and_errors_always_print(self, capsys):
        reporter = StatusReporter(verbose=False)
        reporter.warning("careful")
        reporter.error("broken")
        reporter.success("done")
        out = capsys.readouterr().out

        assert ColorFormatter.warning("    [WARN] careful") in out
        assert "[ERROR] broken" in out
        assert "[SUCCESS] done" in out


@pytest.mark.unit
@pytest.mark.utils
class TestFormatting:
    """Test cases for terminal formatting helpers."""

    def test_color_formatter(self):
        assert ColorFormatter.format("x", "red") == "\033[31mx\033[0m"
        assert ColorFormatter.format("x", "purple") == "x"

    def test_format_score(self):
        assert format_score(None) == "-"
        assert format_score(0.12345) == "0.123"

    def test_format_table(self):
        table = format_table(["model", "R"], [["uniform", "0.500"], ["m", "-"]])
        assert table.split("\n") == [
            "model    R    ",
            "-------  -----",
            "uniform  0.500",
            "m        -    ",
        ]
