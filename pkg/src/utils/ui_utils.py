"""UI utility functions for terminal output and probe progress."""

import logging
import sys
import threading
from typing import Dict, Optional, Sequence


class ProgressReporter:
    """Single-line, fixed-width progress bar over a batch of probe jobs.

    Safe to advance from worker threads.
    """

    def __init__(self, enabled: bool = True):
        self.enabled = enabled
        self.label = ""
        self.done = 0
        self.failed = 0
        self.total = 0
        self.processing = False
        self.bar_width = 28  # Fixed width inside brackets
        self._lock = threading.Lock()
        self.logger = logging.getLogger(__name__)

    def start(self, label: str, total: int) -> None:
        """Start a batch of ``total`` jobs."""
        with self._lock:
            self.label = label
            self.total = total
            self.done = 0
            self.failed = 0
            self.processing = True
            self._show_progress()

    def advance(self, success: bool = True) -> None:
        """Record one finished job."""
        with self._lock:
            if not self.processing:
                return
            self.done += 1
            if not success:
                self.failed += 1
            self._show_progress()

    def finish(self) -> None:
        """Close the progress line."""
        with self._lock:
            if not self.processing:
                return
            self._show_progress()
            if self.enabled:
                sys.stdout.write("\n")
                sys.stdout.flush()
            if self.failed:
                self.logger.warning("%s: %d of %d probes failed", self.label, self.failed, self.total)
            self.processing = False

    def _show_progress(self) -> None:
        if not self.enabled or not self.processing:
            return
        sys.stdout.write("\r" + " " * 120 + "\r")
        line = f"[{self._get_progress_bar()}] {self.label} {self.get_progress_string()}"
        if self.failed:
            line += ColorFormatter.error(f" ({self.failed} failed)")
        sys.stdout.write(f"\r{line}")
        sys.stdout.flush()

    def _get_progress_bar(self) -> str:
        if self.total == 0:
            return "-" * self.bar_width
        completed_chars = int(self.bar_width * self.done / self.total)
        return "#" * completed_chars + "-" * (self.bar_width - completed_chars)

    def get_progress_string(self) -> str:
        return f"{self.done}/{self.total}"


class ColorFormatter:
    """Provides color formatting for terminal output."""

    COLORS = {
        'red': '\033[31m',
        'green': '\033[32m',
        'yellow': '\033[33m',
        'reset': '\033[0m',
    }

    @classmethod
    def format(cls, text: str, color: str) -> str:
        """Format text with specified color."""
        if color in cls.COLORS:
            return f"{cls.COLORS[color]}{text}{cls.COLORS['reset']}"
        return text

    @classmethod
    def error(cls, text: str) -> str:
        return cls.format(text, 'red')

    @classmethod
    def success(cls, text: str) -> str:
        return cls.format(text, 'green')

    @classmethod
    def warning(cls, text: str) -> str:
        return cls.format(text, 'yellow')


class StatusReporter:
    """Reports status messages with different levels."""

    def __init__(self, verbose: bool = False):
        self.verbose = verbose
        self.logger = logging.getLogger(__name__)

    def info(self, message: str, prefix: str = "[INFO]") -> None:
        if self.verbose:
            print(f"    {prefix} {message}")

    def warning(self, message: str, prefix: str = "[WARN]") -> None:
        print(ColorFormatter.warning(f"    {prefix} {message}"))

    def error(self, message: str, prefix: str = "[ERROR]") -> None:
        print(ColorFormatter.error(f"    {prefix} {message}"))

    def success(self, message: str, prefix: str = "[SUCCESS]") -> None:
        print(ColorFormatter.success(f"    {prefix} {message}"))


def format_score(value: Optional[float]) -> str:
    """Scores as shown on the terminal; unscorable cells print as '-'."""
    return "-" if value is None else f"{value:.3f}"


def format_table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    """Left-aligned plain-text table."""
    widths: Dict[int, int] = {i: len(h) for i, h in enumerate(header)}
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths.get(i, 0), len(cell))
    lines = ["  ".join(h.ljust(widths[i]) for i, h in enumerate(header))]
    lines.append("  ".join("-" * widths[i] for i in range(len(header))))
    for row in rows:
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)))
    return "\n".join(lines)
