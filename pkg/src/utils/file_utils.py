"""File utility functions for report output."""

import csv
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import orjson

from src.core.exceptions import ReportIOError


class FileManager:
    """Manages file operations for emitted reports."""

    @staticmethod
    def ensure_directory(path: Path) -> None:
        """Ensure directory exists."""
        try:
            path.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise ReportIOError(f"Cannot create directory {path}: {e}", path=str(path))

    @staticmethod
    def write_csv(file_path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
        """Write a CSV with ``\\n`` line endings so output is byte-stable across platforms."""
        FileManager.ensure_directory(file_path.parent)
        try:
            with open(file_path, "w", encoding="utf-8", newline="") as f:
                writer = csv.writer(f, lineterminator="\n")
                writer.writerow(header)
                writer.writerows(rows)
        except OSError as e:
            raise ReportIOError(f"Cannot write {file_path}: {e}", path=str(file_path))
        return file_path

    @staticmethod
    def write_json(file_path: Path, document: Mapping[str, Any]) -> Path:
        """Pretty, key-sorted JSON."""
        payload = orjson.dumps(document, option=orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS)
        FileManager.ensure_directory(file_path.parent)
        try:
            file_path.write_bytes(payload + b"\n")
        except OSError as e:
            raise ReportIOError(f"Cannot write {file_path}: {e}", path=str(file_path))
        return file_path
