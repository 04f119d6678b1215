"""Machine-readable report tables and the run manifest."""

import logging
import platform
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from src.core.config import CONTEXT_KINDS
from src.human.distribution import OpinionDistribution, export_distributions
from src.metrics.metric_report import MetricReport
from src.utils.file_utils import FileManager

logger = logging.getLogger(__name__)

MANIFEST = "manifest.json"
ROBUSTNESS_DIR = "robustness"
TRACKED_PACKAGES = ("numpy", "scipy", "pandas", "pydantic", "langchain-core", "httpx", "tenacity", "orjson")


def fmt(value: Optional[float]) -> str:
    """Fixed six-decimal formatting; unscorable cells stay empty."""
    return "" if value is None else f"{value:.6f}"


@dataclass(frozen=True)
class BaselineRow:
    """One human-vs-human alignment value."""

    kind: str
    first: str
    second: str
    topic: Optional[str]
    value: Optional[float]


@dataclass(frozen=True)
class ProbeFailure:
    """One (model, question, run) probe that produced no distribution."""

    model: str
    qid: str
    run: str
    error: str
    message: str


@dataclass
class RunInfo:
    """Run-level context written next to the per-model tables."""

    config_hash: str = ""
    seed: int = 0
    template_version: str = ""
    steering_groups: List[str] = field(default_factory=list)
    report_groups: List[str] = field(default_factory=list)
    contexts: List[str] = field(default_factory=lambda: list(CONTEXT_KINDS))
    human_refusal: Dict[str, Optional[float]] = field(default_factory=dict)
    baselines: List[BaselineRow] = field(default_factory=list)
    human_distributions: List[OpinionDistribution] = field(default_factory=list)
    errors: List[ProbeFailure] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)


def _versions() -> Dict[str, str]:
    versions = {"python": platform.python_version()}
    for package in TRACKED_PACKAGES:
        try:
            versions[package] = metadata.version(package)
        except metadata.PackageNotFoundError:
            versions[package] = "not installed"
    from src import __version__
    versions["opinion-eval"] = __version__
    return versions


def _groups(reports: Sequence[MetricReport], info: RunInfo) -> List[str]:
    """Scored group columns: the run's report groups, else whatever the reports hold."""
    if info.report_groups:
        return list(info.report_groups)
    seen: Dict[str, None] = {}
    for report in reports:
        for key in report.group_r:
            seen.setdefault(key, None)
    return list(seen)


def _steering_groups(reports: Sequence[MetricReport], info: RunInfo) -> List[str]:
    if info.steering_groups:
        return list(info.steering_groups)
    seen: Dict[str, None] = {}
    for report in reports:
        for key in report.steering:
            seen.setdefault(key, None)
    return list(seen)


def _representativeness(reports: Sequence[MetricReport], groups: Sequence[str], path: Path) -> Path:
    rows = [[r.model_id, fmt(r.overall_r)] + [fmt(r.group_r.get(g)) for g in groups] for r in reports]
    return FileManager.write_csv(path, ["model", "overall", *groups], rows)


def _steerability(reports: Sequence[MetricReport], groups: Sequence[str], contexts: Sequence[str],
                  path: Path) -> Path:
    header = ["model", "group", "default_R", "S", *contexts, *[f"best_{c}" for c in contexts]]
    rows = []
    for report in reports:
        for group in groups:
            scores = report.steering.get(group)
            if scores is None:
                continue
            result = scores.result
            means = result.context_means if result else {}
            counts = result.best_context_counts if result else {}
            rows.append(
                [report.model_id, group, fmt(scores.default_r), fmt(result.score if result else None)]
                + [fmt(means.get(c)) for c in contexts]
                + [str(counts.get(c, 0)) for c in contexts]
            )
    return FileManager.write_csv(path, header, rows)


def _consistency(reports: Sequence[MetricReport], path: Path) -> Path:
    rows = [
        [r.model_id, attribute, fmt(result.score), result.best_group]
        for r in reports
        for attribute, result in r.consistency.items()
    ]
    return FileManager.write_csv(path, ["model", "attribute", "C", "G_best"], rows)


def _topic_best(reports: Sequence[MetricReport], path: Path) -> Path:
    rows = [
        [r.model_id, row.attribute, row.topic, row.group, fmt(row.alpha)]
        for r in reports
        for row in r.topic_best
    ]
    return FileManager.write_csv(path, ["model", "attribute", "topic", "group", "alpha"], rows)


def _refusal(reports: Sequence[MetricReport], info: RunInfo, path: Path) -> Path:
    rows = [[r.model_id, fmt(r.refusal_rate)] for r in reports]
    rows += [[source, fmt(rate)] for source, rate in info.human_refusal.items()]
    return FileManager.write_csv(path, ["source", "refusal_rate"], rows)


def _entropy(reports: Sequence[MetricReport], path: Path) -> Path:
    rows = [[r.model_id, fmt(r.mean_entropy)] for r in reports]
    return FileManager.write_csv(path, ["model", "mean_entropy"], rows)


def _diagnostics(reports: Sequence[MetricReport], path: Path) -> Path:
    header = ["model", "prompts", "failed", "bounded", "double_counted",
              "mass_mean", "mass_min", "mass_median", "mass_max"]
    rows = []
    for report in reports:
        d = report.diagnostics
        stats = d.mass_stats()
        rows.append([report.model_id, str(d.n_prompts), str(d.n_failed), str(d.n_bounded),
                     str(d.n_double_counted), fmt(stats["mean"]), fmt(stats["min"]),
                     fmt(stats["median"]), fmt(stats["max"])])
    return FileManager.write_csv(path, header, rows)


def _modal(reports: Sequence[MetricReport], groups: Sequence[str], path: Path) -> Path:
    rows = [[r.model_id] + [fmt(r.modal_r.get(g)) for g in groups] for r in reports]
    return FileManager.write_csv(path, ["model", *groups], rows)


def _baselines(info: RunInfo, path: Path) -> Path:
    rows = [[b.kind, b.first, b.second, b.topic or "", fmt(b.value)] for b in info.baselines]
    return FileManager.write_csv(path, ["kind", "first", "second", "topic", "R"], rows)


def _robustness(reports: Sequence[MetricReport], groups: Sequence[str], outdir: Path) -> List[Path]:
    variants: Dict[str, None] = {}
    for report in reports:
        for variant in report.variants:
            variants.setdefault(variant, None)
    if not variants:
        return []
    written = []
    delta_rows = []
    for variant in variants:
        rows = []
        for report in reports:
            scores = report.variants.get(variant)
            if scores is None:
                continue
            rows.append([report.model_id, fmt(scores.overall)] + [fmt(scores.groups.get(g)) for g in groups])
            delta_rows.append([report.model_id, variant, fmt(scores.standard_overall),
                               fmt(scores.overall), fmt(scores.delta)])
        written.append(FileManager.write_csv(
            outdir / ROBUSTNESS_DIR / variant / "representativeness.csv", ["model", "overall", *groups], rows))
    written.append(FileManager.write_csv(
        outdir / ROBUSTNESS_DIR / "robustness_delta.csv",
        ["model", "variant", "standard_R", "variant_R", "delta"], delta_rows))
    return written


def write_manifest(outdir: Path, files: Sequence[Path], info: RunInfo, n_models: int) -> Path:
    """Manifest: config hash, versions, seed and the files written (no timestamps)."""
    document: Dict[str, Any] = {
        "config_hash": info.config_hash,
        "seed": info.seed,
        "template_version": info.template_version,
        "models": n_models,
        "versions": _versions(),
        "files": sorted(str(Path(f).relative_to(outdir)) for f in files),
        "warnings": list(info.warnings),
        "errors": [
            {"model": e.model, "qid": e.qid, "run": e.run, "error": e.error, "message": e.message}
            for e in info.errors
        ],
    }
    return FileManager.write_json(outdir / MANIFEST, document)


def emit_tables(reports: Sequence[MetricReport], outdir: Path, info: Optional[RunInfo] = None) -> List[Path]:
    """Write every report table plus the manifest; returns the paths written."""
    info = info or RunInfo()
    outdir = Path(outdir)
    FileManager.ensure_directory(outdir)

    if not reports:
        logger.warning("No model reports to emit; writing the manifest only")
        info.warnings.append("no model reports")
        return [write_manifest(outdir, [], info, 0)]

    groups = _groups(reports, info)
    files = [
        _representativeness(reports, groups, outdir / "representativeness.csv"),
        _steerability(reports, _steering_groups(reports, info), info.contexts, outdir / "steerability.csv"),
        _consistency(reports, outdir / "consistency.csv"),
        _topic_best(reports, outdir / "topic_best_group.csv"),
        _refusal(reports, info, outdir / "refusal.csv"),
        _entropy(reports, outdir / "entropy.csv"),
        _diagnostics(reports, outdir / "diagnostics.csv"),
        _modal(reports, groups, outdir / "modal_representativeness.csv"),
    ]
    if info.baselines:
        files.append(_baselines(info, outdir / "human_baselines.csv"))
    if info.human_distributions:
        files.append(export_distributions(info.human_distributions, outdir / "human_distributions.csv"))
    files.extend(_robustness(reports, groups, outdir))

    files.append(write_manifest(outdir, files, info, len(reports)))
    logger.info("Wrote %d report files to %s", len(files), outdir)
    return files


def emit_human_tables(info: RunInfo, outdir: Path) -> List[Path]:
    """Human-only outputs for runs that stop before probing."""
    outdir = Path(outdir)
    files = [_baselines(info, outdir / "human_baselines.csv")]
    if info.human_distributions:
        files.append(export_distributions(info.human_distributions, outdir / "human_distributions.csv"))
    return files
