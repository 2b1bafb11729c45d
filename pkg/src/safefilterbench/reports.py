"""
Reports Module

CSV and JSON exports of run metrics and seed aggregates: parsed_metrics.csv,
summary.json and the long-format plot_data.csv.
"""

import csv
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from .errors import ContractViolation
from .metrics_pipeline import METRIC_FIELDS, AggregateSummary, GroupSummary, RunMetrics
from .utils import PathLike, ensure_directory, format_float, save_json_file, wrap_os_error

logger = logging.getLogger(__name__)

PARSED_METRICS_HEADER = [
    "filter",
    "attack",
    "level",
    "seed",
    "steps",
    "collision_steps",
    "mean_goal_distance",
    "final_goal_distance",
    "min_env_distance",
    "no_solution_steps",
]
PLOT_DATA_HEADER = ["level", "filter", "metric", "value"]
LEVEL_ORDER = ("nominal", "low", "medium", "high")


def level_rank(level: str) -> Tuple[int, str]:
    """Sort key placing schedule levels in intensity order, unknown labels last."""
    if level in LEVEL_ORDER:
        return (LEVEL_ORDER.index(level), level)
    return (len(LEVEL_ORDER), level)


def run_sort_key(run: RunMetrics) -> Tuple:
    return (run.filter, run.attack, level_rank(run.level), run.seed)


def _csv_value(value: Any) -> str:
    if isinstance(value, float):
        return format_float(value)
    return str(value)


class ReportWriter:
    """
    Writes the report files for one set of runs.

    Attributes:
        metrics: Per-run metrics, in canonical order
        summary: Seed aggregates of the same runs
    """

    def __init__(self, metrics: Sequence[RunMetrics], summary: Optional[AggregateSummary] = None):
        self.metrics = sorted(metrics, key=run_sort_key)
        self.summary = summary

    def _groups(self) -> List[GroupSummary]:
        if self.summary is None:
            return []
        return sorted(
            self.summary.groups.values(),
            key=lambda g: (g.filter, g.attack, level_rank(g.level)),
        )

    def export_parsed_metrics_csv(self, output_path: PathLike) -> None:
        """Export one row per run with 6-significant-digit floats."""
        with wrap_os_error(output_path, "write"):
            with open(output_path, "w", newline="", encoding="utf-8") as f:
                writer = csv.DictWriter(f, fieldnames=PARSED_METRICS_HEADER, lineterminator="\n")
                writer.writeheader()
                for run in self.metrics:
                    writer.writerow(
                        {name: _csv_value(getattr(run, name)) for name in PARSED_METRICS_HEADER}
                    )

    def summary_document(self) -> Dict[str, Any]:
        """JSON-ready view of the aggregate, one object per group."""
        groups = []
        for group in self._groups():
            groups.append(
                {
                    "filter": group.filter,
                    "attack": group.attack,
                    "level": group.level,
                    "n_runs": group.n_runs,
                    "seeds": list(group.seeds),
                    "metrics": {
                        name: {"mean": group.mean[name], "std": group.std[name]}
                        for name in METRIC_FIELDS
                    },
                }
            )
        seeds = list(self.summary.seeds) if self.summary is not None else []
        return {"seeds": seeds, "n_runs": len(self.metrics), "groups": groups}

    def export_summary_json(self, output_path: PathLike) -> None:
        """Export group means and standard deviations."""
        save_json_file(self.summary_document(), output_path)

    def export_plot_data_csv(self, output_path: PathLike) -> None:
        """Export group means as (level, filter, metric, value) rows."""
        rows = []
        for group in self._groups():
            for name in METRIC_FIELDS:
                rows.append((group.level, group.filter, name, group.mean[name]))
        rows.sort(key=lambda r: (level_rank(r[0]), r[1], r[2]))
        with wrap_os_error(output_path, "write"):
            with open(output_path, "w", newline="", encoding="utf-8") as f:
                writer = csv.writer(f, lineterminator="\n")
                writer.writerow(PLOT_DATA_HEADER)
                for level, filter_name, metric, value in rows:
                    writer.writerow([level, filter_name, metric, format_float(value)])


def export_reports(
    metrics: Sequence[RunMetrics], summary: AggregateSummary, out_dir: PathLike
) -> List[Path]:
    """
    Write parsed_metrics.csv, summary.json and plot_data.csv.

    Args:
        metrics: Per-run metrics
        summary: Aggregate of the same runs
        out_dir: Destination directory (created if missing)

    Returns:
        Paths written
    """
    if not metrics:
        raise ContractViolation("no run metrics to report")
    directory = ensure_directory(out_dir)
    writer = ReportWriter(metrics, summary)
    paths = [
        directory / "parsed_metrics.csv",
        directory / "summary.json",
        directory / "plot_data.csv",
    ]
    writer.export_parsed_metrics_csv(paths[0])
    writer.export_summary_json(paths[1])
    writer.export_plot_data_csv(paths[2])
    logger.info("wrote reports for %d runs to %s", len(writer.metrics), directory)
    return paths


def write_failures(failures: Sequence[Dict[str, Any]], path: PathLike) -> None:
    """Record runs or archives that could not be processed."""
    save_json_file(list(failures), path)
