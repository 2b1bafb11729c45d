"""
Command-line interface.

    safefilterbench run    --config configs/baseline.cfg --filter cbf --seed 20
    safefilterbench sweep  --config configs/noise.cfg --jobs 4
    safefilterbench parse  results/noise --out reports/noise
"""

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from . import __version__
from .attack_harness import AttackFamily, AttackSpec
from .config import BenchmarkConfig, load_config
from .errors import ConfigError, ContractViolation, RunExistsError, SafeFilterBenchError
from .log_store import read_npz, run_archive_path, write_npz
from .metrics_pipeline import RunMetrics, aggregate_seeds, summarize_run
from .reports import ReportWriter, export_reports, write_failures
from .safety_filters import FilterKind
from .sim_core import EpisodeLog, run_episode
from .utils import ensure_directory, save_json_file

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def run_single(
    config: BenchmarkConfig, filter_kind: FilterKind, seed: int, attack: AttackSpec
) -> Tuple[EpisodeLog, RunMetrics]:
    """Simulate one (filter, attack level, seed) cell and compute its metrics."""
    model = config.robot_model()
    obstacles = config.scene_for(seed, attack)
    log = run_episode(
        model, obstacles, config.sim_config(seed), config.filter_spec(filter_kind), attack
    )
    return log, summarize_run(log)


def execute_run(
    config: BenchmarkConfig,
    filter_kind: FilterKind,
    level: str,
    seed: int,
    root: Path,
    overwrite: bool = False,
    reuse: bool = False,
) -> Dict[str, Any]:
    """
    Run one cell and write data.npz and metrics.json into its run directory.

    Args:
        config: Benchmark config
        filter_kind: Filter to run
        level: Attack level label
        seed: Run seed
        root: Results root
        overwrite: Replace an existing run
        reuse: Read an existing run back instead of refusing it

    Returns:
        RunMetrics as a dict
    """
    archive = run_archive_path(root, filter_kind.value, level, seed)
    if archive.exists() and not overwrite:
        if reuse:
            logger.info("reusing existing run %s", archive.parent)
            return summarize_run(read_npz(archive)).to_dict()
        raise RunExistsError(f"{archive.parent} already holds a run; pass --overwrite to replace it")

    attack = config.attack_for(level)
    log, metrics = run_single(config, filter_kind, seed, attack)
    ensure_directory(archive.parent)
    write_npz(log, archive)
    save_json_file(metrics.to_dict(), archive.parent / "metrics.json")
    return metrics.to_dict()


def _sweep_task(task: Tuple) -> Dict[str, Any]:
    """Run one sweep cell; failures come back as {"error": message}."""
    try:
        return {"metrics": execute_run(*task)}
    except Exception as err:  # recorded per run, the matrix continues
        return {"error": str(err)}


def cmd_run(
    config: BenchmarkConfig,
    filter_kind: Optional[FilterKind] = None,
    seed: Optional[int] = None,
    level: str = "nominal",
    overwrite: bool = False,
) -> int:
    """
    Execute one episode and write its artifacts.

    Returns:
        Exit status
    """
    filter_kind = filter_kind or config.filters[0]
    seed = config.seeds[0] if seed is None else seed
    metrics = execute_run(config, filter_kind, level, seed, Path(config.out_dir), overwrite)
    logger.info(
        "%s %s seed %d: %d collision steps, %d no-solution steps",
        filter_kind.value,
        level,
        seed,
        metrics["collision_steps"],
        metrics["no_solution_steps"],
    )
    return EXIT_OK


def cmd_sweep(config: BenchmarkConfig, jobs: Optional[int] = None, overwrite: bool = False) -> int:
    """
    Run the (filter x level x seed) matrix, then write the reports at the sweep root.

    Failed runs are recorded in failures.json and do not stop the matrix.

    Returns:
        Exit status
    """
    root = ensure_directory(config.out_dir)
    cells = [
        (kind, level, seed)
        for kind in config.filters
        for level in config.level_names
        for seed in config.seeds
    ]
    jobs = jobs or config.jobs or os.cpu_count() or 1
    logger.info("sweep of %d runs into %s with %d workers", len(cells), root, jobs)

    tasks = [(config, kind, level, seed, root, overwrite, True) for kind, level, seed in cells]
    outcomes: List[Dict[str, Any]] = []
    if jobs == 1:
        outcomes = [_sweep_task(task) for task in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_sweep_task, task) for task in tasks]
            for future in futures:
                try:
                    outcomes.append(future.result())
                except Exception as err:  # broken worker
                    outcomes.append({"error": str(err)})

    metrics, failures = [], []
    for (kind, level, seed), outcome in zip(cells, outcomes):
        if "error" in outcome:
            logger.error("run %s/%s/%d failed: %s", kind.value, level, seed, outcome["error"])
            failures.append(
                {"filter": kind.value, "level": level, "seed": seed, "error": outcome["error"]}
            )
        else:
            metrics.append(RunMetrics.from_dict(outcome["metrics"]))

    write_failures(failures, root / "failures.json")
    if metrics:
        export_reports(metrics, aggregate_seeds(metrics), root)
    return EXIT_RUNTIME if failures else EXIT_OK


def collect_archives(paths: Sequence[str]) -> List[Path]:
    """Expand directories to the archives below them, in sorted order."""
    archives: List[Path] = []
    for entry in paths:
        path = Path(entry)
        if path.is_dir():
            archives.extend(sorted(path.rglob("*.npz")))
        else:
            archives.append(path)
    return archives


def cmd_parse(paths: Sequence[str], out_dir: str = ".") -> int:
    """
    Recompute metrics from existing archives and write parsed_metrics.csv.

    Unreadable archives are listed in failures.json; the rest are still reported.

    Returns:
        Exit status
    """
    directory = ensure_directory(out_dir)
    metrics, failures = [], []
    for archive in collect_archives(paths):
        try:
            metrics.append(summarize_run(read_npz(archive)))
        except (SafeFilterBenchError, OSError) as err:
            logger.error("cannot parse %s: %s", archive, err)
            failures.append({"path": str(archive), "error": str(err)})

    writer = ReportWriter(metrics, aggregate_seeds(metrics) if metrics else None)
    writer.export_parsed_metrics_csv(directory / "parsed_metrics.csv")
    if metrics:
        writer.export_summary_json(directory / "summary.json")
    if failures:
        write_failures(failures, directory / "failures.json")
    logger.info("parsed %d archives, %d failures", len(metrics), len(failures))
    return EXIT_RUNTIME if failures else EXIT_OK


class BenchArgumentParser(argparse.ArgumentParser):
    """Argument parser that reports usage errors with exit status 1."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = BenchArgumentParser(
        prog="safefilterbench", description="Safety-filter robustness benchmark"
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="warnings only")
    sub = parser.add_subparsers(dest="command", parser_class=BenchArgumentParser)
    sub.required = True

    def add_common(p):
        p.add_argument("--config", help="benchmark config file")
        p.add_argument("--steps", type=int, help="episode length override")
        p.add_argument("--out", help="results directory")
        p.add_argument("--attack", choices=[a.value for a in AttackFamily])

    run = sub.add_parser("run", help="run one episode")
    add_common(run)
    run.add_argument("--filter", choices=[k.value for k in FilterKind])
    run.add_argument("--seed", type=int)
    run.add_argument("--level", choices=["nominal", "low", "medium", "high"], default="nominal")
    run.add_argument("--overwrite", action="store_true")

    sweep = sub.add_parser("sweep", help="run the filter x level x seed matrix")
    add_common(sweep)
    sweep.add_argument("--filter", action="append", choices=[k.value for k in FilterKind])
    sweep.add_argument("--seed", type=int, action="append")
    sweep.add_argument("--level", action="append", choices=["nominal", "low", "medium", "high"])
    sweep.add_argument("--jobs", type=int)
    sweep.add_argument("--overwrite", action="store_true")

    parse = sub.add_parser("parse", help="recompute metrics from archives")
    parse.add_argument("paths", nargs="+", help="archives or directories of archives")
    parse.add_argument("--out", default=".", help="report directory")
    return parser


def _configure_logging(args: argparse.Namespace) -> None:
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT)


def _resolve_config(args: argparse.Namespace) -> BenchmarkConfig:
    config = load_config(args.config)
    overrides: Dict[str, Any] = {"steps": args.steps, "out_dir": args.out}
    if args.attack is not None:
        overrides["attack"] = AttackFamily(args.attack)
    if args.command == "sweep":
        if args.filter:
            overrides["filters"] = tuple(FilterKind(f) for f in args.filter)
        if args.seed:
            overrides["seeds"] = tuple(args.seed)
        if args.level:
            overrides["levels"] = tuple(args.level)
        if args.jobs is not None:
            overrides["jobs"] = args.jobs
    return config.with_overrides(**overrides)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Entry point.

    Returns:
        0 on success, 1 on usage or config errors, 2 on runtime errors
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args)

    try:
        if args.command == "parse":
            return cmd_parse(args.paths, args.out)
        config = _resolve_config(args)
        if args.command == "run":
            filter_kind = FilterKind(args.filter) if args.filter else None
            config.attack_for(args.level)
            return cmd_run(config, filter_kind, args.seed, args.level, args.overwrite)
        return cmd_sweep(config, config.jobs, args.overwrite)
    except (ConfigError, ContractViolation, RunExistsError) as err:
        logger.error("%s", err)
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (SafeFilterBenchError, OSError) as err:
        logger.error("%s", err)
        print(f"error: {err}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
