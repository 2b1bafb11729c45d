#!/usr/bin/env python
"""
SafeFilterBench - Full Study Reproduction
Runs the baseline, noise, latency and crowding sweeps from configs/ and
parses each results tree into reports/<study>/:
          parsed_metrics.csv, summary.json, plot_data.csv, failures.json
"""

import logging
import os
import sys

# Get the directory of this script
SCRIPT_DIR = os.path.dirname(os.path.abspath(__file__))
PROJECT_ROOT = os.path.dirname(SCRIPT_DIR)

# Configuration
CONFIG_DIR = os.path.join(PROJECT_ROOT, "configs")
RESULTS_DIR = os.path.join(PROJECT_ROOT, "results")
REPORTS_DIR = os.path.join(PROJECT_ROOT, "reports")
STUDIES = ("baseline", "noise", "latency", "crowding")

# Add src to path for imports
sys.path.insert(0, os.path.join(PROJECT_ROOT, "src"))

from safefilterbench.cli import EXIT_OK, main as cli_main  # noqa: E402

logger = logging.getLogger("reproduce_study")


def run_study(name, jobs=None):
    """
    Sweep one study config and parse its archives.

    Args:
        name: Study name; configs/<name>.cfg must exist
        jobs: Worker count (None for all cores)

    Returns:
        Worst exit status of the sweep and parse steps
    """
    config_path = os.path.join(CONFIG_DIR, f"{name}.cfg")
    results = os.path.join(RESULTS_DIR, name)
    sweep_args = ["sweep", "--config", config_path, "--out", results]
    if jobs is not None:
        sweep_args += ["--jobs", str(jobs)]

    logger.info("study %s: sweeping into %s", name, results)
    sweep_status = cli_main(sweep_args)
    parse_status = cli_main(["parse", results, "--out", os.path.join(REPORTS_DIR, name)])
    return max(sweep_status, parse_status)


def main(argv=None):
    studies = list(argv) if argv else list(STUDIES)
    unknown = [s for s in studies if s not in STUDIES]
    if unknown:
        print(f"unknown studies: {', '.join(unknown)}; choose from {', '.join(STUDIES)}", file=sys.stderr)
        return 1

    status = EXIT_OK
    for name in studies:
        status = max(status, run_study(name))
    return status


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
