"""
SafeFilterBench: a safety-filter robustness benchmark.

This module provides a deterministic kinematic simulator, QP-based and
closed-form safety filters, perception attacks (noise, latency, obstacle
crowding), NPZ episode logging and the metric and report pipeline used to
compare filters across seeds and attack intensities.
"""

__version__ = "0.1.0"
__author__ = "SafeFilterBench contributors"

from .attack_harness import AttackFamily, AttackSpec, generate_crowding_scene, schedule_levels
from .config import BenchmarkConfig, ConfigHandler, load_config
from .log_store import read_npz, write_npz
from .metrics_pipeline import RunMetrics, aggregate_seeds, summarize_run
from .reports import export_reports
from .safety_filters import FilterKind, FilterParams, FilterSpec, FilterStatus, apply_filter
from .sim_core import EpisodeLog, SimConfig, run_episode
from .world_model import Obstacle, RobotModel, RobotState, compute_pairwise_info

__all__ = [
    "AttackFamily",
    "AttackSpec",
    "BenchmarkConfig",
    "ConfigHandler",
    "EpisodeLog",
    "FilterKind",
    "FilterParams",
    "FilterSpec",
    "FilterStatus",
    "Obstacle",
    "RobotModel",
    "RobotState",
    "RunMetrics",
    "SimConfig",
    "aggregate_seeds",
    "apply_filter",
    "compute_pairwise_info",
    "export_reports",
    "generate_crowding_scene",
    "load_config",
    "read_npz",
    "run_episode",
    "schedule_levels",
    "summarize_run",
    "write_npz",
]
