"""
Metrics Pipeline Module

Environment-safety trace, collision-step count, goal-distance metrics and
their aggregation across seeds.
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Iterable, List, Sequence, Tuple

import numpy as np

from .errors import ContractViolation, LogParseError
from .safety_filters import FilterStatus
from .sim_core import EpisodeLog

logger = logging.getLogger(__name__)

# Numeric RunMetrics fields, in report order.
METRIC_FIELDS = (
    "collision_steps",
    "mean_goal_distance",
    "final_goal_distance",
    "min_env_distance",
    "no_solution_steps",
    "active_steps",
    "min_self_distance",
)


@dataclass(frozen=True)
class RunMetrics:
    """
    Summary of one episode.

    Attributes:
        filter: Filter tag
        attack: Attack family
        level: Attack level label
        seed: Run seed
        robot: Robot kind
        steps: Episode length
        collision_steps: Steps whose minimum clearance is strictly negative
        mean_goal_distance: Mean tracked-volume goal distance
        final_goal_distance: Goal distance at the last step
        min_env_distance: Smallest clearance over the whole episode
        no_solution_steps: Steps where the filter was infeasible
        active_steps: Steps where the filter changed the control
        min_self_distance: Smallest self clearance (nan without self pairs)
    """

    filter: str
    attack: str
    level: str
    seed: int
    robot: str
    steps: int
    collision_steps: int
    mean_goal_distance: float
    final_goal_distance: float
    min_env_distance: float
    no_solution_steps: int
    active_steps: int = 0
    min_self_distance: float = float("nan")

    @property
    def group_key(self) -> Tuple[str, str, str]:
        return (self.filter, self.attack, self.level)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunMetrics":
        values = dict(data)
        if values.get("min_self_distance") is None:
            values["min_self_distance"] = float("nan")
        return cls(**values)


@dataclass(frozen=True)
class GroupSummary:
    """Mean and sample standard deviation of every metric for one group."""

    filter: str
    attack: str
    level: str
    seeds: Tuple[int, ...]
    mean: Dict[str, float] = field(default_factory=dict)
    std: Dict[str, float] = field(default_factory=dict)

    @property
    def n_runs(self) -> int:
        return len(self.seeds)


@dataclass(frozen=True)
class AggregateSummary:
    """Per-(filter, attack, level) statistics across seeds."""

    groups: Dict[Tuple[str, str, str], GroupSummary]
    seeds: Tuple[int, ...]

    def __len__(self) -> int:
        return len(self.groups)


def min_env_trace(log: EpisodeLog) -> np.ndarray:
    """
    Closest robot-obstacle clearance at every step.

    Args:
        log: Episode log

    Returns:
        Array of length T; +inf at every step when the scene has no obstacles
    """
    block = np.asarray(log.dist_robot_to_env)
    T = log.steps
    width = None
    if "n_volumes" in log.metadata and "n_obstacles" in log.metadata:
        width = int(log.metadata["n_volumes"]) * int(log.metadata["n_obstacles"])
    if block.ndim != 2 or block.shape[0] != T or (width is not None and block.shape[1] != width):
        raise LogParseError(
            f"dist_robot_to_env has shape {block.shape}, expected ({T}, {width})"
        )
    if block.shape[1] == 0:
        return np.full(T, np.inf)
    return block.min(axis=1)


def collision_steps(trace: Sequence[float]) -> int:
    """
    Number of steps with strictly negative clearance.

    Args:
        trace: Per-step minimum clearance

    Returns:
        Collision step count; a clearance of exactly 0 is not a collision
    """
    values = np.asarray(trace, dtype=np.float64)
    if np.any(np.isnan(values)):
        raise ContractViolation("clearance trace contains nan")
    return int(np.count_nonzero(values < 0.0))


def mean_goal_distance(trace: Sequence[float]) -> float:
    """Arithmetic mean of the goal-distance trace."""
    values = np.asarray(trace, dtype=np.float64)
    if values.size == 0:
        raise ContractViolation("goal-distance trace is empty")
    return math.fsum(values.tolist()) / values.size


def summarize_run(log: EpisodeLog) -> RunMetrics:
    """
    Compute every RunMetrics field from a log alone.

    Args:
        log: Episode log (fresh or read back from an archive)

    Returns:
        RunMetrics
    """
    env = min_env_trace(log)
    meta = log.metadata
    status = np.asarray(log.filter_status_trace)
    self_block = np.asarray(log.self_dist_trace)
    min_self = float(self_block.min()) if self_block.size else float("nan")

    return RunMetrics(
        filter=str(meta.get("filter", "unknown")),
        attack=str(meta.get("attack", "none")),
        level=str(meta.get("level", "nominal")),
        seed=int(meta.get("seed", 0)),
        robot=str(meta.get("robot", "unknown")),
        steps=log.steps,
        collision_steps=collision_steps(env),
        mean_goal_distance=mean_goal_distance(log.dist_goal_arm),
        final_goal_distance=float(log.dist_goal_arm[-1]),
        min_env_distance=float(env.min()),
        no_solution_steps=int(np.count_nonzero(status == FilterStatus.NO_SOLUTION)),
        active_steps=int(np.count_nonzero(status == FilterStatus.ACTIVE)),
        min_self_distance=min_self,
    )


def aggregate_seeds(runs: Iterable[RunMetrics]) -> AggregateSummary:
    """
    Group runs by (filter, attack, level) and summarize each metric.

    Standard deviations use the n - 1 denominator; a single run has std 0.

    Args:
        runs: Completed runs

    Returns:
        AggregateSummary
    """
    runs = list(runs)
    if not runs:
        raise ContractViolation("cannot aggregate an empty set of runs")

    grouped: Dict[Tuple[str, str, str], List[RunMetrics]] = {}
    for run in runs:
        grouped.setdefault(run.group_key, []).append(run)

    groups = {}
    for key, members in grouped.items():
        members.sort(key=lambda r: r.seed)
        mean, std = {}, {}
        for name in METRIC_FIELDS:
            values = np.array([getattr(r, name) for r in members], dtype=np.float64)
            mean[name] = float(np.mean(values))
            std[name] = float(np.std(values, ddof=1)) if values.size > 1 else 0.0
        groups[key] = GroupSummary(key[0], key[1], key[2], tuple(r.seed for r in members), mean, std)

    seeds = tuple(sorted({r.seed for r in runs}))
    logger.debug("aggregated %d runs into %d groups", len(runs), len(groups))
    return AggregateSummary(groups, seeds)
