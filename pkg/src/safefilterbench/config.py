"""
Config Module

Loading and validation of benchmark config files.

A config file starts with the header line ``safefilterbench-config 1``,
followed by ``key = value`` lines; ``#`` begins a comment, lists are comma
separated and ``obstacle = x, y, z, r`` may repeat.
"""

import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .attack_harness import (
    AttackFamily,
    AttackSpec,
    ExclusionBall,
    generate_crowding_scene,
    resolve_attack,
    schedule_levels,
)
from .errors import ConfigError, ContractViolation
from .safety_filters import FilterKind, FilterParams, FilterSpec
from .sim_core import SimConfig
from .utils import PathLike, wrap_os_error
from .world_model import (
    Obstacle,
    RobotKind,
    RobotModel,
    RobotState,
    bounding_radius,
    forward_kinematics,
)

logger = logging.getLogger(__name__)

CONFIG_HEADER = "safefilterbench-config"
CONFIG_VERSION = 1
SCENES = ("crowding", "explicit")

_FLOAT_KEYS = ("dt", "kp", "u_max", "start_clearance", "goal_clearance")
_INT_KEYS = ("steps", "n_obstacles", "jobs")
_VECTOR_KEYS = ("start", "goal", "workspace_min", "workspace_max")
_PARAM_KEYS = tuple(k for k in FilterParams.__dataclass_fields__ if k != "u_max")
KNOWN_KEYS = frozenset(
    _FLOAT_KEYS
    + _INT_KEYS
    + _VECTOR_KEYS
    + _PARAM_KEYS
    + ("robot", "seed", "seeds", "filters", "attack", "levels", "scene", "obstacle", "out")
)


@dataclass(frozen=True)
class BenchmarkConfig:
    """
    Everything needed to run a benchmark matrix.

    Attributes:
        robot: Robot kind
        start: Initial configuration (None for zeros)
        goal: Goal point for the tracked volume
        dt: Step length
        steps: Episode length
        kp: Nominal controller gain
        u_max: Control bound
        seeds: Seeds to run
        filters: Filters to run
        attack: Attack family
        levels: Schedule levels to run
        scene: "crowding" (sampled per seed) or "explicit"
        n_obstacles: Crowding obstacle count at the nominal level
        obstacles: Explicit scene
        workspace_min: Lower corner of the crowding box
        workspace_max: Upper corner of the crowding box
        start_clearance: Free margin kept around the start pose
        goal_clearance: Free margin kept around the goal
        filter_params: Shared filter parameters
        out_dir: Results root
        jobs: Worker count for sweeps (None for all cores)
    """

    robot: RobotKind = RobotKind.RIGID_CLUSTER
    start: Optional[Tuple[float, ...]] = None
    goal: Tuple[float, float, float] = (1.2, 0.0, 0.0)
    dt: float = 0.01
    steps: int = 5000
    kp: float = 2.0
    u_max: float = 1.0
    seeds: Tuple[int, ...] = (20, 21, 22)
    filters: Tuple[FilterKind, ...] = (
        FilterKind.RSSA,
        FilterKind.RSSS,
        FilterKind.SSA,
        FilterKind.CBF,
        FilterKind.PFM,
        FilterKind.SMA,
    )
    attack: AttackFamily = AttackFamily.NONE
    levels: Tuple[str, ...] = ()
    scene: str = "crowding"
    n_obstacles: int = 5
    obstacles: Tuple[Obstacle, ...] = ()
    workspace_min: Tuple[float, float, float] = (0.35, -0.3, -0.3)
    workspace_max: Tuple[float, float, float] = (0.85, 0.3, 0.3)
    start_clearance: float = 0.1
    goal_clearance: float = 0.05
    filter_params: FilterParams = FilterParams()
    out_dir: str = "results"
    jobs: Optional[int] = None

    def __post_init__(self):
        if not self.seeds:
            raise ConfigError("seed list is empty")
        if not self.filters:
            raise ConfigError("filter list is empty")
        if self.steps < 1:
            raise ConfigError(f"steps must be >= 1, got {self.steps}")
        if self.scene not in SCENES:
            raise ConfigError(f"scene must be one of {', '.join(SCENES)}, got {self.scene!r}")
        if self.scene == "explicit" and self.attack == AttackFamily.CROWDING:
            raise ConfigError("crowding attacks need scene = crowding")
        if self.jobs is not None and self.jobs < 1:
            raise ConfigError(f"jobs must be >= 1, got {self.jobs}")
        for level in self.levels:
            self.attack_for(level)
        try:
            self.sim_config(self.seeds[0])
            self.robot_model()
        except ContractViolation as err:
            raise ConfigError(str(err)) from err

    @property
    def level_names(self) -> Tuple[str, ...]:
        """Levels a sweep runs: the configured ones, else the full schedule."""
        if self.levels:
            return self.levels
        if self.attack == AttackFamily.NONE:
            return ("nominal",)
        return tuple(schedule_levels(self.attack).names)

    def attack_for(self, level: str) -> AttackSpec:
        try:
            return resolve_attack(self.attack, level, self.n_obstacles)
        except ContractViolation as err:
            raise ConfigError(str(err)) from err

    def sim_config(self, seed: int) -> SimConfig:
        return SimConfig(
            dt=self.dt,
            steps=self.steps,
            seed=seed,
            u_max=self.u_max,
            kp=self.kp,
            goal=self.goal,
            start=self.start,
        )

    def robot_model(self) -> RobotModel:
        if self.robot == RobotKind.PLANAR_ARM:
            return RobotModel.planar_arm()
        return RobotModel.rigid_cluster()

    def filter_spec(self, kind: FilterKind) -> FilterSpec:
        return FilterSpec(FilterKind(kind), self.filter_params.with_u_max(self.u_max))

    def exclusion_balls(self, model: RobotModel) -> List[ExclusionBall]:
        """Free space around every start-pose volume and around the goal."""
        centers, _ = forward_kinematics(model, RobotState.initial(model, self.start))
        balls = [
            ExclusionBall(tuple(c), v.radius + 0.1 + self.start_clearance)
            for c, v in zip(centers, model.volumes)
        ]
        balls.append(ExclusionBall(self.goal, bounding_radius(model) + 0.1 + self.goal_clearance))
        return balls

    def scene_for(self, seed: int, attack: AttackSpec) -> List[Obstacle]:
        """
        Obstacles for one run.

        Crowding scenes are resampled per seed; the crowding attack sets the count.
        """
        if self.scene == "explicit":
            return list(self.obstacles)
        n = int(attack.magnitude) if attack.family == AttackFamily.CROWDING else self.n_obstacles
        model = self.robot_model()
        return generate_crowding_scene(
            n, seed, (self.workspace_min, self.workspace_max), self.exclusion_balls(model)
        )

    def with_overrides(self, **overrides: Any) -> "BenchmarkConfig":
        """Copy with the non-None overrides applied."""
        values = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **values)


class ConfigHandler:
    """
    Parses and validates config text.

    Attributes:
        entries: Raw values by key, with the line each came from
        obstacles: Raw obstacle lines
    """

    def __init__(self, entries: Dict[str, Tuple[str, int]], obstacles: Sequence[Tuple[str, int]] = ()):
        self.entries = dict(entries)
        self.obstacles = list(obstacles)

    @classmethod
    def from_text(cls, text: str) -> "ConfigHandler":
        entries: Dict[str, Tuple[str, int]] = {}
        obstacles: List[Tuple[str, int]] = []
        header_seen = False
        for number, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if not header_seen:
                parts = line.split()
                if len(parts) != 2 or parts[0] != CONFIG_HEADER:
                    raise ConfigError(f"expected header '{CONFIG_HEADER} {CONFIG_VERSION}'", number)
                if parts[1] != str(CONFIG_VERSION):
                    raise ConfigError(f"unsupported config version {parts[1]}", number)
                header_seen = True
                continue
            if "=" not in line:
                raise ConfigError(f"expected 'key = value', got {line!r}", number)
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in KNOWN_KEYS:
                raise ConfigError(f"unknown key {key!r}", number)
            if key == "obstacle":
                obstacles.append((value, number))
            elif key in entries:
                raise ConfigError(f"duplicate key {key!r}", number)
            else:
                entries[key] = (value, number)
        if not header_seen:
            raise ConfigError(f"missing header '{CONFIG_HEADER} {CONFIG_VERSION}'")
        return cls(entries, obstacles)

    @classmethod
    def from_file(cls, config_path: PathLike) -> "ConfigHandler":
        """Load a config file."""
        with wrap_os_error(config_path, "read"):
            text = Path(config_path).read_text(encoding="utf-8")
        try:
            return cls.from_text(text)
        except ConfigError as err:
            raise ConfigError(f"{config_path}: {err}") from None

    def get_float(self, key: str) -> Optional[float]:
        if key not in self.entries:
            return None
        value, line = self.entries[key]
        try:
            result = float(value)
        except ValueError:
            raise ConfigError(f"{key} must be a number, got {value!r}", line) from None
        if not np.isfinite(result):
            raise ConfigError(f"{key} must be finite", line)
        return result

    def get_int(self, key: str) -> Optional[int]:
        if key not in self.entries:
            return None
        value, line = self.entries[key]
        try:
            return int(value)
        except ValueError:
            raise ConfigError(f"{key} must be an integer, got {value!r}", line) from None

    def get_list(self, key: str) -> Optional[List[str]]:
        if key not in self.entries:
            return None
        value, _ = self.entries[key]
        return [item.strip() for item in value.split(",") if item.strip()]

    def get_vector(self, key: str, length: Optional[int] = 3) -> Optional[Tuple[float, ...]]:
        items = self.get_list(key)
        if items is None:
            return None
        line = self.entries[key][1]
        try:
            vector = tuple(float(x) for x in items)
        except ValueError:
            raise ConfigError(f"{key} must be a list of numbers", line) from None
        if length is not None and len(vector) != length:
            raise ConfigError(f"{key} needs {length} values, got {len(vector)}", line)
        return vector

    def get_obstacles(self) -> Tuple[Obstacle, ...]:
        obstacles = []
        for value, line in self.obstacles:
            try:
                x, y, z, r = (float(v) for v in value.split(","))
                obstacles.append(Obstacle((x, y, z), r))
            except (ValueError, ContractViolation) as err:
                raise ConfigError(f"obstacle must be 'x, y, z, r' with r > 0 ({err})", line) from None
        return tuple(obstacles)

    def validate_config(self) -> bool:
        """
        Check that the entries build a valid BenchmarkConfig.

        Returns:
            True if valid, False otherwise
        """
        try:
            self.build()
        except ConfigError as err:
            logger.debug("config rejected: %s", err)
            return False
        return True

    def build(self, base: Optional[BenchmarkConfig] = None) -> BenchmarkConfig:
        """
        Apply the entries on top of a base config.

        Args:
            base: Defaults; BenchmarkConfig() when None

        Returns:
            Validated BenchmarkConfig
        """
        base = base or BenchmarkConfig()
        values: Dict[str, Any] = {}

        if "robot" in self.entries:
            values["robot"] = self._enum(RobotKind, "robot")
        for key in _FLOAT_KEYS:
            if key in self.entries:
                values[key] = self.get_float(key)
        for key in ("steps", "n_obstacles", "jobs"):
            if key in self.entries:
                values[key] = self.get_int(key)
        if "start" in self.entries:
            values["start"] = self.get_vector("start", length=None)
        for key in ("goal", "workspace_min", "workspace_max"):
            if key in self.entries:
                values[key] = self.get_vector(key)
        if "seed" in self.entries and "seeds" in self.entries:
            raise ConfigError("use either seed or seeds", self.entries["seeds"][1])
        if "seed" in self.entries:
            values["seeds"] = (self.get_int("seed"),)
        if "seeds" in self.entries:
            values["seeds"] = self._ints("seeds")
        if "filters" in self.entries:
            line = self.entries["filters"][1]
            try:
                values["filters"] = tuple(FilterKind.parse(n) for n in self.get_list("filters"))
            except ContractViolation as err:
                raise ConfigError(str(err), line) from None
        if "attack" in self.entries:
            values["attack"] = self._enum(AttackFamily, "attack")
        if "levels" in self.entries:
            values["levels"] = tuple(self.get_list("levels"))
        if "scene" in self.entries:
            values["scene"] = self.entries["scene"][0]
        if self.obstacles:
            values["obstacles"] = self.get_obstacles()
            values.setdefault("scene", "explicit")
        if "out" in self.entries:
            values["out_dir"] = self.entries["out"][0]

        params = {k: self.get_float(k) for k in _PARAM_KEYS if k in self.entries}
        if params:
            try:
                values["filter_params"] = replace(base.filter_params, **params)
            except ContractViolation as err:
                raise ConfigError(str(err)) from None

        return base.with_overrides(**values)

    def _ints(self, key: str) -> Tuple[int, ...]:
        line = self.entries[key][1]
        try:
            return tuple(int(x) for x in self.get_list(key))
        except ValueError:
            raise ConfigError(f"{key} must be a list of integers", line) from None

    def _enum(self, enum_type, key: str):
        value, line = self.entries[key]
        try:
            return enum_type(value.lower())
        except ValueError:
            valid = ", ".join(m.value for m in enum_type)
            raise ConfigError(f"{key} must be one of {valid}, got {value!r}", line) from None


def load_config(path: Optional[PathLike] = None) -> BenchmarkConfig:
    """Load a config file, or the built-in defaults when path is None."""
    if path is None:
        return BenchmarkConfig()
    handler = ConfigHandler.from_file(path)
    try:
        config = handler.build()
    except ConfigError as err:
        raise ConfigError(f"{path}: {err}") from None
    logger.debug("loaded config %s", path)
    return config
