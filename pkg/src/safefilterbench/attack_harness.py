"""
Attack Harness Module

Perception-level attacks composed around compute_pairwise_info, the obstacle
crowding scene generator and the intensity schedules used by sweeps.
"""

import enum
import logging
import zlib
from collections import deque
from dataclasses import dataclass
from typing import Deque, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ContractViolation, SceneGenerationError
from .world_model import (
    Kinematics,
    Obstacle,
    PairwiseInfo,
    RobotModel,
    RobotState,
    compute_pairwise_info,
)

logger = logging.getLogger(__name__)

CROWDING_RADIUS = 0.1
MAX_SAMPLING_ATTEMPTS = 100_000
LEVEL_NAMES = ("nominal", "low", "medium", "high")


class AttackFamily(str, enum.Enum):
    """Attack tags as they appear in configs and flags."""

    NONE = "none"
    NOISE = "noise"
    LATENCY = "latency"
    CROWDING = "crowding"


@dataclass(frozen=True)
class AttackSpec:
    """
    One perception attack.

    Attributes:
        family: Attack tag
        magnitude: sigma in meters (noise), delay in steps (latency) or
            obstacle count (crowding); 0 for none
        level: Schedule level label this attack was resolved from
    """

    family: AttackFamily = AttackFamily.NONE
    magnitude: float = 0.0
    level: str = "nominal"

    def __post_init__(self):
        object.__setattr__(self, "family", AttackFamily(self.family))
        m = self.magnitude
        if not np.isfinite(m) or m < 0:
            raise ContractViolation(f"attack magnitude must be finite and >= 0, got {m}")
        if self.family in (AttackFamily.LATENCY, AttackFamily.CROWDING) and m != int(m):
            raise ContractViolation(f"{self.family.value} magnitude must be an integer, got {m}")
        if self.family == AttackFamily.CROWDING and m < 1:
            raise ContractViolation("crowding needs at least one obstacle")

    @classmethod
    def nominal(cls) -> "AttackSpec":
        return cls()

    @classmethod
    def noise(cls, sigma: float, level: str = "nominal") -> "AttackSpec":
        return cls(AttackFamily.NOISE, float(sigma), level)

    @classmethod
    def latency(cls, delay: int, level: str = "nominal") -> "AttackSpec":
        return cls(AttackFamily.LATENCY, float(delay), level)

    @classmethod
    def crowding(cls, n_obstacles: int, level: str = "nominal") -> "AttackSpec":
        return cls(AttackFamily.CROWDING, float(n_obstacles), level)

    @property
    def sigma(self) -> float:
        return self.magnitude if self.family == AttackFamily.NOISE else 0.0

    @property
    def delay(self) -> int:
        return int(self.magnitude) if self.family == AttackFamily.LATENCY else 0

    @property
    def label(self) -> str:
        """Stable text form, also used to derive the episode RNG."""
        if self.family == AttackFamily.NONE:
            return "none"
        return f"{self.family.value}:{self.magnitude:g}"

    def to_dict(self) -> dict:
        return {"family": self.family.value, "magnitude": self.magnitude, "level": self.level}


@dataclass(frozen=True)
class IntensitySchedule:
    """Ordered level names mapped to attack magnitudes."""

    family: AttackFamily
    levels: Tuple[Tuple[str, float], ...]

    def __post_init__(self):
        magnitudes = [m for name, m in self.levels if name != "nominal"]
        if any(b <= a for a, b in zip(magnitudes, magnitudes[1:])):
            raise ContractViolation("schedule magnitudes must increase after nominal")

    @property
    def names(self) -> List[str]:
        return [name for name, _ in self.levels]

    def magnitude(self, level: str) -> float:
        for name, value in self.levels:
            if name == level:
                return value
        raise ContractViolation(
            f"level {level!r} not in {self.family.value} schedule; valid: {', '.join(self.names)}"
        )


_SCHEDULES = {
    AttackFamily.NOISE: (("nominal", 0.0), ("low", 0.02), ("medium", 0.05), ("high", 0.10)),
    AttackFamily.LATENCY: (("nominal", 0.0), ("low", 2.0), ("medium", 5.0), ("high", 10.0)),
    AttackFamily.CROWDING: (("low", 5.0), ("medium", 15.0), ("high", 30.0)),
}


def schedule_levels(family: AttackFamily) -> IntensitySchedule:
    """
    Intensity schedule for an attack family.

    Args:
        family: Noise, latency or crowding

    Returns:
        IntensitySchedule
    """
    family = AttackFamily(family)
    if family not in _SCHEDULES:
        raise ContractViolation(f"no intensity schedule for attack family {family.value!r}")
    return IntensitySchedule(family, _SCHEDULES[family])


def resolve_attack(family: AttackFamily, level: str, nominal_obstacles: int = 5) -> AttackSpec:
    """
    Map a (family, level) pair to a concrete AttackSpec.

    Crowding's nominal level is the scene's own obstacle count.
    """
    family = AttackFamily(family)
    if family == AttackFamily.NONE:
        if level != "nominal":
            raise ContractViolation("attack 'none' only has the nominal level")
        return AttackSpec.nominal()
    if family == AttackFamily.CROWDING and level == "nominal":
        return AttackSpec.crowding(nominal_obstacles, level)
    magnitude = schedule_levels(family).magnitude(level)
    return AttackSpec(family, magnitude, level)


def episode_rng(seed: int, attack: AttackSpec) -> np.random.Generator:
    """Per-episode generator derived from the run seed and the attack label."""
    tag = zlib.crc32(attack.label.encode("ascii"))
    return np.random.default_rng(np.random.SeedSequence([int(seed), tag]))


def perturb_noise(info: PairwiseInfo, sigma: float, rng: np.random.Generator) -> PairwiseInfo:
    """
    Add iid Gaussian noise to the perceived clearances.

    Draws are taken in row-major (volume, obstacle) order; gradients are shared
    with the input.

    Args:
        info: True pairwise info
        sigma: Noise standard deviation in meters
        rng: Episode generator

    Returns:
        Corrupted PairwiseInfo (the input itself when sigma is 0)
    """
    if sigma < 0:
        raise ContractViolation(f"noise sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return info
    noise = rng.normal(0.0, sigma, size=info.d.size).reshape(info.d.shape)
    return info.with_distances(info.d + noise)


class LatencyBuffer:
    """
    Ring buffer of the most recent pairwise snapshots.

    Attributes:
        capacity: delay + 1 snapshots
    """

    def __init__(self, delay: int):
        if delay < 0:
            raise ContractViolation(f"latency delay must be >= 0, got {delay}")
        self.capacity = int(delay) + 1
        self._snapshots: Deque[PairwiseInfo] = deque(maxlen=self.capacity)

    def __len__(self) -> int:
        return len(self._snapshots)

    def push(self, info: PairwiseInfo) -> None:
        if self._snapshots and info.t <= self._snapshots[-1].t:
            raise ContractViolation(
                f"snapshot for step {info.t} pushed after step {self._snapshots[-1].t}"
            )
        self._snapshots.append(info.snapshot())

    def oldest(self) -> PairwiseInfo:
        return self._snapshots[0]


def latency_step(buffer: LatencyBuffer, fresh: PairwiseInfo, delay: int) -> PairwiseInfo:
    """
    Push the fresh snapshot and return the one from step max(t - delay, 0).

    Args:
        buffer: Per-episode buffer with capacity delay + 1
        fresh: Pairwise info computed this step
        delay: Delay in steps

    Returns:
        Stale snapshot (oldest available during warm-up)
    """
    if buffer.capacity != delay + 1:
        raise ContractViolation(f"buffer capacity {buffer.capacity} does not match delay {delay}")
    if delay == 0:
        return fresh
    buffer.push(fresh)
    return buffer.oldest()


class PerceptionChannel:
    """Truthful perception; subclasses corrupt what the filter sees."""

    def perceive(
        self,
        model: RobotModel,
        state: RobotState,
        obstacles: Sequence[Obstacle],
        kinematics: Optional[Kinematics] = None,
    ) -> Tuple[PairwiseInfo, PairwiseInfo]:
        """
        Returns:
            (true info, perceived info)
        """
        info = compute_pairwise_info(model, state, obstacles, kinematics)
        return info, self.corrupt(info)

    def corrupt(self, info: PairwiseInfo) -> PairwiseInfo:
        return info


class NoiseChannel(PerceptionChannel):
    def __init__(self, sigma: float, rng: np.random.Generator):
        self.sigma = sigma
        self.rng = rng

    def corrupt(self, info: PairwiseInfo) -> PairwiseInfo:
        return perturb_noise(info, self.sigma, self.rng)


class LatencyChannel(PerceptionChannel):
    def __init__(self, delay: int):
        self.delay = delay
        self.buffer = LatencyBuffer(delay)

    def corrupt(self, info: PairwiseInfo) -> PairwiseInfo:
        return latency_step(self.buffer, info, self.delay)


def make_channel(attack: AttackSpec, rng: np.random.Generator) -> PerceptionChannel:
    """
    Build the perception channel for one episode.

    Crowding changes the scene rather than perception, so it gets the truthful channel.
    """
    if attack.family == AttackFamily.NOISE:
        return NoiseChannel(attack.sigma, rng)
    if attack.family == AttackFamily.LATENCY:
        return LatencyChannel(attack.delay)
    return PerceptionChannel()


@dataclass(frozen=True)
class ExclusionBall:
    """Region no obstacle center may be placed in."""

    center: Tuple[float, float, float]
    radius: float

    def contains(self, point: np.ndarray) -> bool:
        return float(np.linalg.norm(point - np.asarray(self.center))) < self.radius


def generate_crowding_scene(
    n_obstacles: int,
    seed: int,
    workspace: Tuple[Sequence[float], Sequence[float]],
    exclusion: Sequence[ExclusionBall] = (),
    radius: float = CROWDING_RADIUS,
) -> List[Obstacle]:
    """
    Rejection-sample obstacle centers uniformly in an axis-aligned box.

    Args:
        n_obstacles: Number of obstacles to place
        seed: Scene seed
        workspace: (lower corner, upper corner) of the sampling box
        exclusion: Balls whose interiors must stay free of obstacle centers
        radius: Obstacle radius

    Returns:
        Obstacles in sampling order
    """
    if n_obstacles < 1:
        raise ContractViolation("crowding scene needs at least one obstacle")
    lower = np.asarray(workspace[0], dtype=np.float64)
    upper = np.asarray(workspace[1], dtype=np.float64)
    if lower.shape != (3,) or upper.shape != (3,) or np.any(upper < lower):
        raise ContractViolation(f"invalid workspace box {workspace}")

    rng = np.random.default_rng(seed)
    obstacles: List[Obstacle] = []
    attempts = 0
    while len(obstacles) < n_obstacles:
        if attempts >= MAX_SAMPLING_ATTEMPTS:
            raise SceneGenerationError(
                f"placed {len(obstacles)} of {n_obstacles} obstacles in {MAX_SAMPLING_ATTEMPTS} "
                "attempts: exclusion balls cover too much of the workspace"
            )
        attempts += 1
        center = rng.uniform(lower, upper)
        if any(ball.contains(center) for ball in exclusion):
            continue
        obstacles.append(Obstacle(tuple(center), radius))
    logger.debug("crowding scene seed %d: %d obstacles, %d samples", seed, n_obstacles, attempts)
    return obstacles
