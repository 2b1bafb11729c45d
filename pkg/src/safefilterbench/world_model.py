"""
World Model Module

Robot kinematics, static obstacles and the pairwise robot-obstacle clearance
computation that every safety filter consumes.
"""

import enum
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import ContractViolation
from .utils import wrap_angles

logger = logging.getLogger(__name__)

# Center distances below this are treated as coincident.
COINCIDENT_DISTANCE = 1e-12

DEFAULT_CLUSTER = (
    ((0.0, 0.0, 0.0), 0.10),
    ((-0.12, 0.08, 0.0), 0.07),
    ((-0.12, -0.08, 0.0), 0.07),
)
DEFAULT_LINK_LENGTHS = (0.5, 0.4, 0.3)
# (centers (V, 3), jacobians (V, 3, dof))
Kinematics = Tuple[np.ndarray, np.ndarray]


class RobotKind(str, enum.Enum):
    """Supported robot abstractions."""

    RIGID_CLUSTER = "cluster"
    PLANAR_ARM = "arm"


@dataclass(frozen=True)
class CollisionVolume:
    """
    A sphere attached to the robot.

    Attributes:
        anchor: Offset from q for a rigid cluster, or (link index, fraction along
            the link) for a planar arm
        radius: Sphere radius in meters
    """

    anchor: Tuple[float, ...]
    radius: float


@dataclass(frozen=True)
class RobotModel:
    """
    Kinematic description of the robot.

    Attributes:
        kind: Rigid sphere cluster or planar arm
        volumes: Collision spheres, in volume-index order
        link_lengths: Link lengths in meters (planar arm only)
        arm_volume_index: Volume tracked against the goal
    """

    kind: RobotKind
    volumes: Tuple[CollisionVolume, ...]
    link_lengths: Tuple[float, ...] = ()
    arm_volume_index: int = 0

    def __post_init__(self):
        if not self.volumes:
            raise ContractViolation("robot needs at least one collision volume")
        if any(not v.radius > 0 for v in self.volumes):
            raise ContractViolation("all volume radii must be positive")
        if not 0 <= self.arm_volume_index < len(self.volumes):
            raise ContractViolation(
                f"arm_volume_index {self.arm_volume_index} out of range for "
                f"{len(self.volumes)} volumes"
            )
        if self.kind == RobotKind.PLANAR_ARM:
            if not self.link_lengths or any(not l > 0 for l in self.link_lengths):
                raise ContractViolation("planar arm link lengths must be positive")
            for v in self.volumes:
                link, fraction = v.anchor
                if not 0 <= int(link) < len(self.link_lengths) or not 0.0 <= fraction <= 1.0:
                    raise ContractViolation(f"arm volume anchor {v.anchor} is not on the chain")
        else:
            if any(len(v.anchor) != 3 for v in self.volumes):
                raise ContractViolation("cluster offsets must be 3-vectors")

    @classmethod
    def rigid_cluster(
        cls,
        spheres: Sequence[Tuple[Sequence[float], float]] = DEFAULT_CLUSTER,
        arm_volume_index: int = 0,
    ) -> "RobotModel":
        """
        Build a translating sphere cluster.

        Args:
            spheres: (offset, radius) pairs
            arm_volume_index: Volume tracked against the goal

        Returns:
            RobotModel of kind RIGID_CLUSTER
        """
        volumes = tuple(
            CollisionVolume(tuple(float(x) for x in offset), float(radius))
            for offset, radius in spheres
        )
        return cls(RobotKind.RIGID_CLUSTER, volumes, (), arm_volume_index)

    @classmethod
    def planar_arm(
        cls,
        link_lengths: Sequence[float] = DEFAULT_LINK_LENGTHS,
        link_radius: float = 0.06,
        end_effector_radius: float = 0.05,
    ) -> "RobotModel":
        """
        Build a planar revolute chain with a sphere at every link midpoint and
        one at the end effector, which is the tracked volume.

        Args:
            link_lengths: Length of each link in meters
            link_radius: Radius of the midpoint spheres
            end_effector_radius: Radius of the end-effector sphere

        Returns:
            RobotModel of kind PLANAR_ARM
        """
        lengths = tuple(float(l) for l in link_lengths)
        volumes = [CollisionVolume((k, 0.5), float(link_radius)) for k in range(len(lengths))]
        volumes.append(CollisionVolume((len(lengths) - 1, 1.0), float(end_effector_radius)))
        return cls(RobotKind.PLANAR_ARM, tuple(volumes), lengths, len(volumes) - 1)

    @property
    def dof(self) -> int:
        if self.kind == RobotKind.PLANAR_ARM:
            return len(self.link_lengths)
        return 3

    @property
    def n_volumes(self) -> int:
        return len(self.volumes)

    @property
    def radii(self) -> np.ndarray:
        return np.array([v.radius for v in self.volumes], dtype=np.float64)


@dataclass(frozen=True)
class RobotState:
    """
    Configuration of the robot at one step.

    Attributes:
        q: Configuration vector (meters for a cluster, radians for an arm)
        t: Step index
        angular: q holds joint angles, kept wrapped to (-pi, pi]
    """

    q: np.ndarray
    t: int = 0
    angular: bool = False

    def __post_init__(self):
        q = np.array(self.q, dtype=np.float64)
        if q.ndim != 1 or not np.all(np.isfinite(q)):
            raise ContractViolation("state q must be a finite vector")
        if self.angular:
            q = wrap_angles(q)
        q.setflags(write=False)
        object.__setattr__(self, "q", q)

    @classmethod
    def initial(cls, model: RobotModel, q: Optional[Sequence[float]] = None) -> "RobotState":
        """Start state for a model, wrapping joint angles for an arm."""
        q0 = np.zeros(model.dof) if q is None else np.asarray(q, dtype=np.float64)
        if q0.shape != (model.dof,):
            raise ContractViolation(f"start q has length {q0.size}, robot dof is {model.dof}")
        return cls(q0, 0, angular=model.kind == RobotKind.PLANAR_ARM)


@dataclass(frozen=True)
class Obstacle:
    """A static sphere in the world frame."""

    center: Tuple[float, float, float]
    radius: float = 0.1

    def __post_init__(self):
        center = tuple(float(c) for c in self.center)
        if len(center) != 3 or not np.all(np.isfinite(center)):
            raise ContractViolation(f"obstacle center {self.center} must be a finite 3-vector")
        if not self.radius > 0:
            raise ContractViolation(f"obstacle radius {self.radius} must be positive")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "radius", float(self.radius))


@dataclass(frozen=True)
class PairwiseInfo:
    """
    Signed clearances and configuration-space gradients for every
    (volume, obstacle) pair at one step.

    Attributes:
        t: Step index the info was computed at
        d: (volumes, obstacles) signed surface-to-surface clearances
        grad: (volumes, obstacles, dof) gradients of d with respect to q
    """

    t: int
    d: np.ndarray
    grad: np.ndarray

    def __post_init__(self):
        if self.d.ndim != 2 or self.grad.ndim != 3 or self.grad.shape[:2] != self.d.shape:
            raise ContractViolation(
                f"pairwise shapes disagree: d {self.d.shape}, grad {self.grad.shape}"
            )

    @property
    def n_pairs(self) -> int:
        return int(self.d.size)

    def snapshot(self) -> "PairwiseInfo":
        """Copy of the numeric arrays, detached from any later mutation."""
        return PairwiseInfo(self.t, self.d.copy(), self.grad.copy())

    def with_distances(self, d: np.ndarray) -> "PairwiseInfo":
        """Same step and gradients with replaced clearances."""
        return PairwiseInfo(self.t, d, self.grad)


def forward_kinematics(model: RobotModel, state: RobotState) -> Kinematics:
    """
    Compute volume centers and their task-space Jacobians.

    Args:
        model: Robot description
        state: Current configuration

    Returns:
        (centers, jacobians) with shapes (V, 3) and (V, 3, dof)
    """
    q = state.q
    if q.shape != (model.dof,):
        raise ContractViolation(f"q has length {q.size}, robot dof is {model.dof}")

    if model.kind == RobotKind.RIGID_CLUSTER:
        offsets = np.array([v.anchor for v in model.volumes], dtype=np.float64)
        centers = q[None, :] + offsets
        jacobians = np.broadcast_to(np.eye(3), (model.n_volumes, 3, 3)).copy()
        return centers, jacobians

    lengths = np.asarray(model.link_lengths, dtype=np.float64)
    theta = np.cumsum(q)
    directions = np.stack([np.cos(theta), np.sin(theta), np.zeros_like(theta)], axis=1)
    # joints[k] is the base of link k; joints[-1] is the chain tip
    joints = np.vstack([np.zeros(3), np.cumsum(lengths[:, None] * directions, axis=0)])

    centers = np.empty((model.n_volumes, 3))
    jacobians = np.zeros((model.n_volumes, 3, model.dof))
    for i, volume in enumerate(model.volumes):
        link, fraction = int(volume.anchor[0]), float(volume.anchor[1])
        center = joints[link] + fraction * lengths[link] * directions[link]
        centers[i] = center
        lever = center[None, :2] - joints[: link + 1, :2]
        # z-axis cross product: (x, y) -> (-y, x)
        jacobians[i, 0, : link + 1] = -lever[:, 1]
        jacobians[i, 1, : link + 1] = lever[:, 0]
    return centers, jacobians


def compute_pairwise_info(
    model: RobotModel,
    state: RobotState,
    obstacles: Sequence[Obstacle],
    kinematics: Optional[Kinematics] = None,
) -> PairwiseInfo:
    """
    Signed clearance and gradient for every (volume, obstacle) pair.

    An empty obstacle list yields (V, 0) arrays.

    Args:
        model: Robot description
        state: Current configuration
        obstacles: Static obstacles
        kinematics: forward_kinematics(model, state), when already computed

    Returns:
        PairwiseInfo stamped with state.t
    """
    centers, jacobians = kinematics or forward_kinematics(model, state)
    n_obs = len(obstacles)
    if n_obs == 0:
        return PairwiseInfo(
            state.t, np.zeros((model.n_volumes, 0)), np.zeros((model.n_volumes, 0, model.dof))
        )

    obs_centers = np.array([o.center for o in obstacles], dtype=np.float64)
    obs_radii = np.array([o.radius for o in obstacles], dtype=np.float64)

    diff = centers[:, None, :] - obs_centers[None, :, :]
    dist = np.linalg.norm(diff, axis=2)
    coincident = dist < COINCIDENT_DISTANCE
    safe_dist = np.where(coincident, 1.0, dist)
    normals = np.where(coincident[:, :, None], 0.0, diff / safe_dist[:, :, None])

    d = np.where(coincident, 0.0, dist) - model.radii[:, None] - obs_radii[None, :]
    grad = np.einsum("vkq,vok->voq", jacobians, normals)
    return PairwiseInfo(state.t, d, grad)


def min_env_distance(info: PairwiseInfo) -> float:
    """
    Closest robot-obstacle clearance in one pairwise block.

    Args:
        info: Pairwise info for one step

    Returns:
        Minimum signed clearance in meters
    """
    if info.d.size == 0:
        raise ContractViolation("min_env_distance needs at least one pair")
    return float(np.min(info.d))


def self_pair_distances(
    model: RobotModel, state: RobotState, kinematics: Optional[Kinematics] = None
) -> List[float]:
    """
    Clearances between non-adjacent volumes of a planar arm.

    Args:
        model: Robot description
        state: Current configuration
        kinematics: forward_kinematics(model, state), when already computed

    Returns:
        Signed clearances for every volume pair (a, b) with b - a >= 2, in
        lexicographic order; empty for a rigid cluster
    """
    if model.kind != RobotKind.PLANAR_ARM:
        return []
    centers, _ = kinematics or forward_kinematics(model, state)
    radii = model.radii
    distances = []
    for a in range(model.n_volumes):
        for b in range(a + 2, model.n_volumes):
            gap = float(np.linalg.norm(centers[a] - centers[b]))
            distances.append(gap - radii[a] - radii[b])
    return distances


def n_self_pairs(model: RobotModel) -> int:
    """Number of entries self_pair_distances returns for this model."""
    if model.kind != RobotKind.PLANAR_ARM:
        return 0
    n = model.n_volumes
    return max(n - 2, 0) * max(n - 1, 0) // 2


def bounding_radius(model: RobotModel) -> float:
    """Radius of the smallest ball around the tracked cluster volume holding the cluster."""
    if model.kind != RobotKind.RIGID_CLUSTER:
        return max(v.radius for v in model.volumes)
    ref = np.asarray(model.volumes[model.arm_volume_index].anchor)
    return max(float(np.linalg.norm(np.asarray(v.anchor) - ref)) + v.radius for v in model.volumes)
