"""
Simulation Core Module

First-order kinematic simulation: nominal goal tracking, Euler integration
and the per-step episode loop that records every signal into an EpisodeLog.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from .attack_harness import AttackSpec, episode_rng, make_channel
from .errors import ContractViolation
from .safety_filters import FilterSpec, FilterStatus, SafetyFilter
from .utils import clamp_vector
from .world_model import (
    Kinematics,
    Obstacle,
    RobotModel,
    RobotState,
    forward_kinematics,
    n_self_pairs,
    self_pair_distances,
)

logger = logging.getLogger(__name__)

TRACE_DTYPES = {
    "dist_robot_to_env": np.float64,
    "perceived_dist_to_env": np.float64,
    "dist_goal_arm": np.float64,
    "q_trace": np.float64,
    "u_nominal_trace": np.float64,
    "u_safe_trace": np.float64,
    "filter_status_trace": np.int32,
    "active_pairs_trace": np.int32,
    "self_dist_trace": np.float64,
}


@dataclass(frozen=True)
class SimConfig:
    """
    Simulation settings for one episode.

    Attributes:
        dt: Step length in seconds
        steps: Episode length T
        seed: Run seed
        u_max: Per-component control bound
        kp: Proportional gain of the nominal controller (1/s)
        goal: Goal point for the tracked volume (m)
        start: Initial configuration; zeros when None
    """

    dt: float = 0.01
    steps: int = 5000
    seed: int = 0
    u_max: float = 1.0
    kp: float = 2.0
    goal: Tuple[float, float, float] = (1.2, 0.0, 0.0)
    start: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if not self.dt > 0:
            raise ContractViolation(f"dt must be positive, got {self.dt}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ContractViolation(f"steps must be a positive integer, got {self.steps}")
        if not self.u_max > 0:
            raise ContractViolation(f"u_max must be positive, got {self.u_max}")
        if not self.kp > 0:
            raise ContractViolation(f"kp must be positive, got {self.kp}")
        if not 0 <= int(self.seed) < 2**64:
            raise ContractViolation(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        goal = tuple(float(g) for g in self.goal)
        if len(goal) != 3 or not np.all(np.isfinite(goal)):
            raise ContractViolation(f"goal must be a finite 3-vector, got {self.goal}")
        object.__setattr__(self, "goal", goal)
        if self.start is not None:
            object.__setattr__(self, "start", tuple(float(s) for s in self.start))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "dt": self.dt,
            "steps": int(self.steps),
            "seed": int(self.seed),
            "u_max": self.u_max,
            "kp": self.kp,
            "goal": list(self.goal),
            "start": None if self.start is None else list(self.start),
        }


@dataclass(eq=False)
class EpisodeLog:
    """
    Step-indexed record of one episode.

    Row t of every trace holds the signals observed at step t, before the
    control of that step is applied.

    Attributes:
        dist_robot_to_env: (T, V*O) true clearances, row-major pair order
        perceived_dist_to_env: (T, V*O) clearances the filter saw
        dist_goal_arm: (T,) tracked-volume distance to the goal
        q_trace: (T, dof) configurations
        u_nominal_trace: (T, dof) nominal controls
        u_safe_trace: (T, dof) filtered controls
        filter_status_trace: (T,) FilterStatus codes
        active_pairs_trace: (T,) constraints or terms imposed per step
        self_dist_trace: (T, P) self clearances; P is 0 for a cluster
        metadata: Run identity, configuration and scene
    """

    dist_robot_to_env: np.ndarray
    perceived_dist_to_env: np.ndarray
    dist_goal_arm: np.ndarray
    q_trace: np.ndarray
    u_nominal_trace: np.ndarray
    u_safe_trace: np.ndarray
    filter_status_trace: np.ndarray
    active_pairs_trace: np.ndarray
    self_dist_trace: np.ndarray
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def steps(self) -> int:
        return int(self.dist_goal_arm.shape[0])

    def arrays(self) -> Dict[str, np.ndarray]:
        """Trace arrays by archive name, in archive order."""
        return {name: getattr(self, name) for name in TRACE_DTYPES}

    def validate(self) -> None:
        """Check dtypes, shared length and status codes."""
        T = self.steps
        for name, array in self.arrays().items():
            if array.dtype != TRACE_DTYPES[name]:
                raise ContractViolation(f"{name} has dtype {array.dtype}")
            if array.ndim == 0 or array.shape[0] != T:
                raise ContractViolation(f"{name} does not have {T} rows")
        codes = {int(s) for s in FilterStatus}
        if not set(np.unique(self.filter_status_trace).tolist()) <= codes:
            raise ContractViolation("filter_status_trace holds unknown status codes")

    def equals(self, other: "EpisodeLog", compare_metadata: bool = True) -> bool:
        """Field-for-field equality with exact array comparison."""
        for name, array in self.arrays().items():
            theirs = getattr(other, name)
            if array.dtype != theirs.dtype or not np.array_equal(array, theirs):
                return False
        return not compare_metadata or self.metadata == other.metadata


def nominal_control(
    model: RobotModel,
    state: RobotState,
    config: SimConfig,
    kinematics: Optional[Kinematics] = None,
) -> np.ndarray:
    """
    Saturated proportional goal tracking for the designated arm volume.

    Args:
        model: Robot description
        state: Current configuration
        config: Simulation settings (gain, goal, bound)
        kinematics: forward_kinematics(model, state), when already computed

    Returns:
        u_nom = clamp(kp * J_arm^T (goal - c_arm), +-u_max)
    """
    centers, jacobians = kinematics or forward_kinematics(model, state)
    i = model.arm_volume_index
    error = np.asarray(config.goal) - centers[i]
    return clamp_vector(config.kp * (jacobians[i].T @ error), config.u_max)


def integrate_step(state: RobotState, u: np.ndarray, dt: float) -> RobotState:
    """
    Forward-Euler step q' = q + dt * u.

    Angular (planar arm) states come back re-wrapped to (-pi, pi].

    Args:
        state: Current configuration
        u: Control, same length as q
        dt: Step length

    Returns:
        State at step t + 1
    """
    u = np.asarray(u, dtype=np.float64)
    if u.shape != state.q.shape:
        raise ContractViolation(f"control length {u.size} does not match dof {state.q.size}")
    if not np.all(np.isfinite(u)):
        raise ContractViolation("control contains non-finite values")
    return RobotState(state.q + dt * u, state.t + 1, state.angular)


def run_episode(
    model: RobotModel,
    obstacles: Sequence[Obstacle],
    config: SimConfig,
    filter_spec: FilterSpec,
    attack_spec: AttackSpec = AttackSpec(),
) -> EpisodeLog:
    """
    Simulate one episode.

    Each step: true pairwise info, attack channel, nominal control, safety
    filter, integration. Infeasible filter steps brake and continue.

    Args:
        model: Robot description
        obstacles: Static scene
        config: Simulation settings
        filter_spec: Filter kind and parameters
        attack_spec: Perception attack

    Returns:
        EpisodeLog
    """
    T = int(config.steps)
    dof = model.dof
    n_pairs = model.n_volumes * len(obstacles)
    n_self = n_self_pairs(model)
    goal = np.asarray(config.goal)

    params = filter_spec.params.with_u_max(config.u_max)
    safety_filter = SafetyFilter(filter_spec.kind, params)
    channel = make_channel(attack_spec, episode_rng(config.seed, attack_spec))

    log = EpisodeLog(
        dist_robot_to_env=np.empty((T, n_pairs)),
        perceived_dist_to_env=np.empty((T, n_pairs)),
        dist_goal_arm=np.empty(T),
        q_trace=np.empty((T, dof)),
        u_nominal_trace=np.empty((T, dof)),
        u_safe_trace=np.empty((T, dof)),
        filter_status_trace=np.empty(T, dtype=np.int32),
        active_pairs_trace=np.empty(T, dtype=np.int32),
        self_dist_trace=np.empty((T, n_self)),
    )

    state = RobotState.initial(model, config.start)
    no_solution = 0
    for t in range(T):
        kinematics = forward_kinematics(model, state)
        true_info, perceived = channel.perceive(model, state, obstacles, kinematics)
        u_nom = nominal_control(model, state, config, kinematics)
        output = safety_filter(u_nom, perceived)
        centers = kinematics[0]

        log.dist_robot_to_env[t] = true_info.d.reshape(-1)
        log.perceived_dist_to_env[t] = perceived.d.reshape(-1)
        log.dist_goal_arm[t] = np.linalg.norm(goal - centers[model.arm_volume_index])
        log.q_trace[t] = state.q
        log.u_nominal_trace[t] = u_nom
        log.u_safe_trace[t] = output.u_safe
        log.filter_status_trace[t] = int(output.status)
        log.active_pairs_trace[t] = output.active_pairs
        if n_self:
            log.self_dist_trace[t] = self_pair_distances(model, state, kinematics)
        if output.status == FilterStatus.NO_SOLUTION:
            no_solution += 1

        state = integrate_step(state, output.u_safe, config.dt)

    if no_solution:
        logger.info(
            "%s seed %d: filter reported no solution on %d of %d steps",
            filter_spec.kind.value,
            config.seed,
            no_solution,
            T,
        )

    log.metadata = {
        "format": 1,
        "robot": model.kind.value,
        "n_volumes": model.n_volumes,
        "n_obstacles": len(obstacles),
        "dof": dof,
        "arm_volume_index": model.arm_volume_index,
        "filter": filter_spec.kind.value,
        "filter_params": params.to_dict(),
        "attack": attack_spec.family.value,
        "attack_magnitude": attack_spec.magnitude,
        "level": attack_spec.level,
        "seed": int(config.seed),
        "steps": T,
        "sim": config.to_dict(),
        "obstacles": [list(o.center) + [o.radius] for o in obstacles],
    }
    return log
