"""Tests for sim_core module"""

import numpy as np
import pytest

import safefilterbench.sim_core as sim_core
import safefilterbench.world_model as world_model
from safefilterbench.attack_harness import AttackSpec
from safefilterbench.errors import ContractViolation
from safefilterbench.safety_filters import FilterKind, FilterSpec, FilterStatus
from safefilterbench.sim_core import (
    TRACE_DTYPES,
    SimConfig,
    integrate_step,
    nominal_control,
    run_episode,
)
from safefilterbench.world_model import Obstacle, RobotModel, RobotState, forward_kinematics


@pytest.fixture
def cluster():
    """Default three-sphere cluster"""
    return RobotModel.rigid_cluster()


@pytest.fixture
def scene():
    """Obstacles near the straight path to the goal"""
    return [
        Obstacle((0.6, 0.18, 0.0), 0.1),
        Obstacle((0.7, -0.2, 0.05), 0.1),
        Obstacle((0.9, 0.0, 0.25), 0.1),
    ]


def test_nominal_control_unsaturated():
    """Test proportional control inside the bound"""
    model = RobotModel.rigid_cluster([((0.0, 0.0, 0.0), 0.1)])
    config = SimConfig(kp=2.0, goal=(0.1, -0.2, 0.0))
    u = nominal_control(model, RobotState([0.0, 0.0, 0.0]), config)
    np.testing.assert_allclose(u, [0.2, -0.4, 0.0])


def test_nominal_control_saturates_per_component():
    """Test each control component is clamped to u_max"""
    model = RobotModel.rigid_cluster([((0.0, 0.0, 0.0), 0.1)])
    config = SimConfig(kp=2.0, goal=(5.0, -0.1, -3.0), u_max=1.0)
    u = nominal_control(model, RobotState([0.0, 0.0, 0.0]), config)
    np.testing.assert_allclose(u, [1.0, -0.2, -1.0])


def test_nominal_control_zero_at_goal():
    """Test the controller is silent once the tracked volume sits on the goal"""
    model = RobotModel.rigid_cluster([((0.0, 0.0, 0.0), 0.1)])
    config = SimConfig(goal=(0.3, 0.3, 0.3))
    u = nominal_control(model, RobotState([0.3, 0.3, 0.3]), config)
    np.testing.assert_array_equal(u, np.zeros(3))


def test_integrate_step():
    """Test a forward-Euler step and the step counter"""
    state = integrate_step(RobotState([0.0, 1.0, 2.0], t=4), np.array([1.0, -1.0, 0.5]), 0.01)
    np.testing.assert_allclose(state.q, [0.01, 0.99, 2.005])
    assert state.t == 5


def test_integrate_step_wraps_arm_angles():
    """Test arm states stay in (-pi, pi] through the plain (state, u, dt) call"""
    start = RobotState.initial(RobotModel.planar_arm(), [np.pi - 0.001, 0.0, 0.0])
    state = integrate_step(start, np.array([1.0, 0.0, 0.0]), 0.01)
    assert state.angular
    assert -np.pi < state.q[0] <= np.pi
    assert state.q[0] == pytest.approx(-np.pi + 0.009)
    assert integrate_step(state, np.zeros(3), 0.01).angular


def test_integrate_step_leaves_cluster_unwrapped():
    """Test cluster positions are not treated as angles"""
    start = RobotState.initial(RobotModel.rigid_cluster(), [np.pi - 0.001, 0.0, 0.0])
    state = integrate_step(start, np.array([1.0, 0.0, 0.0]), 0.01)
    assert not state.angular
    assert state.q[0] == pytest.approx(np.pi + 0.009)


def test_integrate_step_rejects_bad_control():
    """Test wrong length and non-finite controls are rejected"""
    with pytest.raises(ContractViolation):
        integrate_step(RobotState([0.0, 0.0, 0.0]), np.zeros(2), 0.01)
    with pytest.raises(ContractViolation):
        integrate_step(RobotState([0.0, 0.0, 0.0]), np.array([np.nan, 0.0, 0.0]), 0.01)


def test_sim_config_validation():
    """Test invalid simulation settings are rejected"""
    for bad in ({"dt": 0.0}, {"steps": 0}, {"u_max": -1.0}, {"kp": 0.0}, {"seed": -1}):
        with pytest.raises(ContractViolation):
            SimConfig(**bad)


def test_free_space_convergence(cluster):
    """Test goal distance never grows and converges without obstacles"""
    config = SimConfig(steps=1000, seed=1)
    log = run_episode(cluster, [], config, FilterSpec(FilterKind.NONE))
    distances = log.dist_goal_arm
    assert np.all(np.diff(distances) <= 1e-12)
    assert distances[-1] < 1e-3
    assert log.dist_robot_to_env.shape == (1000, 0)
    assert np.all(log.filter_status_trace == int(FilterStatus.INACTIVE))


def test_episode_log_layout(cluster, scene):
    """Test trace shapes, dtypes and metadata"""
    log = run_episode(cluster, scene, SimConfig(steps=50, seed=20), FilterSpec(FilterKind.RSSA))
    log.validate()
    assert log.steps == 50
    assert log.dist_robot_to_env.shape == (50, 9)
    assert log.q_trace.shape == (50, 3)
    assert log.self_dist_trace.shape == (50, 0)
    for name, dtype in TRACE_DTYPES.items():
        assert getattr(log, name).dtype == dtype
    assert log.metadata["filter"] == "rssa"
    assert log.metadata["n_obstacles"] == 3
    assert log.metadata["seed"] == 20
    np.testing.assert_array_equal(log.q_trace[0], np.zeros(3))


def test_episode_deterministic(cluster, scene):
    """Test equal inputs reproduce the log exactly"""
    config = SimConfig(steps=200, seed=22)
    spec = FilterSpec(FilterKind.SSA)
    first = run_episode(cluster, scene, config, spec, AttackSpec.noise(0.05))
    second = run_episode(cluster, scene, config, spec, AttackSpec.noise(0.05))
    assert first.equals(second)


def test_zero_noise_matches_nominal(cluster, scene):
    """Test a zero-sigma noise attack leaves every trace unchanged"""
    config = SimConfig(steps=200, seed=21)
    spec = FilterSpec(FilterKind.CBF)
    nominal = run_episode(cluster, scene, config, spec)
    zero_noise = run_episode(cluster, scene, config, spec, AttackSpec.noise(0.0))
    zero_latency = run_episode(cluster, scene, config, spec, AttackSpec.latency(0))
    assert nominal.equals(zero_noise, compare_metadata=False)
    assert nominal.equals(zero_latency, compare_metadata=False)
    np.testing.assert_array_equal(nominal.perceived_dist_to_env, nominal.dist_robot_to_env)


def test_noise_without_filter_keeps_true_trajectory(cluster, scene):
    """Test noise only changes what an unfiltered run perceives"""
    config = SimConfig(steps=200, seed=21)
    spec = FilterSpec(FilterKind.NONE)
    nominal = run_episode(cluster, scene, config, spec)
    noisy = run_episode(cluster, scene, config, spec, AttackSpec.noise(0.1))
    np.testing.assert_array_equal(noisy.q_trace, nominal.q_trace)
    np.testing.assert_array_equal(noisy.dist_robot_to_env, nominal.dist_robot_to_env)
    np.testing.assert_array_equal(noisy.dist_goal_arm, nominal.dist_goal_arm)
    np.testing.assert_array_equal(noisy.u_safe_trace, nominal.u_safe_trace)
    assert not np.array_equal(noisy.perceived_dist_to_env, nominal.perceived_dist_to_env)
    assert np.std(noisy.perceived_dist_to_env - noisy.dist_robot_to_env) == pytest.approx(0.1, rel=0.1)


def test_latency_shifts_perception(cluster, scene):
    """Test perceived clearances lag the true ones by the delay"""
    log = run_episode(cluster, scene, SimConfig(steps=120, seed=20), FilterSpec(FilterKind.SSA), AttackSpec.latency(10))
    np.testing.assert_array_equal(log.perceived_dist_to_env[10:], log.dist_robot_to_env[:-10])
    for t in range(10):
        np.testing.assert_array_equal(log.perceived_dist_to_env[t], log.dist_robot_to_env[0])


@pytest.mark.parametrize("kind", list(FilterKind))
def test_controls_within_bound(cluster, scene, kind):
    """Test every filter keeps the applied control inside the box"""
    log = run_episode(cluster, scene, SimConfig(steps=150, seed=20), FilterSpec(kind), AttackSpec.noise(0.05))
    assert np.all(np.abs(log.u_safe_trace) <= 1.0 + 1e-9)
    assert np.all(np.abs(log.u_nominal_trace) <= 1.0)


def test_pinch_episode_brakes():
    """Test an infeasible CBF step brakes and the episode continues"""
    model = RobotModel.rigid_cluster([((0.0, 0.0, 0.0), 0.1)])
    obstacles = [Obstacle((0.0, 0.22, 0.0), 0.1), Obstacle((0.0, -0.22, 0.0), 0.1)]
    log = run_episode(model, obstacles, SimConfig(steps=40, seed=20), FilterSpec(FilterKind.CBF))
    assert log.steps == 40
    assert np.all(log.filter_status_trace == int(FilterStatus.NO_SOLUTION))
    np.testing.assert_array_equal(log.u_safe_trace, np.zeros((40, 3)))
    np.testing.assert_array_equal(log.q_trace, np.zeros((40, 3)))


def test_arm_episode_self_distances():
    """Test the planar arm logs self clearances and wrapped angles"""
    model = RobotModel.planar_arm()
    config = SimConfig(steps=100, seed=20, goal=(0.2, 0.8, 0.0))
    log = run_episode(model, [Obstacle((0.6, 0.5, 0.0), 0.1)], config, FilterSpec(FilterKind.RSSS))
    assert log.self_dist_trace.shape == (100, 3)
    assert np.all(log.q_trace > -np.pi) and np.all(log.q_trace <= np.pi)
    assert log.metadata["robot"] == "arm"


def test_kinematics_computed_once_per_step(cluster, scene, monkeypatch):
    """Test the episode loop evaluates forward kinematics once per step"""
    calls = []
    original = world_model.forward_kinematics

    def counting(model, state):
        calls.append(state.t)
        return original(model, state)

    monkeypatch.setattr(sim_core, "forward_kinematics", counting)
    monkeypatch.setattr(world_model, "forward_kinematics", counting)
    run_episode(cluster, scene, SimConfig(steps=25, seed=20), FilterSpec(FilterKind.CBF))
    assert calls == list(range(25))


def test_nominal_control_reuses_kinematics(cluster):
    """Test precomputed kinematics give the same nominal control"""
    state = RobotState([0.2, -0.1, 0.05])
    config = SimConfig(goal=(0.5, 0.3, 0.0))
    expected = nominal_control(cluster, state, config)
    reused = nominal_control(cluster, state, config, forward_kinematics(cluster, state))
    np.testing.assert_array_equal(reused, expected)
