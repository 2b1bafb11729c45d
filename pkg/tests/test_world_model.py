"""Tests for world_model module"""

import numpy as np
import pytest

from safefilterbench.errors import ContractViolation
from safefilterbench.world_model import (
    Obstacle,
    PairwiseInfo,
    RobotKind,
    RobotModel,
    RobotState,
    compute_pairwise_info,
    forward_kinematics,
    min_env_distance,
    n_self_pairs,
    self_pair_distances,
)


@pytest.fixture
def cluster():
    """Default three-sphere cluster"""
    return RobotModel.rigid_cluster()


@pytest.fixture
def arm():
    """Default three-link planar arm"""
    return RobotModel.planar_arm()


@pytest.fixture
def unit_arm():
    """Planar arm with unit links"""
    return RobotModel.planar_arm(link_lengths=(1.0, 1.0, 1.0), link_radius=0.05, end_effector_radius=0.05)


def random_scene(rng, model, n_obstacles=5):
    """Random state and obstacles away from coincident centers"""
    if model.kind == RobotKind.PLANAR_ARM:
        q = rng.uniform(-np.pi, np.pi, size=model.dof)
        obstacles = [
            Obstacle((*rng.uniform(-1.5, 1.5, size=2), 0.0), rng.uniform(0.05, 0.2))
            for _ in range(n_obstacles)
        ]
    else:
        q = rng.uniform(-1.0, 1.0, size=3)
        obstacles = [
            Obstacle(tuple(rng.uniform(-2.0, 2.0, size=3)), rng.uniform(0.05, 0.2))
            for _ in range(n_obstacles)
        ]
    return RobotState(q), obstacles


def finite_difference_grad(model, state, obstacles, h=1e-6):
    """Central differences of every clearance with respect to q"""
    base = compute_pairwise_info(model, state, obstacles)
    grad = np.zeros_like(base.grad)
    for k in range(model.dof):
        step = np.zeros(model.dof)
        step[k] = h
        plus = compute_pairwise_info(model, RobotState(state.q + step), obstacles).d
        minus = compute_pairwise_info(model, RobotState(state.q - step), obstacles).d
        grad[:, :, k] = (plus - minus) / (2 * h)
    return base.grad, grad


def test_cluster_identity_kinematics():
    """Test single-sphere cluster center and Jacobian"""
    model = RobotModel.rigid_cluster([((0.0, 0.0, 0.0), 0.1)])
    centers, jacobians = forward_kinematics(model, RobotState([1.0, 2.0, 0.0]))
    np.testing.assert_array_equal(centers[0], [1.0, 2.0, 0.0])
    np.testing.assert_array_equal(jacobians[0], np.eye(3))


def test_arm_fully_extended(unit_arm):
    """Test end effector of a straight unit chain"""
    centers, _ = forward_kinematics(unit_arm, RobotState([0.0, 0.0, 0.0]))
    np.testing.assert_allclose(centers[unit_arm.arm_volume_index], [3.0, 0.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(centers[0], [0.5, 0.0, 0.0], atol=1e-12)


def test_arm_vertical_and_jacobian(unit_arm):
    """Test arm pointing up and its Jacobian against finite differences"""
    state = RobotState([np.pi / 2, 0.0, 0.0])
    centers, jacobians = forward_kinematics(unit_arm, state)
    np.testing.assert_allclose(centers[-1], [0.0, 3.0, 0.0], atol=1e-12)

    h = 1e-6
    for k in range(3):
        step = np.zeros(3)
        step[k] = h
        plus, _ = forward_kinematics(unit_arm, RobotState(state.q + step))
        minus, _ = forward_kinematics(unit_arm, RobotState(state.q - step))
        np.testing.assert_allclose(jacobians[:, :, k], (plus - minus) / (2 * h), atol=1e-6)
    assert np.all(jacobians[:, 2, :] == 0.0)


def test_kinematics_dimension_mismatch(cluster):
    """Test q of the wrong length is rejected"""
    with pytest.raises(ContractViolation):
        forward_kinematics(cluster, RobotState([0.0, 0.0]))


def test_collinear_clearance():
    """Test clearance and gradient for a collinear pair"""
    model = RobotModel.rigid_cluster([((0.0, 0.0, 0.0), 0.1)])
    info = compute_pairwise_info(model, RobotState([0.0, 0.0, 0.0]), [Obstacle((1.0, 0.0, 0.0), 0.2)])
    assert info.d[0, 0] == pytest.approx(0.7)
    np.testing.assert_allclose(info.grad[0, 0], [-1.0, 0.0, 0.0])


def test_coincident_centers():
    """Test the zero-gradient rule for coincident centers"""
    model = RobotModel.rigid_cluster([((0.0, 0.0, 0.0), 0.1)])
    info = compute_pairwise_info(model, RobotState([0.5, 0.5, 0.5]), [Obstacle((0.5, 0.5, 0.5), 0.2)])
    assert info.d[0, 0] == pytest.approx(-0.3)
    np.testing.assert_array_equal(info.grad[0, 0], np.zeros(3))


def test_pairwise_shapes(cluster):
    """Test d and grad shapes for 3 volumes and 5 obstacles"""
    state, obstacles = random_scene(np.random.default_rng(0), cluster)
    info = compute_pairwise_info(cluster, state, obstacles)
    assert info.d.shape == (3, 5)
    assert info.grad.shape == (3, 5, 3)
    assert info.t == state.t


@pytest.mark.parametrize("kind", ["cluster", "arm"])
def test_gradient_finite_difference(kind):
    """Test analytic gradients against central differences on 100 random scenes"""
    model = RobotModel.rigid_cluster() if kind == "cluster" else RobotModel.planar_arm()
    rng = np.random.default_rng(11)
    for _ in range(100):
        state, obstacles = random_scene(rng, model)
        analytic, numeric = finite_difference_grad(model, state, obstacles)
        np.testing.assert_allclose(analytic, numeric, atol=1e-5)


def test_translation_equivariance(cluster):
    """Test shifting robot and obstacles together keeps clearances"""
    rng = np.random.default_rng(3)
    state, obstacles = random_scene(rng, cluster)
    shift = np.array([0.25, -1.5, 0.75])
    moved = [Obstacle(tuple(np.asarray(o.center) + shift), o.radius) for o in obstacles]
    before = compute_pairwise_info(cluster, state, obstacles).d
    after = compute_pairwise_info(cluster, RobotState(state.q + shift), moved).d
    np.testing.assert_allclose(after, before, atol=1e-12)


def test_sign_convention():
    """Test negative clearance exactly when spheres overlap"""
    model = RobotModel.rigid_cluster([((0.0, 0.0, 0.0), 0.1)])
    obstacle = [Obstacle((0.0, 0.0, 0.0), 0.1)]
    for x, overlapping in ((0.15, True), (0.25, False)):
        info = compute_pairwise_info(model, RobotState([x, 0.0, 0.0]), obstacle)
        assert (info.d[0, 0] < 0) == overlapping


def test_min_env_distance_values():
    """Test min_env_distance on small matrices"""
    grad = np.zeros((2, 2, 3))
    assert min_env_distance(PairwiseInfo(0, np.array([[0.5, 0.2], [0.3, 0.9]]), grad)) == 0.2
    assert min_env_distance(PairwiseInfo(0, np.full((2, 2), 0.4), grad)) == 0.4


def test_min_env_distance_brute_force():
    """Test min_env_distance against a double-loop scan"""
    rng = np.random.default_rng(5)
    for _ in range(1000):
        v, o = rng.integers(1, 6, size=2)
        d = rng.normal(size=(v, o))
        expected = d[0, 0]
        for i in range(v):
            for j in range(o):
                expected = min(expected, d[i, j])
        value = min_env_distance(PairwiseInfo(0, d, np.zeros((v, o, 3))))
        assert value == expected
        assert np.all(value <= d)


def test_min_env_distance_empty():
    """Test empty pairwise block is rejected"""
    with pytest.raises(ContractViolation):
        min_env_distance(PairwiseInfo(0, np.zeros((3, 0)), np.zeros((3, 0, 3))))


def test_self_pairs_cluster(cluster):
    """Test a cluster has no self pairs"""
    assert self_pair_distances(cluster, RobotState([0.0, 0.0, 0.0])) == []
    assert n_self_pairs(cluster) == 0


def test_self_pairs_extended_arm():
    """Test a straight chain has positive self clearances"""
    model = RobotModel.planar_arm(link_radius=0.05, end_effector_radius=0.05)
    distances = self_pair_distances(model, RobotState([0.0, 0.0, 0.0]))
    assert len(distances) == n_self_pairs(model) == 3
    assert all(d > 0 for d in distances)


def test_self_pairs_folded_arm(arm):
    """Test folded-arm self clearances against a brute-force sphere scan"""
    state = RobotState([0.0, np.pi - 0.01, 0.0])
    centers, _ = forward_kinematics(arm, state)
    radii = arm.radii
    expected = [
        np.linalg.norm(centers[a] - centers[b]) - radii[a] - radii[b]
        for a in range(4)
        for b in range(a + 2, 4)
    ]
    distances = self_pair_distances(arm, state)
    np.testing.assert_allclose(distances, expected, atol=1e-12)
    assert min(distances) == pytest.approx(min(expected))


def test_initial_state_wraps_arm_angles(arm):
    """Test arm start angles are wrapped to (-pi, pi]"""
    state = RobotState.initial(arm, [3 * np.pi, -np.pi, 0.5])
    assert np.all(state.q > -np.pi) and np.all(state.q <= np.pi)
    assert state.q[1] == pytest.approx(np.pi)


def test_model_validation():
    """Test invalid models are rejected"""
    with pytest.raises(ContractViolation):
        RobotModel.rigid_cluster([((0.0, 0.0, 0.0), -0.1)])
    with pytest.raises(ContractViolation):
        RobotModel.rigid_cluster([((0.0, 0.0, 0.0), 0.1)], arm_volume_index=2)
    with pytest.raises(ContractViolation):
        RobotModel.planar_arm(link_lengths=(0.5, 0.0, 0.3))
    with pytest.raises(ContractViolation):
        Obstacle((0.0, 0.0, 0.0), 0.0)
    with pytest.raises(ContractViolation):
        RobotState([0.0, np.nan, 0.0])
