import math

import numpy as np
import pytest
from scipy.spatial.transform import Rotation as SciRotation

from fgcalib import lie
from fgcalib.errors import ArityMismatch
from fgcalib.kinematics import (
    COVARIANCE_FLOOR,
    JointSpec,
    JointState,
    KinematicChain,
    demo_leg_chain,
    fk_jacobian,
    forward_kinematics,
    propagate_covariance,
    propagate_covariance_dense,
)
from fgcalib.lie import Pose
from fgcalib.selfcheck import random_chain


def homogeneous_fk(chain, q):
    """Reference FK built from 4x4 matrices and scipy rotations only."""
    T = np.eye(4)
    for joint, angle in zip(chain.joints, q):
        R = np.eye(4)
        R[:3, :3] = SciRotation.from_rotvec(np.asarray(joint.axis) * angle).as_matrix()
        T = T @ joint.origin.matrix() @ R
    return T @ chain.tool.matrix()


def fd_jacobian(chain, q, h=1e-6):
    fk0 = forward_kinematics(chain, q)
    cols = []
    for j in range(chain.dof):
        dq = np.zeros(chain.dof)
        dq[j] = h
        cols.append(
            (lie.local_coordinates(fk0, forward_kinematics(chain, q + dq)) - lie.local_coordinates(fk0, forward_kinematics(chain, q - dq)))
            / (2 * h)
        )
    return np.stack(cols, axis=1)


def single_joint(length=0.7, axis=(0.0, 0.0, 1.0), sigma=0.01):
    return KinematicChain((JointSpec("j", np.array(axis)),), Pose.from_translation([length, 0.0, 0.0]), [sigma], [0.0] * 6)


def test_zero_angles_compose_fixed_transforms(rng):
    chain = random_chain(rng, 4)
    expected = Pose()
    for j in chain.joints:
        expected = expected @ j.origin
    expected = expected @ chain.tool
    assert np.allclose(forward_kinematics(chain, np.zeros(4)).matrix(), expected.matrix(), atol=1e-14)


def test_planar_single_joint():
    chain = single_joint(length=0.7)
    p = forward_kinematics(chain, JointState([math.pi / 2]))
    assert np.allclose(p.translation, [0.0, 0.7, 0.0], atol=1e-15)
    assert lie.pose_distance(Pose(p.rotation), lie.rot_z(math.pi / 2))[0] < 1e-15


def test_fk_matches_matrix_chain(rng):
    for _ in range(50):
        chain = random_chain(rng, 3)
        q = rng.uniform(-math.pi, math.pi, 3)
        assert np.allclose(forward_kinematics(chain, q).matrix(), homogeneous_fk(chain, q), atol=1e-12)


def test_arity_mismatch():
    chain = demo_leg_chain()
    with pytest.raises(ArityMismatch):
        forward_kinematics(chain, [0.0, 0.0])
    with pytest.raises(ArityMismatch):
        fk_jacobian(chain, JointState([0.0] * 4))
    with pytest.raises(ArityMismatch):
        propagate_covariance(chain, [0.0])


def test_jacobian_matches_finite_differences_100_chains():
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(100):
        chain = random_chain(rng)
        q = rng.uniform(-math.pi, math.pi, chain.dof)
        J = fk_jacobian(chain, q)
        N = fd_jacobian(chain, q)
        worst = max(worst, np.linalg.norm(J - N) / max(np.linalg.norm(N), 1e-12))
    assert worst <= 1e-5


def test_single_joint_jacobian_lever_arm():
    L = 0.7
    J = fk_jacobian(single_joint(L), [0.0])
    assert np.allclose(J[:3, 0], [0.0, 0.0, 1.0])
    assert np.allclose(J, fd_jacobian(single_joint(L), np.zeros(1)), atol=1e-8)
    assert np.allclose(J[3:, 0], [0.0, L, 0.0])


def test_zero_lever_arm_column():
    # marker sits on the axis of the last joint: that joint only rotates it
    joints = (
        JointSpec("a", np.array([1.0, 0.0, 0.0]), Pose.from_translation([0.1, 0.2, 0.0])),
        JointSpec("b", np.array([0.0, 0.0, 1.0]), Pose.from_translation([0.0, 0.0, 0.3])),
    )
    chain = KinematicChain(joints, Pose.from_translation([0.0, 0.0, 0.25]), [0.01, 0.01])
    J = fk_jacobian(chain, [0.3, -1.1])
    assert np.allclose(J[3:, 1], 0.0, atol=1e-15)
    assert np.linalg.norm(J[3:, 0]) > 0.1


def test_covariance_without_encoder_noise_is_mount_term():
    s = np.array([0.01, 0.02, 0.03, 0.001, 0.002, 0.003])
    chain = demo_leg_chain(encoder_sigma=0.0, mount_sigma=s)
    assert np.allclose(propagate_covariance(chain, [0.1, -1.4, 0.9]), np.diag(s**2), rtol=0, atol=1e-18)


def test_covariance_scales_quadratically(rng):
    q = [0.1, -1.4, 0.9]
    a = propagate_covariance_dense(demo_leg_chain(encoder_sigma=0.01), q)
    b = propagate_covariance_dense(demo_leg_chain(encoder_sigma=0.02), q)
    assert np.allclose(b, 4.0 * a, rtol=1e-12, atol=0)


def test_covariance_is_floored_diagonal(rng):
    for _ in range(20):
        chain = random_chain(rng)
        chain = chain.with_sigmas(mount_sigma=np.zeros(6))
        q = rng.uniform(-3, 3, chain.dof)
        cov = propagate_covariance(chain, q)
        assert np.count_nonzero(cov - np.diag(np.diag(cov))) == 0
        assert np.all(np.diag(cov) >= COVARIANCE_FLOOR)
        np.linalg.cholesky(cov)
        dense = propagate_covariance(chain, q, dense=True)
        assert np.allclose(np.diag(cov), np.maximum(np.diag(dense), COVARIANCE_FLOOR))


def _monte_carlo_diagonal(chain, q, n, seed):
    rng = np.random.default_rng(seed)
    fk0 = forward_kinematics(chain, q)
    samples = q + rng.normal(size=(n, chain.dof)) * chain.encoder_sigma
    res = np.array([lie.local_coordinates(fk0, forward_kinematics(chain, s)) for s in samples])
    return np.mean(res**2, axis=0)


def test_monte_carlo_covariance_single_joint():
    chain = single_joint(0.7, axis=(0.0, 0.6, 0.8), sigma=0.01)
    emp = _monte_carlo_diagonal(chain, np.array([0.4]), 100_000, 11)
    model = np.diag(propagate_covariance_dense(chain, [0.4]))
    nz = model > 1e-12
    assert np.all(np.abs(emp[nz] / model[nz] - 1.0) < 0.05)
    assert np.all(emp[~nz] < 1e-10)


def test_with_base_left_composes(rng):
    chain = random_chain(rng, 3)
    P = lie.exp(np.array([0.3, -0.2, 1.1, 0.5, -1.0, 2.0]))
    moved = chain.with_base(P)
    for _ in range(20):
        q = rng.uniform(-3, 3, 3)
        assert np.allclose(forward_kinematics(moved, q).matrix(), (P @ forward_kinematics(chain, q)).matrix(), atol=1e-12)


def test_chain_validation():
    with pytest.raises(ValueError):
        JointSpec("bad", np.array([1.0, 1.0, 0.0]))
    with pytest.raises(ValueError):
        KinematicChain(())
    with pytest.raises(ValueError):
        KinematicChain((JointSpec("a", np.array([1.0, 0, 0])),), encoder_sigma=[0.1, 0.2])
    with pytest.raises(ValueError):
        KinematicChain((JointSpec("a", np.array([1.0, 0, 0])),), encoder_sigma=[-0.1])
    with pytest.raises(ValueError):
        JointState([0.0, float("nan")])


def test_chain_dict_round_trip(rng):
    chain = random_chain(rng, 4)
    back = KinematicChain.from_dict(chain.to_dict())
    q = rng.uniform(-3, 3, 4)
    assert np.allclose(forward_kinematics(back, q).matrix(), forward_kinematics(chain, q).matrix(), atol=1e-15)
    assert np.array_equal(back.encoder_sigma, chain.encoder_sigma)
    assert np.array_equal(back.mount_sigma, chain.mount_sigma)


def test_demo_chain_geometry():
    chain = demo_leg_chain()
    assert [j.name for j in chain.joints] == ["lf_haa", "lf_hfe", "lf_kfe"]
    # straight leg hangs 0.7 m below the hip flexion joint
    p = forward_kinematics(chain, [0.0, 0.0, 0.0])
    assert np.allclose(p.translation, [0.47, 0.21, -0.7])
