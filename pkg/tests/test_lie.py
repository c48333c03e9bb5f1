import math
import pickle

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation as SciRotation

from conftest import hat, pose_close, random_twist
from fgcalib import lie
from fgcalib.errors import AngleNearPi
from fgcalib.lie import Pose, Rotation

finite = st.floats(-10.0, 10.0, allow_nan=False)
twists = st.tuples(*[st.floats(-1.8, 1.8)] * 3, *[finite] * 3).map(np.array)
quats = st.tuples(*[st.floats(-1.0, 1.0)] * 4).filter(lambda q: np.linalg.norm(q) > 1e-3).map(np.array)
poses = st.tuples(quats, st.tuples(finite, finite, finite)).map(lambda a: Pose(Rotation(a[0]), a[1]))


def test_compose_matches_homogeneous_product():
    a = Pose(lie.rot_z(math.pi / 2).rotation, [1.0, 0.0, 0.0])
    b = Pose.from_translation([1.0, 0.0, 0.0])
    c = lie.compose(a, b)
    assert np.allclose(c.translation, [1.0, 1.0, 0.0], atol=1e-15)
    assert np.allclose(c.matrix(), a.matrix() @ b.matrix(), atol=1e-15)
    assert lie.pose_distance(Pose(c.rotation), lie.rot_z(math.pi / 2))[0] < 1e-15


def test_identity_and_inverse_cases(rng):
    p = lie.exp(random_twist(rng))
    assert pose_close(lie.compose(Pose(), p), p, 1e-15)
    a, t = lie.pose_distance(lie.compose(p, lie.inverse(p)), Pose())
    assert a <= 1e-12 and t <= 1e-12
    assert pose_close(lie.inverse(Pose()), Pose(), 0.0)
    inv = lie.inverse(Pose.from_translation([1.0, 2.0, 3.0]))
    assert np.array_equal(inv.translation, [-1.0, -2.0, -3.0])


@settings(max_examples=200, deadline=None)
@given(poses, poses)
def test_compose_and_inverse_against_matrices(a, b):
    assert np.allclose((a @ b).matrix(), a.matrix() @ b.matrix(), atol=1e-12)
    assert np.allclose(lie.inverse(a).matrix(), np.linalg.inv(a.matrix()), atol=1e-10)


@settings(max_examples=200, deadline=None)
@given(poses, poses, poses)
def test_composition_is_associative(a, b, c):
    assert np.allclose(((a @ b) @ c).matrix(), (a @ (b @ c)).matrix(), atol=1e-12 * (1 + np.abs((a @ b @ c).translation).max()))


@settings(max_examples=200, deadline=None)
@given(poses, poses)
def test_quaternions_stay_canonical(a, b):
    for p in (a, b, a @ b, lie.inverse(a), lie.retract(a, lie.log(b) if b.rotation.angle < 3 else np.zeros(6))):
        q = p.q
        assert abs(float(q @ q) - 1.0) <= 1e-12
        assert q[0] >= 0.0


def test_exp_examples():
    assert pose_close(lie.exp(np.zeros(6)), Pose(), 0.0)
    p = lie.exp([0, 0, math.pi / 2, 0, 0, 0])
    assert np.allclose(p.rotation.matrix(), [[0, -1, 0], [1, 0, 0], [0, 0, 1]], atol=1e-15)
    assert np.allclose(p.translation, 0.0)
    p = lie.exp([0, 0, 0, 0.3, -2.0, 5.0])
    assert np.array_equal(p.translation, [0.3, -2.0, 5.0]) and p.rotation.angle == 0.0


def test_exp_matches_matrix_exponential(rng):
    for _ in range(200):
        xi = random_twist(rng)
        assert np.allclose(lie.exp(xi).matrix(), scipy.linalg.expm(hat(xi)), atol=1e-12)


def test_log_examples():
    assert np.array_equal(lie.log(Pose()), np.zeros(6))
    assert np.allclose(lie.log(Pose.from_translation([1.0, -2.0, 0.5])), [0, 0, 0, 1.0, -2.0, 0.5], atol=0.0)


def test_log_matches_matrix_logarithm(rng):
    for _ in range(50):
        xi = random_twist(rng, max_angle=2.5)
        M = scipy.linalg.logm(lie.exp(xi).matrix())
        ref = np.array([M[2, 1], M[0, 2], M[1, 0], *M[:3, 3]])
        assert np.allclose(lie.log(lie.exp(xi)), ref, atol=1e-9)


def test_log_exp_round_trip_1000_twists():
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(1000):
        xi = random_twist(rng, max_angle=3.0)
        worst = max(worst, float(np.max(np.abs(lie.log(lie.exp(xi)) - xi))))
    assert worst <= 1e-9


def test_exp_log_round_trip_pose(rng):
    for _ in range(100):
        p = lie.exp(random_twist(rng))
        assert pose_close(lie.exp(lie.log(p)), p, 1e-9)


def test_log_rejects_angles_near_pi():
    with pytest.raises(AngleNearPi) as info:
        lie.log(lie.rot_x(math.pi))
    assert info.value.angle >= math.pi - 1e-6
    with pytest.raises(AngleNearPi):
        lie.log(lie.rot_y(math.pi - 0.5e-6))
    lie.log(lie.rot_y(math.pi - 2e-6))


def test_retract_examples(rng):
    p = lie.exp(random_twist(rng))
    xi = random_twist(rng)
    assert pose_close(lie.retract(p, np.zeros(6)), p, 0.0)
    assert pose_close(lie.retract(Pose(), xi), lie.exp(xi), 1e-15)
    assert np.allclose(lie.retract(p, xi).matrix(), p.matrix() @ scipy.linalg.expm(hat(xi)), atol=1e-11)
    delta = random_twist(rng, max_angle=1.0)
    q = lie.retract(p, delta)
    back = lie.retract(q, lie.local_coordinates(q, p))
    assert pose_close(back, p, 1e-9)


def test_local_coordinates(rng):
    p = lie.exp(random_twist(rng))
    assert np.allclose(lie.local_coordinates(p, p), 0.0, atol=1e-15)
    xi = random_twist(rng, max_angle=2.5)
    assert np.allclose(lie.local_coordinates(Pose(), lie.exp(xi)), xi, atol=1e-12)
    for _ in range(100):
        a, b = lie.exp(random_twist(rng)), lie.exp(random_twist(rng))
        if (lie.inverse(a) @ b).rotation.angle > math.pi - 1e-3:
            continue
        assert pose_close(lie.retract(a, lie.local_coordinates(a, b)), b, 1e-9)


def test_chained_compositions_keep_unit_norm():
    rng = np.random.default_rng(7)
    steps = [lie.exp(random_twist(rng, max_angle=0.3, trans_scale=0.01)) for _ in range(16)]
    p = Pose()
    worst = 0.0
    for i in range(1_000_000):
        p = p @ steps[i & 15]
        if i % 1000 == 0:
            worst = max(worst, abs(float(p.q @ p.q) - 1.0))
    worst = max(worst, abs(float(p.q @ p.q) - 1.0))
    assert worst <= 1e-9


def test_small_angle_branch_continuity():
    u = np.array([0.3, -0.5, 0.8]) / np.linalg.norm([0.3, -0.5, 0.8])
    rho = np.array([0.2, -0.1, 0.4])
    tiny = lie.exp(np.concatenate([1e-10 * u, rho]))
    small = lie.exp(np.concatenate([1e-7 * u, rho]))
    # quaternion vector part is (theta/2) u to third order in both regimes
    assert np.allclose(tiny.q[1:] / 1e-10, small.q[1:] / 1e-7, atol=1e-12)
    # translation V(omega) rho = rho + omega x rho / 2 + O(theta^2)
    for theta, p in ((1e-10, tiny), (1e-7, small)):
        assert np.allclose(p.translation, rho + 0.5 * np.cross(theta * u, rho), atol=1e-12)


def test_exp_small_angle_agrees_with_matrix_exponential():
    for theta in (0.0, 1e-12, 1e-9, 5e-9, 2e-8, 1e-6, 1e-4, 2e-3):
        xi = np.array([theta, -theta, 0.5 * theta, 0.1, 0.2, 0.3])
        assert np.allclose(lie.exp(xi).matrix(), scipy.linalg.expm(hat(xi)), atol=1e-15)
        assert np.allclose(lie.log(lie.exp(xi)), xi, atol=1e-15)


def test_retract_jacobian_is_identity(rng):
    p = lie.exp(random_twist(rng))
    h = 1e-6
    J = np.zeros((6, 6))
    for i in range(6):
        d = np.zeros(6)
        d[i] = h
        J[:, i] = (lie.local_coordinates(p, lie.retract(p, d)) - lie.local_coordinates(p, lie.retract(p, -d))) / (2 * h)
    assert np.allclose(J, np.eye(6), atol=1e-6)


def test_right_jacobian_inverse_matches_finite_differences(rng):
    for _ in range(50):
        xi = random_twist(rng, max_angle=2.5)
        h = 1e-6
        J = np.zeros((6, 6))
        for i in range(6):
            d = np.zeros(6)
            d[i] = h
            J[:, i] = (lie.log(lie.exp(xi) @ lie.exp(d)) - lie.log(lie.exp(xi) @ lie.exp(-d))) / (2 * h)
        assert np.allclose(lie.se3_right_jacobian_inv(xi), J, atol=1e-7)
        assert np.allclose(lie.se3_right_jacobian(xi) @ lie.se3_right_jacobian_inv(xi), np.eye(6), atol=1e-12)


def test_adjoint_moves_perturbations_across(rng):
    p = lie.exp(random_twist(rng))
    xi = random_twist(rng, max_angle=1.0)
    # exp(Ad(p) xi) o p == p o exp(xi)
    assert pose_close(lie.exp(lie.adjoint(p) @ xi) @ p, p @ lie.exp(xi), 1e-12)


def test_batch_primitives_agree_with_scalar(rng):
    xis = np.array([random_twist(rng) for _ in range(64)])
    q, t = lie.se3_exp_arrays(xis)
    for i, xi in enumerate(xis):
        p = lie.exp(xi)
        assert np.allclose(q[i], p.q, atol=1e-15) and np.allclose(t[i], p.translation, atol=1e-14)
    assert np.allclose(lie.se3_log_arrays(q, t), [lie.log(Pose.from_arrays(q[i], t[i])) for i in range(64)], atol=1e-13)


def test_rotation_conversions_against_scipy(rng):
    for _ in range(50):
        v = random_twist(rng)[:3]
        r = Rotation.from_rotvec(v)
        ref = SciRotation.from_rotvec(v)
        assert np.allclose(r.matrix(), ref.as_matrix(), atol=1e-14)
        assert np.allclose(Rotation.from_matrix(ref.as_matrix()).matrix(), ref.as_matrix(), atol=1e-14)
        yaw, pitch, roll = ref.as_euler("ZYX")
        assert np.allclose(r.euler_zyx(), [roll, pitch, yaw], atol=1e-12)


def test_pose_serialization_round_trip(rng):
    p = lie.exp(random_twist(rng))
    values = p.to_list()
    assert len(values) == 7 and values[3] >= 0
    assert pose_close(Pose.from_list(values), p, 0.0)
    flipped = values[:3] + [-v for v in values[3:]]
    assert pose_close(Pose.from_list(flipped), p, 1e-15)
    with pytest.raises(ValueError):
        Pose.from_list([0, 0, 0, 0, 0, 0, 0])
    with pytest.raises(ValueError):
        Pose.from_list([0, 0, 0, 1, 0, 0])


def test_values_are_immutable_and_pickle_exactly(rng):
    p = lie.exp(random_twist(rng))
    with pytest.raises(AttributeError):
        p.translation = np.zeros(3)
    with pytest.raises(ValueError):
        p.translation[0] = 1.0
    back = pickle.loads(pickle.dumps(p))
    assert np.array_equal(back.q, p.q) and np.array_equal(back.translation, p.translation)


def test_chordal_mean():
    r = lie.rot_z(0.4).rotation
    assert lie.pose_distance(Pose(lie.chordal_mean([r, r, r])), Pose(r))[0] < 1e-12
    m = lie.chordal_mean([lie.rot_z(0.2).rotation, lie.rot_z(-0.2).rotation])
    assert m.angle < 1e-12
