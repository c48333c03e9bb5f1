"""SO(3)/SE(3) group operations, exponential and logarithm maps, Jacobians.

Conventions used everywhere in the package:

* quaternions are ``(w, x, y, z)``, unit norm, canonical sign ``w >= 0``;
* a twist is a 6-vector ``(omega, rho)``, rotation first;
* perturbations are applied on the right, ``p o exp(delta)``;
* the pose residual between ``a`` and ``b`` is ``log(a^-1 o b)``.

The array primitives (``quat_*``, ``so3_*``, ``se3_*``) broadcast over any
number of leading dimensions so that the solver can process all factors of
a graph in one call.  :class:`Pose` is the immutable scalar value type.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

from .errors import AngleNearPi

#: Below this angle ``exp`` switches to its second-order series.
EXP_SMALL_ANGLE = 1e-8
#: ``log`` refuses rotations whose angle is at least ``pi - LOG_PI_MARGIN``.
LOG_PI_MARGIN = 1e-6
# Jacobian and V-matrix coefficients use Taylor series below this angle;
# truncation error is O(theta^6) < 1e-18 there.
_COEFF_SERIES_ANGLE = 1e-3


# ---------------------------------------------------------------------------
# array primitives
# ---------------------------------------------------------------------------


def skew(v: np.ndarray) -> np.ndarray:
    """Hat operator, ``skew(a) @ b == cross(a, b)``; broadcasts over ``(..., 3)``."""
    v = np.asarray(v, dtype=float)
    z = np.zeros(v.shape[:-1])
    x, y, w = v[..., 0], v[..., 1], v[..., 2]
    return np.stack(
        [
            np.stack([z, -w, y], axis=-1),
            np.stack([w, z, -x], axis=-1),
            np.stack([-y, x, z], axis=-1),
        ],
        axis=-2,
    )


def quat_normalize(q: np.ndarray) -> np.ndarray:
    """Unit-normalize and flip to the ``w >= 0`` hemisphere."""
    q = np.asarray(q, dtype=float)
    q = q / np.linalg.norm(q, axis=-1, keepdims=True)
    sign = np.where(q[..., :1] < 0.0, -1.0, 1.0)
    return q * sign


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product ``a * b``."""
    aw, ax, ay, az = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    bw, bx, by, bz = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    return np.stack(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        axis=-1,
    )


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate vectors ``v`` by unit quaternions ``q``."""
    w = q[..., :1]
    u = q[..., 1:]
    c = np.cross(u, v)
    return v + 2.0 * (w * c + np.cross(u, c))


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    return np.stack(
        [
            np.stack([1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)], axis=-1),
            np.stack([2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)], axis=-1),
            np.stack([2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)], axis=-1),
        ],
        axis=-2,
    )


def matrix_to_quat(R: np.ndarray) -> np.ndarray:
    """Rotation matrix to canonical quaternion (Shepperd's method, single matrix)."""
    R = np.asarray(R, dtype=float)
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    diag = (R[0, 0], R[1, 1], R[2, 2])
    if tr >= max(diag):
        s = 2.0 * math.sqrt(1.0 + tr)
        q = [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s]
    elif diag[0] >= diag[1] and diag[0] >= diag[2]:
        s = 2.0 * math.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2])
        q = [(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s]
    elif diag[1] >= diag[2]:
        s = 2.0 * math.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2])
        q = [(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s]
    else:
        s = 2.0 * math.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1])
        q = [(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s]
    return quat_normalize(np.array(q))


def _series_or(theta, series, closed):
    """Evaluate ``closed(theta)`` away from zero and ``series(theta)`` near it."""
    small = theta < _COEFF_SERIES_ANGLE
    safe = np.where(small, 1.0, theta)
    return np.where(small, series(theta), closed(safe))


def _coeff_a1(t):
    # (1 - cos t) / t^2
    return _series_or(
        t,
        lambda t: 0.5 - t**2 / 24.0 + t**4 / 720.0,
        lambda t: 2.0 * np.sin(0.5 * t) ** 2 / t**2,
    )


def _coeff_a2(t):
    # (t - sin t) / t^3
    return _series_or(
        t,
        lambda t: 1.0 / 6.0 - t**2 / 120.0 + t**4 / 5040.0,
        lambda t: (t - np.sin(t)) / t**3,
    )


def _coeff_a3(t):
    # (t^2 + 2 cos t - 2) / (2 t^4)
    return _series_or(
        t,
        lambda t: 1.0 / 24.0 - t**2 / 720.0 + t**4 / 40320.0,
        lambda t: (t**2 + 2.0 * np.cos(t) - 2.0) / (2.0 * t**4),
    )


def _coeff_a4(t):
    # (2t - 3 sin t + t cos t) / (2 t^5)
    return _series_or(
        t,
        lambda t: 1.0 / 120.0 - t**2 / 2520.0 + t**4 / 120960.0,
        lambda t: (2.0 * t - 3.0 * np.sin(t) + t * np.cos(t)) / (2.0 * t**5),
    )


def _coeff_inv(t):
    # 1/t^2 - (1 + cos t) / (2 t sin t); only valid for t < pi
    return _series_or(
        t,
        lambda t: 1.0 / 12.0 + t**2 / 720.0 + t**4 / 30240.0,
        lambda t: 1.0 / t**2 - (1.0 + np.cos(t)) / (2.0 * t * np.sin(t)),
    )


def _angle(omega: np.ndarray) -> np.ndarray:
    return np.linalg.norm(omega, axis=-1)


def _mat_coeff(c: np.ndarray) -> np.ndarray:
    return np.asarray(c)[..., None, None]


def so3_exp(omega: np.ndarray) -> np.ndarray:
    """Rotation vector to canonical unit quaternion."""
    omega = np.asarray(omega, dtype=float)
    theta = _angle(omega)
    small = theta < EXP_SMALL_ANGLE
    safe = np.where(small, 1.0, theta)
    w = np.where(small, 1.0 - theta**2 / 8.0, np.cos(0.5 * theta))
    k = np.where(small, 0.5 - theta**2 / 48.0, np.sin(0.5 * safe) / safe)
    return quat_normalize(np.concatenate([w[..., None], k[..., None] * omega], axis=-1))


def so3_log(q: np.ndarray) -> np.ndarray:
    """Unit quaternion to rotation vector.

    Raises :class:`AngleNearPi` when any angle is ``>= pi - LOG_PI_MARGIN``.
    """
    q = np.asarray(q, dtype=float)
    q = q * np.where(q[..., :1] < 0.0, -1.0, 1.0)
    w = q[..., 0]
    v = q[..., 1:]
    s = np.linalg.norm(v, axis=-1)
    theta = 2.0 * np.arctan2(s, w)
    bad = theta >= math.pi - LOG_PI_MARGIN
    if np.any(bad):
        raise AngleNearPi(float(np.max(theta)))
    small = s < 0.5 * EXP_SMALL_ANGLE
    safe_s = np.where(small, 1.0, s)
    safe_w = np.where(small, w, 1.0)
    k = np.where(small, 2.0 / safe_w * (1.0 - s**2 / (3.0 * safe_w**2)), theta / safe_s)
    return k[..., None] * v


def so3_left_jacobian(omega: np.ndarray) -> np.ndarray:
    """``V`` matrix of the SE(3) exponential, equal to the SO(3) left Jacobian."""
    theta = _angle(omega)
    W = skew(omega)
    return np.eye(3) + _mat_coeff(_coeff_a1(theta)) * W + _mat_coeff(_coeff_a2(theta)) * (W @ W)


def so3_left_jacobian_inv(omega: np.ndarray) -> np.ndarray:
    theta = _angle(omega)
    W = skew(omega)
    return np.eye(3) - 0.5 * W + _mat_coeff(_coeff_inv(theta)) * (W @ W)


def so3_right_jacobian(omega: np.ndarray) -> np.ndarray:
    return so3_left_jacobian(-np.asarray(omega, dtype=float))


def so3_right_jacobian_inv(omega: np.ndarray) -> np.ndarray:
    return so3_left_jacobian_inv(-np.asarray(omega, dtype=float))


def _se3_q_block(omega: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Off-diagonal block of the SE(3) left Jacobian (rotation-first ordering)."""
    theta = _angle(omega)
    W = skew(omega)
    P = skew(rho)
    WP = W @ P
    PW = P @ W
    WPW = WP @ W
    WWP = W @ WP
    PWW = PW @ W
    return (
        0.5 * P
        + _mat_coeff(_coeff_a2(theta)) * (WP + PW + WPW)
        + _mat_coeff(_coeff_a3(theta)) * (WWP + PWW - 3.0 * WPW)
        + _mat_coeff(_coeff_a4(theta)) * (WPW @ W + W @ WPW)
    )


def se3_left_jacobian(xi: np.ndarray) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    omega, rho = xi[..., :3], xi[..., 3:]
    J = so3_left_jacobian(omega)
    out = np.zeros(xi.shape[:-1] + (6, 6))
    out[..., :3, :3] = J
    out[..., 3:, 3:] = J
    out[..., 3:, :3] = _se3_q_block(omega, rho)
    return out


def se3_right_jacobian(xi: np.ndarray) -> np.ndarray:
    """``exp(xi + d) ~= exp(xi) o exp(Jr(xi) d)``."""
    return se3_left_jacobian(-np.asarray(xi, dtype=float))


def se3_right_jacobian_inv(xi: np.ndarray) -> np.ndarray:
    """Derivative of ``log(T o exp(d))`` with respect to ``d`` at ``xi = log(T)``."""
    xi = -np.asarray(xi, dtype=float)
    omega, rho = xi[..., :3], xi[..., 3:]
    Jinv = so3_left_jacobian_inv(omega)
    Q = _se3_q_block(omega, rho)
    out = np.zeros(xi.shape[:-1] + (6, 6))
    out[..., :3, :3] = Jinv
    out[..., 3:, 3:] = Jinv
    out[..., 3:, :3] = -Jinv @ Q @ Jinv
    return out


def se3_adjoint(R: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Adjoint ``[[R, 0], [t^ R, R]]`` so that ``T exp(xi) T^-1 = exp(Ad xi)``."""
    out = np.zeros(R.shape[:-2] + (6, 6))
    out[..., :3, :3] = R
    out[..., 3:, 3:] = R
    out[..., 3:, :3] = skew(t) @ R
    return out


def se3_exp_arrays(xi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Twist(s) to ``(quaternion, translation)`` arrays."""
    xi = np.asarray(xi, dtype=float)
    omega, rho = xi[..., :3], xi[..., 3:]
    q = so3_exp(omega)
    t = np.einsum("...ij,...j->...i", so3_left_jacobian(omega), rho)
    return q, t


def se3_log_arrays(q: np.ndarray, t: np.ndarray) -> np.ndarray:
    """``(quaternion, translation)`` arrays to twist(s)."""
    omega = so3_log(q)
    rho = np.einsum("...ij,...j->...i", so3_left_jacobian_inv(omega), t)
    return np.concatenate([omega, rho], axis=-1)


def relative_arrays(qa, ta, qb, tb) -> tuple[np.ndarray, np.ndarray]:
    """``a^-1 o b`` on quaternion/translation arrays."""
    qa_inv = quat_conjugate(qa)
    return quat_normalize(quat_multiply(qa_inv, qb)), quat_rotate(qa_inv, tb - ta)


# ---------------------------------------------------------------------------
# value types
# ---------------------------------------------------------------------------


def _unit_quat(w: float, x: float, y: float, z: float) -> np.ndarray:
    n = math.sqrt(w * w + x * x + y * y + z * z)
    if not n > 0.0 or not math.isfinite(n):
        raise ValueError("quaternion must be finite and non-zero")
    if w < 0.0:
        n = -n
    q = np.array([w / n, x / n, y / n, z / n])
    q.setflags(write=False)
    return q


def _qmul_floats(a, b):
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return (
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    )


def _rotate_floats(q, v):
    w, x, y, z = q
    vx, vy, vz = v
    cx = y * vz - z * vy
    cy = z * vx - x * vz
    cz = x * vy - y * vx
    return (
        vx + 2.0 * (w * cx + y * cz - z * cy),
        vy + 2.0 * (w * cy + z * cx - x * cz),
        vz + 2.0 * (w * cz + x * cy - y * cx),
    )


def _make_pose(q: np.ndarray, t) -> "Pose":
    # q already unit and canonical; skips validation on the hot path
    rot = Rotation.__new__(Rotation)
    object.__setattr__(rot, "q", q)
    pose = Pose.__new__(Pose)
    t = np.array(t, dtype=float)
    t.setflags(write=False)
    object.__setattr__(pose, "rotation", rot)
    object.__setattr__(pose, "translation", t)
    return pose


def _restore_rotation(q):
    # unpickling must not renormalize, so that worker processes see identical bits
    r = object.__new__(Rotation)
    arr = np.array(q, dtype=float)
    arr.setflags(write=False)
    object.__setattr__(r, "q", arr)
    return r


def _restore_pose(rotation, translation):
    p = object.__new__(Pose)
    t = np.array(translation, dtype=float)
    t.setflags(write=False)
    object.__setattr__(p, "rotation", rotation)
    object.__setattr__(p, "translation", t)
    return p


class Rotation:
    """Immutable unit quaternion ``(w, x, y, z)`` with ``w >= 0``."""

    __slots__ = ("q",)

    def __init__(self, q: Sequence[float] = (1.0, 0.0, 0.0, 0.0)):
        w, x, y, z = (float(c) for c in np.asarray(q, dtype=float).reshape(4))
        object.__setattr__(self, "q", _unit_quat(w, x, y, z))

    def __setattr__(self, name, value):
        raise AttributeError("Rotation is immutable")

    def __reduce__(self):
        return (_restore_rotation, (self.q.tolist(),))

    @classmethod
    def identity(cls) -> "Rotation":
        return cls()

    @classmethod
    def from_rotvec(cls, omega: Sequence[float]) -> "Rotation":
        return cls(so3_exp(np.asarray(omega, dtype=float)))

    @classmethod
    def from_axis_angle(cls, axis: Sequence[float], angle: float) -> "Rotation":
        axis = np.asarray(axis, dtype=float)
        return cls.from_rotvec(axis / np.linalg.norm(axis) * angle)

    @classmethod
    def from_matrix(cls, R: np.ndarray) -> "Rotation":
        return cls(matrix_to_quat(R))

    def matrix(self) -> np.ndarray:
        return quat_to_matrix(self.q)

    def rotvec(self) -> np.ndarray:
        return so3_log(self.q)

    @property
    def angle(self) -> float:
        return 2.0 * math.atan2(float(np.linalg.norm(self.q[1:])), float(self.q[0]))

    def inverse(self) -> "Rotation":
        return Rotation(quat_conjugate(self.q))

    def __mul__(self, other: "Rotation") -> "Rotation":
        return Rotation(quat_multiply(self.q, other.q))

    def apply(self, v: Sequence[float]) -> np.ndarray:
        return quat_rotate(self.q, np.asarray(v, dtype=float))

    def euler_zyx(self) -> np.ndarray:
        """``(roll, pitch, yaw)`` in radians for ``R = Rz(yaw) Ry(pitch) Rx(roll)``."""
        w, x, y, z = self.q
        roll = math.atan2(2.0 * (w * x + y * z), 1.0 - 2.0 * (x * x + y * y))
        pitch = math.asin(max(-1.0, min(1.0, 2.0 * (w * y - z * x))))
        yaw = math.atan2(2.0 * (w * z + x * y), 1.0 - 2.0 * (y * y + z * z))
        return np.array([roll, pitch, yaw])

    def __repr__(self):
        return f"Rotation({self.q.tolist()})"


class Pose:
    """Rigid transform ``T_parent_child``: rotation plus translation in meters."""

    __slots__ = ("rotation", "translation")

    def __init__(self, rotation: Rotation | None = None, translation: Sequence[float] = (0.0, 0.0, 0.0)):
        t = np.array(translation, dtype=float).reshape(3)
        if not np.all(np.isfinite(t)):
            raise ValueError("translation must be finite")
        t.setflags(write=False)
        object.__setattr__(self, "rotation", rotation if rotation is not None else Rotation())
        object.__setattr__(self, "translation", t)

    def __setattr__(self, name, value):
        raise AttributeError("Pose is immutable")

    def __reduce__(self):
        return (_restore_pose, (self.rotation, self.translation.tolist()))

    @classmethod
    def identity(cls) -> "Pose":
        return cls()

    @classmethod
    def from_arrays(cls, q: np.ndarray, t: np.ndarray) -> "Pose":
        return cls(Rotation(q), t)

    @classmethod
    def from_matrix(cls, T: np.ndarray) -> "Pose":
        T = np.asarray(T, dtype=float)
        return cls(Rotation.from_matrix(T[:3, :3]), T[:3, 3])

    @classmethod
    def from_translation(cls, t: Sequence[float]) -> "Pose":
        return cls(Rotation(), t)

    @classmethod
    def from_list(cls, values: Iterable[float]) -> "Pose":
        """Parse ``[x, y, z, qw, qx, qy, qz]``."""
        v = [float(x) for x in values]
        if len(v) != 7:
            raise ValueError(f"pose needs 7 numbers, got {len(v)}")
        if not all(math.isfinite(x) for x in v):
            raise ValueError("pose contains non-finite values")
        return cls(Rotation(v[3:]), v[:3])

    def to_list(self) -> list[float]:
        return [float(x) for x in self.translation] + [float(x) for x in self.rotation.q]

    @property
    def q(self) -> np.ndarray:
        return self.rotation.q

    def matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.rotation.matrix()
        T[:3, 3] = self.translation
        return T

    def transform_point(self, p: Sequence[float]) -> np.ndarray:
        return self.rotation.apply(p) + self.translation

    def inverse(self) -> "Pose":
        return inverse(self)

    def __matmul__(self, other: "Pose") -> "Pose":
        return compose(self, other)

    def __repr__(self):
        return f"Pose({self.to_list()})"


def compose(a: Pose, b: Pose) -> Pose:
    """``a o b``: maps b's child frame into a's parent frame."""
    qa = a.rotation.q.tolist()
    qb = b.rotation.q.tolist()
    tx, ty, tz = _rotate_floats(qa, b.translation.tolist())
    ax, ay, az = a.translation.tolist()
    return _make_pose(_unit_quat(*_qmul_floats(qa, qb)), [tx + ax, ty + ay, tz + az])


def inverse(p: Pose) -> Pose:
    w, x, y, z = p.rotation.q.tolist()
    q_inv = [w, -x, -y, -z]
    tx, ty, tz = _rotate_floats(q_inv, p.translation.tolist())
    return _make_pose(_unit_quat(*q_inv), [-tx, -ty, -tz])


def _cross(a, b):
    return (a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0])


def _scalar_coeff(theta: float, series, closed) -> float:
    return series(theta) if theta < _COEFF_SERIES_ANGLE else closed(theta)


def exp(xi: Sequence[float]) -> Pose:
    """Closed-form SE(3) exponential of a ``(omega, rho)`` twist."""
    wx, wy, wz, rx, ry, rz = (float(v) for v in np.asarray(xi, dtype=float).reshape(6))
    if not all(math.isfinite(v) for v in (wx, wy, wz, rx, ry, rz)):
        raise ValueError("twist must be finite")
    theta2 = wx * wx + wy * wy + wz * wz
    theta = math.sqrt(theta2)
    if theta < EXP_SMALL_ANGLE:
        qw = 1.0 - theta2 / 8.0
        k = 0.5 - theta2 / 48.0
        a1 = 0.5 - theta2 / 24.0
        a2 = 1.0 / 6.0 - theta2 / 120.0
    else:
        qw = math.cos(0.5 * theta)
        k = math.sin(0.5 * theta) / theta
        a1 = _scalar_coeff(theta, lambda t: 0.5 - t**2 / 24.0 + t**4 / 720.0,
                           lambda t: 2.0 * math.sin(0.5 * t) ** 2 / t**2)
        a2 = _scalar_coeff(theta, lambda t: 1.0 / 6.0 - t**2 / 120.0 + t**4 / 5040.0,
                           lambda t: (t - math.sin(t)) / t**3)
    w = (wx, wy, wz)
    rho = (rx, ry, rz)
    c1 = _cross(w, rho)
    c2 = _cross(w, c1)
    t = [rho[i] + a1 * c1[i] + a2 * c2[i] for i in range(3)]
    return _make_pose(_unit_quat(qw, k * wx, k * wy, k * wz), t)


def _log_floats(q, t) -> np.ndarray:
    w, x, y, z = q
    if w < 0.0:
        w, x, y, z = -w, -x, -y, -z
    s = math.sqrt(x * x + y * y + z * z)
    theta = 2.0 * math.atan2(s, w)
    if theta >= math.pi - LOG_PI_MARGIN:
        raise AngleNearPi(theta)
    if s < 0.5 * EXP_SMALL_ANGLE:
        k = 2.0 / w * (1.0 - s * s / (3.0 * w * w))
    else:
        k = theta / s
    omega = (k * x, k * y, k * z)
    c = _scalar_coeff(theta, lambda t: 1.0 / 12.0 + t**2 / 720.0 + t**4 / 30240.0,
                      lambda t: 1.0 / t**2 - (1.0 + math.cos(t)) / (2.0 * t * math.sin(t)))
    c1 = _cross(omega, t)
    c2 = _cross(omega, c1)
    rho = [t[i] - 0.5 * c1[i] + c * c2[i] for i in range(3)]
    return np.array(list(omega) + rho)


def log(p: Pose) -> np.ndarray:
    """SE(3) logarithm; raises :class:`AngleNearPi` near a half turn."""
    return _log_floats(p.rotation.q.tolist(), p.translation.tolist())


def retract(p: Pose, delta: Sequence[float]) -> Pose:
    return compose(p, exp(delta))


def local_coordinates(a: Pose, b: Pose) -> np.ndarray:
    """Twist ``d`` with ``retract(a, d) == b``."""
    return log(compose(inverse(a), b))


def adjoint(p: Pose) -> np.ndarray:
    return se3_adjoint(p.rotation.matrix(), p.translation)


def rot_x(angle: float) -> Pose:
    return Pose(Rotation.from_axis_angle((1.0, 0.0, 0.0), angle))


def rot_y(angle: float) -> Pose:
    return Pose(Rotation.from_axis_angle((0.0, 1.0, 0.0), angle))


def rot_z(angle: float) -> Pose:
    return Pose(Rotation.from_axis_angle((0.0, 0.0, 1.0), angle))


def pose_distance(a: Pose, b: Pose) -> tuple[float, float]:
    """Rotation angle (rad) and translation distance (m) between two poses."""
    rel = compose(inverse(a), b)
    return rel.rotation.angle, float(np.linalg.norm(b.translation - a.translation))


def chordal_mean(rotations: Sequence[Rotation]) -> Rotation:
    """Rotation closest (Frobenius) to the arithmetic mean of the matrices."""
    M = sum(r.matrix() for r in rotations)
    U, _, Vt = np.linalg.svd(M)
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(U @ Vt))])
    return Rotation.from_matrix(U @ D @ Vt)
