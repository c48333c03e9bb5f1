"""Variables and factors of the calibration graph.

Two factor types exist: a unary pose prior and a binary camera-to-landmark
relative pose.  Residuals are whitened, ``sqrt_info @ log(measured^-1 o predicted)``,
and Jacobians are taken with respect to right perturbations of the variables.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import lie
from .errors import AngleNearPi
from .lie import Pose


class Kind(enum.IntEnum):
    CAMERA = 0
    LANDMARK = 1


@dataclass(frozen=True, order=True)
class VariableKey:
    kind: Kind
    index: int

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if int(self.index) < 0:
            raise ValueError("variable index must be non-negative")
        object.__setattr__(self, "index", int(self.index))

    def __str__(self):
        return f"{'X' if self.kind is Kind.CAMERA else 'L'}{self.index}"


def X(i: int) -> VariableKey:
    """Key of camera extrinsic ``i``."""
    return VariableKey(Kind.CAMERA, i)


def L(i: int) -> VariableKey:
    """Key of marker landmark ``i``."""
    return VariableKey(Kind.LANDMARK, i)


def sqrt_information(covariance: np.ndarray) -> np.ndarray:
    """Upper-triangular ``R`` with ``R^T R = covariance^-1``."""
    cov = np.asarray(covariance, dtype=float)
    if cov.shape != (6, 6):
        raise ValueError(f"covariance must be 6x6, got {cov.shape}")
    d = np.diag(cov)
    if np.count_nonzero(cov - np.diag(d)) == 0:
        if np.any(d <= 0):
            raise ValueError("covariance must be positive definite")
        return np.diag(1.0 / np.sqrt(d))
    try:
        info = np.linalg.inv(0.5 * (cov + cov.T))
        return np.linalg.cholesky(0.5 * (info + info.T)).T
    except np.linalg.LinAlgError as exc:
        raise ValueError("covariance must be positive definite") from exc


@dataclass(frozen=True)
class PriorFactor:
    target: VariableKey
    measured: Pose
    sqrt_info: np.ndarray

    @classmethod
    def from_covariance(cls, target: VariableKey, measured: Pose, covariance: np.ndarray) -> "PriorFactor":
        return cls(target, measured, sqrt_information(covariance))

    @property
    def keys(self) -> tuple[VariableKey, ...]:
        return (self.target,)


@dataclass(frozen=True)
class RelativePoseFactor:
    """Marker pose ``measured`` observed in the frame of camera ``source``."""

    source: VariableKey
    target: VariableKey
    measured: Pose
    sqrt_info: np.ndarray

    def __post_init__(self):
        if self.source.kind is not Kind.CAMERA or self.target.kind is not Kind.LANDMARK:
            raise ValueError("relative factors connect a camera to a landmark")

    @classmethod
    def from_covariance(cls, source: VariableKey, target: VariableKey, measured: Pose, covariance: np.ndarray) -> "RelativePoseFactor":
        return cls(source, target, measured, sqrt_information(covariance))

    @property
    def keys(self) -> tuple[VariableKey, ...]:
        return (self.source, self.target)


def residual_prior(f: PriorFactor, x: Pose) -> np.ndarray:
    return f.sqrt_info @ lie.local_coordinates(f.measured, x)


def linearize_prior(f: PriorFactor, x: Pose) -> tuple[np.ndarray, np.ndarray]:
    """Whitened residual and its 6x6 Jacobian."""
    e = lie.local_coordinates(f.measured, x)
    return f.sqrt_info @ e, f.sqrt_info @ lie.se3_right_jacobian_inv(e)


def predict_relative(x_cam: Pose, landmark: Pose) -> Pose:
    """Marker pose in the camera frame given both poses in the base frame."""
    return lie.inverse(x_cam) @ landmark


def residual_relative(f: RelativePoseFactor, x_cam: Pose, landmark: Pose) -> np.ndarray:
    return f.sqrt_info @ lie.local_coordinates(f.measured, predict_relative(x_cam, landmark))


def linearize_relative(f: RelativePoseFactor, x_cam: Pose, landmark: Pose) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Whitened residual and Jacobians with respect to the camera and the landmark."""
    pred = predict_relative(x_cam, landmark)
    e = lie.local_coordinates(f.measured, pred)
    Jr_inv = lie.se3_right_jacobian_inv(e)
    J_landmark = f.sqrt_info @ Jr_inv
    # camera perturbation acts as exp(-Ad(pred^-1) d) on the right of the error
    J_camera = -J_landmark @ lie.adjoint(lie.inverse(pred))
    return f.sqrt_info @ e, J_camera, J_landmark


# ---------------------------------------------------------------------------
# batched evaluation over arrays of factors
# ---------------------------------------------------------------------------


def _log_checked(q: np.ndarray, t: np.ndarray, labels) -> np.ndarray:
    try:
        return lie.se3_log_arrays(q, t)
    except AngleNearPi:
        s = np.linalg.norm(q[..., 1:], axis=-1)
        theta = 2.0 * np.arctan2(s, np.abs(q[..., 0]))
        k = int(np.argmax(theta))
        raise AngleNearPi(float(theta[k]), labels[k] if labels is not None else k) from None


def batch_prior(mq, mt, sqrt_info, xq, xt, labels=None, jacobians=True):
    """Residuals ``(K, 6)`` and optionally Jacobians ``(K, 6, 6)`` of K priors."""
    q, t = lie.relative_arrays(mq, mt, xq, xt)
    e = _log_checked(q, t, labels)
    r = np.einsum("kij,kj->ki", sqrt_info, e)
    if not jacobians:
        return r
    return r, sqrt_info @ lie.se3_right_jacobian_inv(e)


def batch_relative(mq, mt, sqrt_info, cq, ct, lq, lt, labels=None, jacobians=True):
    """Residuals and Jacobians (camera, landmark) of K relative factors."""
    pq, pt = lie.relative_arrays(cq, ct, lq, lt)
    q, t = lie.relative_arrays(mq, mt, pq, pt)
    e = _log_checked(q, t, labels)
    r = np.einsum("kij,kj->ki", sqrt_info, e)
    if not jacobians:
        return r
    J_landmark = sqrt_info @ lie.se3_right_jacobian_inv(e)
    inv_q = lie.quat_conjugate(pq)
    inv_R = lie.quat_to_matrix(inv_q)
    inv_t = -lie.quat_rotate(inv_q, pt)
    J_camera = -J_landmark @ lie.se3_adjoint(inv_R, inv_t)
    return r, J_camera, J_landmark


def numerical_jacobian(fn, x: Pose, h: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of ``fn`` under right perturbations of ``x``."""
    cols = []
    for i in range(6):
        d = np.zeros(6)
        d[i] = h
        cols.append((np.asarray(fn(lie.retract(x, d))) - np.asarray(fn(lie.retract(x, -d)))) / (2.0 * h))
    return np.stack(cols, axis=-1)


def relative_error(analytic: np.ndarray, reference: np.ndarray) -> float:
    """Frobenius-norm relative error, guarded for all-zero references."""
    scale = max(float(np.linalg.norm(reference)), 1.0e-12)
    err = float(np.linalg.norm(np.asarray(analytic) - np.asarray(reference)))
    if not math.isfinite(err):
        return math.inf
    return err / scale
