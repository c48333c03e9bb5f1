"""Serial revolute chains: forward kinematics, Jacobian, covariance propagation.

A chain maps the robot base frame to the marker frame::

    T_base_marker(q) = origin_1 o R(axis_1, q_1) o ... o origin_n o R(axis_n, q_n) o tool

The Jacobian is expressed in the right-perturbation chart at the end pose,
so ``local_coordinates(FK(q), FK(q + dq)) ~= J dq``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import lie
from .errors import ArityMismatch
from .lie import Pose

#: Floor applied to every diagonal entry of a propagated covariance.
COVARIANCE_FLOOR = 1e-12


@dataclass(frozen=True)
class JointSpec:
    name: str
    axis: np.ndarray
    origin: Pose = field(default_factory=Pose)

    def __post_init__(self):
        axis = np.asarray(self.axis, dtype=float).reshape(3)
        n = np.linalg.norm(axis)
        if not abs(n - 1.0) <= 1e-9:
            raise ValueError(f"joint {self.name!r}: axis must be unit length, got norm {n}")
        axis.setflags(write=False)
        object.__setattr__(self, "axis", axis)

    def rotation(self, angle: float) -> Pose:
        return lie.exp(np.concatenate([self.axis * angle, np.zeros(3)]))


@dataclass(frozen=True)
class JointState:
    angles: np.ndarray
    timestamp: float = 0.0

    def __post_init__(self):
        angles = np.array(self.angles, dtype=float).reshape(-1)
        if not np.all(np.isfinite(angles)):
            raise ValueError("joint angles must be finite")
        angles.setflags(write=False)
        object.__setattr__(self, "angles", angles)


@dataclass(frozen=True)
class KinematicChain:
    """Immutable chain description plus its noise model.

    ``mount_sigma`` follows the twist ordering: three rotational standard
    deviations (rad) then three translational ones (m).
    """

    joints: tuple[JointSpec, ...]
    tool: Pose = field(default_factory=Pose)
    encoder_sigma: np.ndarray | None = None
    mount_sigma: np.ndarray | None = None

    def __post_init__(self):
        joints = tuple(self.joints)
        if not joints:
            raise ValueError("a kinematic chain needs at least one joint")
        enc = np.zeros(len(joints)) if self.encoder_sigma is None else np.array(self.encoder_sigma, dtype=float).reshape(-1)
        mount = np.zeros(6) if self.mount_sigma is None else np.array(self.mount_sigma, dtype=float).reshape(-1)
        if enc.shape != (len(joints),):
            raise ValueError(f"encoder_sigma needs {len(joints)} entries, got {enc.size}")
        if mount.shape != (6,):
            raise ValueError(f"mount_sigma needs 6 entries, got {mount.size}")
        if np.any(enc < 0) or np.any(mount < 0) or not np.all(np.isfinite(np.concatenate([enc, mount]))):
            raise ValueError("sigmas must be finite and non-negative")
        enc.setflags(write=False)
        mount.setflags(write=False)
        object.__setattr__(self, "joints", joints)
        object.__setattr__(self, "encoder_sigma", enc)
        object.__setattr__(self, "mount_sigma", mount)

    @property
    def dof(self) -> int:
        return len(self.joints)

    def with_base(self, base: Pose) -> "KinematicChain":
        """Chain whose outputs are left-multiplied by the fixed pose ``base``."""
        first = self.joints[0]
        joints = (JointSpec(first.name, first.axis, lie.compose(base, first.origin)),) + self.joints[1:]
        return KinematicChain(joints, self.tool, self.encoder_sigma, self.mount_sigma)

    def with_sigmas(self, encoder_sigma=None, mount_sigma=None) -> "KinematicChain":
        return KinematicChain(
            self.joints,
            self.tool,
            self.encoder_sigma if encoder_sigma is None else encoder_sigma,
            self.mount_sigma if mount_sigma is None else mount_sigma,
        )

    def to_dict(self) -> dict:
        return {
            "joints": [
                {"name": j.name, "axis": [float(a) for a in j.axis], "origin": j.origin.to_list()}
                for j in self.joints
            ],
            "tool": self.tool.to_list(),
            "encoder_sigma": [float(s) for s in self.encoder_sigma],
            "mount_sigma": [float(s) for s in self.mount_sigma],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "KinematicChain":
        joints = [
            JointSpec(str(j["name"]), np.asarray(j["axis"], dtype=float), Pose.from_list(j.get("origin", [0, 0, 0, 1, 0, 0, 0])))
            for j in data["joints"]
        ]
        return cls(
            tuple(joints),
            Pose.from_list(data.get("tool", [0, 0, 0, 1, 0, 0, 0])),
            data.get("encoder_sigma"),
            data.get("mount_sigma"),
        )


def _angles(chain: KinematicChain, q) -> np.ndarray:
    angles = q.angles if isinstance(q, JointState) else np.asarray(q, dtype=float).reshape(-1)
    if angles.shape != (chain.dof,):
        raise ArityMismatch(f"chain has {chain.dof} joints, got {angles.size} angles")
    return angles


def forward_kinematics(chain: KinematicChain, q: JointState | Sequence[float]) -> Pose:
    """Marker pose in the base frame for joint angles ``q``."""
    angles = _angles(chain, q)
    T = Pose()
    for joint, angle in zip(chain.joints, angles):
        T = T @ joint.origin @ joint.rotation(angle)
    return T @ chain.tool


def fk_jacobian(chain: KinematicChain, q: JointState | Sequence[float]) -> np.ndarray:
    """6 x n Jacobian of the marker pose, rotation rows first.

    Column ``j`` is joint ``j``'s unit twist ``(axis, 0)`` carried into the
    marker frame: with ``(R, t)`` the marker pose seen from joint ``j``'s
    rotated frame, it is ``(R^T axis, R^T (axis x t))``.
    """
    angles = _angles(chain, q)
    n = chain.dof
    J = np.zeros((6, n))
    tail = chain.tool
    for j in range(n - 1, -1, -1):
        joint = chain.joints[j]
        Rt = tail.rotation.matrix().T
        J[:3, j] = Rt @ joint.axis
        J[3:, j] = Rt @ np.cross(joint.axis, tail.translation)
        tail = joint.origin @ joint.rotation(angles[j]) @ tail
    return J


def propagate_covariance_dense(chain: KinematicChain, q: JointState | Sequence[float]) -> np.ndarray:
    """First-order end-pose covariance ``J diag(enc^2) J^T + diag(mount^2)``."""
    J = fk_jacobian(chain, q)
    return (J * chain.encoder_sigma**2) @ J.T + np.diag(chain.mount_sigma**2)


def propagate_covariance(chain: KinematicChain, q: JointState | Sequence[float], dense: bool = False) -> np.ndarray:
    """Diagonal factor covariance for the marker prior.

    The dense propagation is reduced to its diagonal and floored at
    :data:`COVARIANCE_FLOOR`; pass ``dense=True`` for the full matrix.
    """
    full = propagate_covariance_dense(chain, q)
    if dense:
        return full
    return np.diag(np.maximum(np.diag(full), COVARIANCE_FLOOR))


def demo_leg_chain(encoder_sigma: float = 0.005, mount_sigma: Sequence[float] | None = None) -> KinematicChain:
    """Synthetic 3-DoF quadruped leg (left front), not measured robot data.

    HAA about x at the hip, HFE about y 0.1 m ahead of it, KFE about y at the
    end of a 0.35 m upper leg; the marker sits at the end of a 0.35 m lower leg.
    """
    if mount_sigma is None:
        mount_sigma = [0.0] * 6
    joints = (
        JointSpec("lf_haa", np.array([1.0, 0.0, 0.0]), Pose.from_translation([0.37, 0.21, 0.0])),
        JointSpec("lf_hfe", np.array([0.0, 1.0, 0.0]), Pose.from_translation([0.1, 0.0, 0.0])),
        JointSpec("lf_kfe", np.array([0.0, 1.0, 0.0]), Pose.from_translation([0.0, 0.0, -0.35])),
    )
    tool = Pose.from_translation([0.0, 0.0, -0.35])
    return KinematicChain(joints, tool, [encoder_sigma] * 3, mount_sigma)
