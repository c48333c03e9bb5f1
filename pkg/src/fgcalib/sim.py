"""Synthetic scenarios: ground-truth extrinsics, leg trajectories, noisy detections."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from . import lie
from .errors import NoVisibleFrames
from .kinematics import JointState, KinematicChain, demo_leg_chain, forward_kinematics
from .lie import Pose, Rotation
from .pipeline import (
    DEFAULT_DETECTION_SIGMA,
    CalibrationProblem,
    Detection,
    ErrorStats,
    Frame,
    aggregate_errors,
    calibrate,
    pose_error,
    run_trials,
    sigma_covariance,
)
from .solver import SolverSettings

TRAJECTORIES = ("grid", "sinusoidal", "uniform")
#: Frame spacing of a 1312-image, 348 s recording.
FRAME_PERIOD = 348.0 / 1312.0
#: HAA, HFE, KFE ranges that swing the demo foot in front of the body.
DEFAULT_JOINT_LIMITS = ((-0.35, 0.25), (-1.9, -1.1), (0.4, 1.6))


@dataclass(frozen=True)
class NoiseConfig:
    """Injected noise: encoder (rad), detection rotation (rad) and translation (m)."""

    encoder_sigma: float = 0.0
    detection_sigma_rot: float = 0.0
    detection_sigma_trans: float = 0.0

    def __post_init__(self):
        if min(self.encoder_sigma, self.detection_sigma_rot, self.detection_sigma_trans) < 0:
            raise ValueError("noise sigmas must be >= 0")

    def scaled(self, factor: float, component: str = "all") -> "NoiseConfig":
        enc = self.encoder_sigma * (factor if component in ("all", "encoder") else 1.0)
        det = factor if component in ("all", "detection") else 1.0
        if component not in ("all", "encoder", "detection"):
            raise ValueError(f"unknown noise component {component!r}")
        return NoiseConfig(enc, self.detection_sigma_rot * det, self.detection_sigma_trans * det)

    @property
    def detection_sigma(self) -> np.ndarray:
        return np.array([self.detection_sigma_rot] * 3 + [self.detection_sigma_trans] * 3)


@dataclass(frozen=True)
class ScenarioConfig:
    chain: KinematicChain
    true_extrinsics: Mapping[str, Pose]
    joint_limits: tuple[tuple[float, float], ...]
    fov_deg: float = 30.0
    depth_range: tuple[float, float] = (0.2, 2.0)
    n_frames: int = 100
    trajectory: str = "sinusoidal"
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    seed: int = 0
    frame_period: float = FRAME_PERIOD

    def __post_init__(self):
        object.__setattr__(self, "true_extrinsics", dict(self.true_extrinsics))
        limits = tuple((float(lo), float(hi)) for lo, hi in self.joint_limits)
        object.__setattr__(self, "joint_limits", limits)
        object.__setattr__(self, "depth_range", tuple(float(d) for d in self.depth_range))
        if not self.true_extrinsics:
            raise ValueError("scenario needs at least one camera")
        if len(limits) != self.chain.dof:
            raise ValueError(f"need {self.chain.dof} joint limits, got {len(limits)}")
        if any(not lo <= hi for lo, hi in limits):
            raise ValueError("joint limits must satisfy lo <= hi")
        if self.n_frames < 1:
            raise ValueError("n_frames must be >= 1")
        if self.trajectory not in TRAJECTORIES:
            raise ValueError(f"trajectory must be one of {TRAJECTORIES}")
        if not 0.0 < self.fov_deg <= 90.0:
            raise ValueError("fov_deg must be in (0, 90]")
        lo, hi = self.depth_range
        if not 0.0 <= lo < hi:
            raise ValueError("depth range must satisfy 0 <= min < max")

    @property
    def cameras(self) -> list[str]:
        return list(self.true_extrinsics)


@dataclass
class SimulatedDataset:
    cameras: list[str]
    chain: KinematicChain
    frames: list[Frame]
    ground_truth: dict[str, Pose]
    true_angles: list[np.ndarray]
    noiseless: list[dict[str, Pose]]

    def problem(self, settings: SolverSettings | None = None) -> CalibrationProblem:
        return CalibrationProblem(list(self.cameras), self.chain, list(self.frames), settings or SolverSettings())


def optical_frame(position: Sequence[float], pitch_down_deg: float = 0.0, yaw_left_deg: float = 0.0) -> Pose:
    """Camera pose in the base frame, optical axis (z) looking along base +x."""
    R0 = np.array([[0.0, 0.0, 1.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]])
    R = (
        lie.rot_y(math.radians(pitch_down_deg)).rotation.matrix()
        @ lie.rot_z(math.radians(yaw_left_deg)).rotation.matrix()
        @ R0
    )
    return Pose(Rotation.from_matrix(R), position)


def default_scenario(seed: int = 0, n_frames: int = 60) -> ScenarioConfig:
    """Two front cameras watching the left-front foot; synthetic values throughout.

    The head camera looks steeply down and the lower one straight ahead, so
    their views overlap only partly.  The encoder sigma is an effective value
    that lumps joint compliance with sensor noise; detections are close-range
    and therefore tighter than the kinematic prior.
    """
    noise = NoiseConfig(encoder_sigma=0.03, detection_sigma_rot=math.radians(0.2), detection_sigma_trans=0.001)
    chain = demo_leg_chain(encoder_sigma=noise.encoder_sigma)
    return ScenarioConfig(
        chain=chain,
        true_extrinsics={
            "cam0": optical_frame([0.45, 0.0, 0.10], pitch_down_deg=45.0, yaw_left_deg=20.0),
            "cam1": optical_frame([0.42, 0.08, -0.05], pitch_down_deg=5.0, yaw_left_deg=20.0),
        },
        joint_limits=DEFAULT_JOINT_LIMITS,
        fov_deg=18.0,
        depth_range=(0.15, 2.0),
        n_frames=n_frames,
        trajectory="sinusoidal",
        noise=noise,
        seed=seed,
    )


def random_scenario(
    rng: np.random.Generator,
    n_cameras: int,
    n_frames: int,
    noise: NoiseConfig | None = None,
    trajectory: str = "uniform",
) -> ScenarioConfig:
    """Randomly placed wide-angle cameras around the front of the demo leg."""
    extrinsics = {}
    for k in range(n_cameras):
        position = [rng.uniform(0.35, 0.5), rng.uniform(-0.1, 0.2), rng.uniform(-0.1, 0.15)]
        extrinsics[f"cam{k}"] = optical_frame(position, rng.uniform(10.0, 35.0), rng.uniform(5.0, 30.0))
    return ScenarioConfig(
        chain=demo_leg_chain(),
        true_extrinsics=extrinsics,
        joint_limits=DEFAULT_JOINT_LIMITS,
        fov_deg=70.0,
        depth_range=(0.05, 3.0),
        n_frames=n_frames,
        trajectory=trajectory,
        noise=noise or NoiseConfig(),
        seed=int(rng.integers(0, 2**31)),
    )


def visible(z: Pose, fov_deg: float, depth_range: tuple[float, float]) -> bool:
    """Marker origin inside the camera's view cone and depth interval."""
    x, y, d = z.translation
    if not depth_range[0] <= d <= depth_range[1]:
        return False
    return math.atan2(math.hypot(x, y), d) <= math.radians(fov_deg)


def sample_trajectory(config: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    lo = np.array([l for l, _ in config.joint_limits])
    hi = np.array([h for _, h in config.joint_limits])
    n, dof = config.n_frames, len(lo)
    if config.trajectory == "uniform":
        return rng.uniform(lo, hi, size=(n, dof))
    if config.trajectory == "sinusoidal":
        t = np.arange(n) * config.frame_period
        duration = max(n * config.frame_period, 1e-9)
        # incommensurate cycle counts so the joints do not move in lockstep
        cycles = np.array([3.0, 3.0 * math.sqrt(2.0), 3.0 * math.sqrt(3.0), 7.0, 11.0, 13.0])[np.arange(dof) % 6]
        freq = cycles / duration
        phase = rng.uniform(0.0, 2.0 * math.pi, size=dof)
        return 0.5 * (lo + hi) + 0.5 * (hi - lo) * np.sin(2.0 * math.pi * freq * t[:, None] + phase)
    levels = int(math.ceil(n ** (1.0 / dof)))
    axes = [np.linspace(l, h, levels) for l, h in zip(lo, hi)]
    grid = np.array(list(itertools.product(*axes)))
    pick = np.round(np.linspace(0, len(grid) - 1, n)).astype(int)
    return grid[pick]


def simulate(config: ScenarioConfig, trial: int | None = None) -> SimulatedDataset:
    """Sample a noisy calibration dataset; deterministic given ``(seed, trial)``.

    The recorded chain carries the injected encoder sigma when it is positive;
    detections carry the injected detection sigmas, with zero entries replaced
    by the package default so the factors stay well-defined.
    """
    seed = [config.seed] if trial is None else [config.seed, trial]
    rng = np.random.default_rng(seed)
    truth = config.true_extrinsics
    cameras = config.cameras
    inverse_truth = {c: lie.inverse(p) for c, p in truth.items()}
    angles = sample_trajectory(config, rng)

    chain = config.chain
    if config.noise.encoder_sigma > 0:
        chain = chain.with_sigmas(encoder_sigma=np.full(chain.dof, config.noise.encoder_sigma))
    det_sigma = config.noise.detection_sigma
    recorded_sigma = np.where(det_sigma > 0, det_sigma, DEFAULT_DETECTION_SIGMA)
    det_cov = sigma_covariance(recorded_sigma)

    frames, noiseless, true_angles = [], [], []
    for i, q in enumerate(angles):
        marker = forward_kinematics(config.chain, q)
        q_meas = q + rng.normal(0.0, 1.0, size=q.shape) * config.noise.encoder_sigma
        clean = {}
        detections = []
        for cam in cameras:
            z = inverse_truth[cam] @ marker
            noise = rng.normal(0.0, 1.0, size=6) * det_sigma
            if not visible(z, config.fov_deg, config.depth_range):
                continue
            clean[cam] = z
            detections.append(Detection(cam, lie.retract(z, noise), det_cov))
        frames.append(Frame(i * config.frame_period, JointState(q_meas, i * config.frame_period), tuple(detections)))
        noiseless.append(clean)
        true_angles.append(q)

    for cam in cameras:
        if not any(cam in c for c in noiseless):
            raise NoVisibleFrames(f"camera {cam!r} never sees the marker")
    return SimulatedDataset(cameras, chain, frames, dict(truth), true_angles, noiseless)


@dataclass(frozen=True)
class ScenarioSampler:
    """Picklable trial sampler: ``sampler(t)`` -> ``(problem, ground_truth)``."""

    config: ScenarioConfig
    settings: SolverSettings = field(default_factory=SolverSettings)

    def __call__(self, trial: int):
        data = simulate(self.config, trial)
        return data.problem(self.settings), data.ground_truth


def _study_trial(args) -> list[np.ndarray]:
    sample, trial = args
    problem, truth = sample(trial)
    result = calibrate(problem)
    return [pose_error(result.extrinsics[c], truth[c]) for c in problem.cameras]


def perturbation_study(
    config: ScenarioConfig,
    sigma_grid: Sequence[float],
    trials: int,
    component: str = "all",
    jobs: int = 1,
) -> list[tuple[float, ErrorStats]]:
    """Error statistics per noise scale factor, pooled over cameras and trials."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if any(s < 0 for s in sigma_grid):
        raise ValueError("noise scale factors must be >= 0")
    rows = []
    for sigma in sigma_grid:
        scaled = replace(config, noise=config.noise.scaled(sigma, component))
        errors = run_trials(_study_trial, ScenarioSampler(scaled), trials, jobs)
        rows.append((float(sigma), aggregate_errors([e for trial in errors for e in trial])))
    return rows


def full_scale_scenario(seed: int = 0) -> ScenarioConfig:
    """Default rig with the 1312-frame recording length."""
    return default_scenario(seed=seed, n_frames=1312)


__all__ = [
    "NoiseConfig",
    "ScenarioConfig",
    "ScenarioSampler",
    "SimulatedDataset",
    "default_scenario",
    "optical_frame",
    "full_scale_scenario",
    "random_scenario",
    "perturbation_study",
    "simulate",
    "visible",
]

