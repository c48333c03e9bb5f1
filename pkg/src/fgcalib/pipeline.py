"""Calibration problem assembly, solving, and evaluation against ground truth."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import stats

from . import lie
from .errors import AngleNearPi, EmptyProblem, MissingGroundTruth, UnobservedCamera
from .factors import L, PriorFactor, RelativePoseFactor, VariableKey, X
from .kinematics import JointState, KinematicChain, forward_kinematics, propagate_covariance
from .lie import Pose
from .solver import FactorGraph, SolveReport, SolverSettings, marginal_covariances, optimize

log = logging.getLogger(__name__)

#: Default detection noise when a dataset omits it: 0.5 deg, 5 mm.
DEFAULT_DETECTION_SIGMA = np.array([math.radians(0.5)] * 3 + [0.005] * 3)
#: Number of detections averaged into each camera's initial guess.
SEED_DETECTIONS = 5

AXES = ("x", "y", "z", "roll", "pitch", "yaw")
#: Errors (m or deg) at or below this size are floating-point round-off and count as zero
#: when comparing calibrations.
ZERO_ERROR = 1e-12


def sigma_covariance(sigma: Sequence[float]) -> np.ndarray:
    """Diagonal covariance from six standard deviations (rad, rad, rad, m, m, m)."""
    s = np.asarray(sigma, dtype=float).reshape(6)
    if np.any(s <= 0) or not np.all(np.isfinite(s)):
        raise ValueError("detection sigmas must be positive and finite")
    return np.diag(s**2)


@dataclass(frozen=True)
class Detection:
    camera: str
    pose: Pose
    covariance: np.ndarray = field(default_factory=lambda: sigma_covariance(DEFAULT_DETECTION_SIGMA))


@dataclass(frozen=True)
class Frame:
    timestamp: float
    joint_state: JointState
    detections: tuple[Detection, ...] = ()


@dataclass
class CalibrationProblem:
    cameras: list[str]
    chain: KinematicChain
    frames: list[Frame]
    settings: SolverSettings = field(default_factory=SolverSettings)

    def validate(self) -> None:
        declared = set(self.cameras)
        if len(declared) != len(self.cameras):
            raise ValueError("camera ids must be unique")
        counts = dict.fromkeys(self.cameras, 0)
        for frame in self.frames:
            if frame.joint_state.angles.shape != (self.chain.dof,):
                raise ValueError(f"frame at t={frame.timestamp} has {frame.joint_state.angles.size} joint angles, chain has {self.chain.dof}")
            for det in frame.detections:
                if det.camera not in declared:
                    raise ValueError(f"detection references undeclared camera {det.camera!r}")
                counts[det.camera] += 1
        if not any(counts.values()):
            raise EmptyProblem("no frame carries a detection")
        for cam in self.cameras:
            if counts[cam] == 0:
                raise UnobservedCamera(cam)

    def restricted_to(self, cameras: Sequence[str]) -> "CalibrationProblem":
        """Same data keeping only the given cameras' detections."""
        keep = set(cameras)
        frames = [replace(f, detections=tuple(d for d in f.detections if d.camera in keep)) for f in self.frames]
        return CalibrationProblem([c for c in self.cameras if c in keep], self.chain, frames, self.settings)


@dataclass
class GraphBuild:
    graph: FactorGraph
    initial: dict[VariableKey, Pose]
    camera_keys: dict[str, VariableKey]
    landmark_frames: list[int]
    dropped_frames: list[int]


@dataclass
class CalibrationResult:
    extrinsics: dict[str, Pose]
    marginals: dict[str, np.ndarray]
    report: SolveReport
    n_frames_used: int


@dataclass
class ErrorStats:
    """Per-axis mean absolute error (m for x/y/z, degrees for roll/pitch/yaw)."""

    mae: np.ndarray
    std: np.ndarray | None
    n: int

    @property
    def translation_mae(self) -> float:
        return float(np.mean(self.mae[:3]))

    @property
    def rotation_mae(self) -> float:
        return float(np.mean(self.mae[3:]))

    def rows(self) -> list[tuple[str, str, float, float | None]]:
        """``(axis, unit, mae, std)`` with translations in cm and angles in deg."""
        out = []
        for i, axis in enumerate(AXES):
            scale, unit = (100.0, "cm") if i < 3 else (1.0, "deg")
            std = None if self.std is None else float(self.std[i] * scale)
            out.append((axis, unit, float(self.mae[i] * scale), std))
        return out

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "mae": {a: float(v) for a, v in zip(AXES, self.mae)},
            "std": None if self.std is None else {a: float(v) for a, v in zip(AXES, self.std)},
            "units": {"x": "m", "y": "m", "z": "m", "roll": "deg", "pitch": "deg", "yaw": "deg"},
        }


def camera_seed(chain: KinematicChain, pairs: Sequence[tuple[JointState, Pose]]) -> Pose:
    """Average of ``FK(q) o Z^-1`` over the given (joint state, detection) pairs."""
    candidates = [forward_kinematics(chain, q) @ lie.inverse(z) for q, z in pairs]
    rotation = lie.chordal_mean([c.rotation for c in candidates])
    translation = np.mean([c.translation for c in candidates], axis=0)
    return Pose(rotation, translation)


def build_graph(problem: CalibrationProblem) -> GraphBuild:
    """Assemble the calibration factor graph and its initial estimates.

    One landmark per frame with at least one detection, anchored by a
    forward-kinematics prior; one relative factor per detection; one
    extrinsic variable per camera seeded from its first detections.
    """
    problem.validate()
    chain = problem.chain
    camera_keys = {cam: X(i) for i, cam in enumerate(problem.cameras)}

    seeds: dict[str, Pose] = {}
    for cam in problem.cameras:
        pairs = []
        for frame in problem.frames:
            for det in frame.detections:
                if det.camera == cam:
                    pairs.append((frame.joint_state, det.pose))
            if len(pairs) >= SEED_DETECTIONS:
                break
        seeds[cam] = camera_seed(chain, pairs[:SEED_DETECTIONS])

    graph = FactorGraph()
    initial: dict[VariableKey, Pose] = {camera_keys[c]: seeds[c] for c in problem.cameras}
    landmark_frames: list[int] = []
    dropped: list[int] = []
    for i, frame in enumerate(problem.frames):
        if not frame.detections:
            continue
        fk = forward_kinematics(chain, frame.joint_state)
        try:
            for det in frame.detections:
                lie.local_coordinates(det.pose, lie.inverse(seeds[det.camera]) @ fk)
        except AngleNearPi:
            log.warning("dropping frame %d (t=%.3f): detection inconsistent with initial extrinsic", i, frame.timestamp)
            dropped.append(i)
            continue
        key = L(len(landmark_frames))
        landmark_frames.append(i)
        graph.add(PriorFactor.from_covariance(key, fk, propagate_covariance(chain, frame.joint_state)))
        initial[key] = fk
        for det in frame.detections:
            graph.add(RelativePoseFactor.from_covariance(camera_keys[det.camera], key, det.pose, det.covariance))
    if not landmark_frames:
        raise EmptyProblem("every frame was dropped during initialization")
    return GraphBuild(graph, initial, camera_keys, landmark_frames, dropped)


def calibrate(problem: CalibrationProblem, dump_dir=None) -> CalibrationResult:
    """Build the graph, optimize it and extract per-camera extrinsics and marginals."""
    built = build_graph(problem)
    estimates, report = optimize(built.graph, built.initial, problem.settings, dump_dir=dump_dir)
    keys = [built.camera_keys[c] for c in problem.cameras]
    marg = marginal_covariances(built.graph, estimates, keys)
    return CalibrationResult(
        extrinsics={c: estimates[built.camera_keys[c]] for c in problem.cameras},
        marginals={c: marg[built.camera_keys[c]] for c in problem.cameras},
        report=report,
        n_frames_used=len(built.landmark_frames),
    )


def pose_error(estimate: Pose, truth: Pose) -> np.ndarray:
    """Absolute per-axis error: translation (m) and ZYX Euler of ``truth^-1 o estimate`` (deg)."""
    dt = np.abs(estimate.translation - truth.translation)
    rel = lie.inverse(truth) @ estimate
    return np.concatenate([dt, np.abs(np.degrees(rel.rotation.euler_zyx()))])


def aggregate_errors(errors: Sequence[np.ndarray]) -> ErrorStats:
    """MAE and sample standard deviation across runs; ``std`` is None for a single run."""
    E = np.asarray(errors, dtype=float).reshape(-1, 6)
    if len(E) == 0:
        raise ValueError("no errors to aggregate")
    std = np.std(E, axis=0, ddof=1) if len(E) > 1 else None
    return ErrorStats(np.mean(E, axis=0), std, len(E))


def evaluate(result: CalibrationResult, ground_truth: Mapping[str, Pose]) -> dict[str, ErrorStats]:
    missing = [c for c in result.extrinsics if c not in ground_truth]
    if missing:
        raise MissingGroundTruth(f"no ground truth for cameras {missing}")
    return {c: aggregate_errors([pose_error(est, ground_truth[c])]) for c, est in result.extrinsics.items()}


# ---------------------------------------------------------------------------
# single-camera vs joint comparison
# ---------------------------------------------------------------------------


@dataclass
class TopologyComparison:
    cameras: list[str]
    single: dict[str, ErrorStats]
    joint: dict[str, ErrorStats]
    single_translation: np.ndarray
    joint_translation: np.ndarray
    single_rotation: np.ndarray
    joint_rotation: np.ndarray

    @property
    def trials(self) -> int:
        return len(self.single_translation)

    @property
    def ratio(self) -> float | None:
        """Mean joint translation error over mean single-camera error.

        None when both means are zero (round-off included), i.e. 0/0.
        """
        num = float(np.mean(self.joint_translation))
        den = float(np.mean(self.single_translation))
        if den <= ZERO_ERROR:
            return None if num <= ZERO_ERROR else math.inf
        return num / den

    def sign_test(self) -> tuple[int, int, float]:
        """Wins of joint over single calibration, informative trials, one-sided p-value."""
        diff = self.single_translation - self.joint_translation
        wins = int(np.sum(diff > ZERO_ERROR))
        n = int(np.sum(np.abs(diff) > ZERO_ERROR))
        if n == 0:
            return 0, 0, 1.0
        return wins, n, float(stats.binomtest(wins, n, 0.5, alternative="greater").pvalue)


def _topology_trial(args) -> tuple[dict, dict]:
    sample, trial = args
    problem, truth = sample(trial)
    joint = calibrate(problem)
    single = {}
    for cam in problem.cameras:
        res = calibrate(problem.restricted_to([cam]))
        single[cam] = pose_error(res.extrinsics[cam], truth[cam])
    joint_err = {cam: pose_error(joint.extrinsics[cam], truth[cam]) for cam in problem.cameras}
    return single, joint_err


def run_trials(fn: Callable, sample, trials: int, jobs: int = 1) -> list:
    """Evaluate ``fn((sample, t))`` for each trial, results in trial order."""
    args = [(sample, t) for t in range(trials)]
    if jobs > 1 and trials > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, args))
    return [fn(a) for a in args]


def compare_topologies(
    sample: Callable[[int], tuple[CalibrationProblem, Mapping[str, Pose]]],
    trials: int,
    jobs: int = 1,
) -> TopologyComparison:
    """Per-camera (single) versus joint calibration over independent noise draws.

    ``sample(t)`` returns the problem and ground truth for trial ``t``; it must
    be picklable when ``jobs > 1``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    results = run_trials(_topology_trial, sample, trials, jobs)
    cameras = list(results[0][0].keys())
    if len(cameras) < 2:
        raise ValueError("topology comparison needs at least two cameras")
    single = {c: aggregate_errors([r[0][c] for r in results]) for c in cameras}
    joint = {c: aggregate_errors([r[1][c] for r in results]) for c in cameras}

    def score(which, sl):
        return np.array([np.mean([r[which][c][sl] for c in cameras]) for r in results])

    return TopologyComparison(
        cameras,
        single,
        joint,
        score(0, slice(0, 3)),
        score(1, slice(0, 3)),
        score(0, slice(3, 6)),
        score(1, slice(3, 6)),
    )
