"""Reading and writing chain, scenario, dataset, result and report files.

Poses are stored as ``[x, y, z, qw, qx, qy, qz]`` with the translation in
meters, and all angles inside data files are radians.  Report tables (CSV and
the evaluation JSON) use centimeters and degrees.  Writes go through a
temporary file followed by a rename so a crash never leaves half a file behind.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import jsonschema
import numpy as np

from . import schemas
from .kinematics import JointState, KinematicChain
from .lie import Pose
from .pipeline import (
    AXES,
    DEFAULT_DETECTION_SIGMA,
    CalibrationProblem,
    CalibrationResult,
    Detection,
    ErrorStats,
    Frame,
    TopologyComparison,
    sigma_covariance,
)
from .sim import NoiseConfig, ScenarioConfig, SimulatedDataset
from .solver import SolveReport, SolverSettings, Termination


class ConfigError(ValueError):
    """An input file is unreadable, malformed or violates its schema."""


# ---------------------------------------------------------------------------
# low-level helpers
# ---------------------------------------------------------------------------


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps(obj) -> str:
    """Deterministic JSON text (shortest round-trip floats, fixed key order)."""
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def write_json(path: str | os.PathLike, obj, schema: dict | None = None) -> None:
    if schema is not None:
        jsonschema.validate(obj, schema)
    atomic_write_text(path, dumps(obj))


def read_json(path: str | os.PathLike, schema: dict | None = None):
    """Parse a JSON file, turning every failure into :class:`ConfigError`."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read file: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if schema is not None:
        try:
            jsonschema.validate(data, schema)
        except jsonschema.ValidationError as exc:
            where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(f"{path}: schema violation at {where}: {exc.message}") from exc
    return data


def _pose(values, what: str) -> Pose:
    try:
        return Pose.from_list(values)
    except ValueError as exc:
        raise ConfigError(f"{what}: {exc}") from exc


def _floats(values) -> list[float]:
    return [float(v) for v in np.asarray(values, dtype=float).reshape(-1)]


def _matrix(m: np.ndarray) -> list[list[float]]:
    return [[float(v) for v in row] for row in np.asarray(m, dtype=float)]


def _fmt(v: float | None) -> str:
    """CSV number format: fixed significant digits, empty for missing."""
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return f"{v:.9g}"


def _csv_text(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# chains and scenarios
# ---------------------------------------------------------------------------


def chain_from_dict(data: dict, where: str = "chain") -> KinematicChain:
    try:
        jsonschema.validate(data, schemas.CHAIN)
        return KinematicChain.from_dict(data)
    except (jsonschema.ValidationError, ValueError) as exc:
        msg = exc.message if isinstance(exc, jsonschema.ValidationError) else str(exc)
        raise ConfigError(f"{where}: {msg}") from exc


def load_chain(path: str | os.PathLike) -> KinematicChain:
    return chain_from_dict(read_json(path), str(path))


def save_chain(path: str | os.PathLike, chain: KinematicChain) -> None:
    write_json(path, chain.to_dict(), schemas.CHAIN)


def _resolve_chain(data: dict, base_dir: Path, where: str) -> tuple[KinematicChain, Path | None]:
    if "chain" in data:
        return chain_from_dict(data["chain"], f"{where}: chain"), None
    chain_path = base_dir / data["chain_file"]
    return load_chain(chain_path), chain_path


def scenario_to_dict(config: ScenarioConfig, chain_file: str | None = None) -> dict:
    out: dict = {}
    if chain_file is None:
        out["chain"] = config.chain.to_dict()
    else:
        out["chain_file"] = chain_file
    out.update(
        {
            "cameras": {c: p.to_list() for c, p in config.true_extrinsics.items()},
            "joint_limits": [[lo, hi] for lo, hi in config.joint_limits],
            "fov_deg": config.fov_deg,
            "depth_range": list(config.depth_range),
            "n_frames": config.n_frames,
            "trajectory": config.trajectory,
            "noise": {
                "encoder_sigma": config.noise.encoder_sigma,
                "detection_sigma_rot": config.noise.detection_sigma_rot,
                "detection_sigma_trans": config.noise.detection_sigma_trans,
            },
            "seed": config.seed,
        }
    )
    return out


def scenario_from_dict(data: dict, base_dir: str | os.PathLike = ".", where: str = "scenario") -> ScenarioConfig:
    try:
        jsonschema.validate(data, schemas.SCENARIO)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"{where}: {exc.message}") from exc
    chain, _ = _resolve_chain(data, Path(base_dir), where)
    try:
        return ScenarioConfig(
            chain=chain,
            true_extrinsics={c: _pose(p, f"{where}: camera {c}") for c, p in data["cameras"].items()},
            joint_limits=tuple(tuple(l) for l in data["joint_limits"]),
            fov_deg=data.get("fov_deg", 30.0),
            depth_range=tuple(data.get("depth_range", (0.2, 2.0))),
            n_frames=data.get("n_frames", 100),
            trajectory=data.get("trajectory", "sinusoidal"),
            noise=NoiseConfig(**data.get("noise", {})),
            seed=data.get("seed", 0),
        )
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def load_scenario(path: str | os.PathLike) -> ScenarioConfig:
    return scenario_from_dict(read_json(path), Path(path).parent, str(path))


def save_scenario(path: str | os.PathLike, config: ScenarioConfig, chain_file: str | None = None) -> None:
    write_json(path, scenario_to_dict(config, chain_file), schemas.SCENARIO)


# ---------------------------------------------------------------------------
# datasets
# ---------------------------------------------------------------------------


@dataclass
class Dataset:
    cameras: list[str]
    chain: KinematicChain
    frames: list[Frame]
    ground_truth: dict[str, Pose] | None
    chain_path: Path | None = None

    def problem(self, settings: SolverSettings | None = None) -> CalibrationProblem:
        return CalibrationProblem(list(self.cameras), self.chain, list(self.frames), settings or SolverSettings())


def _detection_dict(det: Detection, clean: Pose | None) -> dict:
    out = {"camera": det.camera, "pose": det.pose.to_list()}
    cov = np.asarray(det.covariance)
    if np.count_nonzero(cov - np.diag(np.diag(cov))) == 0:
        out["sigma"] = _floats(np.sqrt(np.diag(cov)))
    else:
        out["covariance"] = _matrix(cov)
    if clean is not None:
        out["pose_noiseless"] = clean.to_list()
    return out


def dataset_to_dict(data: SimulatedDataset | Dataset, chain_file: str | None = None) -> dict:
    out: dict = {"cameras": list(data.cameras)}
    if chain_file is None:
        out["chain"] = data.chain.to_dict()
    else:
        out["chain_file"] = chain_file
    noiseless = getattr(data, "noiseless", None)
    true_angles = getattr(data, "true_angles", None)
    frames = []
    for i, frame in enumerate(data.frames):
        clean = noiseless[i] if noiseless is not None else {}
        entry = {"t": frame.timestamp, "q": _floats(frame.joint_state.angles)}
        if true_angles is not None:
            entry["q_true"] = _floats(true_angles[i])
        entry["detections"] = [_detection_dict(d, clean.get(d.camera)) for d in frame.detections]
        frames.append(entry)
    out["frames"] = frames
    if data.ground_truth is not None:
        out["ground_truth"] = {c: p.to_list() for c, p in data.ground_truth.items()}
    return out


def dataset_from_dict(data: dict, base_dir: str | os.PathLike = ".", where: str = "dataset") -> Dataset:
    try:
        jsonschema.validate(data, schemas.DATASET)
    except jsonschema.ValidationError as exc:
        loc = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: schema violation at {loc}: {exc.message}") from exc
    chain, chain_path = _resolve_chain(data, Path(base_dir), where)
    frames = []
    for i, entry in enumerate(data["frames"]):
        detections = []
        for det in entry.get("detections", []):
            label = f"{where}: frame {i} camera {det['camera']}"
            try:
                if "covariance" in det:
                    cov = np.asarray(det["covariance"], dtype=float)
                else:
                    cov = sigma_covariance(det.get("sigma", DEFAULT_DETECTION_SIGMA))
            except ValueError as exc:
                raise ConfigError(f"{label}: {exc}") from exc
            detections.append(Detection(det["camera"], _pose(det["pose"], label), cov))
        t = float(entry["t"])
        frames.append(Frame(t, JointState(entry["q"], t), tuple(detections)))
    gt = data.get("ground_truth")
    truth = None if gt is None else {c: _pose(p, f"{where}: ground truth {c}") for c, p in gt.items()}
    return Dataset(list(data["cameras"]), chain, frames, truth, chain_path)


def load_dataset(path: str | os.PathLike) -> Dataset:
    return dataset_from_dict(read_json(path), Path(path).parent, str(path))


def chain_path_for(dataset_path: str | os.PathLike) -> Path:
    """Sibling chain file written next to a dataset: ``run.json`` -> ``run.chain.json``."""
    p = Path(dataset_path)
    return p.with_name(p.stem + ".chain.json")


def save_dataset(path: str | os.PathLike, data: SimulatedDataset | Dataset, inline_chain: bool = False) -> list[Path]:
    """Write the dataset and, unless ``inline_chain``, its chain file; returns written paths."""
    path = Path(path)
    if inline_chain:
        write_json(path, dataset_to_dict(data), schemas.DATASET)
        return [path]
    chain_path = chain_path_for(path)
    save_chain(chain_path, data.chain)
    write_json(path, dataset_to_dict(data, chain_path.name), schemas.DATASET)
    return [path, chain_path]


# ---------------------------------------------------------------------------
# results and reports
# ---------------------------------------------------------------------------


def result_to_dict(result: CalibrationResult) -> dict:
    cams = list(result.extrinsics)
    return {
        "cameras": cams,
        "extrinsics": {c: result.extrinsics[c].to_list() for c in cams},
        "marginals": {c: _matrix(result.marginals[c]) for c in cams},
        "report": result.report.to_dict(),
        "n_frames_used": result.n_frames_used,
    }


def save_result(path: str | os.PathLike, result: CalibrationResult) -> None:
    write_json(path, result_to_dict(result), schemas.RESULT)


def load_result(path: str | os.PathLike) -> CalibrationResult:
    data = read_json(path, schemas.RESULT)
    r = data["report"]
    report = SolveReport(r["iterations"], r["initial_cost"], r["final_cost"], r["converged"], Termination(r["termination"]))
    return CalibrationResult(
        extrinsics={c: _pose(p, f"{path}: extrinsic {c}") for c, p in data["extrinsics"].items()},
        marginals={c: np.asarray(m, dtype=float) for c, m in data["marginals"].items()},
        report=report,
        n_frames_used=data["n_frames_used"],
    )


def stats_to_dict(stats: Mapping[str, ErrorStats]) -> dict:
    return {"cameras": {c: s.to_dict() for c, s in stats.items()}}


def stats_csv(stats: Mapping[str, ErrorStats]) -> str:
    rows = []
    for cam, s in stats.items():
        for axis, unit, mae, std in s.rows():
            rows.append([cam, axis, unit, _fmt(mae), _fmt(std)])
    return _csv_text(["camera", "axis", "unit", "mae", "std"], rows)


def save_stats(json_path: str | os.PathLike, csv_path: str | os.PathLike, stats: Mapping[str, ErrorStats]) -> None:
    write_json(json_path, stats_to_dict(stats), schemas.STATS)
    atomic_write_text(csv_path, stats_csv(stats))


def study_csv(rows: Sequence[tuple[float, ErrorStats]]) -> str:
    """Perturbation study table: one line per (noise scale, axis)."""
    out = []
    for sigma, s in rows:
        for axis, unit, mae, std in s.rows():
            out.append([_fmt(sigma), axis, _fmt(mae), _fmt(std), unit])
    return _csv_text(["sigma", "axis", "mae", "std", "unit"], out)


def topology_csv(cmp: TopologyComparison) -> str:
    """Paired single-camera (F1) and joint (F2) statistics per camera and axis."""
    out = []
    for cam in cmp.cameras:
        for (axis, unit, m1, s1), (_, _, m2, s2) in zip(cmp.single[cam].rows(), cmp.joint[cam].rows()):
            out.append([cam, axis, unit, _fmt(m1), _fmt(s1), _fmt(m2), _fmt(s2)])
    return _csv_text(["camera", "axis", "unit", "f1_mae", "f1_std", "f2_mae", "f2_std"], out)


__all__ = [
    "AXES",
    "ConfigError",
    "Dataset",
    "atomic_write_text",
    "chain_path_for",
    "dataset_from_dict",
    "dataset_to_dict",
    "load_chain",
    "load_dataset",
    "load_result",
    "load_scenario",
    "read_json",
    "result_to_dict",
    "save_chain",
    "save_dataset",
    "save_result",
    "save_scenario",
    "save_stats",
    "scenario_from_dict",
    "scenario_to_dict",
    "stats_csv",
    "study_csv",
    "topology_csv",
    "write_json",
]
