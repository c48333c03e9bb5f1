"""JSON Schemas of every file the package reads or writes."""

from __future__ import annotations

_NUMBER = {"type": "number"}
POSE = {"type": "array", "items": _NUMBER, "minItems": 7, "maxItems": 7}
SIX = {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 6, "maxItems": 6}
MATRIX6 = {"type": "array", "items": {"type": "array", "items": _NUMBER, "minItems": 6, "maxItems": 6}, "minItems": 6, "maxItems": 6}

CHAIN = {
    "type": "object",
    "required": ["joints"],
    "properties": {
        "joints": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["name", "axis"],
                "properties": {
                    "name": {"type": "string"},
                    "axis": {"type": "array", "items": _NUMBER, "minItems": 3, "maxItems": 3},
                    "origin": POSE,
                },
            },
        },
        "tool": POSE,
        "encoder_sigma": {"type": "array", "items": {"type": "number", "minimum": 0}},
        "mount_sigma": SIX,
    },
}

SCENARIO = {
    "type": "object",
    "required": ["cameras", "joint_limits"],
    "properties": {
        "chain_file": {"type": "string"},
        "chain": CHAIN,
        "cameras": {"type": "object", "minProperties": 1, "additionalProperties": POSE},
        "joint_limits": {"type": "array", "items": {"type": "array", "items": _NUMBER, "minItems": 2, "maxItems": 2}},
        "fov_deg": {"type": "number", "exclusiveMinimum": 0, "maximum": 90},
        "depth_range": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 2, "maxItems": 2},
        "n_frames": {"type": "integer", "minimum": 1},
        "trajectory": {"enum": ["grid", "sinusoidal", "uniform"]},
        "noise": {
            "type": "object",
            "properties": {
                "encoder_sigma": {"type": "number", "minimum": 0},
                "detection_sigma_rot": {"type": "number", "minimum": 0},
                "detection_sigma_trans": {"type": "number", "minimum": 0},
            },
            "additionalProperties": False,
        },
        "seed": {"type": "integer", "minimum": 0},
    },
    "oneOf": [{"required": ["chain_file"]}, {"required": ["chain"]}],
}

DETECTION = {
    "type": "object",
    "required": ["camera", "pose"],
    "properties": {
        "camera": {"type": "string"},
        "pose": POSE,
        "sigma": SIX,
        "covariance": MATRIX6,
        "pose_noiseless": POSE,
    },
    "not": {"required": ["sigma", "covariance"]},
}

DATASET = {
    "type": "object",
    "required": ["cameras", "frames"],
    "properties": {
        "cameras": {"type": "array", "items": {"type": "string"}, "minItems": 1},
        "chain_file": {"type": "string"},
        "chain": CHAIN,
        "frames": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["t", "q"],
                "properties": {
                    "t": _NUMBER,
                    "q": {"type": "array", "items": _NUMBER},
                    "q_true": {"type": "array", "items": _NUMBER},
                    "detections": {"type": "array", "items": DETECTION},
                },
            },
        },
        "ground_truth": {"type": "object", "additionalProperties": POSE},
    },
    "oneOf": [{"required": ["chain_file"]}, {"required": ["chain"]}],
}

REPORT = {
    "type": "object",
    "required": ["iterations", "initial_cost", "final_cost", "converged", "termination"],
    "properties": {
        "iterations": {"type": "integer", "minimum": 0},
        "initial_cost": {"type": "number", "minimum": 0},
        "final_cost": {"type": "number", "minimum": 0},
        "converged": {"type": "boolean"},
        "termination": {"enum": ["abs_cost", "rel_cost", "max_iterations", "lambda_limit"]},
    },
}

RESULT = {
    "type": "object",
    "required": ["cameras", "extrinsics", "marginals", "report", "n_frames_used"],
    "properties": {
        "cameras": {"type": "array", "items": {"type": "string"}},
        "extrinsics": {"type": "object", "additionalProperties": POSE},
        "marginals": {"type": "object", "additionalProperties": MATRIX6},
        "report": REPORT,
        "n_frames_used": {"type": "integer", "minimum": 0},
    },
}

_AXIS_VALUES = {
    "type": "object",
    "required": ["x", "y", "z", "roll", "pitch", "yaw"],
    "additionalProperties": {"type": "number", "minimum": 0},
}

STATS = {
    "type": "object",
    "required": ["cameras"],
    "properties": {
        "cameras": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "required": ["n", "mae", "std", "units"],
                "properties": {
                    "n": {"type": "integer", "minimum": 1},
                    "mae": _AXIS_VALUES,
                    "std": {"oneOf": [_AXIS_VALUES, {"type": "null"}]},
                    "units": {"type": "object"},
                },
            },
        },
    },
}

MANIFEST = {
    "type": "object",
    "required": ["command", "argv", "config_paths", "seed", "version", "outputs", "duration_s"],
    "properties": {
        "command": {"type": "string"},
        "argv": {"type": "array", "items": {"type": "string"}},
        "config_paths": {"type": "array", "items": {"type": "string"}},
        "seed": {"type": ["integer", "null"]},
        "version": {"type": "string"},
        "outputs": {"type": "array", "items": {"type": "string"}},
        "duration_s": {"type": "number", "minimum": 0},
    },
}
