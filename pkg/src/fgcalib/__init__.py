"""Multi-camera extrinsic calibration against leg kinematics with a pose factor graph."""

from .errors import (
    AngleNearPi,
    ArityMismatch,
    CalibrationError,
    EmptyProblem,
    IndefiniteSystem,
    MissingGroundTruth,
    NoVisibleFrames,
    UnobservedCamera,
)
from .kinematics import JointSpec, JointState, KinematicChain, forward_kinematics, fk_jacobian, propagate_covariance
from .lie import Pose, Rotation
from .pipeline import CalibrationProblem, CalibrationResult, Detection, ErrorStats, Frame, calibrate, evaluate
from .solver import FactorGraph, SolveReport, SolverSettings, optimize

__version__ = "0.1.0"
