"""Exception hierarchy shared across the package."""


class CalibrationError(Exception):
    """Base class for all errors raised by fgcalib."""


class AngleNearPi(CalibrationError, ValueError):
    """Rotation angle too close to pi for a well-conditioned logarithm."""

    def __init__(self, angle: float, key=None):
        self.angle = angle
        self.key = key
        where = f" (factor {key})" if key is not None else ""
        super().__init__(f"rotation angle {angle:.9f} rad is too close to pi{where}")


class ArityMismatch(CalibrationError, ValueError):
    """Joint state does not match the kinematic chain."""


class IndefiniteSystem(CalibrationError, ArithmeticError):
    """Normal equations are not positive definite (under-constrained variable)."""

    def __init__(self, message: str, keys=()):
        self.keys = tuple(keys)
        super().__init__(message)


class EmptyProblem(CalibrationError, ValueError):
    """No frame carries a detection."""


class UnobservedCamera(CalibrationError, ValueError):
    """A declared camera has no detection in the dataset."""

    def __init__(self, camera: str):
        self.camera = camera
        super().__init__(f"camera {camera!r} has no detections")


class MissingGroundTruth(CalibrationError, KeyError):
    """Ground truth is missing for at least one camera."""

    def __str__(self):
        return Exception.__str__(self)


class NoVisibleFrames(CalibrationError, ValueError):
    """A simulated scenario produced no usable detection for some camera."""
