"""Exception hierarchy shared by all camnet modules."""

from __future__ import annotations


class CamnetError(Exception):
    """Base class for every error raised by this package."""


class SymmetryError(CamnetError, ValueError):
    """A matrix expected to be skew-symmetric is not."""


class AngleNearPiError(CamnetError, ValueError):
    """Rotation angle too close to pi for a unique logarithm."""


class DegenerateMeanError(CamnetError, ValueError):
    """The arithmetic mean of rotations has no unique projection onto SO(3)."""


class BehindCameraError(CamnetError, ValueError):
    def __init__(self, depth: float, z_min: float, feature: int | None = None):
        self.depth = depth
        self.z_min = z_min
        self.feature = feature
        where = "" if feature is None else f" (feature {feature})"
        super().__init__(f"point depth {depth:.6g} m <= z_min {z_min:.3g} m{where}")


class DegenerateGeometryError(CamnetError, ValueError):
    """Image Jacobian rank < 6: features cannot determine the pose error."""


class GraphSizeError(CamnetError, ValueError):
    """Graph too large for exhaustive spanning-tree enumeration."""


class DisconnectedGraphError(CamnetError, ValueError):
    """Communication graph is not connected."""


class NoBaselineError(CamnetError, ValueError):
    """No viewing camera, so the averaging baseline is undefined."""


class ScenarioParseError(CamnetError, ValueError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")


class ScenarioValidationError(CamnetError, ValueError):
    def __init__(self, invariant: str, message: str, line: int | None = None):
        self.invariant = invariant
        self.line = line
        where = "" if line is None else f"line {line}: "
        super().__init__(f"{where}{invariant}: {message}")


class SimulationError(CamnetError, RuntimeError):
    def __init__(self, camera: int, time: float, cause: Exception):
        self.camera = camera
        self.time = time
        self.cause = cause
        super().__init__(f"camera {camera} at t={time:.6g} s: {cause}")
