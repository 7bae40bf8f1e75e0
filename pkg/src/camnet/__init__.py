"""Distributed averaging of a target pose over a camera network."""

from .camera import CameraIntrinsics, FeatureModel
from .graph import CommGraph
from .observer import CameraNode, Gains, Network, ObserverState, TargetView, simulate
from .scenario import Scenario, load_scenario
from .se3 import Pose, Twist

__all__ = [
    "CameraIntrinsics", "CameraNode", "CommGraph", "FeatureModel", "Gains", "Network",
    "ObserverState", "Pose", "Scenario", "TargetView", "Twist", "load_scenario", "simulate",
]
__version__ = "0.1.0"
