"""
Pydantic schemas and value containers
"""
from .camera import AugmentParams, GeneralPose, Intrinsics, RigidPose, StereoRig
from .config import (
    EvalSettings,
    LossWeights,
    MixtureSettings,
    RenderSettings,
    RunConfig,
    SceneSettings,
)
from .metrics import DepthMetrics, GroundMetrics
from .planes import Plane, PlaneBank, PlaneBankParams, PlaneKind
from .scene import Patch, SceneSpec, plane_basis

__all__ = [
    "AugmentParams",
    "DepthMetrics",
    "EvalSettings",
    "GeneralPose",
    "GroundMetrics",
    "Intrinsics",
    "LossWeights",
    "MixtureSettings",
    "Patch",
    "Plane",
    "PlaneBank",
    "PlaneBankParams",
    "PlaneKind",
    "RenderSettings",
    "RigidPose",
    "RunConfig",
    "SceneSettings",
    "SceneSpec",
    "StereoRig",
    "plane_basis",
]
