"""
Camera, stereo rig, pose and augmentation schemas
"""
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from ..core.exceptions import InvalidTransformError


# ============= Camera Schemas =============

class Intrinsics(BaseModel):
    """Pinhole camera; x right, y down, z forward, pixel (0,0) top-left"""
    model_config = ConfigDict(frozen=True)

    fx: float = Field(..., gt=0)
    fy: float = Field(..., gt=0)
    cx: float
    cy: float
    width: int = Field(..., ge=1)
    height: int = Field(..., ge=1)

    @property
    def K(self) -> np.ndarray:
        return np.array([
            [self.fx, 0.0, self.cx],
            [0.0, self.fy, self.cy],
            [0.0, 0.0, 1.0],
        ])

    @property
    def K_inv(self) -> np.ndarray:
        return np.array([
            [1.0 / self.fx, 0.0, -self.cx / self.fx],
            [0.0, 1.0 / self.fy, -self.cy / self.fy],
            [0.0, 0.0, 1.0],
        ])

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.height, self.width)

    @property
    def image_center(self) -> Tuple[float, float]:
        """Centre in pixel-centre coordinates"""
        return ((self.width - 1) / 2.0, (self.height - 1) / 2.0)

    def pixel_grid(self) -> Tuple[np.ndarray, np.ndarray]:
        """(x, y) coordinate arrays of shape H×W"""
        ys, xs = np.mgrid[0:self.height, 0:self.width]
        return xs.astype(np.float64), ys.astype(np.float64)

    def rays(self) -> np.ndarray:
        """K^{-1}[u;1] for every pixel, shape H×W×3"""
        xs, ys = self.pixel_grid()
        return np.stack([
            (xs - self.cx) / self.fx,
            (ys - self.cy) / self.fy,
            np.ones_like(xs),
        ], axis=-1)

    def flipped(self) -> "Intrinsics":
        """Intrinsics of the horizontally mirrored image"""
        return self.model_copy(update={"cx": self.width - 1 - self.cx})


class StereoRig(BaseModel):
    """Rectified pair; the reference (right) camera sits +B along x"""
    model_config = ConfigDict(frozen=True)

    baseline: float = Field(..., gt=0, description="meters")

    def target_to_reference(self) -> "RigidPose":
        return RigidPose(R=np.eye(3), t=np.array([-self.baseline, 0.0, 0.0]))

    def reference_to_target(self) -> "RigidPose":
        return RigidPose(R=np.eye(3), t=np.array([self.baseline, 0.0, 0.0]))


class AugmentParams(BaseModel):
    """Resize-crop augmentation: scale f_s and crop centre (p_x, p_y)"""
    model_config = ConfigDict(frozen=True)

    fs: float = Field(1.0, gt=0)
    px: float
    py: float

    @classmethod
    def identity(cls, intr: Intrinsics) -> "AugmentParams":
        """No augmentation: unit scale, window centred on the principal point"""
        return cls(fs=1.0, px=intr.cx, py=intr.cy)

    def is_identity(self, intr: Intrinsics) -> bool:
        return self == AugmentParams.identity(intr)

    @field_validator("px", "py")
    @classmethod
    def finite_center(cls, v: float) -> float:
        if not np.isfinite(v):
            raise ValueError("crop centre must be finite")
        return v


# ============= Pose Containers =============

def _as_matrix(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.shape != (3, 3):
        raise InvalidTransformError(f"{name} must be 3x3, got {arr.shape}", field=name)
    return arr


def _as_vector(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64).reshape(-1)
    if arr.shape != (3,):
        raise InvalidTransformError(f"{name} must be a 3-vector, got {arr.shape}", field=name)
    return arr


@dataclass(frozen=True)
class RigidPose:
    """w_r = R w + t with R a proper rotation"""
    R: np.ndarray
    t: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = _as_matrix(self.R, "R")
        t = _as_vector(self.t, "t")
        if not np.allclose(R.T @ R, np.eye(3), rtol=0.0, atol=1e-12):
            raise InvalidTransformError("R is not orthonormal", field="R")
        if abs(np.linalg.det(R) - 1.0) > 1e-12:
            raise InvalidTransformError("det(R) must be +1", field="R")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "t", t)

    @property
    def M(self) -> np.ndarray:
        return self.R

    def compose(self, other: "RigidPose") -> "RigidPose":
        """self ∘ other: apply other first"""
        return RigidPose(R=self.R @ other.R, t=self.R @ other.t + self.t)


@dataclass(frozen=True)
class GeneralPose:
    """w_r = M w + t with M invertible but not necessarily orthogonal"""
    M: np.ndarray
    t: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        M = _as_matrix(self.M, "M")
        t = _as_vector(self.t, "t")
        if abs(np.linalg.det(M)) <= 1e-12:
            raise InvalidTransformError("M is singular", field="M")
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "t", t)

    @classmethod
    def from_rigid(cls, pose: RigidPose) -> "GeneralPose":
        return cls(M=pose.R, t=pose.t)
