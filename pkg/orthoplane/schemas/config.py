"""
Run configuration schema
Flat camera keys plus one section per module; unknown keys are rejected
"""
from typing import Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .camera import AugmentParams, Intrinsics, StereoRig
from .planes import PlaneBankParams


class _Section(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class MixtureSettings(_Section):
    sigma_min: float = Field(1e-4, gt=0)
    oracle_logit: float = Field(30.0, gt=0)
    oracle_sigma: float = Field(1e-3, gt=0)

    @model_validator(mode="after")
    def check_floor(self):
        if self.oracle_sigma < self.sigma_min:
            raise ValueError("oracle_sigma must be >= sigma_min")
        return self


class RenderSettings(_Section):
    ray_epsilon: float = Field(1e-6, gt=0)
    depth_floor: float = Field(0.1, gt=0)
    depth_ceil: float = Field(2000.0, gt=0)

    @model_validator(mode="after")
    def check_bounds(self):
        if not self.depth_floor < self.depth_ceil:
            raise ValueError("depth_floor must be < depth_ceil")
        return self


class LossWeights(_Section):
    lambda1: float = Field(0.1, ge=0)
    lambda2: float = Field(0.04, ge=0)
    lambda3: float = Field(1.0, ge=0)


class EvalSettings(_Section):
    clip_min: float = Field(1e-3, gt=0)
    clip_max: float = Field(80.0, gt=0)
    crop: Optional[str] = None

    @model_validator(mode="after")
    def check_clip(self):
        if not self.clip_min < self.clip_max:
            raise ValueError("clip_min must be < clip_max")
        return self


class SceneSettings(_Section):
    min_patches: int = Field(2, ge=1)
    max_patches: int = Field(4, ge=1)
    with_ground: bool = True
    texture_wavelength_px: float = Field(24.0, gt=2)
    scale_range: Tuple[float, float] = (0.75, 1.5)

    @model_validator(mode="after")
    def check_counts(self):
        if self.min_patches > self.max_patches:
            raise ValueError("min_patches must be <= max_patches")
        lo, hi = self.scale_range
        if not 0 < lo <= hi:
            raise ValueError("scale_range must satisfy 0 < lo <= hi")
        return self


class RunConfig(_Section):
    fx: float = Field(..., gt=0)
    fy: float = Field(..., gt=0)
    cx: float
    cy: float
    width: int = Field(..., ge=1)
    height: int = Field(..., ge=1)
    baseline_m: float = Field(..., gt=0)
    fs: float = Field(1.0, gt=0)
    px: Optional[float] = None
    py: Optional[float] = None

    planes: PlaneBankParams = PlaneBankParams()
    mixture: MixtureSettings = MixtureSettings()
    render: RenderSettings = RenderSettings()
    losses: LossWeights = LossWeights()
    eval: EvalSettings = EvalSettings()
    scene: SceneSettings = SceneSettings()

    @property
    def intrinsics(self) -> Intrinsics:
        return Intrinsics(fx=self.fx, fy=self.fy, cx=self.cx, cy=self.cy, width=self.width, height=self.height)

    @property
    def rig(self) -> StereoRig:
        return StereoRig(baseline=self.baseline_m)

    @property
    def augment(self) -> AugmentParams:
        return AugmentParams(
            fs=self.fs,
            px=self.cx if self.px is None else self.px,
            py=self.cy if self.py is None else self.py,
        )
