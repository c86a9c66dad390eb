"""
Evaluation result schemas
"""
from typing import Optional

from pydantic import BaseModel, Field


class DepthMetrics(BaseModel):
    """Standard depth benchmark errors over the evaluated pixels"""
    abs_rel: float
    sq_rel: float
    rmse: float
    rmse_log: float
    a1: float = Field(..., ge=0, le=1)
    a2: float = Field(..., ge=0, le=1)
    a3: float = Field(..., ge=0, le=1)
    n_pixels: int = Field(..., ge=1)


class GroundMetrics(BaseModel):
    """Quality of the unsupervised ground extraction"""
    iou: float = Field(..., ge=0, le=1)
    roughness: Optional[float] = Field(None, description="mean squared disparity gradient on predicted ground")
    n_ground_pixels: int = Field(..., ge=0)
