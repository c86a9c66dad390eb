"""
Plane and plane-bank schemas
"""
from enum import Enum
from typing import List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class PlaneKind(str, Enum):
    """Plane families of the orthogonal bank"""
    VERTICAL = "vertical"
    GROUND = "ground"


class Plane(BaseModel):
    """n^T w = delta in camera coordinates; n unit-length"""
    model_config = ConfigDict(frozen=True)

    n: Tuple[float, float, float]
    delta: float

    @field_validator("n")
    @classmethod
    def unit_normal(cls, v):
        norm = float(np.linalg.norm(v))
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"normal must be unit-length, |n| = {norm!r}")
        return v

    @field_validator("delta")
    @classmethod
    def finite_delta(cls, v: float) -> float:
        if not np.isfinite(v):
            raise ValueError("delta must be finite")
        return v

    @classmethod
    def from_normal(cls, n, delta: float) -> "Plane":
        """Build from an arbitrary-length normal, normalizing it"""
        arr = np.asarray(n, dtype=np.float64)
        arr = arr / np.linalg.norm(arr)
        return cls(n=tuple(float(c) for c in arr), delta=float(delta))

    @property
    def normal(self) -> np.ndarray:
        return np.asarray(self.n, dtype=np.float64)

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Signed residual n^T w - delta for points of shape ...×3"""
        return points @ self.normal - self.delta

    def matches(self, other: "Plane", tol: float = 1e-12) -> bool:
        return (
            np.allclose(self.normal, other.normal, rtol=0.0, atol=tol)
            and abs(self.delta - other.delta) <= tol * max(1.0, abs(self.delta))
        )


class PlaneBankParams(BaseModel):
    """Sampling parameters of the orthogonal bank"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    n_vertical: int = Field(49, ge=0)
    n_ground: int = Field(14, ge=0)
    d_min: float = Field(2.0, gt=0, description="pixels")
    d_max: float = Field(300.0, gt=0, description="pixels")
    h_min: float = Field(1.0, gt=0, description="meters")
    h_max: float = Field(2.0, gt=0, description="meters")
    residual_max: float = Field(0.5, ge=0)

    @model_validator(mode="after")
    def check_ranges(self):
        if self.n_vertical + self.n_ground < 1:
            raise ValueError("bank needs at least one plane")
        if self.n_vertical == 1 or self.n_ground == 1:
            raise ValueError("each non-empty plane family needs at least 2 planes")
        if not self.d_min < self.d_max:
            raise ValueError("d_min must be < d_max")
        if not self.h_min < self.h_max:
            raise ValueError("h_min must be < h_max")
        return self


class PlaneBank(BaseModel):
    """Ordered planes: all vertical first, then all ground"""
    model_config = ConfigDict(frozen=True)

    planes: List[Plane]
    kinds: List[PlaneKind]
    residuals: List[float]
    params: PlaneBankParams

    @model_validator(mode="after")
    def check_layout(self):
        n = len(self.planes)
        if n < 1:
            raise ValueError("bank is empty")
        if len(self.kinds) != n or len(self.residuals) != n:
            raise ValueError("planes, kinds and residuals must have equal length")
        order = [k == PlaneKind.GROUND for k in self.kinds]
        if order != sorted(order):
            raise ValueError("vertical planes must precede ground planes")
        return self

    def __len__(self) -> int:
        return len(self.planes)

    @property
    def n_vertical(self) -> int:
        return sum(1 for k in self.kinds if k == PlaneKind.VERTICAL)

    @property
    def n_ground(self) -> int:
        return len(self.planes) - self.n_vertical

    def ground_indices(self) -> List[int]:
        return [i for i, k in enumerate(self.kinds) if k == PlaneKind.GROUND]

    def index_of(self, plane: Plane) -> int:
        """Index of the bank plane matching `plane`, or -1"""
        for i, candidate in enumerate(self.planes):
            if candidate.matches(plane):
                return i
        return -1
