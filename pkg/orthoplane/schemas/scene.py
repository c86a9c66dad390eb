"""
Synthetic scene schemas for the oracle renderer
"""
from typing import List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .planes import Plane


class Patch(BaseModel):
    """
    Finite textured rectangle on a plane.

    A point of the patch is w = delta*n + u*e1 + v*e2 where (e1, e2) is the
    in-plane basis returned by `basis()`; the extent bounds (u, v).
    """
    model_config = ConfigDict(frozen=True)

    plane: Plane
    extent: Tuple[float, float, float, float] = Field(..., description="u_min, u_max, v_min, v_max in meters")
    texture_seed: int = 0
    wavelength: Tuple[float, float] = Field((1.0, 1.0), description="shortest texture wavelength along u and v, meters")

    @model_validator(mode="after")
    def check_extent(self):
        u0, u1, v0, v1 = self.extent
        if not (u1 > u0 and v1 > v0):
            raise ValueError(f"patch extent must be positive, got {self.extent}")
        if min(self.wavelength) <= 0:
            raise ValueError("texture wavelength must be positive")
        return self

    def basis(self) -> Tuple[np.ndarray, np.ndarray]:
        return plane_basis(self.plane.normal)


class SceneSpec(BaseModel):
    """Patches in front of the target camera plus an unbounded background plane"""
    model_config = ConfigDict(frozen=True)

    patches: List[Patch] = Field(..., min_length=1)
    background: Plane
    background_wavelength: Tuple[float, float] = (10.0, 10.0)
    seed: int = 0
    light: float = Field(1.0, gt=0)

    @model_validator(mode="after")
    def check_front(self):
        for i, patch in enumerate(self.patches):
            if patch.plane.delta <= 0:
                raise ValueError(f"patch {i} does not face the camera (delta <= 0)")
        if self.background.delta <= 0:
            raise ValueError("background plane must lie in front of the camera")
        return self

    @property
    def background_id(self) -> int:
        return len(self.patches)


def plane_basis(n: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Orthonormal in-plane axes (e1, e2) with e2 = n × e1"""
    n = np.asarray(n, dtype=np.float64)
    seed = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = seed - (seed @ n) * n
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    return e1, e2
