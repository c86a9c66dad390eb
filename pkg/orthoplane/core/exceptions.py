"""
Structured error types shared by every module
"""
from typing import Any, Dict, Optional


class OrthoPlaneError(Exception):
    """Base error carrying a machine-readable code and the offending field"""

    code = "orthoplane_error"

    def __init__(self, message: str, field: Optional[str] = None, code: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.field = field
        if code:
            self.code = code

    def to_dict(self) -> Dict[str, Any]:
        return {
            "field": self.field,
            "message": self.message,
            "code": self.code,
        }


class InvalidTransformError(OrthoPlaneError):
    code = "invalid_transform"


class InvalidResidualError(OrthoPlaneError):
    code = "invalid_residual"


class DegeneratePlaneError(OrthoPlaneError):
    code = "degenerate_plane"


class DegenerateHomographyError(OrthoPlaneError):
    code = "degenerate_homography"


class InvalidFieldError(OrthoPlaneError):
    code = "invalid_field"


class EmptyInputError(OrthoPlaneError):
    code = "empty_input"


class ShapeMismatchError(OrthoPlaneError):
    code = "shape_mismatch"


class PlaneMismatchError(OrthoPlaneError):
    code = "plane_mismatch"


class FormatError(OrthoPlaneError):
    code = "format_error"


class ConfigError(OrthoPlaneError):
    """Schema or range violation; `field` holds the dotted key path"""

    code = "config_error"


class StageError(OrthoPlaneError):
    """Failure of a CLI stage; `field` holds the stage name"""

    code = "stage_error"


def require_same_shape(name_a: str, a: Any, name_b: str, b: Any) -> None:
    """Raise ShapeMismatchError unless the two arrays share a shape"""
    if a.shape != b.shape:
        raise ShapeMismatchError(
            f"{name_a} has shape {a.shape} but {name_b} has shape {b.shape}",
            field=name_b,
        )
