"""
Plane bank service
Builds the orthogonal (vertical + ground) plane set and renders per-plane
depth and disparity maps
"""
from typing import NamedTuple, Optional, Sequence

import numpy as np

from ..core.exceptions import InvalidResidualError
from ..core.logging_config import get_logger
from ..schemas.camera import AugmentParams, Intrinsics, StereoRig
from ..schemas.config import RenderSettings
from ..schemas.planes import Plane, PlaneBank, PlaneBankParams, PlaneKind
from .camera_geometry import compute_rc, rectify_plane

logger = get_logger(__name__)

VERTICAL_NORMAL = (0.0, 0.0, 1.0)
GROUND_NORMAL = (0.0, 1.0, 0.0)


class PlaneRender(NamedTuple):
    """Depth (or disparity) map and validity mask of one or many planes"""
    values: np.ndarray
    valid: np.ndarray


def _residuals(residuals: Optional[Sequence[float]], count: int, r_max: float, name: str) -> np.ndarray:
    if residuals is None:
        return np.zeros(count)
    r = np.asarray(residuals, dtype=np.float64).reshape(-1)
    if r.shape != (count,):
        raise InvalidResidualError(f"expected {count} residuals, got {r.shape[0]}", field=name)
    if not np.all(np.isfinite(r)):
        raise InvalidResidualError("residuals must be finite", field=name)
    if np.any(np.abs(r) > r_max):
        raise InvalidResidualError(f"residual magnitude exceeds r_max={r_max}", field=name)
    return r


# ============= Bank Construction =============

def vertical_disparities(
    n_vertical: int,
    d_min: float,
    d_max: float,
    residuals: Optional[Sequence[float]] = None,
    r_max: float = 0.5,
) -> np.ndarray:
    """Disparities sampled in exponential space, d_0 = d_max down to d_{N-1} = d_min"""
    if n_vertical < 2:
        raise InvalidResidualError("at least 2 vertical planes are required", field="n_vertical")
    if d_min <= 0:
        raise InvalidResidualError("d_min must be positive", field="d_min")
    r = _residuals(residuals, n_vertical, r_max, "residuals_vertical")
    exponent = (np.arange(n_vertical) + r) / (n_vertical - 1)
    disparities = d_max * (d_min / d_max) ** exponent
    if np.any(~np.isfinite(disparities)) or np.any(disparities <= 0):
        raise InvalidResidualError("residuals produce a non-positive disparity", field="residuals_vertical")
    return disparities


def build_vertical_planes(
    n_vertical: int,
    d_min: float,
    d_max: float,
    rig: StereoRig,
    intr: Intrinsics,
    residuals: Optional[Sequence[float]] = None,
    r_max: float = 0.5,
) -> list:
    """Fronto-parallel planes n = [0,0,1] at delta_i = B·f_x / d_i"""
    disparities = vertical_disparities(n_vertical, d_min, d_max, residuals, r_max)
    return [Plane(n=VERTICAL_NORMAL, delta=float(rig.baseline * intr.fx / d)) for d in disparities]


def build_ground_planes(
    n_ground: int,
    h_min: float,
    h_max: float,
    residuals: Optional[Sequence[float]] = None,
    r_max: float = 0.5,
) -> list:
    """Ground planes n = [0,1,0] spaced linearly in camera height"""
    if n_ground < 2:
        raise InvalidResidualError("at least 2 ground planes are required", field="n_ground")
    if h_min <= 0:
        raise InvalidResidualError("h_min must be positive", field="h_min")
    r = _residuals(residuals, n_ground, r_max, "residuals_ground")
    heights = h_min + (np.arange(n_ground) + r) / (n_ground - 1) * (h_max - h_min)
    if np.any(heights <= 0):
        raise InvalidResidualError("residuals produce a non-positive camera height", field="residuals_ground")
    return [Plane(n=GROUND_NORMAL, delta=float(h)) for h in heights]


def build_bank(
    params: PlaneBankParams,
    rig: StereoRig,
    intr: Intrinsics,
    residuals_vertical: Optional[Sequence[float]] = None,
    residuals_ground: Optional[Sequence[float]] = None,
) -> PlaneBank:
    """All vertical planes followed by all ground planes"""
    planes, kinds, residuals = [], [], []
    if params.n_vertical:
        planes += build_vertical_planes(
            params.n_vertical, params.d_min, params.d_max, rig, intr, residuals_vertical, params.residual_max
        )
        kinds += [PlaneKind.VERTICAL] * params.n_vertical
        residuals += list(_residuals(residuals_vertical, params.n_vertical, params.residual_max, "residuals_vertical"))
    if params.n_ground:
        planes += build_ground_planes(
            params.n_ground, params.h_min, params.h_max, residuals_ground, params.residual_max
        )
        kinds += [PlaneKind.GROUND] * params.n_ground
        residuals += list(_residuals(residuals_ground, params.n_ground, params.residual_max, "residuals_ground"))

    logger.debug(f"Built plane bank: {params.n_vertical} vertical + {params.n_ground} ground")
    return PlaneBank(planes=planes, kinds=kinds, residuals=[float(r) for r in residuals], params=params)


def bank_to_json(bank: PlaneBank) -> str:
    return bank.model_dump_json(indent=2)


def bank_from_json(text: str) -> PlaneBank:
    return PlaneBank.model_validate_json(text)


# ============= Rendering =============

def render_plane_depth(
    plane: Plane,
    intr: Intrinsics,
    settings: RenderSettings = RenderSettings(),
) -> PlaneRender:
    """
    Ray-plane depth D(u) = delta / (n^T K^{-1}[u;1]).

    Rays nearly parallel to the plane (denominator <= ray_epsilon) and depths
    outside [depth_floor, depth_ceil] are clamped to the nearer bound and
    flagged invalid.
    """
    denom = intr.rays() @ plane.normal
    facing = denom > settings.ray_epsilon
    with np.errstate(divide="ignore", invalid="ignore"):
        depth = np.where(facing, plane.delta / np.where(facing, denom, 1.0), settings.depth_ceil)
    # negative depths behind the camera clamp to the floor
    valid = facing & (depth >= settings.depth_floor) & (depth <= settings.depth_ceil)
    depth = np.clip(depth, settings.depth_floor, settings.depth_ceil)
    return PlaneRender(values=depth, valid=valid)


def depth_to_disparity(depth: np.ndarray, valid: np.ndarray, intr: Intrinsics, rig: StereoRig) -> np.ndarray:
    """d = f_x·B / D on valid pixels, 0 elsewhere"""
    with np.errstate(divide="ignore"):
        return np.where(valid, intr.fx * rig.baseline / np.where(valid, depth, 1.0), 0.0)


def disparity_to_depth(disparity: np.ndarray, intr: Intrinsics, rig: StereoRig) -> np.ndarray:
    """D = f_x·B / d; non-positive disparities map to 0"""
    disparity = np.asarray(disparity, dtype=np.float64)
    positive = disparity > 0
    return np.where(positive, intr.fx * rig.baseline / np.where(positive, disparity, 1.0), 0.0)


def plane_disparity(
    plane: Plane,
    intr: Intrinsics,
    rig: StereoRig,
    settings: RenderSettings = RenderSettings(),
) -> PlaneRender:
    rendered = render_plane_depth(plane, intr, settings)
    return PlaneRender(
        values=depth_to_disparity(rendered.values, rendered.valid, intr, rig),
        valid=rendered.valid,
    )


def render_planes(
    planes: Sequence[Plane],
    intr: Intrinsics,
    settings: RenderSettings = RenderSettings(),
) -> PlaneRender:
    """Stacked depths and validity, shape H×W×N"""
    renders = [render_plane_depth(p, intr, settings) for p in planes]
    return PlaneRender(
        values=np.stack([r.values for r in renders], axis=-1),
        valid=np.stack([r.valid for r in renders], axis=-1),
    )


def render_bank(bank: PlaneBank, intr: Intrinsics, settings: RenderSettings = RenderSettings()) -> PlaneRender:
    return render_planes(bank.planes, intr, settings)


def render_augmented_bank(
    bank: PlaneBank,
    intr: Intrinsics,
    aug: AugmentParams,
    settings: RenderSettings = RenderSettings(),
) -> PlaneRender:
    """Plane depths of the resize-cropped view: each plane rectified by R_C, rendered with the same K"""
    rc = compute_rc(intr, aug)
    return render_planes([rectify_plane(p, rc) for p in bank.planes], intr, settings)


def bank_disparities(
    bank: PlaneBank,
    intr: Intrinsics,
    rig: StereoRig,
    settings: RenderSettings = RenderSettings(),
) -> PlaneRender:
    """Per-plane disparity maps, shape H×W×N"""
    rendered = render_bank(bank, intr, settings)
    return PlaneRender(
        values=depth_to_disparity(rendered.values, rendered.valid, intr, rig),
        valid=rendered.valid,
    )
