"""
Warp engine service
Plane-induced homographies, backward bilinear warping of images and mixture
fields, reference-view synthesis and disparity-shift warps
"""
from dataclasses import dataclass
from enum import Enum
from typing import List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.ndimage import map_coordinates
from scipy.special import softmax

from ..core.exceptions import (
    DegenerateHomographyError,
    DegeneratePlaneError,
    ShapeMismatchError,
    require_same_shape,
)
from ..core.logging_config import get_logger
from ..core.parallel import parallel_map
from ..schemas.camera import AugmentParams, GeneralPose, Intrinsics, RigidPose
from ..schemas.config import RenderSettings
from ..schemas.planes import Plane
from .camera_geometry import resize_crop_pixels, transform_plane
from .mixture_model import MixtureField, ProbField, plane_probabilities
from .plane_bank import PlaneRender, render_planes

logger = get_logger(__name__)

Pose = Union[RigidPose, GeneralPose]

INVALID_LOGIT = -1e30
BORDER_TOL = 1e-6
SINGULAR_DET = 1e-12


class ShiftDirection(str, Enum):
    """Direction of a disparity warp; x_L = x_R + d"""
    LEFT_TO_RIGHT = "L2R"
    RIGHT_TO_LEFT = "R2L"


class WarpResult(NamedTuple):
    values: np.ndarray
    valid: np.ndarray


class SampleCoords(NamedTuple):
    xs: np.ndarray
    ys: np.ndarray
    valid: np.ndarray


@dataclass(frozen=True)
class WarpedMixture:
    """Per-plane logits and scales resampled into the reference view"""
    logits: np.ndarray
    scales: np.ndarray
    plane_valid: np.ndarray

    @property
    def pixel_valid(self) -> np.ndarray:
        return self.plane_valid.any(axis=-1)

    @property
    def weights(self) -> np.ndarray:
        """Softmax after warping; invalid samples get a -1e30 logit, dead pixels all-zero weights"""
        surrogate = np.where(self.plane_valid, self.logits, INVALID_LOGIT)
        weights = softmax(surrogate, axis=-1)
        return np.where(self.pixel_valid[..., None], weights, 0.0)


@dataclass(frozen=True)
class ReferenceWarp:
    homographies: List[np.ndarray]
    images: np.ndarray        # N×H×W×C
    image_valid: np.ndarray   # N×H×W
    mixture: WarpedMixture


class Synthesis(NamedTuple):
    image: np.ndarray
    valid: np.ndarray
    probs: ProbField


# ============= Homographies =============

def homography(plane: Plane, pose: Pose, intr: Intrinsics) -> np.ndarray:
    """
    H = K (M + t n^T / delta) K^{-1}: maps target pixels on `plane` to
    reference pixels.
    """
    if plane.delta == 0:
        raise DegeneratePlaneError("plane passes through the camera centre (delta = 0)", field="delta")
    h = intr.K @ (pose.M + np.outer(pose.t, plane.normal) / plane.delta) @ intr.K_inv
    if abs(np.linalg.det(h)) < SINGULAR_DET:
        raise DegenerateHomographyError("homography is singular", field="plane")
    return h


def warp_coordinates(h: np.ndarray, out_size: Tuple[int, int], src_size: Optional[Tuple[int, int]] = None) -> SampleCoords:
    """
    Source coordinates H^{-1}u for every output pixel u.

    A sample is valid when it lands in [0, W-1]×[0, H-1] of the source,
    within BORDER_TOL pixels.
    """
    h = np.asarray(h, dtype=np.float64)
    if abs(np.linalg.det(h)) < SINGULAR_DET:
        raise DegenerateHomographyError("homography is singular", field="h")
    height, width = out_size
    src_h, src_w = src_size or out_size
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    pts = np.stack([xs, ys, np.ones_like(xs)], axis=-1) @ np.linalg.inv(h).T
    w = pts[..., 2]
    in_front = w > 1e-12
    with np.errstate(divide="ignore", invalid="ignore"):
        sx = np.where(in_front, pts[..., 0] / np.where(in_front, w, 1.0), -1.0)
        sy = np.where(in_front, pts[..., 1] / np.where(in_front, w, 1.0), -1.0)
    valid = (
        in_front
        & (sx >= -BORDER_TOL) & (sx <= src_w - 1 + BORDER_TOL)
        & (sy >= -BORDER_TOL) & (sy <= src_h - 1 + BORDER_TOL)
    )
    return SampleCoords(xs=sx, ys=sy, valid=valid)


def sample_bilinear(src: np.ndarray, xs: np.ndarray, ys: np.ndarray, valid: np.ndarray) -> np.ndarray:
    """Bilinear lookup of src (H×W or H×W×C) at valid coordinates, 0 elsewhere"""
    src = np.asarray(src, dtype=np.float64)
    src_h, src_w = src.shape[:2]
    coords = np.stack([
        np.clip(np.where(valid, ys, 0.0), 0.0, src_h - 1),
        np.clip(np.where(valid, xs, 0.0), 0.0, src_w - 1),
    ])
    if src.ndim == 2:
        out = map_coordinates(src, coords, order=1, mode="nearest")
        return np.where(valid, out, 0.0)
    channels = [map_coordinates(src[..., c], coords, order=1, mode="nearest") for c in range(src.shape[-1])]
    return np.where(valid[..., None], np.stack(channels, axis=-1), 0.0)


def warp_bilinear(src: np.ndarray, h: np.ndarray, out_size: Optional[Tuple[int, int]] = None) -> WarpResult:
    """Backward warp: out(u) = src(H^{-1} u), invalid samples are 0"""
    src = np.asarray(src, dtype=np.float64)
    coords = warp_coordinates(h, out_size or src.shape[:2], src.shape[:2])
    return WarpResult(values=sample_bilinear(src, coords.xs, coords.ys, coords.valid), valid=coords.valid)


def augment_image(image: np.ndarray, aug: AugmentParams, intr: Intrinsics) -> WarpResult:
    """Resize-cropped view of `image`; pixels whose source leaves the frame are invalid"""
    image = np.asarray(image, dtype=np.float64)
    xs, ys = intr.pixel_grid()
    sx, sy = resize_crop_pixels(intr, aug, xs, ys, inverse=True)
    valid = (
        (sx >= -BORDER_TOL) & (sx <= intr.width - 1 + BORDER_TOL)
        & (sy >= -BORDER_TOL) & (sy <= intr.height - 1 + BORDER_TOL)
    )
    return WarpResult(values=sample_bilinear(image, sx, sy, valid), valid=valid)


# ============= Mixture Warping and Synthesis =============

def warp_mixture(
    field: MixtureField,
    homographies: Sequence[np.ndarray],
    out_size: Optional[Tuple[int, int]] = None,
    workers: Optional[int] = None,
) -> WarpedMixture:
    """Warp logit and scale channel i with its own homography H_i"""
    if len(homographies) != field.n_planes:
        raise ShapeMismatchError(
            f"{field.n_planes} planes but {len(homographies)} homographies", field="homographies"
        )

    def warp_plane(i: int) -> WarpResult:
        src = np.stack([field.logits[..., i], field.scales[..., i]], axis=-1)
        return warp_bilinear(src, homographies[i], out_size)

    results = parallel_map(warp_plane, range(field.n_planes), workers)
    return _assemble_mixture(results, [r.values for r in results], 0)


def _assemble_mixture(results: Sequence[WarpResult], values: Sequence[np.ndarray], offset: int) -> WarpedMixture:
    plane_valid = np.stack([r.valid for r in results], axis=-1)
    logits = np.stack([v[..., offset] for v in values], axis=-1)
    scales = np.stack([v[..., offset + 1] for v in values], axis=-1)
    return WarpedMixture(
        logits=np.where(plane_valid, logits, 0.0),
        scales=np.where(plane_valid, scales, 1.0),
        plane_valid=plane_valid,
    )


def warp_to_reference(
    image: np.ndarray,
    field: MixtureField,
    planes: Sequence[Plane],
    pose: Pose,
    intr: Intrinsics,
    workers: Optional[int] = None,
) -> ReferenceWarp:
    """
    Per-plane homographies, warped target images and warped field in one pass.

    Image, logit and scale channels of plane i share one resampling call.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 2:
        image = image[..., None]
    if image.shape[:2] != field.shape:
        raise ShapeMismatchError(f"image is {image.shape[:2]} but field is {field.shape}", field="image")
    if len(planes) != field.n_planes:
        raise ShapeMismatchError(f"{field.n_planes} field planes but {len(planes)} planes", field="planes")

    homographies = [homography(p, pose, intr) for p in planes]
    n_channels = image.shape[-1]

    def warp_plane(i: int) -> WarpResult:
        src = np.concatenate([image, field.logits[..., i:i + 1], field.scales[..., i:i + 1]], axis=-1)
        return warp_bilinear(src, homographies[i], intr.shape)

    results = parallel_map(warp_plane, range(len(planes)), workers)
    logger.debug(f"Warped {len(planes)} planes to the reference view")
    return ReferenceWarp(
        homographies=homographies,
        images=np.stack([r.values[..., :n_channels] for r in results]),
        image_valid=np.stack([r.valid for r in results]),
        mixture=_assemble_mixture(results, [r.values for r in results], n_channels),
    )


def reference_plane_depths(
    planes: Sequence[Plane],
    pose: Pose,
    intr: Intrinsics,
    settings: RenderSettings = RenderSettings(),
) -> PlaneRender:
    """Plane depths D_i^r rendered in the reference camera"""
    return render_planes([transform_plane(p, pose) for p in planes], intr, settings)


def synthesize_reference(
    mixture: WarpedMixture,
    warped_images: np.ndarray,
    ref_plane_depths: np.ndarray,
    ref_plane_valid: Optional[np.ndarray] = None,
) -> Synthesis:
    """
    I_r = (1/Z) Σ p_i I_i with p_i from the warped weights and scales and
    the reference-view plane depths. Z is renormalized over valid planes;
    Z < 1e-20 marks the pixel invalid.
    """
    warped_images = np.asarray(warped_images, dtype=np.float64)
    if warped_images.ndim == 3:
        warped_images = warped_images[..., None]
    n_planes, height, width = warped_images.shape[:3]
    if mixture.logits.shape != (height, width, n_planes):
        raise ShapeMismatchError(
            f"images are {n_planes}×{height}×{width} but field is {mixture.logits.shape}", field="warped_images"
        )
    require_same_shape("field", mixture.logits, "ref_plane_depths", ref_plane_depths)

    plane_valid = mixture.plane_valid
    if ref_plane_valid is not None:
        plane_valid = plane_valid & ref_plane_valid
    probs = plane_probabilities(mixture.weights, mixture.scales, ref_plane_depths, plane_valid)
    image = np.einsum("hwn,nhwc->hwc", probs.probs, warped_images)
    return Synthesis(image=image, valid=probs.valid, probs=probs)


# ============= Disparity Warps =============

def disparity_shift(src: np.ndarray, disp: np.ndarray, direction: ShiftDirection) -> WarpResult:
    """
    L2R: out(x, y) = src(x + d(x, y), y); R2L: out(x, y) = src(x - d(x, y), y).

    Bilinear along the row; samples leaving the image are invalid and 0.
    """
    src = np.asarray(src, dtype=np.float64)
    disp = np.asarray(disp, dtype=np.float64)
    if disp.shape != src.shape[:2]:
        raise ShapeMismatchError(f"disparity is {disp.shape} but source is {src.shape[:2]}", field="disp")
    height, width = disp.shape
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    sign = 1.0 if ShiftDirection(direction) == ShiftDirection.LEFT_TO_RIGHT else -1.0
    sx = xs + sign * disp
    valid = (sx >= -BORDER_TOL) & (sx <= width - 1 + BORDER_TOL)
    return WarpResult(values=sample_bilinear(src, sx, ys, valid), valid=valid)
