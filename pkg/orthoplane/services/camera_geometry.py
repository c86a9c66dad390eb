"""
Camera geometry service
Back-projection, the resize-crop world transform R_C, plane and pose
rectification under that transform, and the augmentation grid
"""
from typing import NamedTuple, Optional, Tuple, Union

import numpy as np

from ..core.exceptions import InvalidTransformError
from ..core.logging_config import get_logger
from ..schemas.camera import AugmentParams, GeneralPose, Intrinsics, RigidPose
from ..schemas.planes import Plane

logger = get_logger(__name__)

Pose = Union[RigidPose, GeneralPose]

SINGULAR_DET = 1e-12


class AugmentGrid(NamedTuple):
    """Normalized original-image position of every augmented pixel"""
    values: np.ndarray  # H×W×2, (x, y) order
    out_of_range: bool


# ============= Projection =============

def backproject(intr: Intrinsics, xs: np.ndarray, ys: np.ndarray, depth: np.ndarray) -> np.ndarray:
    """D·K^{-1}[u;1] for pixel arrays; returns shape (...)×3"""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    depth = np.asarray(depth, dtype=np.float64)
    return np.stack([
        depth * (xs - intr.cx) / intr.fx,
        depth * (ys - intr.cy) / intr.fy,
        depth * np.ones_like(xs),
    ], axis=-1)


def project(intr: Intrinsics, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Pixel coordinates of camera-frame points (...)×3"""
    points = np.asarray(points, dtype=np.float64)
    z = points[..., 2]
    return intr.fx * points[..., 0] / z + intr.cx, intr.fy * points[..., 1] / z + intr.cy


# ============= Resize-Crop Transform =============

def compute_rc(intr: Intrinsics, aug: AugmentParams) -> np.ndarray:
    """
    World-coordinate transform induced by scaling with f_s and cropping a
    window centred at (p_x, p_y).

    Points seen in the augmented image satisfy w~ = R_C w; their depth is
    f_s times the original one.
    """
    rc = np.eye(3)
    rc[0, 2] = (intr.cx - aug.px) / intr.fx
    rc[1, 2] = (intr.cy - aug.py) / intr.fy
    rc[2, 2] = aug.fs
    return rc


def resize_crop_pixels(
    intr: Intrinsics,
    aug: AugmentParams,
    xs: np.ndarray,
    ys: np.ndarray,
    inverse: bool = False,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Map original pixels to augmented pixels: u~ = (u - P_c)/f_s + centre.

    With inverse=True maps augmented pixels back: P = P_c + f_s (u~ - centre).
    R_C reproduces this map exactly when the principal point sits at the
    image centre.
    """
    cx0, cy0 = intr.image_center
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if inverse:
        return aug.px + aug.fs * (xs - cx0), aug.py + aug.fs * (ys - cy0)
    return (xs - aug.px) / aug.fs + cx0, (ys - aug.py) / aug.fs + cy0


def augmented_depth(depth: np.ndarray, aug: AugmentParams) -> np.ndarray:
    return np.asarray(depth) * aug.fs


def augmented_disparity(disparity: np.ndarray, aug: AugmentParams) -> np.ndarray:
    return np.asarray(disparity) / aug.fs


def _check_invertible(rc: np.ndarray) -> np.ndarray:
    rc = np.asarray(rc, dtype=np.float64)
    if rc.shape != (3, 3):
        raise InvalidTransformError(f"transform must be 3x3, got {rc.shape}", field="rc")
    if abs(np.linalg.det(rc)) <= SINGULAR_DET:
        raise InvalidTransformError("transform is singular", field="rc")
    return rc


def rectify_plane(plane: Plane, rc: np.ndarray) -> Plane:
    """
    Express a plane in rectified coordinates w~ = rc·w.

    n~ = rc^{-T} n / |rc^{-T} n|,  delta~ = delta / |rc^{-T} n|
    """
    rc = _check_invertible(rc)
    m = np.linalg.solve(rc.T, plane.normal)
    scale = float(np.linalg.norm(m))
    return Plane.from_normal(m / scale, plane.delta / scale)


def rectify_pose(pose: Pose, rc: np.ndarray) -> GeneralPose:
    """Relative pose between two views augmented with the same rc"""
    rc = _check_invertible(rc)
    rc_inv = np.linalg.inv(rc)
    return GeneralPose(M=rc @ pose.M @ rc_inv, t=rc @ pose.t)


def transform_plane(plane: Plane, pose: Pose) -> Plane:
    """The same plane expressed in the frame w_r = M w + t"""
    m_inv = np.linalg.inv(pose.M)
    normal = m_inv.T @ plane.normal
    scale = float(np.linalg.norm(normal))
    delta = plane.delta + plane.normal @ (m_inv @ pose.t)
    return Plane.from_normal(normal / scale, delta / scale)


# ============= Augmentation Grid =============

def augment_grid(
    aug: AugmentParams,
    intr: Intrinsics,
    out_size: Optional[Tuple[int, int]] = None,
) -> AugmentGrid:
    """
    Relative position in the original image of every augmented pixel.

    Original pixel x in [0, W-1] maps linearly onto [-1, 1] (corner-aligned).
    Args:
        out_size: (height, width) of the augmented image; defaults to the
            original size
    """
    height, width = out_size or intr.shape
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    cx0, cy0 = (width - 1) / 2.0, (height - 1) / 2.0
    ox = aug.px + aug.fs * (xs - cx0)
    oy = aug.py + aug.fs * (ys - cy0)
    gx = 2.0 * ox / max(intr.width - 1, 1) - 1.0
    gy = 2.0 * oy / max(intr.height - 1, 1) - 1.0
    values = np.stack([gx, gy], axis=-1)

    tol = 1e-12
    out_of_range = bool(np.any(np.abs(values) > 1.0 + tol))
    if out_of_range:
        logger.warning(
            f"⚠️  Crop window (fs={aug.fs}, p=({aug.px}, {aug.py})) exceeds the original image; grid leaves [-1, 1]"
        )
    return AugmentGrid(values=values, out_of_range=out_of_range)


def sample_augment_params(
    rng: np.random.Generator,
    intr: Intrinsics,
    scale_range: Tuple[float, float] = (0.75, 1.5),
    crop_size: Optional[Tuple[int, int]] = None,
) -> AugmentParams:
    """
    Random resize-crop: the image is resized by s ~ U(scale_range) and a
    window of `crop_size` (height, width; default the original size) is
    cropped from it.

    Resizing by s gives f_s = 1/s. The crop centre is drawn so the window
    stays inside the image when it fits, else it is centred.
    """
    s = float(rng.uniform(*scale_range))
    fs = 1.0 / s
    cx0, cy0 = intr.image_center
    crop_h, crop_w = crop_size or intr.shape
    half_w, half_h = fs * (crop_w - 1) / 2.0, fs * (crop_h - 1) / 2.0

    def draw(half: float, extent: int, centre: float) -> float:
        lo, hi = half, (extent - 1) - half
        if lo > hi:
            return centre
        return float(rng.uniform(lo, hi))

    return AugmentParams(fs=fs, px=draw(half_w, intr.width, cx0), py=draw(half_h, intr.height, cy0))
