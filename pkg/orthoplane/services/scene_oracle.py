"""
Scene oracle service
Synthetic piecewise-planar stereo scenes: ray-cast rendering, brute-force
occlusion ground truth and ideal one-hot mixture fields
"""
from typing import List, NamedTuple, Optional, Tuple

import numpy as np
from scipy.ndimage import binary_dilation

from ..core.exceptions import EmptyInputError, PlaneMismatchError, require_same_shape
from ..core.logging_config import get_logger
from ..schemas.camera import Intrinsics, RigidPose, StereoRig
from ..schemas.config import SceneSettings
from ..schemas.planes import Plane, PlaneBank
from ..schemas.scene import Patch, SceneSpec, plane_basis
from .camera_geometry import backproject, project
from .mixture_model import SIGMA_MIN, MixtureField

logger = get_logger(__name__)

N_SINUSOIDS = 8
DEPTH_GAP = 1e-3
RAY_EPS = 1e-9
FRAME_TOL = 1e-6
NO_HIT = -1


class RayHits(NamedTuple):
    depth: np.ndarray     # view-frame z, inf where nothing is hit
    patch_id: np.ndarray  # index into patches, background = len(patches), -1 = miss
    local_u: np.ndarray
    local_v: np.ndarray


class RenderedView(NamedTuple):
    image: np.ndarray
    depth: np.ndarray
    patch_id: np.ndarray


class OracleOcclusion(NamedTuple):
    left_occluded: np.ndarray   # left pixels hidden in the right view
    right_occluded: np.ndarray  # right pixels hidden in the left view


# ============= Ray Casting =============

def _surfaces(scene: SceneSpec) -> List[Tuple[Plane, Optional[Tuple[float, float, float, float]]]]:
    return [(p.plane, p.extent) for p in scene.patches] + [(scene.background, None)]


def cast_rays(
    scene: SceneSpec,
    intr: Intrinsics,
    pose: Optional[RigidPose],
    xs: np.ndarray,
    ys: np.ndarray,
) -> RayHits:
    """
    Nearest surface along the rays through continuous pixel coordinates of
    a camera with target-to-view pose `pose` (identity when None).
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    rays = np.stack([(xs - intr.cx) / intr.fx, (ys - intr.cy) / intr.fy, np.ones_like(xs)], axis=-1)
    if pose is None:
        centre = np.zeros(3)
        dirs = rays
    else:
        centre = -pose.R.T @ pose.t
        dirs = rays @ pose.R

    best = np.full(xs.shape, np.inf)
    best_id = np.full(xs.shape, NO_HIT, dtype=np.int64)
    best_u = np.zeros(xs.shape)
    best_v = np.zeros(xs.shape)

    for index, (plane, extent) in enumerate(_surfaces(scene)):
        n = plane.normal
        denom = dirs @ n
        facing = np.abs(denom) > RAY_EPS
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.where(facing, (plane.delta - n @ centre) / np.where(facing, denom, 1.0), np.inf)
        hit = facing & (s > RAY_EPS)
        points = centre + np.where(hit, s, 0.0)[..., None] * dirs
        e1, e2 = plane_basis(n)
        u = np.where(hit, points @ e1, 0.0)
        v = np.where(hit, points @ e2, 0.0)
        if extent is not None:
            u0, u1, v0, v1 = extent
            hit &= (u >= u0) & (u <= u1) & (v >= v0) & (v <= v1)
        closer = hit & (s < best)
        best = np.where(closer, s, best)
        best_id = np.where(closer, index, best_id)
        best_u = np.where(closer, u, best_u)
        best_v = np.where(closer, v, best_v)

    return RayHits(depth=best, patch_id=best_id, local_u=best_u, local_v=best_v)


# ============= Textures =============

def _texture_params(scene: SceneSpec, index: int):
    """Frequencies, phases and amplitudes of the 8 sinusoids per channel"""
    if index < len(scene.patches):
        patch = scene.patches[index]
        seed_key, wavelength = patch.texture_seed, patch.wavelength
    else:
        seed_key, wavelength = -1, scene.background_wavelength
    rng = np.random.default_rng([scene.seed & 0xFFFFFFFF, index, seed_key & 0xFFFFFFFF])
    shape = (3, N_SINUSOIDS)
    fu = rng.uniform(-1.0, 1.0, shape) / wavelength[0]
    fv = rng.uniform(-1.0, 1.0, shape) / wavelength[1]
    phase = rng.uniform(0.0, 2.0 * np.pi, shape)
    amp = rng.uniform(0.02, 0.05, shape)
    return fu, fv, phase, amp


def shade(scene: SceneSpec, hits: RayHits) -> np.ndarray:
    """Band-limited texture at the hit points, H×W×3 (0 where nothing is hit)"""
    image = np.zeros(hits.depth.shape + (3,))
    for index in range(len(scene.patches) + 1):
        sel = hits.patch_id == index
        if not np.any(sel):
            continue
        fu, fv, phase, amp = _texture_params(scene, index)
        u = hits.local_u[sel][:, None]
        v = hits.local_v[sel][:, None]
        for c in range(3):
            waves = amp[c] * np.sin(2.0 * np.pi * (fu[c] * u + fv[c] * v) + phase[c])
            image[..., c][sel] = scene.light * (0.5 + waves.sum(axis=-1))
    return image


def render_view(scene: SceneSpec, intr: Intrinsics, pose: Optional[RigidPose] = None) -> RenderedView:
    """Z-buffered render of every integer pixel; deterministic for a given scene"""
    xs, ys = intr.pixel_grid()
    hits = cast_rays(scene, intr, pose, xs, ys)
    n_miss = int((hits.patch_id == NO_HIT).sum())
    if n_miss:
        logger.warning(f"⚠️  {n_miss} rays hit no surface; the background does not cover the view")
    return RenderedView(image=shade(scene, hits), depth=hits.depth, patch_id=hits.patch_id)


def render_stereo(scene: SceneSpec, intr: Intrinsics, rig: StereoRig) -> Tuple[RenderedView, RenderedView]:
    return render_view(scene, intr), render_view(scene, intr, rig.target_to_reference())


def depth_to_disparity_map(depth: np.ndarray, intr: Intrinsics, rig: StereoRig) -> np.ndarray:
    finite = np.isfinite(depth) & (depth > 0)
    return np.where(finite, intr.fx * rig.baseline / np.where(finite, depth, 1.0), 0.0)


# ============= Occlusion Ground Truth =============

def _hidden_in_other(
    scene: SceneSpec,
    intr: Intrinsics,
    view: RenderedView,
    to_other: RigidPose,
    other_pose: Optional[RigidPose],
    gap: float,
) -> np.ndarray:
    """Pixels of `view` whose surface point is off-frame or behind a nearer surface in the other view"""
    xs, ys = intr.pixel_grid()
    points = backproject(intr, xs, ys, view.depth)
    other = points @ to_other.R.T + to_other.t
    ox, oy = project(intr, other)
    in_frame = (
        (other[..., 2] > 0)
        & (ox >= -FRAME_TOL) & (ox <= intr.width - 1 + FRAME_TOL)
        & (oy >= -FRAME_TOL) & (oy <= intr.height - 1 + FRAME_TOL)
    )
    hits = cast_rays(scene, intr, other_pose, ox, oy)
    blocked = hits.depth < other[..., 2] - gap
    return ~in_frame | blocked


def oracle_occlusion(
    scene: SceneSpec,
    intr: Intrinsics,
    rig: StereoRig,
    gap: float = DEPTH_GAP,
) -> OracleOcclusion:
    """
    Brute-force visibility: a pixel is occluded when its reprojection into
    the other view leaves the frame or is claimed by a surface nearer by
    more than `gap` meters.
    """
    to_right = rig.target_to_reference()
    to_left = rig.reference_to_target()
    left, right = render_stereo(scene, intr, rig)
    return OracleOcclusion(
        left_occluded=_hidden_in_other(scene, intr, left, to_right, to_right, gap),
        right_occluded=_hidden_in_other(scene, intr, right, to_left, None, gap),
    )


# ============= Ideal Fields =============

def scene_plane_indices(scene: SceneSpec, bank: PlaneBank) -> List[int]:
    """Bank index of every patch plane followed by the background plane"""
    indices = []
    for i, (plane, _) in enumerate(_surfaces(scene)):
        index = bank.index_of(plane)
        if index < 0:
            label = "background" if i == len(scene.patches) else f"patch {i}"
            raise PlaneMismatchError(f"{label} plane {plane.n}, {plane.delta} is not in the bank", field=label)
        indices.append(index)
    return indices


def scene_mixture_field(
    scene: SceneSpec,
    bank: PlaneBank,
    intr: Intrinsics,
    sigma0: float = 1e-3,
    logit: float = 30.0,
    sigma_min: float = SIGMA_MIN,
) -> MixtureField:
    """
    One-hot field: +logit on the bank plane of the visible surface, scales ≡ sigma0.
    Pixels that see no surface get uniform logits.
    """
    lookup = np.asarray(scene_plane_indices(scene, bank))
    view = render_view(scene, intr)
    hit = view.patch_id != NO_HIT
    index = lookup[np.where(hit, view.patch_id, 0)]
    return MixtureField.one_hot(index, len(bank), logit=logit, sigma=sigma0, active=hit, sigma_min=sigma_min)


# ============= Scene Generators =============

def fronto_plane(disparity: float, intr: Intrinsics, rig: StereoRig) -> Plane:
    return Plane(n=(0.0, 0.0, 1.0), delta=float(rig.baseline * intr.fx / disparity))


def _fronto_extent(intr: Intrinsics, depth: float, cols: Tuple[float, float], rows: Tuple[float, float]):
    """Plane-coordinate extent covering pixel edges cols × rows at `depth`"""
    return (
        (cols[0] - intr.cx) * depth / intr.fx,
        (cols[1] - intr.cx) * depth / intr.fx,
        (rows[0] - intr.cy) * depth / intr.fy,
        (rows[1] - intr.cy) * depth / intr.fy,
    )


def _fronto_wavelength(intr: Intrinsics, depth: float, wavelength_px: float) -> Tuple[float, float]:
    lam = wavelength_px * depth / min(intr.fx, intr.fy)
    return (lam, lam)


def two_layer_scene(
    intr: Intrinsics,
    foreground: Plane,
    background: Plane,
    columns: Tuple[int, int],
    rows: Optional[Tuple[int, int]] = None,
    seed: int = 0,
    wavelength_px: float = 24.0,
) -> SceneSpec:
    """Fronto-parallel foreground patch over pixel columns [c0, c1) in front of a full-frame background"""
    # without rows the patch overhangs the frame vertically
    row_edges = (-1.0, float(intr.height)) if rows is None else (rows[0] - 0.5, rows[1] - 0.5)
    patch = Patch(
        plane=foreground,
        extent=_fronto_extent(intr, foreground.delta, (columns[0] - 0.5, columns[1] - 0.5), row_edges),
        texture_seed=seed,
        wavelength=_fronto_wavelength(intr, foreground.delta, wavelength_px),
    )
    return SceneSpec(
        patches=[patch],
        background=background,
        background_wavelength=_fronto_wavelength(intr, background.delta, wavelength_px),
        seed=seed,
    )


def random_two_layer_scene(
    rng: np.random.Generator,
    bank: PlaneBank,
    intr: Intrinsics,
    rig: StereoRig,
    disparity_range: Tuple[float, float] = (4.0, 40.0),
    wavelength_px: float = 24.0,
) -> SceneSpec:
    """Two vertical bank planes: a foreground band of columns over a background"""
    candidates = _vertical_candidates(bank, intr, rig, disparity_range)
    fg_i, bg_i = sorted(rng.choice(candidates, size=2, replace=False))
    width = int(rng.integers(intr.width // 8, intr.width // 3))
    c0 = int(rng.integers(intr.width // 6, intr.width - width - intr.width // 6))
    return two_layer_scene(
        intr,
        bank.planes[fg_i],
        bank.planes[bg_i],
        (c0, c0 + width),
        seed=int(rng.integers(0, 2 ** 31)),
        wavelength_px=wavelength_px,
    )


def _vertical_candidates(bank: PlaneBank, intr: Intrinsics, rig: StereoRig, disparity_range) -> List[int]:
    lo, hi = disparity_range
    candidates = []
    for i in range(bank.n_vertical):
        d = intr.fx * rig.baseline / bank.planes[i].delta
        if lo <= d <= hi:
            candidates.append(i)
    if len(candidates) < 2:
        raise EmptyInputError(f"bank has fewer than 2 vertical planes with disparity in {disparity_range}")
    return candidates


def random_scene(
    rng: np.random.Generator,
    bank: PlaneBank,
    intr: Intrinsics,
    rig: StereoRig,
    settings: SceneSettings = SceneSettings(),
    disparity_range: Tuple[float, float] = (8.0, 60.0),
    ground_range: Tuple[float, float] = (5.0, 40.0),
) -> SceneSpec:
    """
    Two to four patches on bank planes in front of the farthest vertical
    bank plane. With ground planes enabled one patch lies on the ground.

    Texture wavelengths are chosen so no sinusoid is shorter than
    `texture_wavelength_px` pixels anywhere in the image.
    """
    lam_px = settings.texture_wavelength_px
    n_patches = int(rng.integers(settings.min_patches, settings.max_patches + 1))
    candidates = _vertical_candidates(bank, intr, rig, disparity_range)
    patches = []

    if settings.with_ground and bank.n_ground and n_patches > 1:
        plane = bank.planes[int(rng.choice(bank.ground_indices()))]
        z_near, z_far = ground_range
        half_width = float(rng.uniform(4.0, 12.0))
        x_mid = float(rng.uniform(-4.0, 4.0))
        patches.append(Patch(
            plane=plane,
            extent=(x_mid - half_width, x_mid + half_width, -z_far, -z_near),
            texture_seed=int(rng.integers(0, 2 ** 31)),
            wavelength=(lam_px * z_far / intr.fx, lam_px * z_far ** 2 / (intr.fy * plane.delta)),
        ))

    while len(patches) < n_patches:
        plane = bank.planes[int(rng.choice(candidates))]
        width = int(rng.integers(intr.width // 8, intr.width // 3))
        height = int(rng.integers(intr.height // 4, intr.height // 2))
        x0 = int(rng.integers(0, intr.width - width))
        y0 = int(rng.integers(0, intr.height - height))
        patches.append(Patch(
            plane=plane,
            extent=_fronto_extent(intr, plane.delta, (x0 - 0.5, x0 + width - 0.5), (y0 - 0.5, y0 + height - 0.5)),
            texture_seed=int(rng.integers(0, 2 ** 31)),
            wavelength=_fronto_wavelength(intr, plane.delta, lam_px),
        ))

    background = bank.planes[bank.n_vertical - 1]
    scene = SceneSpec(
        patches=patches,
        background=background,
        background_wavelength=_fronto_wavelength(intr, background.delta, lam_px),
        seed=int(rng.integers(0, 2 ** 31)),
    )
    logger.debug(f"Random scene with {len(patches)} patches")
    return scene


# ============= Comparison Helpers =============

def psnr(image: np.ndarray, reference: np.ndarray, mask: Optional[np.ndarray] = None, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB over the masked pixels"""
    image = np.asarray(image, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    require_same_shape("image", image, "reference", reference)
    sq = (image - reference) ** 2
    if sq.ndim == 3:
        sq = sq.mean(axis=-1)
    if mask is not None:
        if not np.any(mask):
            raise EmptyInputError("PSNR mask selects no pixels", field="mask")
        sq = sq[np.asarray(mask, dtype=bool)]
    mse = float(sq.mean())
    if mse == 0:
        return float("inf")
    return float(10.0 * np.log10(peak ** 2 / mse))


def _id_edges(patch_id: np.ndarray) -> np.ndarray:
    edges = np.zeros(patch_id.shape, dtype=bool)
    dx = patch_id[:, 1:] != patch_id[:, :-1]
    dy = patch_id[1:, :] != patch_id[:-1, :]
    edges[:, 1:] |= dx
    edges[:, :-1] |= dx
    edges[1:, :] |= dy
    edges[:-1, :] |= dy
    return edges


def stable_reference_mask(
    scene: SceneSpec,
    intr: Intrinsics,
    rig: StereoRig,
    margin: int = 2,
    occlusion: Optional[OracleOcclusion] = None,
) -> np.ndarray:
    """
    Right-view pixels where synthesis from the left view is well posed:
    visible in the left view, not landed on by left pixels that the right
    view hides, and at least `margin` pixels from any surface boundary.
    """
    occlusion = occlusion or oracle_occlusion(scene, intr, rig)
    left, right = render_stereo(scene, intr, rig)

    xs, ys = intr.pixel_grid()
    points = backproject(intr, xs[occlusion.left_occluded], ys[occlusion.left_occluded],
                         left.depth[occlusion.left_occluded])
    to_right = rig.target_to_reference()
    rx, ry = project(intr, points @ to_right.R.T + to_right.t)
    splat = np.zeros(intr.shape, dtype=bool)
    rows = np.clip(np.round(ry).astype(np.int64), 0, intr.height - 1)
    for cols in (np.floor(rx), np.ceil(rx)):
        cols = cols.astype(np.int64)
        inside = (cols >= 0) & (cols < intr.width)
        splat[rows[inside], cols[inside]] = True

    structure = np.ones((3, 3), dtype=bool)
    unstable = binary_dilation(splat | _id_edges(right.patch_id), structure=structure, iterations=margin)
    return ~occlusion.right_occluded & ~unstable
