"""
Loss suite service
Mixture-Laplace photometric loss with analytic gradients, feature-level
perceptual loss, edge-aware smoothness, distillation L1 and the weighted totals
"""
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Protocol, Sequence, Union

import numpy as np
from scipy.ndimage import sobel
from scipy.special import log_softmax, logsumexp, softmax

from ..core.exceptions import EmptyInputError, OrthoPlaneError, ShapeMismatchError, require_same_shape
from ..core.logging_config import get_logger
from ..schemas.config import LossWeights
from .mixture_model import MixtureField
from .warp_engine import INVALID_LOGIT, WarpedMixture

logger = get_logger(__name__)

SMOOTH_EPS = 1e-7


class MLLResult(NamedTuple):
    loss: float
    grad_logits: np.ndarray
    grad_scales: np.ndarray


@dataclass(frozen=True)
class LossParts:
    """Per-view loss terms before weighting"""
    mll: float = 0.0
    perceptual: float = 0.0
    smoothness: float = 0.0
    distill: float = 0.0


# ============= Feature Extractors =============

class FeatureExtractor(Protocol):
    def __call__(self, image: np.ndarray) -> List[np.ndarray]:
        ...


class IdentityExtractor:
    """Single level: the image itself"""

    def __call__(self, image: np.ndarray) -> List[np.ndarray]:
        return [np.asarray(image, dtype=np.float64)]


class GradientPyramidExtractor:
    """
    Image plus Sobel x/y responses per channel, at `levels` scales obtained
    by 2×2 average pooling.
    """

    def __init__(self, levels: int = 2):
        if levels < 1:
            raise OrthoPlaneError("extractor needs at least one level", field="levels")
        self.levels = levels

    def __call__(self, image: np.ndarray) -> List[np.ndarray]:
        image = np.asarray(image, dtype=np.float64)
        if image.ndim == 2:
            image = image[..., None]
        features = []
        level = image
        for _ in range(self.levels):
            features.append(self._describe(level))
            if min(level.shape[:2]) < 2:
                break
            level = self._pool(level)
        return features

    @staticmethod
    def _describe(image: np.ndarray) -> np.ndarray:
        gx = np.stack([sobel(image[..., c], axis=1) for c in range(image.shape[-1])], axis=-1)
        gy = np.stack([sobel(image[..., c], axis=0) for c in range(image.shape[-1])], axis=-1)
        return np.concatenate([image, gx, gy], axis=-1)

    @staticmethod
    def _pool(image: np.ndarray) -> np.ndarray:
        h, w = (image.shape[0] // 2) * 2, (image.shape[1] // 2) * 2
        cropped = image[:h, :w]
        return cropped.reshape(h // 2, 2, w // 2, 2, -1).mean(axis=(1, 3))


# ============= Photometric Losses =============

def _as_image(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    return img[..., None] if img.ndim == 2 else img


def mll_loss(
    ref: np.ndarray,
    warped_imgs: np.ndarray,
    warped_field: Union[WarpedMixture, MixtureField],
    mask: Optional[np.ndarray] = None,
) -> MLLResult:
    """
    Mixture-Laplace negative log-likelihood of the reference image.

    Per pixel: -log Σ_i π_i exp(-e_i/σ_i) / (2σ_i), with e_i the per-channel
    mean L1 error of warped image i. The soft mask m weights pixels:
    loss = Σ m L / Σ m over pixels with a valid plane.

    Returns gradients with respect to the (warped) logits and scales.
    """
    ref = _as_image(ref)
    warped_imgs = np.asarray(warped_imgs, dtype=np.float64)
    if warped_imgs.ndim == 3:
        warped_imgs = warped_imgs[..., None]

    if isinstance(warped_field, WarpedMixture):
        logits, scales, plane_valid = warped_field.logits, warped_field.scales, warped_field.plane_valid
    else:
        logits, scales = warped_field.logits, warped_field.scales
        plane_valid = np.ones(logits.shape, dtype=bool)

    n_planes = logits.shape[-1]
    if warped_imgs.shape != (n_planes,) + ref.shape:
        raise ShapeMismatchError(
            f"warped images {warped_imgs.shape} do not match {n_planes} planes of {ref.shape}", field="warped_imgs"
        )
    if logits.shape[:2] != ref.shape[:2]:
        raise ShapeMismatchError(f"field is {logits.shape[:2]} but image is {ref.shape[:2]}", field="warped_field")

    pixel_valid = plane_valid.any(axis=-1)
    m = np.ones(ref.shape[:2]) if mask is None else np.asarray(mask, dtype=np.float64)
    require_same_shape("ref[..., 0]", ref[..., 0], "mask", m)
    m = np.where(pixel_valid, m, 0.0)
    total_weight = m.sum()
    if total_weight <= 0:
        raise EmptyInputError("no valid pixels for the mixture-Laplace loss", field="mask")

    errors = np.abs(ref[None] - warped_imgs).mean(axis=-1)  # N×H×W
    errors = np.moveaxis(errors, 0, -1)
    surrogate = np.where(plane_valid, logits, INVALID_LOGIT)
    weights = softmax(surrogate, axis=-1)
    terms = log_softmax(surrogate, axis=-1) - errors / scales - np.log(2.0 * scales)
    terms = np.where(plane_valid, terms, -np.inf)

    safe_terms = np.where(pixel_valid[..., None], terms, 0.0)
    per_pixel = -logsumexp(safe_terms, axis=-1)
    responsibilities = np.where(pixel_valid[..., None], softmax(safe_terms, axis=-1), 0.0)

    loss = float((m * per_pixel).sum() / total_weight)
    scale = (m / total_weight)[..., None]
    grad_logits = np.where(plane_valid, scale * (weights - responsibilities), 0.0)
    grad_scales = np.where(
        plane_valid,
        -scale * responsibilities * (errors / scales ** 2 - 1.0 / scales),
        0.0,
    )
    return MLLResult(loss=loss, grad_logits=grad_logits, grad_scales=grad_scales)


def perceptual_loss(
    ref: np.ndarray,
    synth: np.ndarray,
    extractor: Optional[FeatureExtractor] = None,
    mask: Optional[np.ndarray] = None,
    synth_valid: Optional[np.ndarray] = None,
) -> float:
    """
    Σ_levels mean((φ(I_r) - φ(B))^2) with B = M·synth + (1 - M)·ref.

    Invalid synthesized pixels blend in as M = 0.
    """
    ref = _as_image(ref)
    synth = _as_image(synth)
    require_same_shape("ref", ref, "synth", synth)
    extractor = extractor or GradientPyramidExtractor()

    m = np.ones(ref.shape[:2]) if mask is None else np.clip(np.asarray(mask, dtype=np.float64), 0.0, 1.0)
    require_same_shape("ref[..., 0]", ref[..., 0], "mask", m)
    if synth_valid is not None:
        m = np.where(synth_valid, m, 0.0)
    blend = m[..., None] * synth + (1.0 - m[..., None]) * ref

    return float(sum(np.mean((a - b) ** 2) for a, b in zip(extractor(ref), extractor(blend))))


def smoothness_loss(disp: np.ndarray, img: np.ndarray) -> float:
    """
    Edge-aware first-order smoothness of the mean-normalized disparity:
    mean(|∂x d*| e^{-|∂x I|}) + mean(|∂y d*| e^{-|∂y I|}).
    """
    disp = np.asarray(disp, dtype=np.float64)
    img = _as_image(img)
    require_same_shape("disp", disp, "img[..., 0]", img[..., 0])

    norm = disp / (disp.mean() + SMOOTH_EPS)
    grad_disp_x = np.abs(norm[:, :-1] - norm[:, 1:])
    grad_disp_y = np.abs(norm[:-1, :] - norm[1:, :])
    grad_img_x = np.abs(img[:, :-1] - img[:, 1:]).mean(axis=-1)
    grad_img_y = np.abs(img[:-1, :] - img[1:, :]).mean(axis=-1)

    loss = 0.0
    if grad_disp_x.size:
        loss += float(np.mean(grad_disp_x * np.exp(-grad_img_x)))
    if grad_disp_y.size:
        loss += float(np.mean(grad_disp_y * np.exp(-grad_img_y)))
    return loss


def distill_l1(pred_disp: np.ndarray, label_disp: np.ndarray, valid: Optional[np.ndarray] = None) -> float:
    """Mean |d - d_sd| over valid pixels"""
    pred_disp = np.asarray(pred_disp, dtype=np.float64)
    label_disp = np.asarray(label_disp, dtype=np.float64)
    require_same_shape("pred_disp", pred_disp, "label_disp", label_disp)
    valid = np.ones(pred_disp.shape, dtype=bool) if valid is None else np.asarray(valid, dtype=bool)
    if not np.any(valid):
        raise EmptyInputError("no valid pixels for the distillation loss", field="valid")
    return float(np.abs(pred_disp - label_disp)[valid].mean())


# ============= Totals =============

def _combine_one(parts: LossParts, weights: LossWeights, mode: str) -> float:
    total = parts.mll + weights.lambda1 * parts.perceptual + weights.lambda2 * parts.smoothness
    if mode == "distill":
        total += weights.lambda3 * parts.distill
    return total


def combine_losses(
    parts: Union[LossParts, Sequence[LossParts]],
    weights: LossWeights = LossWeights(),
    mode: str = "stage1",
) -> float:
    """
    stage1:  MLL + λ1·pc + λ2·ds
    distill: MLL + λ1·pc + λ2·ds + λ3·sd, with the masked MLL and pc terms

    A sequence of parts (views, batch items) is averaged.
    """
    if mode not in ("stage1", "distill"):
        raise OrthoPlaneError(f"unknown loss mode {mode!r}", field="mode")
    if isinstance(parts, LossParts):
        return _combine_one(parts, weights, mode)
    parts = list(parts)
    if not parts:
        raise EmptyInputError("no loss parts to combine", field="parts")
    return float(np.mean([_combine_one(p, weights, mode) for p in parts]))
