"""
Occlusion and self-distillation service
Unilateral/bilateral occlusion masks from a left-view mixture field, the
right-view loss mask, flip post-processing and the distillation label
"""
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.special import softmax

from ..core.exceptions import InvalidFieldError, ShapeMismatchError, require_same_shape
from ..core.logging_config import get_logger
from .mixture_model import MixtureField, softmax_weights
from .warp_engine import INVALID_LOGIT, ShiftDirection, disparity_shift

logger = get_logger(__name__)

L2R = ShiftDirection.LEFT_TO_RIGHT
R2L = ShiftDirection.RIGHT_TO_LEFT


class MaskSide(str, Enum):
    RL_LEFT = "RL_L"
    LR_LEFT = "LR_L"
    RIGHT = "R"


class Visibility(str, Enum):
    """How competing planes share a pixel of the other view"""
    ORDERED = "ordered"
    SOFTMAX = "softmax"


@dataclass(frozen=True)
class OcclusionMask:
    """Soft mask in [0, 1]; values near 0 mark occluded pixels"""
    values: np.ndarray
    side: MaskSide

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ShapeMismatchError(f"mask must be H×W, got shape {values.shape}", field="values")
        if np.any(values < 0) or np.any(values > 1):
            raise InvalidFieldError("mask values must lie in [0, 1]", field="values")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "side", MaskSide(self.side))

    def binary(self, threshold: float = 0.5) -> np.ndarray:
        """True where the pixel is visible"""
        return self.values >= threshold


# ============= Helpers =============

def _disparity_stack(field: MixtureField, plane_disps) -> np.ndarray:
    disps = np.asarray(plane_disps, dtype=np.float64)
    if disps.ndim == 3 and disps.shape[0] == field.n_planes and disps.shape[1:] == field.shape:
        disps = np.moveaxis(disps, 0, -1)
    if disps.shape != field.logits.shape:
        raise ShapeMismatchError(
            f"plane disparities {disps.shape} do not match field {field.logits.shape}", field="plane_disps"
        )
    return disps


def _shift_planes(values: np.ndarray, disps: np.ndarray, direction: ShiftDirection):
    """Shift every plane channel by its own disparity map; returns (values, valid)"""
    shifted = [disparity_shift(values[..., i], disps[..., i], direction) for i in range(values.shape[-1])]
    return (
        np.stack([s.values for s in shifted], axis=-1),
        np.stack([s.valid for s in shifted], axis=-1),
    )


def _ordered_composite(alpha: np.ndarray, disps: np.ndarray) -> np.ndarray:
    """
    Front-to-back compositing by disparity: v_i = α_i Π_{d_k > d_i} (1 - α_k).

    Planes of equal disparity share the same transmittance.
    """
    order = np.argsort(-disps, axis=-1, kind="stable")
    a_sorted = np.take_along_axis(alpha, order, axis=-1)
    d_sorted = np.take_along_axis(disps, order, axis=-1)

    transmittance = np.cumprod(1.0 - a_sorted, axis=-1)
    exclusive = np.concatenate([np.ones_like(transmittance[..., :1]), transmittance[..., :-1]], axis=-1)

    idx = np.arange(disps.shape[-1])
    new_group = np.concatenate(
        [np.ones_like(d_sorted[..., :1], dtype=bool), d_sorted[..., 1:] != d_sorted[..., :-1]], axis=-1
    )
    group_start = np.maximum.accumulate(np.where(new_group, idx, 0), axis=-1)
    shared = np.take_along_axis(exclusive, group_start, axis=-1)

    visible_sorted = a_sorted * shared
    visible = np.empty_like(visible_sorted)
    np.put_along_axis(visible, order, visible_sorted, axis=-1)
    return visible


def _other_view_weights(
    field: MixtureField,
    disps: np.ndarray,
    forward: ShiftDirection,
    visibility: Visibility,
) -> np.ndarray:
    """Plane weights of the view reached by warping the field in `forward` direction"""
    if Visibility(visibility) == Visibility.SOFTMAX:
        logits, valid = _shift_planes(field.logits, disps, forward)
        surrogate = np.where(valid, logits, INVALID_LOGIT)
        weights = softmax(surrogate, axis=-1)
        return np.where(valid.any(axis=-1, keepdims=True), weights, 0.0)

    alpha, _ = _shift_planes(softmax_weights(field), disps, forward)
    return _ordered_composite(np.clip(alpha, 0.0, 1.0), disps)


def _mask_from(
    field: MixtureField,
    plane_disps,
    forward: ShiftDirection,
    backward: ShiftDirection,
    side: MaskSide,
    visibility: Visibility,
) -> OcclusionMask:
    disps = _disparity_stack(field, plane_disps)
    weights = _other_view_weights(field, disps, forward, visibility)
    returned, _ = _shift_planes(weights, disps, backward)
    values = np.clip(returned.sum(axis=-1), 0.0, 1.0)
    logger.debug(f"Mask {side.value}: {(values < 0.5).mean():.2%} pixels below 0.5")
    return OcclusionMask(values=values, side=side)


# ============= Masks =============

def occlusion_mask_rl(
    field_left: MixtureField,
    plane_disps,
    visibility: Visibility = Visibility.ORDERED,
) -> OcclusionMask:
    """
    Left-view pixels visible in the right view.

    Right-view weights come from warping the left field L2R; warping them
    back R2L and summing gives min(Σ_i W_R2L(π_i^R, d_i), 1).
    """
    return _mask_from(field_left, plane_disps, L2R, R2L, MaskSide.RL_LEFT, visibility)


def occlusion_mask_lr(
    field_left: MixtureField,
    plane_disps,
    visibility: Visibility = Visibility.ORDERED,
) -> OcclusionMask:
    """occlusion_mask_rl with the two warp directions exchanged; flags the opposite side of objects"""
    return _mask_from(field_left, plane_disps, R2L, L2R, MaskSide.LR_LEFT, visibility)


def right_view_mask(field_left: MixtureField, plane_disps) -> OcclusionMask:
    """M^R = min(Σ_i W_L2R(π_i, d_i), 1): right-view pixels with a left-view pre-image"""
    disps = _disparity_stack(field_left, plane_disps)
    warped, _ = _shift_planes(softmax_weights(field_left), disps, L2R)
    return OcclusionMask(values=np.clip(warped.sum(axis=-1), 0.0, 1.0), side=MaskSide.RIGHT)


# ============= Post-processing and Labels =============

def flip_prediction(disp: np.ndarray) -> np.ndarray:
    """Mirror a map horizontally (prediction on the flipped input, flipped back)"""
    return np.asarray(disp)[:, ::-1].copy()


def post_process(disp: np.ndarray, disp_ff: np.ndarray) -> np.ndarray:
    """d_pp = (d + d_ff) / 2"""
    disp = np.asarray(disp, dtype=np.float64)
    disp_ff = np.asarray(disp_ff, dtype=np.float64)
    require_same_shape("disp", disp, "disp_ff", disp_ff)
    return 0.5 * (disp + disp_ff)


def edge_blend_post_process(disp: np.ndarray, disp_ff: np.ndarray) -> np.ndarray:
    """
    Average in the interior, but keep each prediction on the image side
    where the other one is unreliable (the outer 5% of columns ramps over
    the next 5%).
    """
    disp = np.asarray(disp, dtype=np.float64)
    disp_ff = np.asarray(disp_ff, dtype=np.float64)
    require_same_shape("disp", disp, "disp_ff", disp_ff)
    h, w = disp.shape
    mean_disp = 0.5 * (disp + disp_ff)
    l, _ = np.meshgrid(np.linspace(0, 1, w), np.linspace(0, 1, h))
    l_mask = 1.0 - np.clip(20 * (l - 0.05), 0, 1)
    r_mask = l_mask[:, ::-1]
    return r_mask * disp + l_mask * disp_ff + (1.0 - l_mask - r_mask) * mean_disp


def _mask_values(mask) -> np.ndarray:
    return mask.values if isinstance(mask, OcclusionMask) else np.asarray(mask, dtype=np.float64)


def distill_label(
    disp: np.ndarray,
    disp_ff: np.ndarray,
    m_rl,
    m_lr,
) -> np.ndarray:
    """
    d_sd = M_RL (M_LR d_pp + (1 - M_LR) d) + (1 - M_RL) d_ff

    Soft masks blend elementwise; the result is a convex combination of
    d, d_ff and d_pp.
    """
    disp = np.asarray(disp, dtype=np.float64)
    disp_ff = np.asarray(disp_ff, dtype=np.float64)
    m_rl = _mask_values(m_rl)
    m_lr = _mask_values(m_lr)
    for name, arr in (("disp_ff", disp_ff), ("m_rl", m_rl), ("m_lr", m_lr)):
        require_same_shape("disp", disp, name, arr)
    d_pp = post_process(disp, disp_ff)
    return m_rl * (m_lr * d_pp + (1.0 - m_lr) * disp) + (1.0 - m_rl) * disp_ff


def masks_summary(masks: Sequence[OcclusionMask]) -> dict:
    """Fraction of pixels flagged occluded per mask side"""
    return {m.side.value: float((m.values < 0.5).mean()) for m in masks}
