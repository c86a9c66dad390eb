"""
Evaluation metrics service
Standard depth errors with clipping and crop windows, plus ground
segmentation quality of a plane-probability field
"""
from typing import Dict, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..core.exceptions import ConfigError, EmptyInputError, require_same_shape
from ..core.logging_config import get_logger
from ..schemas.metrics import DepthMetrics, GroundMetrics
from ..schemas.planes import PlaneBank
from .mixture_model import ProbField

logger = get_logger(__name__)

MIN_DEPTH = 1e-3
MAX_DEPTH = 80.0


class CropWindow(BaseModel):
    """Evaluation window as fractions of image height and width"""
    model_config = ConfigDict(frozen=True)

    top: float = Field(0.0, ge=0, le=1)
    bottom: float = Field(1.0, ge=0, le=1)
    left: float = Field(0.0, ge=0, le=1)
    right: float = Field(1.0, ge=0, le=1)

    @model_validator(mode="after")
    def check_order(self):
        if not (self.top < self.bottom and self.left < self.right):
            raise ValueError("crop window must have top < bottom and left < right")
        return self

    def mask(self, height: int, width: int) -> np.ndarray:
        rows = np.array([self.top * height, self.bottom * height]).astype(np.int32)
        cols = np.array([self.left * width, self.right * width]).astype(np.int32)
        out = np.zeros((height, width), dtype=bool)
        out[rows[0]:rows[1], cols[0]:cols[1]] = True
        return out


# Fractions used by common KITTI evaluation scripts; not a benchmark guarantee
CROP_PRESETS: Dict[str, CropWindow] = {
    "full": CropWindow(),
    "garg": CropWindow(top=0.40810811, bottom=0.99189189, left=0.03594771, right=0.96405229),
}


def resolve_crop(crop: Union[None, str, CropWindow]) -> Optional[CropWindow]:
    if crop is None or isinstance(crop, CropWindow):
        return crop
    try:
        return CROP_PRESETS[crop]
    except KeyError:
        raise ConfigError(f"unknown crop preset {crop!r}; expected one of {sorted(CROP_PRESETS)}", field="eval.crop")


def compute_errors(gt: np.ndarray, pred: np.ndarray) -> Dict[str, float]:
    """Error metrics between 1-D arrays of positive ground-truth and predicted depths"""
    thresh = np.maximum((gt / pred), (pred / gt))
    a1 = (thresh < 1.25).mean()
    a2 = (thresh < 1.25 ** 2).mean()
    a3 = (thresh < 1.25 ** 3).mean()

    rmse = np.sqrt(((gt - pred) ** 2).mean())
    rmse_log = np.sqrt(((np.log(gt) - np.log(pred)) ** 2).mean())

    abs_rel = np.mean(np.abs(gt - pred) / gt)
    sq_rel = np.mean(((gt - pred) ** 2) / gt)

    return {
        "abs_rel": float(abs_rel),
        "sq_rel": float(sq_rel),
        "rmse": float(rmse),
        "rmse_log": float(rmse_log),
        "a1": float(a1),
        "a2": float(a2),
        "a3": float(a3),
    }


def depth_metrics(
    pred: np.ndarray,
    gt: np.ndarray,
    valid: Optional[np.ndarray] = None,
    clip_max: float = MAX_DEPTH,
    clip_min: float = MIN_DEPTH,
    crop: Union[None, str, CropWindow] = None,
) -> DepthMetrics:
    """Both maps are clamped to [clip_min, clip_max] before comparison"""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    require_same_shape("pred", pred, "gt", gt)
    mask = np.ones(gt.shape, dtype=bool) if valid is None else np.asarray(valid, dtype=bool)
    require_same_shape("gt", gt, "valid", mask)

    window = resolve_crop(crop)
    if window is not None:
        mask = mask & window.mask(*gt.shape)
    if not np.any(mask):
        raise EmptyInputError("no valid pixels to evaluate", field="valid")

    gt_sel = np.clip(gt[mask], clip_min, clip_max)
    pred_sel = np.clip(pred[mask], clip_min, clip_max)
    return DepthMetrics(**compute_errors(gt_sel, pred_sel), n_pixels=int(mask.sum()))


def ground_metrics(
    probs: ProbField,
    bank: PlaneBank,
    gt_ground: np.ndarray,
    disparity: Optional[np.ndarray] = None,
    valid: Optional[np.ndarray] = None,
    threshold: float = 0.5,
) -> GroundMetrics:
    """
    A pixel is predicted ground when its total ground-plane probability
    exceeds `threshold`. Roughness is the mean squared forward-difference
    disparity gradient over predicted-ground pixels whose neighbours are
    ground too.
    """
    gt_ground = np.asarray(gt_ground, dtype=bool)
    require_same_shape("probs[..., 0]", probs.probs[..., 0], "gt_ground", gt_ground)
    evaluated = probs.valid if valid is None else probs.valid & np.asarray(valid, dtype=bool)
    if not np.any(evaluated):
        raise EmptyInputError("no valid pixels for ground metrics", field="valid")

    ground = bank.ground_indices()
    ground_prob = probs.probs[..., ground].sum(axis=-1) if ground else np.zeros(gt_ground.shape)
    predicted = (ground_prob > threshold) & evaluated
    truth = gt_ground & evaluated

    union = int((predicted | truth).sum())
    iou = 1.0 if union == 0 else float((predicted & truth).sum() / union)

    roughness = None
    if disparity is not None:
        disparity = np.asarray(disparity, dtype=np.float64)
        require_same_shape("gt_ground", gt_ground, "disparity", disparity)
        sq = []
        both_x = predicted[:, :-1] & predicted[:, 1:]
        both_y = predicted[:-1, :] & predicted[1:, :]
        sq.append(((disparity[:, 1:] - disparity[:, :-1]) ** 2)[both_x])
        sq.append(((disparity[1:, :] - disparity[:-1, :]) ** 2)[both_y])
        values = np.concatenate(sq)
        roughness = float(values.mean()) if values.size else None

    logger.debug(f"Ground IoU {iou:.4f} over {int(evaluated.sum())} pixels")
    return GroundMetrics(iou=iou, roughness=roughness, n_ground_pixels=int(predicted.sum()))
