"""
Mixture model service
Per-pixel Laplacian mixture over planes: weights, plane probabilities,
depth composition and the mean-maximum-probability statistic
"""
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy.special import softmax

from ..core.exceptions import EmptyInputError, InvalidFieldError, ShapeMismatchError, require_same_shape
from ..core.logging_config import get_logger

logger = get_logger(__name__)

SIGMA_MIN = 1e-4
MIN_TOTAL = 1e-20


# ============= Containers =============

@dataclass(frozen=True)
class MixtureField:
    """Logits and Laplace scales over N planes, both H×W×N"""
    logits: np.ndarray
    scales: np.ndarray
    residuals: Optional[np.ndarray] = None
    sigma_min: float = SIGMA_MIN

    def __post_init__(self):
        logits = np.asarray(self.logits, dtype=np.float64)
        scales = np.asarray(self.scales, dtype=np.float64)
        if logits.ndim != 3:
            raise ShapeMismatchError(f"logits must be H×W×N, got shape {logits.shape}", field="logits")
        require_same_shape("logits", logits, "scales", scales)
        if not (np.all(np.isfinite(logits)) and np.all(np.isfinite(scales))):
            raise InvalidFieldError("mixture field contains non-finite values", field="logits")
        if np.any(scales < self.sigma_min):
            raise InvalidFieldError(
                f"scales must be >= sigma_min={self.sigma_min}, min is {scales.min()!r}", field="scales"
            )
        object.__setattr__(self, "logits", logits)
        object.__setattr__(self, "scales", scales)
        if self.residuals is not None:
            residuals = np.asarray(self.residuals, dtype=np.float64).reshape(-1)
            if residuals.shape != (logits.shape[-1],):
                raise ShapeMismatchError("one residual per plane is required", field="residuals")
            object.__setattr__(self, "residuals", residuals)

    @property
    def n_planes(self) -> int:
        return self.logits.shape[-1]

    @property
    def shape(self):
        return self.logits.shape[:2]

    @classmethod
    def uniform(cls, height: int, width: int, n_planes: int, sigma: float = 1.0) -> "MixtureField":
        return cls(
            logits=np.zeros((height, width, n_planes)),
            scales=np.full((height, width, n_planes), float(sigma)),
        )

    @classmethod
    def one_hot(
        cls,
        index: np.ndarray,
        n_planes: int,
        logit: float = 30.0,
        sigma: float = 1e-3,
        active: Optional[np.ndarray] = None,
        sigma_min: float = SIGMA_MIN,
    ) -> "MixtureField":
        """
        +logit on the plane named by `index` (H×W ints), 0 elsewhere.
        Pixels outside `active` keep uniform logits.
        """
        index = np.asarray(index)
        logits = np.zeros(index.shape + (n_planes,))
        np.put_along_axis(logits, index[..., None], logit, axis=-1)
        if active is not None:
            logits = np.where(np.asarray(active, dtype=bool)[..., None], logits, 0.0)
        return cls(logits=logits, scales=np.full(logits.shape, float(sigma)), sigma_min=sigma_min)


@dataclass(frozen=True)
class ProbField:
    """Per-pixel plane probabilities; rows of invalid pixels are all zero"""
    probs: np.ndarray
    valid: Optional[np.ndarray] = None

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.ndim != 3:
            raise ShapeMismatchError(f"probs must be H×W×N, got shape {probs.shape}", field="probs")
        valid = np.ones(probs.shape[:2], dtype=bool) if self.valid is None else np.asarray(self.valid, dtype=bool)
        if valid.shape != probs.shape[:2]:
            raise ShapeMismatchError("valid mask must be H×W", field="valid")
        if np.any(probs < 0):
            raise InvalidFieldError("probabilities must be nonnegative", field="probs")
        totals = probs.sum(axis=-1)
        if np.any(np.abs(totals[valid] - 1.0) > 1e-9):
            raise InvalidFieldError("probabilities must sum to 1 on valid pixels", field="probs")
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "valid", valid)

    @property
    def n_planes(self) -> int:
        return self.probs.shape[-1]


class ComposedDepth(NamedTuple):
    depth: np.ndarray
    valid: np.ndarray


# ============= Mixture Operations =============

def softmax_weights(field: MixtureField) -> np.ndarray:
    """π = softmax(l) over the plane axis, max-shifted"""
    return softmax(field.logits, axis=-1)


def plane_probabilities(
    weights: np.ndarray,
    scales: np.ndarray,
    depths: np.ndarray,
    valid: Optional[np.ndarray] = None,
    min_total: float = MIN_TOTAL,
) -> ProbField:
    """
    p_i ∝ Σ_j π_j exp(-|D_i - D_j| / σ_j) / (2σ_j), normalized over i.

    Planes flagged invalid at a pixel are dropped from both sums and the
    remaining weights renormalized. A pixel whose normalizer falls below
    `min_total` is invalid and gets an all-zero row.
    """
    require_same_shape("weights", weights, "scales", scales)
    require_same_shape("weights", weights, "depths", depths)
    if valid is None:
        valid = np.ones(weights.shape, dtype=bool)
    require_same_shape("weights", weights, "valid", valid)

    w = np.where(valid, weights, 0.0)
    w_total = w.sum(axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        w = np.where(w_total > 0, w / np.where(w_total > 0, w_total, 1.0), 0.0)

    raw = np.zeros_like(w)
    for j in range(w.shape[-1]):
        w_j = w[..., j:j + 1]
        if not np.any(w_j):
            continue
        sigma_j = scales[..., j:j + 1]
        raw += w_j * np.exp(-np.abs(depths - depths[..., j:j + 1]) / sigma_j) / (2.0 * sigma_j)
    raw = np.where(valid, raw, 0.0)

    total = raw.sum(axis=-1)
    pixel_valid = total >= min_total
    probs = np.where(pixel_valid[..., None], raw / np.where(pixel_valid, total, 1.0)[..., None], 0.0)
    n_invalid = int(pixel_valid.size - pixel_valid.sum())
    if n_invalid:
        logger.debug(f"{n_invalid} pixels have no valid plane")
    return ProbField(probs=probs, valid=pixel_valid)


def mixture_probs(
    field: MixtureField,
    plane_depths: np.ndarray,
    plane_valid: Optional[np.ndarray] = None,
) -> ProbField:
    """Target-view plane probabilities from the field and rendered plane depths"""
    return plane_probabilities(softmax_weights(field), field.scales, plane_depths, plane_valid)


def compose_depth(probs: ProbField, plane_depths: np.ndarray) -> ComposedDepth:
    """D = Σ p_i D_i; invalid pixels carry depth 0"""
    require_same_shape("probs", probs.probs, "plane_depths", plane_depths)
    depth = np.einsum("hwn,hwn->hw", probs.probs, plane_depths)
    return ComposedDepth(depth=np.where(probs.valid, depth, 0.0), valid=probs.valid)


def mmp(probs: ProbField) -> float:
    """Mean over valid pixels of max_i p_i"""
    if not np.any(probs.valid):
        raise EmptyInputError("no valid pixels for MMP", field="probs")
    return float(probs.probs.max(axis=-1)[probs.valid].mean())
