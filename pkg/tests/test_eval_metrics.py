from decimal import Decimal, localcontext

import numpy as np
import pytest

from orthoplane.core.exceptions import ConfigError, EmptyInputError, ShapeMismatchError
from orthoplane.schemas.planes import PlaneBankParams
from orthoplane.services.eval_metrics import (
    CROP_PRESETS,
    CropWindow,
    depth_metrics,
    ground_metrics,
    resolve_crop,
)
from orthoplane.services.mixture_model import ProbField
from orthoplane.services.plane_bank import build_bank


def decimal_reference(gt, pred, clip_min=1e-3, clip_max=80.0):
    """High-precision metrics on clamped 1-D arrays"""
    with localcontext() as ctx:
        ctx.prec = 50
        lo, hi = Decimal(clip_min), Decimal(clip_max)
        g = [min(max(Decimal(float(v)), lo), hi) for v in gt]
        p = [min(max(Decimal(float(v)), lo), hi) for v in pred]
        n = Decimal(len(g))
        ratio = [max(a / b, b / a) for a, b in zip(g, p)]
        return {
            "abs_rel": sum(abs(a - b) / a for a, b in zip(g, p)) / n,
            "sq_rel": sum((a - b) ** 2 / a for a, b in zip(g, p)) / n,
            "rmse": (sum((a - b) ** 2 for a, b in zip(g, p)) / n).sqrt(),
            "rmse_log": (sum((a.ln() - b.ln()) ** 2 for a, b in zip(g, p)) / n).sqrt(),
            "a1": sum(1 for r in ratio if r < Decimal("1.25")) / n,
            "a2": sum(1 for r in ratio if r < Decimal("1.5625")) / n,
            "a3": sum(1 for r in ratio if r < Decimal("1.953125")) / n,
        }


class TestDepthMetrics:
    def test_matches_high_precision_reference(self, rng):
        for _ in range(5):
            gt = rng.uniform(0.5, 100.0, (12, 15))
            pred = gt * rng.uniform(0.6, 1.6, gt.shape)
            result = depth_metrics(pred, gt)
            reference = decimal_reference(gt.ravel(), pred.ravel())
            for key, expected in reference.items():
                assert abs(getattr(result, key) - float(expected)) <= 1e-12 * max(1.0, abs(float(expected)))
            assert result.n_pixels == gt.size

    def test_uniform_overestimate(self, rng):
        gt = rng.uniform(1.0, 50.0, (10, 10))
        result = depth_metrics(1.3 * gt, gt)
        assert result.abs_rel == pytest.approx(0.3, abs=1e-12)
        assert result.a1 == 0.0 and result.a2 == 1.0 and result.a3 == 1.0
        assert result.rmse_log == pytest.approx(np.log(1.3), abs=1e-12)

    def test_clipping(self):
        gt = np.array([[80.0, 10.0]])
        pred = np.array([[500.0, 10.0]])
        result = depth_metrics(pred, gt)
        assert result.abs_rel == 0.0 and result.rmse == 0.0

    def test_valid_mask(self):
        gt = np.array([[2.0, 4.0]])
        pred = np.array([[2.0, 40.0]])
        result = depth_metrics(pred, gt, valid=np.array([[True, False]]))
        assert result.abs_rel == 0.0 and result.n_pixels == 1
        with pytest.raises(EmptyInputError):
            depth_metrics(pred, gt, valid=np.zeros((1, 2), dtype=bool))

    def test_pixel_order_does_not_matter(self, rng):
        gt = rng.uniform(0.5, 100.0, (10, 12))
        pred = gt * rng.uniform(0.6, 1.6, gt.shape)
        order = rng.permutation(gt.size)
        base = depth_metrics(pred, gt)
        shuffled = depth_metrics(pred.ravel()[order].reshape(gt.shape), gt.ravel()[order].reshape(gt.shape))
        for key in ("abs_rel", "sq_rel", "rmse", "rmse_log"):
            assert getattr(shuffled, key) == pytest.approx(getattr(base, key), rel=1e-12)
        assert (shuffled.a1, shuffled.a2, shuffled.a3) == (base.a1, base.a2, base.a3)

    @pytest.mark.parametrize("c", [0.5, 4.0])
    def test_common_scale(self, rng, c):
        gt = rng.uniform(1.0, 50.0, (8, 9))
        pred = gt * rng.uniform(0.6, 1.6, gt.shape)
        bounds = {"clip_min": 1e-6, "clip_max": 1e6}
        base = depth_metrics(pred, gt, **bounds)
        scaled = depth_metrics(c * pred, c * gt, **bounds)
        assert scaled.sq_rel == pytest.approx(c * base.sq_rel, rel=1e-12)
        assert scaled.rmse == pytest.approx(c * base.rmse, rel=1e-12)
        assert scaled.abs_rel == pytest.approx(base.abs_rel, rel=1e-12)
        assert scaled.rmse_log == pytest.approx(base.rmse_log, rel=1e-9)
        assert (scaled.a1, scaled.a2, scaled.a3) == (base.a1, base.a2, base.a3)

    def test_threshold_accuracies_are_ordered(self, rng):
        for _ in range(10):
            gt = rng.uniform(0.5, 80.0, (6, 6))
            result = depth_metrics(gt * rng.uniform(0.3, 3.0, gt.shape), gt)
            assert result.a1 <= result.a2 <= result.a3

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            depth_metrics(np.ones((2, 2)), np.ones((2, 3)))


class TestCrop:
    def test_garg_window_size(self):
        mask = CROP_PRESETS["garg"].mask(192, 640)
        assert mask.sum() == (190 - 78) * (616 - 23)
        assert mask[78, 23] and not mask[77, 23] and not mask[78, 616]

    def test_crop_limits_evaluation(self):
        gt = np.full((192, 640), 10.0)
        result = depth_metrics(gt, gt, crop="garg")
        assert result.n_pixels == (190 - 78) * (616 - 23)

    def test_custom_window(self):
        window = CropWindow(top=0.5, left=0.25, right=0.75)
        assert window.mask(4, 8).sum() == 2 * 4
        assert resolve_crop(window) is window and resolve_crop(None) is None

    def test_unknown_preset(self):
        with pytest.raises(ConfigError) as err:
            resolve_crop("eigen")
        assert err.value.field == "eval.crop"

    def test_window_order(self):
        with pytest.raises(ValueError):
            CropWindow(top=0.6, bottom=0.4)


class TestGroundMetrics:
    @pytest.fixture
    def bank(self, small_intr, rig):
        return build_bank(PlaneBankParams(n_vertical=2, n_ground=2, d_min=1.0, d_max=40.0), rig, small_intr)

    @staticmethod
    def _probs(ground_rows, height=4, width=4, n=4):
        index = np.zeros((height, width), dtype=int)
        index[ground_rows] = 2
        probs = np.zeros((height, width, n))
        np.put_along_axis(probs, index[..., None], 1.0, axis=-1)
        return ProbField(probs=probs)

    def test_iou_and_roughness(self, bank):
        probs = self._probs(slice(2, 4))
        truth = np.zeros((4, 4), dtype=bool)
        truth[1:] = True
        disparity = np.tile(np.arange(4.0), (4, 1))
        result = ground_metrics(probs, bank, truth, disparity)
        assert result.iou == pytest.approx(8 / 12)
        # six horizontal steps of 1 and four vertical steps of 0
        assert result.roughness == pytest.approx(0.6)
        assert result.n_ground_pixels == 8

    def test_empty_union_is_perfect(self, bank):
        probs = self._probs(slice(0, 0))
        result = ground_metrics(probs, bank, np.zeros((4, 4), dtype=bool))
        assert result.iou == 1.0 and result.n_ground_pixels == 0 and result.roughness is None

    def test_bank_without_ground(self, small_intr, rig):
        bank = build_bank(PlaneBankParams(n_vertical=4, n_ground=0, d_min=1.0, d_max=40.0), rig, small_intr)
        truth = np.ones((4, 4), dtype=bool)
        assert ground_metrics(self._probs(slice(2, 4)), bank, truth).iou == 0.0

    def test_invalid_pixels_are_ignored(self, bank):
        probs = ProbField(probs=self._probs(slice(2, 4)).probs, valid=np.zeros((4, 4), dtype=bool))
        with pytest.raises(EmptyInputError):
            ground_metrics(probs, bank, np.zeros((4, 4), dtype=bool))
