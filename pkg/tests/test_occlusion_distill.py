import numpy as np
import pytest

from orthoplane.core.exceptions import InvalidFieldError, ShapeMismatchError
from orthoplane.services.mixture_model import MixtureField
from orthoplane.services.occlusion_distill import (
    MaskSide,
    OcclusionMask,
    Visibility,
    distill_label,
    edge_blend_post_process,
    flip_prediction,
    masks_summary,
    occlusion_mask_lr,
    occlusion_mask_rl,
    post_process,
    right_view_mask,
)

HEIGHT, WIDTH = 6, 300


def _disparities(*values):
    """Constant per-plane disparity maps, N×H×W"""
    return np.stack([np.full((HEIGHT, WIDTH), float(v)) for v in values])


@pytest.fixture
def two_layer():
    """Foreground columns [100, 200) at d=15 in front of a background at d=5"""
    index = np.ones((HEIGHT, WIDTH), dtype=int)
    index[:, 100:200] = 0
    return MixtureField.one_hot(index, 2), _disparities(15, 5)


def _visible(*bands):
    expected = np.ones((HEIGHT, WIDTH), dtype=bool)
    for lo, hi in bands:
        expected[:, lo:hi] = False
    return expected


class TestTwoLayer:
    def test_rl_band_left_of_object(self, two_layer):
        mask = occlusion_mask_rl(*two_layer)
        assert mask.side == MaskSide.RL_LEFT
        assert np.array_equal(mask.binary(), _visible((0, 5), (90, 100)))

    def test_lr_band_right_of_object(self, two_layer):
        mask = occlusion_mask_lr(*two_layer)
        assert np.array_equal(mask.binary(), _visible((200, 210), (295, 300)))

    def test_band_width_is_disparity_difference(self, two_layer):
        values = occlusion_mask_rl(*two_layer).values
        assert int((values[0, 50:250] < 0.5).sum()) == 15 - 5

    def test_right_view_band(self, two_layer):
        mask = right_view_mask(*two_layer)
        assert mask.side == MaskSide.RIGHT
        assert np.array_equal(mask.binary(), _visible((185, 195), (295, 300)))

    def test_masks_are_nearly_binary(self, two_layer):
        for mask in (occlusion_mask_rl(*two_layer), occlusion_mask_lr(*two_layer)):
            assert np.all((mask.values < 1e-9) | (mask.values > 1 - 1e-9))

    def test_softmax_visibility_splits_the_band(self, two_layer):
        mask = occlusion_mask_rl(*two_layer, visibility=Visibility.SOFTMAX)
        # equally confident planes share the contested right pixels
        assert np.allclose(mask.values[:, 90:100], 0.5, atol=1e-9)
        assert np.allclose(mask.values[:, 100:110], 0.5, atol=1e-9)
        assert np.allclose(mask.values[:, 110:200], 1.0, atol=1e-9)

    def test_plane_last_layout(self, two_layer):
        field, disps = two_layer
        a = occlusion_mask_rl(field, disps).values
        b = occlusion_mask_rl(field, np.moveaxis(disps, 0, -1)).values
        assert np.array_equal(a, b)


class TestSinglePlane:
    def test_border_bands(self):
        field = MixtureField.uniform(HEIGHT, WIDTH, 1)
        disps = _disparities(4)
        assert np.array_equal(occlusion_mask_rl(field, disps).binary(), _visible((0, 4)))
        assert np.array_equal(occlusion_mask_lr(field, disps).binary(), _visible((296, 300)))
        assert np.array_equal(right_view_mask(field, disps).binary(), _visible((296, 300)))

    def test_uniform_weights_over_equal_disparities(self):
        single = occlusion_mask_rl(MixtureField.uniform(HEIGHT, WIDTH, 1), _disparities(4)).values
        tied = occlusion_mask_rl(MixtureField.uniform(HEIGHT, WIDTH, 3), _disparities(4, 4, 4)).values
        assert np.allclose(tied, single, atol=1e-12)
        right_single = right_view_mask(MixtureField.uniform(HEIGHT, WIDTH, 1), _disparities(4)).values
        right_tied = right_view_mask(MixtureField.uniform(HEIGHT, WIDTH, 3), _disparities(4, 4, 4)).values
        assert np.allclose(right_tied, right_single, atol=1e-12)

    def test_zero_disparity(self, rng):
        field = MixtureField(logits=rng.normal(size=(HEIGHT, WIDTH, 2)), scales=np.ones((HEIGHT, WIDTH, 2)))
        mask = occlusion_mask_rl(field, _disparities(0, 0))
        assert np.allclose(mask.values, 1.0, atol=1e-12)


def test_flip_equivariance(rng):
    field = MixtureField(logits=rng.normal(0, 3, (HEIGHT, WIDTH, 3)), scales=np.ones((HEIGHT, WIDTH, 3)))
    flipped = MixtureField(logits=field.logits[:, ::-1], scales=field.scales[:, ::-1])
    disps = _disparities(12.5, 6.25, 2.0)
    lr = occlusion_mask_lr(field, disps).values
    rl_of_flipped = occlusion_mask_rl(flipped, disps).values
    assert np.allclose(lr, flip_prediction(rl_of_flipped), atol=1e-12)


def test_disparity_shape_is_checked(two_layer):
    field, _ = two_layer
    with pytest.raises(ShapeMismatchError):
        occlusion_mask_rl(field, _disparities(1, 2, 3))


class TestOcclusionMask:
    def test_range_is_checked(self):
        with pytest.raises(InvalidFieldError):
            OcclusionMask(values=np.full((2, 2), 1.5), side=MaskSide.RIGHT)

    def test_summary(self):
        masks = [
            OcclusionMask(values=np.array([[0.0, 1.0], [1.0, 1.0]]), side="RL_L"),
            OcclusionMask(values=np.zeros((2, 2)), side="R"),
        ]
        assert masks_summary(masks) == {"RL_L": 0.25, "R": 1.0}


class TestDistillationLabel:
    @pytest.fixture
    def maps(self, rng):
        return rng.uniform(1, 60, (8, 10)), rng.uniform(1, 60, (8, 10))

    def test_corners(self, maps):
        d, d_ff = maps
        ones, zeros = np.ones_like(d), np.zeros_like(d)
        assert np.array_equal(distill_label(d, d_ff, ones, ones), post_process(d, d_ff))
        assert np.array_equal(distill_label(d, d_ff, ones, zeros), d)
        assert np.array_equal(distill_label(d, d_ff, zeros, ones), d_ff)
        assert np.array_equal(distill_label(d, d_ff, zeros, zeros), d_ff)

    def test_convex_combination(self, maps, rng):
        d, d_ff = maps
        label = distill_label(d, d_ff, rng.uniform(size=d.shape), rng.uniform(size=d.shape))
        assert np.all(label >= np.minimum(d, d_ff) - 1e-12)
        assert np.all(label <= np.maximum(d, d_ff) + 1e-12)

    def test_accepts_mask_objects(self, maps):
        d, d_ff = maps
        full = OcclusionMask(values=np.ones_like(d), side=MaskSide.RL_LEFT)
        none = OcclusionMask(values=np.zeros_like(d), side=MaskSide.LR_LEFT)
        assert np.array_equal(distill_label(d, d_ff, full, none), d)

    def test_shape_mismatch(self, maps):
        d, d_ff = maps
        with pytest.raises(ShapeMismatchError):
            distill_label(d, d_ff, np.ones((2, 2)), np.ones_like(d))


class TestPostProcessing:
    def test_mean(self):
        assert np.allclose(post_process(np.full((2, 2), 2.0), np.full((2, 2), 4.0)), 3.0)

    def test_edge_blend(self):
        d = np.full((4, 100), 2.0)
        d_ff = np.full((4, 100), 4.0)
        out = edge_blend_post_process(d, d_ff)
        assert np.allclose(out[:, 0], 4.0)
        assert np.allclose(out[:, -1], 2.0)
        assert np.allclose(out[:, 50], 3.0)

    def test_flip_twice(self, rng):
        d = rng.uniform(size=(3, 7))
        assert np.array_equal(flip_prediction(flip_prediction(d)), d)
