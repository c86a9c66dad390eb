import numpy as np
import pytest

from orthoplane.core.exceptions import EmptyInputError, InvalidFieldError, ShapeMismatchError
from orthoplane.services.mixture_model import (
    SIGMA_MIN,
    MixtureField,
    ProbField,
    compose_depth,
    mixture_probs,
    mmp,
    plane_probabilities,
    softmax_weights,
)


def _stack(depths, height=3, width=4):
    return np.broadcast_to(np.asarray(depths, dtype=np.float64), (height, width, len(depths))).copy()


class TestMixtureField:
    def test_scale_floor(self):
        with pytest.raises(InvalidFieldError):
            MixtureField(logits=np.zeros((2, 2, 3)), scales=np.full((2, 2, 3), SIGMA_MIN / 2))

    def test_non_finite(self):
        logits = np.zeros((2, 2, 3))
        logits[0, 0, 1] = np.nan
        with pytest.raises(InvalidFieldError):
            MixtureField(logits=logits, scales=np.ones((2, 2, 3)))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            MixtureField(logits=np.zeros((2, 2, 3)), scales=np.ones((2, 2, 2)))

    def test_one_hot(self):
        index = np.array([[0, 2], [1, 1]])
        field = MixtureField.one_hot(index, 3, logit=5.0)
        assert field.logits[0, 1, 2] == 5.0 and field.logits[0, 1, 0] == 0.0
        assert field.shape == (2, 2) and field.n_planes == 3

    def test_one_hot_inactive_pixels_stay_uniform(self):
        index = np.array([[0, 2], [1, 1]])
        active = np.array([[True, False], [True, True]])
        field = MixtureField.one_hot(index, 3, logit=5.0, active=active, sigma=2e-3, sigma_min=2e-3)
        assert np.all(field.logits[0, 1] == 0.0)
        assert field.logits[1, 0, 1] == 5.0
        assert field.sigma_min == 2e-3


class TestSoftmax:
    def test_large_logits_do_not_overflow(self):
        field = MixtureField(logits=np.array([[[1000.0, 0.0]]]), scales=np.ones((1, 1, 2)))
        weights = softmax_weights(field)
        assert np.all(np.isfinite(weights))
        assert weights[0, 0, 0] == pytest.approx(1.0) and weights[0, 0, 1] == pytest.approx(0.0)


class TestPlaneProbabilities:
    def test_two_plane_closed_form(self):
        weights = np.array([[[0.5, 0.5]]])
        scales = np.array([[[1.0, 0.5]]])
        depths = np.array([[[1.0, 2.0]]])
        raw = np.array([
            0.5 * 1.0 / 2.0 + 0.5 * np.exp(-1.0 / 0.5) / 1.0,
            0.5 * np.exp(-1.0) / 2.0 + 0.5 * 1.0 / 1.0,
        ])
        probs = plane_probabilities(weights, scales, depths)
        assert np.allclose(probs.probs[0, 0], raw / raw.sum(), rtol=1e-12)

    def test_symmetric_case(self):
        field = MixtureField(logits=np.zeros((1, 1, 2)), scales=np.ones((1, 1, 2)))
        probs = mixture_probs(field, np.array([[[1.0, 2.0]]]))
        assert np.allclose(probs.probs, 0.5)
        assert compose_depth(probs, np.array([[[1.0, 2.0]]])).depth[0, 0] == pytest.approx(1.5)

    def test_rows_sum_to_one(self, rng):
        n = 8
        field = MixtureField(logits=rng.normal(0, 3, (5, 6, n)), scales=rng.uniform(0.01, 10, (5, 6, n)))
        probs = mixture_probs(field, rng.uniform(1, 80, (5, 6, n)))
        assert np.all(np.abs(probs.probs.sum(axis=-1) - 1.0) < 1e-9)
        assert np.all(probs.probs >= 0)

    def test_invalid_plane_is_dropped(self):
        field = MixtureField(logits=np.zeros((3, 4, 2)), scales=np.ones((3, 4, 2)))
        valid = np.zeros((3, 4, 2), dtype=bool)
        valid[..., 0] = True
        probs = mixture_probs(field, _stack([5.0, 6.0]), valid)
        assert np.all(probs.probs[..., 0] == 1.0) and np.all(probs.probs[..., 1] == 0.0)

    def test_pixel_without_planes_is_invalid(self):
        field = MixtureField.uniform(3, 4, 2)
        valid = np.ones((3, 4, 2), dtype=bool)
        valid[1, 1] = False
        probs = mixture_probs(field, _stack([5.0, 6.0]), valid)
        assert not probs.valid[1, 1] and probs.valid.sum() == 11
        assert np.all(probs.probs[1, 1] == 0.0)
        assert compose_depth(probs, _stack([5.0, 6.0])).depth[1, 1] == 0.0

    def test_probfield_rejects_bad_rows(self):
        with pytest.raises(InvalidFieldError):
            ProbField(probs=np.full((1, 1, 2), 0.6))
        with pytest.raises(InvalidFieldError):
            ProbField(probs=np.array([[[1.5, -0.5]]]))


class TestComposition:
    def test_one_hot_recovers_plane_depth(self, rng):
        depths = np.array([3.0, 7.0, 12.0, 40.0])
        index = rng.integers(0, 4, (6, 5))
        field = MixtureField.one_hot(index, 4, sigma=SIGMA_MIN)
        composed = compose_depth(mixture_probs(field, _stack(depths, 6, 5)), _stack(depths, 6, 5))
        assert np.all(np.abs(composed.depth - depths[index]) < 1e-6 * depths[index])

    def test_mmp_uniform(self):
        for n in (1, 3, 8):
            field = MixtureField.uniform(4, 4, n)
            probs = mixture_probs(field, _stack([10.0] * n, 4, 4))
            assert mmp(probs) == pytest.approx(1.0 / n, abs=1e-15)

    def test_mmp_one_hot(self, rng):
        index = rng.integers(0, 3, (4, 4))
        field = MixtureField.one_hot(index, 3, logit=1000.0, sigma=SIGMA_MIN)
        assert mmp(mixture_probs(field, _stack([2.0, 5.0, 9.0], 4, 4))) == 1.0

    def test_mmp_needs_valid_pixels(self):
        with pytest.raises(EmptyInputError):
            mmp(ProbField(probs=np.zeros((2, 2, 3)), valid=np.zeros((2, 2), dtype=bool)))


class TestConcentration:
    def test_softmax_shift_invariance(self, rng):
        logits = rng.normal(0, 3, (5, 6, 8))
        scales = np.ones((5, 6, 8))
        shift = rng.uniform(-50, 50, (5, 6, 1))
        base = softmax_weights(MixtureField(logits=logits, scales=scales))
        shifted = softmax_weights(MixtureField(logits=logits + shift, scales=scales))
        assert np.max(np.abs(base - shifted)) < 1e-12

    def test_composed_depth_is_convex(self, rng):
        for n in (2, 5, 8):
            field = MixtureField(logits=rng.normal(0, 3, (6, 7, n)), scales=rng.uniform(0.01, 20, (6, 7, n)))
            depths = rng.uniform(1, 80, (6, 7, n))
            composed = compose_depth(mixture_probs(field, depths), depths)
            tol = 1e-9 * depths.max()
            assert np.all(composed.depth >= depths.min(axis=-1) - tol)
            assert np.all(composed.depth <= depths.max(axis=-1) + tol)

    def test_mmp_bounds(self, rng):
        for n in (1, 2, 8):
            field = MixtureField(logits=rng.normal(0, 3, (5, 5, n)), scales=rng.uniform(0.01, 20, (5, 5, n)))
            value = mmp(mixture_probs(field, rng.uniform(1, 80, (5, 5, n))))
            assert 1.0 / n - 1e-12 <= value <= 1.0 + 1e-12

    def test_mmp_half_uniform_half_one_hot(self):
        logits = np.zeros((4, 4, 2))
        logits[:2, :, 0] = 1000.0
        field = MixtureField(logits=logits, scales=np.full((4, 4, 2), SIGMA_MIN))
        assert mmp(mixture_probs(field, _stack([2.0, 5.0], 4, 4))) == pytest.approx(0.75, abs=1e-12)

    def test_shrinking_scale_concentrates(self, rng):
        logits = rng.normal(0, 1, (6, 6, 2))
        depths = _stack([5.0, 10.0], 6, 6)
        values = [
            mmp(mixture_probs(MixtureField(logits=logits, scales=np.full((6, 6, 2), sigma)), depths))
            for sigma in (100.0, 10.0, 3.0, 1.0, 0.3)
        ]
        assert np.all(np.diff(values) >= -1e-15)
        assert values[-1] > values[0]

    def test_sharper_logits_concentrate(self, rng):
        logits = rng.normal(0, 1, (6, 6, 5))
        depths = _stack([2.0, 4.0, 8.0, 16.0, 32.0], 6, 6)
        scales = np.full((6, 6, 5), SIGMA_MIN)
        values = [
            mmp(mixture_probs(MixtureField(logits=alpha * logits, scales=scales), depths))
            for alpha in (0.0, 0.5, 1.0, 2.0, 4.0)
        ]
        assert values[0] == pytest.approx(0.2, abs=1e-12)
        assert np.all(np.diff(values) >= -1e-15)
        assert values[-1] > values[0]
