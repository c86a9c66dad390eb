import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from orthoplane.core.exceptions import DegenerateHomographyError, DegeneratePlaneError, ShapeMismatchError
from orthoplane.schemas.camera import AugmentParams, RigidPose
from orthoplane.schemas.planes import Plane
from orthoplane.services.camera_geometry import transform_plane
from orthoplane.services.mixture_model import MixtureField
from orthoplane.services.scene_oracle import fronto_plane
from orthoplane.services.warp_engine import (
    ShiftDirection,
    augment_image,
    disparity_shift,
    homography,
    reference_plane_depths,
    synthesize_reference,
    warp_bilinear,
    warp_coordinates,
    warp_mixture,
    warp_to_reference,
)


def _ramp(intr):
    xs, _ = intr.pixel_grid()
    return xs.copy()


class TestHomography:
    def test_fronto_plane_shifts_by_disparity(self, kitti_intr, rig):
        plane = fronto_plane(10.0, kitti_intr, rig)
        h = homography(plane, rig.target_to_reference(), kitti_intr)
        p = h @ np.array([100.0, 50.0, 1.0])
        assert np.allclose(p[:2] / p[2], [90.0, 50.0], atol=1e-9)

    def test_ground_plane_maps_ground_points(self, kitti_intr, rig):
        plane = Plane(n=(0.0, 1.0, 0.0), delta=1.5)
        pose = rig.target_to_reference()
        h = homography(plane, pose, kitti_intr)
        w = np.array([2.0, 1.5, 12.0])
        u = kitti_intr.K @ w
        ur = kitti_intr.K @ (w + pose.t)
        p = h @ (u / u[2])
        assert np.allclose(p / p[2], ur / ur[2], atol=1e-9)

    def test_plane_through_camera(self, kitti_intr, rig):
        with pytest.raises(DegeneratePlaneError):
            homography(Plane(n=(0.0, 0.0, 1.0), delta=0.0), rig.target_to_reference(), kitti_intr)

    def test_composition_through_the_moved_plane(self, kitti_intr, rng):
        def small_pose():
            return RigidPose(R=Rotation.from_rotvec(rng.normal(0, 0.05, 3)).as_matrix(), t=rng.normal(0, 0.3, 3))

        for _ in range(50):
            plane = Plane.from_normal([*rng.normal(0, 0.2, 2), 1.0], float(rng.uniform(5.0, 50.0)))
            first, second = small_pose(), small_pose()
            direct = homography(plane, second.compose(first), kitti_intr)
            chained = homography(transform_plane(plane, first), second, kitti_intr) @ homography(plane, first, kitti_intr)
            direct, chained = direct / direct[2, 2], chained / chained[2, 2]
            assert np.allclose(direct, chained, rtol=1e-9, atol=1e-9 * np.abs(direct).max())


class TestBilinearWarp:
    def test_identity_is_exact(self, small_intr, rng):
        src = rng.uniform(size=(64, 96, 3))
        out = warp_bilinear(src, np.eye(3))
        assert out.valid.all()
        assert np.array_equal(out.values, src)

    def test_disparity_homography(self, kitti_intr, rig):
        h = homography(fronto_plane(10.0, kitti_intr, rig), rig.target_to_reference(), kitti_intr)
        out = warp_bilinear(_ramp(kitti_intr), h)
        assert np.allclose(out.values[:, :630], _ramp(kitti_intr)[:, :630] + 10.0, atol=1e-9)
        assert out.valid[:, :630].all()
        assert not out.valid[:, 631:].any()
        assert np.all(out.values[:, 631:] == 0.0)

    def test_fractional_shift_interpolates(self, small_intr):
        h = np.eye(3)
        h[0, 2] = -2.25  # H^{-1} samples x + 2.25
        out = warp_bilinear(_ramp(small_intr), h)
        assert out.values[10, 5] == pytest.approx(7.25)

    def test_last_column_is_valid(self, small_intr):
        h = np.eye(3)
        h[0, 2] = -1.0
        coords = warp_coordinates(h, small_intr.shape)
        assert coords.valid[0, 94] and not coords.valid[0, 95]

    def test_singular(self, small_intr):
        with pytest.raises(DegenerateHomographyError):
            warp_coordinates(np.zeros((3, 3)), small_intr.shape)


class TestAugmentImage:
    def test_identity(self, small_intr, rng):
        src = rng.uniform(size=(64, 96, 3))
        out = augment_image(src, AugmentParams.identity(small_intr), small_intr)
        assert out.valid.all()
        assert np.allclose(out.values, src, rtol=0, atol=1e-12)

    def test_zoom_in_samples_the_window(self, small_intr):
        out = augment_image(_ramp(small_intr), AugmentParams(fs=0.5, px=40.0, py=30.0), small_intr)
        xs, _ = small_intr.pixel_grid()
        assert out.valid.all()
        assert np.allclose(out.values, 40.0 + 0.5 * (xs - 47.5), rtol=0, atol=1e-9)

    def test_zoom_out_flags_pixels_outside_the_image(self, small_intr):
        out = augment_image(np.ones(small_intr.shape), AugmentParams(fs=2.0, px=47.5, py=31.5), small_intr)
        assert out.valid[31, 47] and not out.valid[0, 0]
        assert np.all(out.values[~out.valid] == 0.0)


class TestDisparityShift:
    def test_directions(self, small_intr):
        src = _ramp(small_intr)
        disp = np.full(small_intr.shape, 2.5)
        l2r = disparity_shift(src, disp, ShiftDirection.LEFT_TO_RIGHT)
        r2l = disparity_shift(src, disp, "R2L")
        assert np.allclose(l2r.values[:, :93], src[:, :93] + 2.5)
        assert not l2r.valid[:, 93:].any()
        assert np.allclose(r2l.values[:, 3:], src[:, 3:] - 2.5)
        assert not r2l.valid[:, :3].any()

    def test_shape_mismatch(self, small_intr):
        with pytest.raises(ShapeMismatchError):
            disparity_shift(np.zeros((4, 4)), np.zeros((4, 5)), ShiftDirection.LEFT_TO_RIGHT)


class TestSynthesis:
    @pytest.fixture
    def planes(self, small_intr, rig):
        return [fronto_plane(d, small_intr, rig) for d in (12.0, 3.0)]

    def test_one_hot_field_reproduces_plane_warp(self, small_intr, rig, rng, planes):
        image = rng.uniform(size=(64, 96, 3))
        field = MixtureField.one_hot(np.zeros(small_intr.shape, dtype=int), 2)
        pose = rig.target_to_reference()
        warped = warp_to_reference(image, field, planes, pose, small_intr)
        ref = reference_plane_depths(planes, pose, small_intr)
        synth = synthesize_reference(warped.mixture, warped.images, ref.values, ref.valid)

        region = warped.mixture.plane_valid[..., 0]
        assert region[:, :84].all()
        assert np.allclose(synth.image[region], warped.images[0][region], atol=1e-6)
        assert np.allclose(warped.images[0][:, :84], image[:, 12:], atol=1e-9)
        # no plane reaches the last three columns
        assert synth.valid[:, :93].all() and not synth.valid[:, 93:].any()

    def test_worker_count_does_not_change_result(self, small_intr, rig, rng, planes):
        field = MixtureField(logits=rng.normal(size=(64, 96, 2)), scales=rng.uniform(0.1, 2, (64, 96, 2)))
        pose = rig.target_to_reference()
        hs = [homography(p, pose, small_intr) for p in planes]
        a = warp_mixture(field, hs, workers=1)
        b = warp_mixture(field, hs, workers=3)
        assert np.array_equal(a.logits, b.logits) and np.array_equal(a.scales, b.scales)

    def test_dead_pixels_have_zero_weight(self, small_intr, rig, planes):
        field = MixtureField.uniform(64, 96, 2)
        hs = [homography(p, rig.target_to_reference(), small_intr) for p in planes]
        warped = warp_mixture(field, hs)
        dead = ~warped.pixel_valid
        assert dead[:, 93:].all()
        assert np.all(warped.weights[dead] == 0.0)
        assert np.allclose(warped.weights[~dead].sum(axis=-1), 1.0)

    def test_plane_count_mismatch(self, small_intr, rig, planes):
        field = MixtureField.uniform(64, 96, 3)
        with pytest.raises(ShapeMismatchError):
            warp_to_reference(np.zeros((64, 96, 3)), field, planes, rig.target_to_reference(), small_intr)
