"""
Whole-pipeline checks on rendered scenes: right-view synthesis quality and
occlusion masks against brute-force visibility
"""
import time

import numpy as np

from orthoplane.services.occlusion_distill import occlusion_mask_rl, right_view_mask
from orthoplane.services.plane_bank import bank_disparities
from orthoplane.services.scene_oracle import (
    oracle_occlusion,
    psnr,
    random_scene,
    random_two_layer_scene,
    render_stereo,
    scene_mixture_field,
    stable_reference_mask,
)
from orthoplane.services.warp_engine import reference_plane_depths, synthesize_reference, warp_to_reference


def test_ideal_field_synthesizes_the_right_view(kitti_bank, kitti_intr, rig):
    assert len(kitti_bank) == 63
    pose = rig.target_to_reference()
    ref = reference_plane_depths(kitti_bank.planes, pose, kitti_intr)
    for seed in range(10):
        scene = random_scene(np.random.default_rng(seed), kitti_bank, kitti_intr, rig)
        left, right = render_stereo(scene, kitti_intr, rig)
        field = scene_mixture_field(scene, kitti_bank, kitti_intr)
        warped = warp_to_reference(left.image, field, kitti_bank.planes, pose, kitti_intr)
        synth = synthesize_reference(warped.mixture, warped.images, ref.values, ref.valid)
        mask = synth.valid & stable_reference_mask(scene, kitti_intr, rig)
        assert psnr(synth.image, right.image, mask) >= 40.0


def test_masks_agree_with_oracle_visibility(kitti_bank, kitti_intr, rig):
    disps = bank_disparities(kitti_bank, kitti_intr, rig).values
    rng = np.random.default_rng(77)
    left_hits = right_hits = total = 0
    for _ in range(20):
        scene = random_two_layer_scene(rng, kitti_bank, kitti_intr, rig)
        field = scene_mixture_field(scene, kitti_bank, kitti_intr)
        oracle = oracle_occlusion(scene, kitti_intr, rig)
        left_hits += int((occlusion_mask_rl(field, disps).binary() == ~oracle.left_occluded).sum())
        right_hits += int((right_view_mask(field, disps).binary() == ~oracle.right_occluded).sum())
        total += kitti_intr.width * kitti_intr.height
    assert left_hits / total >= 0.99
    assert right_hits / total >= 0.99


def test_single_scene_pipeline_runs_within_ten_seconds(kitti_bank, kitti_intr, rig):
    pose = rig.target_to_reference()
    start = time.perf_counter()
    scene = random_scene(np.random.default_rng(11), kitti_bank, kitti_intr, rig)
    left, right = render_stereo(scene, kitti_intr, rig)
    field = scene_mixture_field(scene, kitti_bank, kitti_intr)
    ref = reference_plane_depths(kitti_bank.planes, pose, kitti_intr)
    warped = warp_to_reference(left.image, field, kitti_bank.planes, pose, kitti_intr, workers=1)
    synth = synthesize_reference(warped.mixture, warped.images, ref.values, ref.valid)
    disps = bank_disparities(kitti_bank, kitti_intr, rig).values
    occlusion_mask_rl(field, disps)
    assert time.perf_counter() - start < 10.0
    assert synth.image.shape == right.image.shape
