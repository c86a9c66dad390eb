"""
synth: render a seeded synthetic stereo scene with its ideal mixture field
"""
import numpy as np

from ...core.logging_config import get_logger
from ...services.camera_geometry import sample_augment_params
from ...services.pipeline_io import save_mixture_field, save_scene, write_disparity, write_image_png, write_pfm
from ...services.plane_bank import bank_to_json, build_bank
from ...services.scene_oracle import (
    depth_to_disparity_map,
    random_scene,
    render_stereo,
    scene_mixture_field,
)
from ...services.warp_engine import augment_image
from .common import (
    BANK_FILE,
    DEPTH_LEFT,
    DEPTH_RIGHT,
    FIELD_DIR,
    LEFT_AUGMENTED,
    LEFT_IMAGE,
    RIGHT_IMAGE,
    SCENE_FILE,
    StageContext,
    save_augment,
    save_config,
)

logger = get_logger("cli.synth")


def run(ctx: StageContext, args) -> None:
    cfg = ctx.config
    intr, rig = cfg.intrinsics, cfg.rig
    rng = np.random.default_rng(ctx.seed)

    bank = build_bank(cfg.planes, rig, intr)
    scene = random_scene(rng, bank, intr, rig, cfg.scene)
    left, right = render_stereo(scene, intr, rig)
    field = scene_mixture_field(
        scene, bank, intr, cfg.mixture.oracle_sigma, cfg.mixture.oracle_logit, cfg.mixture.sigma_min
    )

    out = ctx.out_dir
    save_config(ctx)
    save_scene(out / SCENE_FILE, scene)
    (out / BANK_FILE).write_text(bank_to_json(bank))
    write_pfm(out / LEFT_IMAGE, left.image)
    write_pfm(out / RIGHT_IMAGE, right.image)
    write_image_png(out / "left.png", left.image)
    write_image_png(out / "right.png", right.image)
    write_pfm(out / DEPTH_LEFT, left.depth)
    write_pfm(out / DEPTH_RIGHT, right.depth)
    disp_path = write_disparity(out / "disp_left", depth_to_disparity_map(left.depth, intr, rig), ctx.fmt)
    save_mixture_field(out / FIELD_DIR, field)

    outputs = {
        "scene": SCENE_FILE,
        "bank": BANK_FILE,
        "field": FIELD_DIR,
        "left": LEFT_IMAGE,
        "right": RIGHT_IMAGE,
        "depth_left": DEPTH_LEFT,
        "disparity": disp_path.name,
    }

    # drawn after the scene so a seed renders the same scene with or without --augment
    aug = sample_augment_params(rng, intr, cfg.scene.scale_range) if args.augment else cfg.augment
    if not aug.is_identity(intr):
        view = augment_image(left.image, aug, intr)
        write_pfm(out / LEFT_AUGMENTED, view.values)
        outputs["left_aug"] = LEFT_AUGMENTED
        outputs["augment"] = save_augment(ctx, aug)
        logger.info(f"Resize-crop view fs={aug.fs:.3f}, p=({aug.px:.1f}, {aug.py:.1f}) written to {LEFT_AUGMENTED}")

    logger.info(f"Scene with {len(scene.patches)} patches over a {len(bank)}-plane bank written to {out}")
    ctx.manifest("synth", outputs)
