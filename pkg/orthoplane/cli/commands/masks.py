"""
masks: occlusion masks of the left field, checked against the scene oracle when available
"""
from ...core.logging_config import get_logger
from ...services.occlusion_distill import (
    Visibility,
    masks_summary,
    occlusion_mask_lr,
    occlusion_mask_rl,
    right_view_mask,
)
from ...services.pipeline_io import load_scene, write_mask_png, write_pfm
from ...services.plane_bank import bank_disparities
from ...services.scene_oracle import oracle_occlusion
from .common import MASK_FILES, SCENE_FILE, StageContext, load_bank, load_field, write_json

logger = get_logger("cli.masks")


def run(ctx: StageContext, args) -> None:
    cfg = ctx.config
    bank = load_bank(ctx)
    field = load_field(ctx)
    disps = bank_disparities(bank, cfg.intrinsics, cfg.rig, cfg.render).values
    visibility = Visibility(args.visibility)

    masks = [
        occlusion_mask_rl(field, disps, visibility),
        occlusion_mask_lr(field, disps, visibility),
        right_view_mask(field, disps),
    ]
    for mask in masks:
        name = MASK_FILES[mask.side.value]
        write_pfm(ctx.out_dir / name, mask.values)
        write_mask_png(ctx.out_dir / name.replace(".pfm", ".png"), mask.values)

    report = {"occluded_fraction": masks_summary(masks), "visibility": visibility.value}
    if ctx.has(SCENE_FILE):
        scene = load_scene(ctx.path(SCENE_FILE))
        oracle = oracle_occlusion(scene, cfg.intrinsics, cfg.rig)
        report["oracle_agreement"] = {
            "RL_L": float((masks[0].binary() == ~oracle.left_occluded).mean()),
            "R": float((masks[2].binary() == ~oracle.right_occluded).mean()),
        }
        logger.info(f"Oracle agreement: {report['oracle_agreement']}")

    write_json(ctx.out_dir / "masks.json", report)
    ctx.manifest("masks", {side: name for side, name in MASK_FILES.items()})
