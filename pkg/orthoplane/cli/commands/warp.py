"""
warp: synthesize the right view from the left image and mixture field
"""
from ...core.logging_config import get_logger
from ...services.pipeline_io import load_scene, write_image_png, write_mask_png, write_pfm
from ...services.scene_oracle import psnr, stable_reference_mask
from ...services.warp_engine import reference_plane_depths, synthesize_reference, warp_to_reference
from .common import LEFT_IMAGE, RIGHT_IMAGE, SCENE_FILE, StageContext, load_bank, load_field, load_image, write_json

logger = get_logger("cli.warp")


def synthesize_right(ctx: StageContext):
    cfg = ctx.config
    bank = load_bank(ctx)
    field = load_field(ctx)
    left = load_image(ctx, LEFT_IMAGE)
    pose = cfg.rig.target_to_reference()
    warped = warp_to_reference(left, field, bank.planes, pose, cfg.intrinsics, workers=ctx.threads)
    ref = reference_plane_depths(bank.planes, pose, cfg.intrinsics, cfg.render)
    return warped, synthesize_reference(warped.mixture, warped.images, ref.values, ref.valid)


def run(ctx: StageContext, args) -> None:
    _, synth = synthesize_right(ctx)
    write_pfm(ctx.out_dir / "synth_right.pfm", synth.image)
    write_image_png(ctx.out_dir / "synth_right.png", synth.image)
    write_mask_png(ctx.out_dir / "synth_valid.png", synth.valid)

    report = {"valid_fraction": float(synth.valid.mean())}
    if ctx.has(RIGHT_IMAGE):
        right = load_image(ctx, RIGHT_IMAGE)
        mask = synth.valid
        if ctx.has(SCENE_FILE):
            scene = load_scene(ctx.path(SCENE_FILE))
            mask = mask & stable_reference_mask(scene, ctx.config.intrinsics, ctx.config.rig)
        report["psnr_db"] = psnr(synth.image, right, mask)
        report["evaluated_pixels"] = int(mask.sum())
        logger.info(f"Synthesized right view: PSNR {report['psnr_db']:.2f} dB on {report['evaluated_pixels']} pixels")

    write_json(ctx.out_dir / "warp.json", report)
    ctx.manifest("warp", {"synth": "synth_right.pfm", "report": "warp.json"})
