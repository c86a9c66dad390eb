"""
planes: build the orthogonal plane bank and optionally render its disparities
"""
from ...core.logging_config import get_logger
from ...services.pipeline_io import write_disparity
from ...services.plane_bank import bank_to_json, build_bank, depth_to_disparity, render_augmented_bank, render_bank
from .common import BANK_FILE, StageContext, save_augment, save_config

logger = get_logger("cli.planes")


def run(ctx: StageContext, args) -> None:
    cfg = ctx.config
    intr = cfg.intrinsics
    bank = build_bank(cfg.planes, cfg.rig, intr)
    save_config(ctx)
    (ctx.out_dir / BANK_FILE).write_text(bank_to_json(bank))
    outputs = {"bank": BANK_FILE}

    aug = cfg.augment
    augmented = not aug.is_identity(intr)
    if augmented:
        outputs["augment"] = save_augment(ctx, aug)
        logger.info(f"Planes rectified for resize-crop fs={aug.fs}, p=({aug.px}, {aug.py})")

    if args.render:
        plane_dir = ctx.out_dir / "planes"
        plane_dir.mkdir(exist_ok=True)
        if augmented:
            rendered = render_augmented_bank(bank, intr, aug, cfg.render)
        else:
            rendered = render_bank(bank, intr, cfg.render)
        disparity = depth_to_disparity(rendered.values, rendered.valid, intr, cfg.rig)
        for i in range(len(bank)):
            write_disparity(plane_dir / f"disp_{i:03d}", disparity[..., i], ctx.fmt, rendered.valid[..., i])
        outputs["planes"] = "planes"

    logger.info(f"Plane bank: {bank.n_vertical} vertical + {bank.n_ground} ground")
    ctx.manifest("planes", outputs)
