"""
loss: training objective terms of the current field on the stereo pair
"""
from dataclasses import asdict

import numpy as np

from ...core.logging_config import get_logger
from ...services.loss_suite import (
    LossParts,
    combine_losses,
    distill_l1,
    mll_loss,
    perceptual_loss,
    smoothness_loss,
)
from ...services.pipeline_io import read_pfm
from .common import (
    DISTILL_LABEL,
    LEFT_IMAGE,
    MASK_FILES,
    RIGHT_IMAGE,
    StageContext,
    composed_left,
    load_bank,
    load_field,
    load_image,
    write_json,
)
from .warp import synthesize_right

logger = get_logger("cli.loss")


def run(ctx: StageContext, args) -> None:
    cfg = ctx.config
    warped, synth = synthesize_right(ctx)
    right = load_image(ctx, RIGHT_IMAGE)
    left = load_image(ctx, LEFT_IMAGE)
    _, depth, disp = composed_left(ctx, load_bank(ctx), load_field(ctx))

    distill = ctx.has(DISTILL_LABEL) and ctx.has(MASK_FILES["R"])
    mask = None
    if distill:
        mask = np.clip(read_pfm(ctx.path(MASK_FILES["R"])).astype(np.float64), 0.0, 1.0)
        logger.info("Distillation artifacts found; masking the reconstruction terms with M^R")

    parts = LossParts(
        mll=mll_loss(right, warped.images, warped.mixture, mask).loss,
        perceptual=perceptual_loss(right, synth.image, mask=mask, synth_valid=synth.valid),
        smoothness=smoothness_loss(disp, left),
        distill=distill_l1(disp, read_pfm(ctx.path(DISTILL_LABEL)), depth.valid) if distill else 0.0,
    )
    mode = "distill" if distill else "stage1"
    total = combine_losses(parts, cfg.losses, mode)

    report = {"mode": mode, "total": total, **asdict(parts)}
    write_json(ctx.out_dir / "loss.json", report)
    logger.info(f"✅ {mode} loss {total:.6f}")
    ctx.manifest("loss", {"report": "loss.json"})
