"""
distill: self-distillation label from the composed disparity and occlusion masks
"""
import numpy as np

from ...core.logging_config import get_logger
from ...services.occlusion_distill import distill_label, edge_blend_post_process, post_process
from ...services.pipeline_io import read_pfm, write_disparity, write_pfm
from .common import DISTILL_LABEL, MASK_FILES, StageContext, composed_left, load_bank, load_field

logger = get_logger("cli.distill")


def run(ctx: StageContext, args) -> None:
    bank = load_bank(ctx)
    field = load_field(ctx)
    _, depth, disp = composed_left(ctx, bank, field)

    if args.ff:
        disp_ff = read_pfm(args.ff).astype(np.float64)
    else:
        # the oracle field predicts the mirrored input exactly, so d_ff equals d
        logger.info("No flipped prediction given; using the composed disparity")
        disp_ff = disp.copy()

    m_rl = read_pfm(ctx.path(MASK_FILES["RL_L"])).astype(np.float64)
    m_lr = read_pfm(ctx.path(MASK_FILES["LR_L"])).astype(np.float64)
    label = distill_label(disp, disp_ff, np.clip(m_rl, 0, 1), np.clip(m_lr, 0, 1))

    write_pfm(ctx.out_dir / DISTILL_LABEL, np.where(depth.valid, label, 0.0))
    label_path = write_disparity(ctx.out_dir / "disp_sd", label, ctx.fmt, depth.valid)
    pp = edge_blend_post_process(disp, disp_ff) if args.edge_blend else post_process(disp, disp_ff)
    pp_path = write_disparity(ctx.out_dir / "disp_pp", pp, ctx.fmt, depth.valid)

    logger.info(f"Distillation label written for {int(depth.valid.sum())} valid pixels")
    ctx.manifest("distill", {"label": label_path.name, "post_processed": pp_path.name})
