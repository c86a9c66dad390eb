"""
eval: depth benchmark errors, MMP and ground extraction quality of the composed left depth
"""
import numpy as np

from ...core.logging_config import get_logger
from ...services.eval_metrics import depth_metrics, ground_metrics
from ...services.mixture_model import mmp
from ...services.pipeline_io import load_scene
from ...services.scene_oracle import render_view, scene_plane_indices
from .common import DEPTH_LEFT, SCENE_FILE, StageContext, composed_left, load_bank, load_field, load_image, write_json

logger = get_logger("cli.eval")


def run(ctx: StageContext, args) -> None:
    cfg = ctx.config
    bank = load_bank(ctx)
    field = load_field(ctx)
    probs, depth, disp = composed_left(ctx, bank, field)
    gt = load_image(ctx, DEPTH_LEFT)

    valid = depth.valid & np.isfinite(gt) & (gt > 0)
    metrics = depth_metrics(
        depth.depth, gt, valid,
        clip_max=cfg.eval.clip_max, clip_min=cfg.eval.clip_min, crop=cfg.eval.crop,
    )
    report = {"depth": metrics.model_dump(), "mmp": mmp(probs)}

    if ctx.has(SCENE_FILE) and bank.n_ground:
        scene = load_scene(ctx.path(SCENE_FILE))
        ground = set(bank.ground_indices())
        is_ground = np.asarray([i in ground for i in scene_plane_indices(scene, bank)])
        patch_id = render_view(scene, cfg.intrinsics).patch_id
        gt_ground = (patch_id >= 0) & is_ground[np.clip(patch_id, 0, len(is_ground) - 1)]
        report["ground"] = ground_metrics(probs, bank, gt_ground, disp).model_dump()

    write_json(ctx.out_dir / "metrics.json", report)
    logger.info(f"✅ abs_rel {metrics.abs_rel:.5f}, a1 {metrics.a1:.4f}, mmp {report['mmp']:.4f}")
    ctx.manifest("eval", {"metrics": "metrics.json"})
