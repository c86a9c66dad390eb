"""
Shared stage plumbing: run context, artifact names and loaders
"""
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from ...core.exceptions import ConfigError, StageError
from ...core.settings import get_settings
from ...schemas.camera import AugmentParams
from ...schemas.config import RunConfig
from ...schemas.planes import PlaneBank
from ...services.camera_geometry import augment_grid, compute_rc
from ...services.mixture_model import MixtureField, compose_depth, mixture_probs
from ...services.pipeline_io import (
    load_mixture_field,
    load_run_config,
    read_pfm,
    write_manifest,
)
from ...services.plane_bank import bank_from_json, depth_to_disparity, render_bank

CONFIG_FILE = "config.json"
SCENE_FILE = "scene.json"
BANK_FILE = "bank.json"
FIELD_DIR = "field"
LEFT_IMAGE = "left.pfm"
RIGHT_IMAGE = "right.pfm"
DEPTH_LEFT = "depth_left.pfm"
DEPTH_RIGHT = "depth_right.pfm"
MASK_FILES = {"RL_L": "mask_rl.pfm", "LR_L": "mask_lr.pfm", "R": "mask_r.pfm"}
DISTILL_LABEL = "disp_sd.pfm"
AUGMENT_FILE = "augment.json"
LEFT_AUGMENTED = "left_aug.pfm"


@dataclass
class StageContext:
    config: RunConfig
    in_dir: Path
    out_dir: Path
    seed: int
    threads: int
    fmt: str

    def path(self, name: str) -> Path:
        """Artifact written by an earlier stage; looked up in --in, then --out"""
        for directory in (self.in_dir, self.out_dir):
            candidate = directory / name
            if candidate.exists():
                return candidate
        raise StageError(f"missing artifact {name}; run the producing stage first", field=name)

    def has(self, name: str) -> bool:
        return (self.in_dir / name).exists() or (self.out_dir / name).exists()

    def manifest(self, stage: str, outputs: Optional[Dict[str, str]] = None) -> None:
        write_manifest(self.out_dir, self.config, stage, seed=self.seed, outputs=outputs)


def build_context(args) -> StageContext:
    out_dir = Path(args.out)
    in_dir = Path(args.in_dir) if getattr(args, "in_dir", None) else out_dir
    if args.config:
        config = load_run_config(args.config)
    elif (in_dir / CONFIG_FILE).exists():
        config = load_run_config(in_dir / CONFIG_FILE)
    else:
        raise ConfigError("no --config given and no config.json in the input directory", field="config")
    out_dir.mkdir(parents=True, exist_ok=True)
    return StageContext(
        config=config,
        in_dir=in_dir,
        out_dir=out_dir,
        seed=args.seed,
        threads=args.threads or get_settings().threads,
        fmt=args.format,
    )


def save_config(ctx: StageContext) -> None:
    data = ctx.config.model_dump(mode="json")
    (ctx.out_dir / CONFIG_FILE).write_text(json.dumps(data, indent=2))


def load_bank(ctx: StageContext) -> PlaneBank:
    return bank_from_json(ctx.path(BANK_FILE).read_text())


def load_field(ctx: StageContext) -> MixtureField:
    return load_mixture_field(ctx.path(FIELD_DIR))


def load_image(ctx: StageContext, name: str) -> np.ndarray:
    return read_pfm(ctx.path(name)).astype(np.float64)


def composed_left(ctx: StageContext, bank: PlaneBank, field: MixtureField):
    """Field probabilities and composed depth and disparity of the left view"""
    rendered = render_bank(bank, ctx.config.intrinsics, ctx.config.render)
    probs = mixture_probs(field, rendered.values, rendered.valid)
    depth = compose_depth(probs, rendered.values)
    disparity = depth_to_disparity(depth.depth, depth.valid, ctx.config.intrinsics, ctx.config.rig)
    return probs, depth, disparity


def write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True))


def save_augment(ctx: StageContext, aug: AugmentParams) -> str:
    """Resize-crop parameters with their R_C and grid coverage"""
    intr = ctx.config.intrinsics
    write_json(ctx.out_dir / AUGMENT_FILE, {
        **aug.model_dump(),
        "rc": compute_rc(intr, aug).tolist(),
        "out_of_range": augment_grid(aug, intr).out_of_range,
    })
    return AUGMENT_FILE
