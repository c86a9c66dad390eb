"""
OrthoPlane command line
One subcommand per pipeline stage; every stage writes into --out and records manifest.json
"""
import argparse
import sys
from pathlib import Path
from typing import List, Optional

from ..core.exceptions import OrthoPlaneError
from ..core.logging_config import get_logger, setup_logging
from ..services.occlusion_distill import Visibility
from .commands import distill, evaluate, loss, masks, planes, report, synth, warp
from .commands.common import build_context

logger = get_logger("cli")

# Stage name -> handler
STAGES = {
    "synth": synth.run,
    "planes": planes.run,
    "warp": warp.run,
    "loss": loss.run,
    "masks": masks.run,
    "distill": distill.run,
    "eval": evaluate.run,
}

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_INVALID = 2


def _common_options() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--config", help="run configuration JSON; defaults to config.json of --in")
    parent.add_argument("--seed", type=int, default=0)
    parent.add_argument("--out", required=True, help="output directory")
    parent.add_argument("--in", dest="in_dir", help="directory with earlier stage outputs (default: --out)")
    parent.add_argument("--threads", type=int, help="worker threads for per-plane work")
    parent.add_argument("--format", choices=("pfm", "png16"), default="pfm", help="disparity map format")
    parent.add_argument("--log-level", help="DEBUG, INFO, WARNING or ERROR")
    return parent


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="orthoplane", description="Orthogonal-plane depth pipeline")
    sub = parser.add_subparsers(dest="stage", required=True)
    common = [_common_options()]

    p = sub.add_parser("synth", parents=common, help="render a synthetic stereo scene and its ideal field")
    p.add_argument("--augment", action="store_true", help="also write a random resize-crop view drawn from scene.scale_range")
    p = sub.add_parser("planes", parents=common, help="build the plane bank")
    p.add_argument("--render", action="store_true", help="also write per-plane disparity maps")
    sub.add_parser("warp", parents=common, help="synthesize the right view")
    sub.add_parser("loss", parents=common, help="evaluate the training objective")
    p = sub.add_parser("masks", parents=common, help="occlusion masks")
    p.add_argument("--visibility", choices=[v.value for v in Visibility], default=Visibility.ORDERED.value)
    p = sub.add_parser("distill", parents=common, help="self-distillation label")
    p.add_argument("--ff", help="PFM disparity predicted on the mirrored input, flipped back")
    p.add_argument("--edge-blend", action="store_true", help="edge-ramped post-processing for disp_pp")
    sub.add_parser("eval", parents=common, help="depth and ground metrics")

    p = sub.add_parser("report", help="tabulate metrics of several runs")
    p.add_argument("--in", dest="in_dirs", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--log-level")
    return parser


def run_stage(args: argparse.Namespace) -> int:
    """Run one stage and map its outcome to an exit code"""
    try:
        if args.stage == "report":
            report.run(Path(args.out), args.in_dirs)
        else:
            ctx = build_context(args)
            STAGES[args.stage](ctx, args)
        return EXIT_OK
    except OrthoPlaneError as e:
        logger.error(f"❌ {args.stage} failed: {e.message}")
        print(f"[{args.stage}] {e.code}: {e.message}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as e:
        logger.exception(f"❌ Unexpected error in {args.stage}: {e}")
        return EXIT_UNEXPECTED


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    return run_stage(args)


if __name__ == "__main__":
    sys.exit(main())
