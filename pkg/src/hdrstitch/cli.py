"""Command-line interface.

Subcommands: stitch (full pipeline), imf (mapping estimation between two
images), synth (synthetic scene generation), fuse (exposure fusion only),
eval (fidelity metrics). Exit codes: 0 success, 2 invalid input,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import core, mef, metrics, pipeline, wha
from .core import InputError
from .detail import ConvergenceError, SolverConfig
from .pano import PanoImage


def _cmd_stitch(args: argparse.Namespace) -> int:
    viewset = core.load_viewset(args.input)
    solver = SolverConfig(
        lam=args.lam,
        alpha=args.alpha,
        cg_tolerance=args.cg_tol,
        cg_max_iters=args.cg_max_iters,
        nu=args.nu,
    )
    cfg = pipeline.StitchConfig(
        solver=solver,
        mef_depth=args.mef_depth,
        refined_dir=args.refined_dir,
        emit_dir=args.emit_intermediates,
    )
    result = pipeline.stitch(viewset, cfg)
    core.save_image(result.final, args.output)
    if args.dump_detail is not None:
        core.save_image(
            pipeline.detail_visualization(result.detail), args.dump_detail
        )
    for stage, seconds in result.timings.items():
        logging.getLogger(__name__).info("stage %-9s %.3fs", stage, seconds)
    return 0


def _cmd_imf(args: argparse.Namespace) -> int:
    ref = core.load_image(args.ref)
    tgt = core.load_image(args.tgt)
    wha.save_imf(wha.estimate_imf_images(ref, tgt), args.out)
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    layout = core.PanoLayout(
        view_width=args.view_width,
        view_height=args.view_height,
        overlap12_width=args.overlap12,
        overlap23_width=args.overlap23,
        exposure_ratios=(1.0, 2.0 ** args.ev_gap, 2.0 ** (2.0 * args.ev_gap)),
    )
    viewset, gt_panos = core.synthesize_test_scene(args.seed, layout)
    core.save_scene(args.out, viewset, gt_panos)
    return 0


def _cmd_fuse(args: argparse.Namespace) -> int:
    images = [core.load_image(path) for path in args.images]
    shape = images[0].shape
    for path, img in zip(args.images, images):
        if img.shape != shape:
            raise InputError(f"{path}: shape {img.shape} differs from {shape}")
    width = shape[1]
    if width < 4:
        raise InputError(f"images must be at least 4 pixels wide, got {width}")
    # Plain fusion of co-registered images; the layout is only carried
    # along for the panorama container, so any split with
    # 3*view_width - overlaps == width works.
    view_width = -(-(width + 2) // 3)
    spare = 3 * view_width - width
    layout = core.PanoLayout(
        view_width=view_width,
        view_height=shape[0],
        overlap12_width=spare // 2,
        overlap23_width=spare - spare // 2,
    )
    panos = [PanoImage(data=core.to_float(img), layout=layout) for img in images]
    fused = mef.fuse(panos, depth=args.depth)
    core.save_image(core.quantize(fused.data), args.out)
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    pred = core.load_image(args.pred)
    gt = core.load_image(args.gt)
    names = tuple(name.strip() for name in args.metrics.split(",") if name.strip())
    report = metrics.evaluate(pred, gt, names, per_channel=args.per_channel)
    for line in report.lines():
        print(line)
    return 0


def _fuse_layout_guard(args) -> None:
    if len(args.images) != 3:
        raise InputError(f"fuse expects exactly 3 images, got {len(args.images)}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hdrstitch",
        description="Panoramic stitching of three differently exposed views.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log stage timings")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stitch", help="run the full pipeline on a scene directory")
    p.add_argument("--input", required=True, type=Path, help="scene directory")
    p.add_argument("--output", required=True, type=Path, help="output image file")
    p.add_argument("--refined-dir", type=Path, default=None,
                   help="directory of refined z<i>_to_<j> renditions")
    p.add_argument("--nu", type=float, default=0.0,
                   help="blend back toward plain fusion (0..1)")
    p.add_argument("--lambda", dest="lam", type=float, default=0.125,
                   help="detail injection strength (0 disables)")
    p.add_argument("--alpha", type=float, default=1.125,
                   help="guidance gradient amplification")
    p.add_argument("--mef-depth", type=int, default=None, help="fusion pyramid depth")
    p.add_argument("--cg-tol", type=float, default=1e-6,
                   help="solver relative-residual tolerance")
    p.add_argument("--cg-max-iters", type=int, default=2000,
                   help="solver iteration cap")
    p.add_argument("--emit-intermediates", type=Path, default=None, metavar="DIR",
                   help="write renditions, panoramas, fusion, and detail map")
    p.add_argument("--dump-detail", type=Path, default=None, metavar="FILE",
                   help="write the rescaled detail map")
    p.set_defaults(func=_cmd_stitch)

    p = sub.add_parser("imf", help="estimate the intensity mapping between two images")
    p.add_argument("--ref", required=True, type=Path, help="source image")
    p.add_argument("--tgt", required=True, type=Path, help="target image")
    p.add_argument("--out", required=True, type=Path, help="mapping table file")
    p.set_defaults(func=_cmd_imf)

    p = sub.add_parser("synth", help="generate a deterministic synthetic scene")
    p.add_argument("--seed", required=True, type=int)
    p.add_argument("--out", required=True, type=Path, help="scene directory to create")
    p.add_argument("--view-width", type=int, default=640)
    p.add_argument("--view-height", type=int, default=480)
    p.add_argument("--overlap12", type=int, default=200)
    p.add_argument("--overlap23", type=int, default=200)
    p.add_argument("--ev-gap", type=float, default=1.0,
                   help="exposure step between views in stops")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("fuse", help="exposure-fuse three co-registered images")
    p.add_argument("images", nargs="+", type=Path, help="exactly three input images")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--depth", type=int, default=None, help="fusion pyramid depth")
    p.set_defaults(func=_cmd_fuse)

    p = sub.add_parser("eval", help="compare a result against ground truth")
    p.add_argument("--pred", required=True, type=Path)
    p.add_argument("--gt", required=True, type=Path)
    p.add_argument("--metrics", default="psnr,ssim",
                   help="comma-separated: psnr, ssim")
    p.add_argument("--per-channel", action="store_true",
                   help="also report per-channel PSNR")
    p.set_defaults(func=_cmd_eval)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(message)s",
    )
    try:
        if args.command == "fuse":
            _fuse_layout_guard(args)
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ConvergenceError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
