"""Command line: prepare training data, train, and run inference."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import data, infer, train


def _cmd_prepare(args: argparse.Namespace) -> int:
    out = Path(args.out)
    for k in range(args.scenes):
        data.synthesize_training_scene(
            seed=args.seed + k,
            scene_dir=out / f"scene_{k:03d}",
            emit_dir=out / f"emit_{k:03d}",
            view_size=(args.view_height, args.view_width),
            overlaps=(args.overlap12, args.overlap23),
            noise_sigma=args.noise_sigma,
            tone_gamma=args.tone_gamma,
        )
    return 0


def _discover_triples(data_dir: Path) -> list:
    triples = []
    for scene_dir in sorted(data_dir.glob("scene_*")):
        emit_dir = data_dir / scene_dir.name.replace("scene_", "emit_")
        if not emit_dir.is_dir():
            raise FileNotFoundError(f"no emitted renditions for {scene_dir}")
        triples.extend(data.load_triples(scene_dir, emit_dir))
    if not triples:
        raise ValueError(f"no scene_*/emit_* pairs under {data_dir}")
    return triples


def _cmd_train(args: argparse.Namespace) -> int:
    triples = _discover_triples(Path(args.data))
    if args.limit is not None:
        triples = triples[: args.limit]
    cfg = train.TrainConfig(
        color_weight=args.color_weight,
        feature_weight=args.feature_weight,
        learning_rate=args.learning_rate,
        batch_size=args.batch_size,
        iterations=args.iterations,
        crop=args.crop,
        seed=args.seed,
        feature_source=args.feature_source,
    )
    model, history = train.train(triples, cfg)
    train.save_weights(model, args.out)
    first, last = history[0]["total"], history[-1]["total"]
    print(f"trained {len(history)} iterations on {len(triples)} triples, "
          f"loss {first:.1f} -> {last:.1f}, weights -> {args.out}")
    return 0


def _cmd_infer(args: argparse.Namespace) -> int:
    model = train.load_weights(args.weights)
    written = infer.infer(args.scene, args.renditions, model, args.out)
    print(f"wrote {len(written)} refined renditions to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hdrrefine",
        description="Learned refinement of exposure-mapped renditions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="render training scenes via the stitcher CLI")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--scenes", type=int, default=2)
    p.add_argument("--seed", type=int, default=11)
    p.add_argument("--view-width", type=int, default=640)
    p.add_argument("--view-height", type=int, default=480)
    p.add_argument("--overlap12", type=int, default=200)
    p.add_argument("--overlap23", type=int, default=200)
    p.add_argument("--noise-sigma", type=float, default=2.0,
                   help="sensor noise added to the views (0 disables)")
    p.add_argument("--tone-gamma", type=float, default=1.15,
                   help="tone curve applied to the views (1 disables)")
    p.set_defaults(func=_cmd_prepare)

    p = sub.add_parser("train", help="fit the refiner on prepared data")
    p.add_argument("--data", required=True, type=Path,
                   help="directory of scene_*/emit_* pairs from prepare")
    p.add_argument("--out", required=True, type=Path, help="weights file")
    p.add_argument("--limit", type=int, default=None,
                   help="use only the first N triples")
    p.add_argument("--iterations", type=int, default=200)
    p.add_argument("--learning-rate", type=float, default=1e-5)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--crop", type=int, default=128)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--color-weight", type=float, default=0.01)
    p.add_argument("--feature-weight", type=float, default=0.01)
    p.add_argument("--feature-source", default="auto",
                   choices=("auto", "torchvision", "fallback"))
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("infer", help="write refined renditions for one scene")
    p.add_argument("--scene", required=True, type=Path, help="scene directory")
    p.add_argument("--renditions", required=True, type=Path,
                   help="directory of emitted physics renditions")
    p.add_argument("--weights", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=_cmd_infer)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except train.TrainingDivergedError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (ValueError, FileNotFoundError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
