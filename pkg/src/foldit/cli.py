"""``foldit`` command line: generate-data, train, infer, eval.

Exit codes: 0 success, 2 bad or missing inputs, 1 runtime failure.
"""

import argparse
import dataclasses
import json
import logging
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np
import torch

from . import __version__
from .config import ConfigError
from .data import DatasetError, read_mask, read_rgb, to_uint8, write_mask, write_png
from .evaluate import evaluate_folds
from .inference import DEFAULT_TAU, OverlaySpec, extract_fold_mask, overlay, translate_sequence
from .metrics import consistency, evaluate_sequence, write_reports
from .networks import LEGS
from .synth import SynthConfig
from .trainer import CheckpointError, TrainConfig, load_generator, train

log = logging.getLogger("foldit")


class InputError(Exception):
    """Missing or malformed user input (exit code 2)."""


def _output_root(path):
    root = os.environ.get("FOLDIT_OUTPUT_ROOT")
    path = Path(path)
    return Path(root) / path if root and not path.is_absolute() else path


def write_manifest(out_dir, command, argv, config=None, extra=None):
    manifest = {
        "command": command,
        "argv": list(argv),
        "config": config,
        "versions": {
            "foldit": __version__,
            "torch": torch.__version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
    }
    if extra:
        manifest.update(extra)
    Path(out_dir).mkdir(parents=True, exist_ok=True)
    path = Path(out_dir) / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _args_dict(args):
    return {k: v for k, v in vars(args).items() if k != "func"}


def _png_files(directory):
    directory = Path(directory)
    if not directory.is_dir():
        raise InputError(f"input directory {directory} does not exist")
    files = sorted(directory.glob("*.png"))
    if not files:
        raise InputError(f"no PNG frames in {directory}")
    return files


def cmd_generate(args, argv):
    from .data import generate_toy_tridomain

    overrides = {
        "seed": args.seed, "num_videos": args.videos, "frames_per_video": args.frames, "image_size": args.size,
        "texture_id": args.texture, "lighting_jitter": args.jitter, "test_videos": args.test_videos,
        "num_ridges_range": tuple(args.ridges) if args.ridges else None,
    }
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if args.config:
        cfg = SynthConfig.from_file(args.config, **overrides)
    else:
        cfg = SynthConfig(**overrides)
    out = _output_root(args.out)
    generate_toy_tridomain(cfg, out, texture_ids=args.extra_texture)
    write_manifest(out, "generate-data", argv, dataclasses.asdict(cfg))
    print(f"wrote synthetic dataset to {out}")


def cmd_train(args, argv):
    overrides = {
        "dataset": args.dataset, "out_dir": args.out, "epochs": args.epochs, "batch_size": args.batch_size,
        "learning_rate": args.lr, "seed": args.seed, "image_size": args.image_size, "gen_width": args.gen_width,
        "gen_blocks": args.gen_blocks, "disc_width": args.disc_width, "pool_size": args.pool_size,
        "adv_mode": args.adv_mode,
    }
    overrides = {k: v for k, v in overrides.items() if v is not None}
    cfg = TrainConfig.from_file(args.config, **overrides) if args.config else TrainConfig(**overrides)
    if not cfg.dataset:
        raise InputError("no dataset given (set `dataset` in the config or pass --dataset)")
    cfg = cfg.replace(out_dir=str(_output_root(cfg.out_dir)))
    t0 = time.perf_counter()
    state = train(cfg, resume=args.resume)
    elapsed = time.perf_counter() - t0
    out = Path(cfg.out_dir)
    from .plotting import plot_loss_log

    plot_loss_log(out / "train_log.csv", out / "loss_curves.png")
    write_manifest(out, "train", argv, dataclasses.asdict(cfg), {"steps": state.step, "wall_seconds": round(elapsed, 1)})
    print(f"trained {state.epoch} epochs ({state.step} steps) -> {out / 'checkpoints'}")


def cmd_infer(args, argv):
    files = _png_files(args.input)
    try:
        frames = [read_rgb(f) for f in files]
    except DatasetError as exc:
        raise InputError(str(exc)) from exc
    generator = load_generator(args.checkpoint, args.leg)
    out = _output_root(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    outputs = translate_sequence(generator, frames)
    per_frame = (time.perf_counter() - t0) / len(frames)
    want_masks = args.overlay or args.masks
    if want_masks:
        (out / "masks").mkdir(exist_ok=True)
    if args.overlay:
        (out / "overlays").mkdir(exist_ok=True)
    spec = OverlaySpec(alpha=args.alpha)
    preview = [[], [], []]
    for f, frame, result in zip(files, frames, outputs):
        result_u8 = to_uint8(result)
        write_png(out / f.name, result_u8)
        if want_masks:
            mask = extract_fold_mask(result_u8, args.tau)
            write_mask(out / "masks" / f.name, mask)
        if args.overlay:
            blended = to_uint8(overlay(frame, mask, spec))
            write_png(out / "overlays" / f.name, blended)
            if len(preview[0]) < 6:
                preview[0].append(to_uint8(frame))
                preview[1].append(result_u8)
                preview[2].append(blended)
    if args.overlay and preview[0]:
        from .plotting import save_frame_strip

        save_frame_strip(preview, out / "preview.png", titles=["input", f"{args.leg} output", "overlay"])
    write_manifest(out, "infer", argv, _args_dict(args), {"seconds_per_frame": per_frame, "frames": len(files)})
    print(f"translated {len(files)} frames ({per_frame:.4f} s/frame) -> {out}")


def _read_masks(directory):
    files = _png_files(directory)
    return [f.name for f in files], [read_mask(f) for f in files]


def cmd_eval(args, argv):
    if args.pred:
        if not args.ref:
            raise InputError("--pred requires --ref")
        names, pred = _read_masks(args.pred)
        ref_names, ref = _read_masks(args.ref)
        if names != ref_names:
            raise InputError(f"prediction/reference mask sets differ ({len(names)} vs {len(ref_names)} frames)")
        reports = {"prediction": evaluate_sequence(pred, ref, names=names)}
        if args.pred2:
            names2, pred2 = _read_masks(args.pred2)
            if names2 != names:
                raise InputError(f"--pred2 mask set differs from --pred ({len(names2)} vs {len(names)} frames)")
            reports["prediction2"] = evaluate_sequence(pred2, ref, names=names)
            reports["consistency"] = consistency(pred, pred2, names=names)
    elif args.checkpoint and args.dataset:
        generator = load_generator(args.checkpoint, args.leg)
        a_dirs = tuple(args.a_dir or ["domainA"])
        if len(a_dirs) > 2:
            raise InputError("at most two --a-dir renderings")
        try:
            reports = evaluate_folds(generator, args.dataset, args.split, a_dirs, args.tau)
        except DatasetError as exc:
            raise InputError(str(exc)) from exc
    else:
        raise InputError("give either --pred/--ref mask directories or --checkpoint with --dataset")
    out = _output_root(args.out)
    write_reports(reports, out)
    from .plotting import plot_metric_reports

    plot_metric_reports(list(reports.values()), out / "metrics.png")
    write_manifest(out, "eval", argv, _args_dict(args),
                   {"summary": {k: r.summary() for k, r in reports.items()}})
    for key, r in reports.items():
        print(f"{key}: dice {r.dice_mean:.3f}±{r.dice_std:.3f}  iou {r.iou_mean:.3f}±{r.iou_std:.3f}  (n={r.frame_count})")


def build_parser():
    parser = argparse.ArgumentParser(prog="foldit", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate-data", help="render a synthetic tri-domain dataset")
    gen.add_argument("--config", help="flat key=value SynthConfig file")
    gen.add_argument("--out", required=True)
    gen.add_argument("--seed", type=int)
    gen.add_argument("--videos", type=int)
    gen.add_argument("--frames", type=int)
    gen.add_argument("--size", type=int)
    gen.add_argument("--texture")
    gen.add_argument("--jitter", type=float)
    gen.add_argument("--test-videos", type=int)
    gen.add_argument("--ridges", type=int, nargs=2, metavar=("MIN", "MAX"))
    gen.add_argument("--extra-texture", action="append", default=[],
                     help="also render the test split's A frames with this texture (domainA_<id>)")
    gen.set_defaults(func=cmd_generate)

    tr = sub.add_parser("train", help="train the four generator/discriminator pairs")
    tr.add_argument("--config", help="flat key=value TrainConfig file")
    tr.add_argument("--dataset")
    tr.add_argument("--out")
    tr.add_argument("--epochs", type=int)
    tr.add_argument("--batch-size", type=int)
    tr.add_argument("--lr", type=float)
    tr.add_argument("--seed", type=int)
    tr.add_argument("--image-size", type=int)
    tr.add_argument("--gen-width", type=int)
    tr.add_argument("--gen-blocks", type=int)
    tr.add_argument("--disc-width", type=int)
    tr.add_argument("--pool-size", type=int)
    tr.add_argument("--adv-mode", choices=["least_squares", "log"])
    tr.add_argument("--resume", action="store_true", help="continue from the run's latest checkpoint")
    tr.set_defaults(func=cmd_train)

    inf = sub.add_parser("infer", help="translate a directory of frames")
    inf.add_argument("--checkpoint", required=True)
    inf.add_argument("--leg", required=True, choices=LEGS)
    inf.add_argument("--in", dest="input", required=True)
    inf.add_argument("--out", required=True)
    inf.add_argument("--overlay", action="store_true", help="write blue fold overlays on the input frames")
    inf.add_argument("--masks", action="store_true", help="write extracted fold masks")
    inf.add_argument("--tau", type=int, default=DEFAULT_TAU)
    inf.add_argument("--alpha", type=float, default=0.5)
    inf.set_defaults(func=cmd_infer)

    ev = sub.add_parser("eval", help="Dice/IoU of fold masks")
    ev.add_argument("--out", required=True)
    ev.add_argument("--pred", help="predicted mask directory")
    ev.add_argument("--ref", help="reference mask directory")
    ev.add_argument("--pred2", help="second prediction set (other texture) for consistency")
    ev.add_argument("--checkpoint", help="evaluate a checkpoint (A->B leg by default) instead of mask directories")
    ev.add_argument("--dataset")
    ev.add_argument("--leg", default="AB", choices=LEGS, help="generator whose output the masks are read from")
    ev.add_argument("--split", default="test", choices=["train", "test"])
    ev.add_argument("--a-dir", action="append", help="A-domain directory name (repeat for a second texture)")
    ev.add_argument("--tau", type=int, default=DEFAULT_TAU)
    ev.set_defaults(func=cmd_eval)
    return parser


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args, argv)
    except (InputError, ConfigError, DatasetError, CheckpointError, FileNotFoundError, ValueError) as exc:
        print(f"foldit: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"foldit: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
