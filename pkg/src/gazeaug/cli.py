"""Command-line interface.

Subcommands cover the whole pipeline: gaze2map, saliency, augment, synth,
pretrain, probe, sweep. Exit codes: 0 success, 1 runtime failure,
2 usage/config error. All randomness flows from one root seed
(--seed > FC_SEED env > config file), and repeated invocations with the
same seed and config produce byte-identical artifacts.
"""

import argparse
import csv
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .augment import chain_to_json, generate_pair
from .config import RunConfig, load_config
from .encoder import EncoderState
from .errors import ConfigError, GazeAugError, RejectionFailure
from .formats import read_checkpoint, read_pgm, read_smap, write_checkpoint, write_pgm, write_smap
from .gaze import filter_gaze, parse_gaze_logs, render_gaze_map
from .rng import derive_rng
from .saliency import SaliencySource, saliency_for
from .sweep import SweepGrid, run_sweep
from .synth import dump_dataset, gen_dataset, load_dataset
from .train import TrainConfig, linear_probe, pretrain


def _resolve_config(args) -> RunConfig:
    config = load_config(args.config) if args.config else RunConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    elif os.environ.get("FC_SEED"):
        try:
            overrides["seed"] = int(os.environ["FC_SEED"])
        except ValueError as exc:
            raise ConfigError(f"FC_SEED is not an integer: {exc}") from exc
    if getattr(args, "workers", None):
        overrides["workers"] = args.workers
    if getattr(args, "mode", None):
        overrides["mode"] = args.mode
    return dataclasses.replace(config, **overrides) if overrides else config


def _replace_if(obj, **maybe):
    updates = {k: v for k, v in maybe.items() if v is not None}
    return dataclasses.replace(obj, **updates) if updates else obj


def _require_file(path, what):
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"{what} not found: {p}")
    return p


def _image_paths(images_arg):
    path = Path(images_arg)
    if path.is_dir():
        found = sorted(path.glob("*.pgm"))
        if not found:
            raise FileNotFoundError(f"no .pgm images in directory: {path}")
        return found
    return [_require_file(path, "image")]


# ---------------------------------------------------------------------------
# subcommands

def cmd_gaze2map(args) -> int:
    config = _resolve_config(args)
    log_path = _require_file(args.log, "gaze log")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    width = args.width or args.size
    height = args.height or args.size
    kernel = _replace_if(config.kernel, size_px=args.kernel_size, sigma_px=args.sigma)
    logs = parse_gaze_logs(log_path.read_bytes())
    for log in logs:
        saliency = render_gaze_map(filter_gaze(log), width, height, kernel)
        write_smap(out_dir / f"{log.image_id}.smap", saliency)
    print(f"processed {len(logs)} image(s) -> {out_dir}")
    return 0


def cmd_saliency(args) -> int:
    config = _resolve_config(args)
    opts = config.saliency
    kind = args.kind or opts.kind
    root = args.root or config.paths.saliency_root
    source = SaliencySource(kind=kind, root=root, working_px=opts.working_px,
                            smooth_sigma=opts.smooth_sigma)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = _image_paths(args.images)
    for path in paths:
        image = read_pgm(path)
        saliency = saliency_for(source, path.stem, image)
        write_smap(out_dir / f"{path.stem}.smap", saliency)
    print(f"wrote {len(paths)} saliency map(s) -> {out_dir}")
    return 0


def _load_saliency_for_image(args, config, image_path, image):
    if args.map:
        return read_smap(_require_file(args.map, "saliency map"))
    kind = args.kind or config.saliency.kind
    root = args.root or config.paths.saliency_root
    source = SaliencySource(kind=kind, root=root, working_px=config.saliency.working_px,
                            smooth_sigma=config.saliency.smooth_sigma)
    return saliency_for(source, image_path.stem, image)


def cmd_augment(args) -> int:
    config = _resolve_config(args)
    image_path = _require_file(args.image, "image")
    image = read_pgm(image_path)
    saliency = _load_saliency_for_image(args, config, image_path, image)
    if saliency.shape != image.shape:
        raise GazeAugError(f"saliency {saliency.shape} does not match image {image.shape}")
    spec = _replace_if(config.augment, cutout_px=args.cutout_px, crop_zoom=args.crop_zoom)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    image_id = image_path.stem

    def make_pair(k):
        rng = derive_rng(config.seed, image_id, k)
        return generate_pair(image, saliency, config.mode, spec, config.focus, rng,
                             seed=config.seed, compute_ious=True)

    if config.workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            pairs = list(pool.map(make_pair, range(args.pairs)))
    else:
        pairs = [make_pair(k) for k in range(args.pairs)]

    for k, pair in enumerate(pairs):
        stem = f"{image_id}_pair{k:04d}"
        write_pgm(out_dir / f"{stem}_v1.pgm", pair.v1)
        write_pgm(out_dir / f"{stem}_v2.pgm", pair.v2)
        sidecar = {
            "seed": config.seed,
            "pair_index": k,
            "mode": pair.mode,
            "attempts": pair.attempts,
            "iou_v1": pair.iou_v1,
            "iou_v2": pair.iou_v2,
            "transform_chain": {
                "v1": chain_to_json(pair.chain1),
                "v2": chain_to_json(pair.chain2),
            },
        }
        (out_dir / f"{stem}.json").write_text(
            json.dumps(sidecar, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    print(f"wrote {args.pairs} pair(s) -> {out_dir}")
    return 0


def cmd_synth(args) -> int:
    config = _resolve_config(args)
    spec = _replace_if(
        config.synth,
        image_px=args.size,
        n_classes=args.classes,
        lesion_area_fraction=args.lesion_fraction,
        lesion_contrast=args.contrast,
    )
    samples = gen_dataset(spec, args.per_class, config.seed)
    dump_dataset(samples, args.out)
    print(f"wrote {len(samples)} samples ({spec.n_classes} classes) -> {args.out}")
    return 0


def _train_config(args, config) -> TrainConfig:
    return _replace_if(
        config.train,
        mode=args.objective,
        epochs=args.epochs,
        batch_size=args.batch_size,
        base_lr=args.lr,
        input_px=args.input_px,
        seed=config.seed,
    )


def cmd_pretrain(args) -> int:
    config = _resolve_config(args)
    dataset = load_dataset(args.data)
    train_cfg = _train_config(args, config)
    spec = _replace_if(config.augment, cutout_px=args.cutout_px, crop_zoom=args.crop_zoom)
    result = pretrain(train_cfg, dataset, config.mode, spec=spec, focus=config.focus,
                      workers=config.workers)
    ckpt_config = {
        "arch": result.state.arch_config(),
        "train": dataclasses.asdict(train_cfg),
        "augment": dataclasses.asdict(spec),
        "focus": dataclasses.asdict(config.focus),
        "aug_mode": config.mode,
    }
    write_checkpoint(args.out, ckpt_config, result.state.params)
    if args.log:
        with open(args.log, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "loss", "lr", "reject_rate"])
            for row in result.log:
                writer.writerow([row["epoch"], repr(row["loss"]), repr(row["lr"]),
                                 repr(row["reject_rate"])])
    final_loss = result.log[-1]["loss"] if result.log else float("nan")
    print(f"pretrained {train_cfg.epochs} epoch(s), final loss {final_loss:.6f} -> {args.out}")
    return 0


def _state_from_checkpoint(path) -> EncoderState:
    ckpt_config, tensors = read_checkpoint(_require_file(path, "checkpoint"))
    arch = ckpt_config["arch"]
    return EncoderState(
        input_px=arch["input_px"],
        channels=tuple(arch["channels"]),
        embed_dim=arch["embed_dim"],
        predictor_hidden=arch["predictor_hidden"],
        params=tensors,
    )


def cmd_probe(args) -> int:
    config = _resolve_config(args)
    state = _state_from_checkpoint(args.checkpoint)
    train_samples = load_dataset(args.data)
    test_samples = load_dataset(args.test_data)
    result = linear_probe(state, train_samples, test_samples,
                          label_fraction=args.label_fraction, seed=config.seed)
    print(f"ACC={result.accuracy:.4f},MAE={result.mae:.4f}")
    if args.out:
        payload = {
            "accuracy": result.accuracy,
            "mae": result.mae,
            "label_fraction": args.label_fraction,
            "per_class": result.per_class.tolist(),
        }
        Path(args.out).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                                  encoding="utf-8")
    return 0


def cmd_sweep(args) -> int:
    config = _resolve_config(args)
    values = [float(v) if args.axis == "crop_zoom" else int(v)
              for v in args.values.split(",")]
    fractions = [float(f) for f in args.label_fractions.split(",")]
    grid = SweepGrid(
        axis=args.axis,
        values=tuple(values),
        spec=config.augment,
        label_fractions=tuple(fractions),
        mode=config.mode,
        overlap_pairs=args.overlap_pairs,
    )
    train_samples = load_dataset(args.data)
    test_samples = load_dataset(args.test_data)
    train_cfg = _train_config(args, config)
    result = run_sweep(grid, train_cfg, train_samples, test_samples,
                       focus=config.focus, seed=config.seed, workers=config.workers)
    result.write_csv(args.out)
    print(f"wrote {len(result.rows)} sweep row(s) -> {args.out}")
    return 0


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gazeaug",
        description="Saliency-gated augmentation pipeline: gaze maps, gated view pairs, "
                    "synthetic data, contrastive pretraining, probing, strength sweeps.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, mode_flag=False):
        p.add_argument("--config", help="JSON config file (strict schema)")
        p.add_argument("--seed", type=int, help="root seed (overrides FC_SEED and config)")
        p.add_argument("--workers", type=int, help="worker threads for pair generation")
        if mode_flag:
            p.add_argument("--mode", choices=("default", "searched", "focus"),
                           help="augmentation mode")

    p = sub.add_parser("gaze2map", help="render gaze logs into .smap saliency maps")
    common(p)
    p.add_argument("--log", required=True, help="gaze log file (image_id,x,y,t_ms)")
    p.add_argument("--size", type=int, default=224, help="square map size in px")
    p.add_argument("--width", type=int, help="map width (overrides --size)")
    p.add_argument("--height", type=int, help="map height (overrides --size)")
    p.add_argument("--kernel-size", type=int, help="odd Gaussian kernel size in px")
    p.add_argument("--sigma", type=float, help="Gaussian sigma in px")
    p.add_argument("--out", required=True, help="output directory for .smap files")
    p.set_defaults(func=cmd_gaze2map)

    p = sub.add_parser("saliency", help="compute saliency maps for images")
    common(p)
    p.add_argument("--images", required=True, help="PGM image or directory of images")
    p.add_argument("--kind", choices=("uniform", "spectral_residual", "gaze_file"))
    p.add_argument("--root", help="directory of stored .smap files (gaze_file kind)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_saliency)

    p = sub.add_parser("augment", help="generate augmented view pairs")
    common(p, mode_flag=True)
    p.add_argument("--image", required=True, help="source PGM image")
    p.add_argument("--map", help=".smap saliency map for the image")
    p.add_argument("--kind", choices=("uniform", "spectral_residual", "gaze_file"),
                   help="saliency source when --map is not given")
    p.add_argument("--root", help="saliency root for gaze_file kind")
    p.add_argument("--pairs", type=int, default=1)
    p.add_argument("--cutout-px", type=int)
    p.add_argument("--crop-zoom", type=float)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("synth", help="generate a synthetic graded-lesion dataset")
    common(p)
    p.add_argument("--per-class", type=int, required=True)
    p.add_argument("--size", type=int, help="image side in px")
    p.add_argument("--classes", type=int, help="number of severity grades")
    p.add_argument("--lesion-fraction", type=float, help="lesion area fraction")
    p.add_argument("--contrast", type=float, help="peak lesion contrast")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    def train_flags(p):
        p.add_argument("--objective", choices=("infonce", "byol"))
        p.add_argument("--epochs", type=int)
        p.add_argument("--batch-size", type=int)
        p.add_argument("--lr", type=float)
        p.add_argument("--input-px", type=int)

    p = sub.add_parser("pretrain", help="contrastive pre-training on a dataset dump")
    common(p, mode_flag=True)
    p.add_argument("--data", required=True, help="dataset directory (from synth)")
    train_flags(p)
    p.add_argument("--cutout-px", type=int)
    p.add_argument("--crop-zoom", type=float)
    p.add_argument("--out", required=True, help="checkpoint path (.fcck)")
    p.add_argument("--log", help="CSV training log path")
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("probe", help="linear-probe a frozen checkpoint")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True, help="labeled training dataset directory")
    p.add_argument("--test-data", required=True, help="held-out test dataset directory")
    p.add_argument("--label-fraction", type=float, default=1.0)
    p.add_argument("--out", help="JSON result path")
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("sweep", help="strength sweep: pretrain + probe per value")
    common(p)
    p.add_argument("--mode", choices=("default", "searched", "focus"), default="default",
                   help="augmentation mode for every cell")
    p.add_argument("--axis", choices=("crop_zoom", "cutout_px"), required=True)
    p.add_argument("--values", required=True, help="comma-separated strength values")
    p.add_argument("--label-fractions", default="1.0")
    p.add_argument("--data", required=True)
    p.add_argument("--test-data", required=True)
    train_flags(p)
    p.add_argument("--overlap-pairs", type=int, default=10_000)
    p.add_argument("--out", required=True, help="sweep.csv path")
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RejectionFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (GazeAugError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
