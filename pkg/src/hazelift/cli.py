"""Command line interface.

Subcommands: synth, train, dehaze, oracle-dehaze, eval. Exit codes:
0 success, 1 numerical failure, 2 usage or input error. Flags override
values from an optional JSON config file, which overrides built-in
defaults.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import io
from .imaging import recover_scene
from .loss import LossConfig
from .metrics import ciede2000, psnr, ssim
from .multilevel import estimate_maps, level_count
from .network import NetworkSpec, build_network
from .nn.backend import set_num_threads
from .regularizer import SolverDivergence, regularize_maps
from .synth import (
    SynthesisConfig,
    generate_samples,
    load_shards,
    read_manifest,
    write_shards,
)
from .train import train_network, write_loss_log

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_USAGE = 2

DEFAULTS = {
    "omega": 64,
    "gamma": 15.0,
    "lambda": 1.0,
    "epsilon": 1e-3,
    "cg_tol": 1e-6,
    "cg_max_iter": 5000,
    "variance_threshold": 0.08,
    "stride_divisor": 2,
    "loss": "l1,l2,l3",
    "lr": 0.01,
    "epochs": 150,
    "batch": 32,
    "seed": 0,
    "beta_min": 0.5,
    "beta_max": 1.0,
    "a_min": 0.45,
    "a_max": 1.0,
}


def _setting(args, config: dict, key: str, cast=None):
    """CLI flag > config file > built-in default."""
    attr = key.replace("-", "_")
    flag = getattr(args, attr, None)
    if flag is None:
        flag = getattr(args, attr + "_", None)  # e.g. --lambda -> args.lambda_
    if flag is not None:
        return flag
    if key in config:
        value = config[key]
        return cast(value) if cast else value
    return DEFAULTS[key]


def _load_config(path) -> dict:
    if path is None:
        return {}
    with open(path, encoding="utf-8") as f:
        cfg = json.load(f)
    if not isinstance(cfg, dict):
        raise ValueError("config file must hold a JSON object")
    unknown = set(cfg) - set(DEFAULTS)
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return cfg


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON config file (flags take precedence)")
    p.add_argument("--seed", type=int, help="deterministic run seed")
    p.add_argument("--threads", type=int, help="kernel thread cap (default: all cores)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hazelift", description="single-image dehazing toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="render hazy training patches from RGB-D pairs")
    p.add_argument("--manifest", required=True, help="CSV with header rgb,depth")
    p.add_argument("--out", required=True, help="output shard directory")
    p.add_argument("--omega", type=int)
    p.add_argument("--variance-threshold", type=float)
    p.add_argument("--patches-per-image", type=int)
    p.add_argument("--beta-min", type=float)
    p.add_argument("--beta-max", type=float)
    p.add_argument("--a-min", type=float)
    p.add_argument("--a-max", type=float)
    _add_common(p)

    p = sub.add_parser("train", help="train the patch network on a shard directory")
    p.add_argument("--data", required=True, help="shard directory from 'synth'")
    p.add_argument("--out", required=True, help="output weight file (.dhzw)")
    p.add_argument("--spec", help="network spec JSON (default: built-in topology)")
    p.add_argument("--loss", help="comma list of l1,l2,l3 or 'mse'")
    p.add_argument("--gamma", type=float)
    p.add_argument("--lr", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--log", help="per-epoch loss CSV (default: <out>.loss.csv)")
    p.add_argument("--quiet", action="store_true")
    _add_common(p)

    p = sub.add_parser("dehaze", help="dehaze an image with trained weights")
    p.add_argument("--input", required=True)
    p.add_argument("--weights", help="weight file from 'train'")
    p.add_argument("--spec", help="network spec JSON (default: <weights>.spec.json)")
    p.add_argument("--out", required=True, help="output image path")
    p.add_argument("--emit-maps", action="store_true",
                   help="also write transmittance/illumination/coverage maps")
    p.add_argument("--oracle-t", help="bypass estimation with this transmittance map")
    p.add_argument("--oracle-a", help="bypass estimation with this illumination image")
    p.add_argument("--omega", type=int)
    p.add_argument("--variance-threshold", type=float)
    p.add_argument("--stride-divisor", type=int)
    p.add_argument("--level-weights", help="comma list of per-level weights")
    p.add_argument("--lambda", dest="lambda_", type=float, metavar="LAMBDA")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--cg-tol", type=float)
    p.add_argument("--cg-max-iter", type=int)
    _add_common(p)

    p = sub.add_parser(
        "oracle-dehaze", help="recover a scene from known transmittance/illumination"
    )
    p.add_argument("--hazy", required=True)
    p.add_argument("--t", required=True, help="transmittance map (PFM or 16-bit PNG)")
    p.add_argument("--a", required=True, help="illumination image")
    p.add_argument("--out", required=True)
    _add_common(p)

    p = sub.add_parser("eval", help="score dehazed outputs against ground truth")
    p.add_argument("--manifest", required=True, help="CSV with header id,clean")
    p.add_argument("--outputs", required=True, help="directory of <id>.png results")
    p.add_argument("--out", required=True, help="scores CSV path")
    _add_common(p)

    return parser


# -- commands ----------------------------------------------------------------

def cmd_synth(args) -> int:
    config = _load_config(args.config)
    pairs = read_manifest(args.manifest)
    if not pairs:
        raise ValueError(f"manifest lists no rgb/depth pairs: {args.manifest}")
    synth_config = SynthesisConfig(
        beta_range=(_setting(args, config, "beta_min"), _setting(args, config, "beta_max")),
        airlight_range=(_setting(args, config, "a_min"), _setting(args, config, "a_max")),
        omega=_setting(args, config, "omega"),
        variance_threshold=_setting(args, config, "variance_threshold"),
        patches_per_image=args.patches_per_image,
        seed=_setting(args, config, "seed"),
    )
    samples, provenance, report = generate_samples(pairs, synth_config)
    for line in report.errors:
        print(f"warning: skipped {line}", file=sys.stderr)
    write_shards(samples, provenance, args.out)
    print(f"kept {report.kept} patches, rejected {report.rejected}")
    if report.kept == 0:
        print("warning: no patches passed the variance gate", file=sys.stderr)
    return EXIT_OK


def cmd_train(args) -> int:
    config = _load_config(args.config)
    if not os.path.isdir(args.data):
        raise ValueError(f"dataset directory not found: {args.data}")
    samples = load_shards(args.data)
    if not samples:
        raise ValueError(f"dataset is empty: {args.data}")
    spec = NetworkSpec.load(args.spec) if args.spec else NetworkSpec()
    loss_cfg = LossConfig.from_tokens(
        _setting(args, config, "loss"), gamma=_setting(args, config, "gamma")
    )
    log_path = args.log or f"{args.out}.loss.csv"
    network, curve = train_network(
        samples,
        spec=spec,
        loss_cfg=loss_cfg,
        lr=_setting(args, config, "lr"),
        epochs=_setting(args, config, "epochs"),
        batch_size=_setting(args, config, "batch"),
        seed=_setting(args, config, "seed"),
        verbose=not args.quiet,
    )
    network.save_weights(args.out)
    spec.save(f"{args.out}.spec.json")
    write_loss_log(log_path, curve)
    print(f"saved weights to {args.out}; final epoch loss {curve[-1]:.6f}")
    return EXIT_OK


def _estimate_with_network(args, config, image):
    if not args.weights:
        raise ValueError("either --weights or both --oracle-t/--oracle-a are required")
    spec_path = args.spec or f"{args.weights}.spec.json"
    if not os.path.isfile(spec_path):
        raise ValueError(f"network spec not found: {spec_path}")
    spec = NetworkSpec.load(spec_path)
    omega = _setting(args, config, "omega")
    if omega != spec.omega:
        raise ValueError(
            f"--omega {omega} does not match the trained network ({spec.omega})"
        )
    network = build_network(spec, seed=0)
    network.load_weights(args.weights)
    level_count(image.shape[0], image.shape[1], omega)
    weights_arg = None
    if args.level_weights:
        weights_arg = [float(tok) for tok in args.level_weights.split(",")]
    return estimate_maps(
        image,
        network.infer,
        omega=omega,
        variance_threshold=_setting(args, config, "variance_threshold"),
        stride_divisor=_setting(args, config, "stride_divisor"),
        t_weights=weights_arg,
        a_weights=weights_arg,
    )


def cmd_dehaze(args) -> int:
    config = _load_config(args.config)
    image = io.load_image(args.input)
    oracle = bool(args.oracle_t or args.oracle_a)
    if oracle:
        if not (args.oracle_t and args.oracle_a):
            raise ValueError("--oracle-t and --oracle-a must be given together")
        t_map = io.load_map(args.oracle_t)
        a_map = io.load_image(args.oracle_a)
        if t_map.shape != image.shape[:2] or a_map.shape != image.shape:
            raise ValueError("oracle map dimensions do not match the input image")
        mask = np.ones(image.shape[:2], dtype=bool)
    else:
        omega = _setting(args, config, "omega")
        if min(image.shape[:2]) < omega:
            raise ValueError(
                f"input {image.shape[1]}x{image.shape[0]} is smaller than "
                f"the patch size {omega}"
            )
        t_hat, a_hat, mask = _estimate_with_network(args, config, image)
        t_map, a_map = regularize_maps(
            t_hat,
            a_hat,
            mask,
            image,
            smoothness=_setting(args, config, "lambda"),
            edge_eps=_setting(args, config, "epsilon"),
            tol=_setting(args, config, "cg_tol"),
            max_iter=_setting(args, config, "cg_max_iter"),
        )
    result = recover_scene(image, t_map, a_map)
    io.save_image(args.out, result)
    stem, _ = os.path.splitext(args.out)
    side_by_side = np.concatenate([image, result], axis=1)
    io.save_image(f"{stem}_compare.png", side_by_side)
    if args.emit_maps:
        io.save_map(f"{stem}_t.png", t_map)
        io.save_image(f"{stem}_a.png", a_map)
        io.save_map(f"{stem}_mask.png", mask.astype(np.float32), bit_depth=8)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_oracle_dehaze(args) -> int:
    hazy = io.load_image(args.hazy)
    t_map = io.load_map(args.t)
    a_map = io.load_image(args.a)
    if t_map.shape != hazy.shape[:2] or a_map.shape != hazy.shape:
        raise ValueError("map dimensions do not match the hazy image")
    io.save_image(args.out, recover_scene(hazy, t_map, a_map))
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    rows = []
    with open(args.manifest, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or not {"id", "clean"} <= set(reader.fieldnames):
            raise ValueError(f"manifest must have 'id,clean' header: {args.manifest}")
        base = os.path.dirname(os.path.abspath(args.manifest))
        for row in reader:
            clean_path = row["clean"].strip()
            if not os.path.isabs(clean_path):
                clean_path = os.path.join(base, clean_path)
            rows.append((row["id"].strip(), clean_path))
    if not rows:
        raise ValueError(f"manifest lists no images: {args.manifest}")
    scores = []
    missing = 0
    for image_id, clean_path in rows:
        out_path = os.path.join(args.outputs, f"{image_id}.png")
        if not os.path.isfile(out_path):
            scores.append((image_id, None))
            missing += 1
            continue
        reference = io.load_image(clean_path)
        candidate = io.load_image(out_path)
        scores.append(
            (
                image_id,
                (
                    psnr(candidate, reference),
                    ssim(candidate, reference),
                    ciede2000(candidate, reference),
                ),
            )
        )
    valid = [s for _, s in scores if s is not None]
    with open(args.out, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["id", "psnr", "ssim", "ciede2000"])
        for image_id, s in scores:
            if s is None:
                writer.writerow([image_id, "error", "error", "error"])
            else:
                writer.writerow([image_id, f"{s[0]:.6f}", f"{s[1]:.6f}", f"{s[2]:.6f}"])
        if valid:
            means = [sum(col) / len(valid) for col in zip(*valid)]
            writer.writerow(
                ["average", f"{means[0]:.6f}", f"{means[1]:.6f}", f"{means[2]:.6f}"]
            )
    print(f"wrote {args.out} ({len(valid)} scored, {missing} missing)")
    if missing:
        raise ValueError(f"{missing} output file(s) missing under {args.outputs}")
    return EXIT_OK


_COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "dehaze": cmd_dehaze,
    "oracle-dehaze": cmd_oracle_dehaze,
    "eval": cmd_eval,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "threads", None) is not None:
        try:
            set_num_threads(args.threads)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SolverDivergence as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
